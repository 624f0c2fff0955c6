#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "recam/mcscorer.hpp"
#include "recam/transformer.hpp"
#include "support/fixtures.hpp"
#include "support/mocks.hpp"
#include "support/synthetic.hpp"

using namespace recam;

namespace {

ScoringHead unit_head() {
    ScoringHead head(1);
    auto params = head.parameters();
    params[0]->value(0, 0) = 1.0;
    params[1]->value(0, 0) = 0.0;
    return head;
}

}  // namespace

TEST_CASE("smooth_targets example K=5 gold=3 eps=0.1") {
    const auto t = smooth_targets(5, 3, 0.1);
    const std::vector<double> expected{0.025, 0.025, 0.025, 0.9, 0.025};
    for (int k = 0; k < 5; ++k) CHECK(t.y(k) == doctest::Approx(expected[static_cast<std::size_t>(k)]).epsilon(1e-15));
}

TEST_CASE("smooth_targets closed form over a sweep") {
    for (int K = 2; K <= 10; ++K) {
        for (double eps : {0.0, 0.05, 0.1, 0.3}) {
            for (int gold = 0; gold < K; ++gold) {
                const auto t = smooth_targets(K, gold, eps);
                CHECK(std::abs(t.y.sum() - 1.0) <= 1e-12);
                for (int k = 0; k < K; ++k) CHECK(t.y(k) == (k == gold ? 1.0 - eps : eps / (K - 1)));
            }
        }
    }
    CHECK_THROWS_AS(smooth_targets(1, 0, 0.1), Error);
    CHECK_THROWS_AS(smooth_targets(5, 5, 0.1), Error);
    CHECK_THROWS_AS(smooth_targets(5, 0, 1.0), Error);
}

TEST_CASE("smoothed cross entropy oracles") {
    const Vector uniform = Vector::Constant(5, 0.2);
    CHECK(std::abs(smoothed_cross_entropy(uniform, smooth_targets(5, 2, 0.0).y) - std::log(5.0)) <= 1e-9);

    const auto t = smooth_targets(5, 3, 0.1);
    const double by_hand = -(0.9 * std::log(0.9) + 4 * 0.025 * std::log(0.025));
    CHECK(std::abs(smoothed_cross_entropy(t.y, t.y) - by_hand) <= 1e-9);

    // Zero probabilities are floored rather than producing infinity.
    Vector hard = Vector::Zero(5);
    hard(0) = 1.0;
    CHECK(std::isfinite(smoothed_cross_entropy(hard, t.y)));
}

TEST_CASE("softmax over candidates is shift invariant and normalized") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal(0.0, 5.0);
    for (int trial = 0; trial < 50; ++trial) {
        Vector logits(6);
        for (int i = 0; i < 6; ++i) logits(i) = normal(rng);
        const auto a = scores_from_logits("x", logits);
        const auto b = scores_from_logits("x", (logits.array() + 123.0).matrix());
        CHECK(std::abs(a.probs.sum() - 1.0) <= 1e-12);
        CHECK((a.probs - b.probs).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("score_instance averages chunk logits per candidate") {
    const auto inst = recam::testing::davies_instance();
    const auto tok = WhitespaceTokenizer::from_texts({inst.passage, inst.question, "suffered promoted remains wants achieved"});
    const recam::testing::LogitMockEncoder encoder(tok.vocab_size(), [](const EncodedInput& in) {
        return 0.5 * in.candidate_index + 0.1 * in.chunk_index;
    });
    const auto head = unit_head();
    const auto scores = score_instance(inst, encoder, head, tok, 48);
    const auto inputs = build_inputs(inst, tok, 48);
    const int chunks = static_cast<int>(inputs.size()) / 5;
    const double chunk_mean = 0.1 * (chunks - 1) / 2.0;
    for (int k = 0; k < 5; ++k) CHECK(scores.logits(k) == doctest::Approx(0.5 * k + chunk_mean));
    CHECK(scores.argmax() == 4);
}

TEST_CASE("to_prediction masks the augmented slot") {
    Vector logits(3);
    logits << 0.0, 0.0, 5.0;
    const auto scores = scores_from_logits("x", logits);
    const auto rec = to_prediction(scores, 2);
    REQUIRE(rec.probs.size() == 2);
    CHECK(rec.probs[0] == doctest::Approx(0.5));
    CHECK(rec.choice == 0);
    const auto full = to_prediction(scores, 3);
    CHECK(full.choice == 2);
}

TEST_CASE("argmax ties go to the lowest index") {
    CHECK(argmax_lowest(std::vector<Real>{0.3, 0.3, 0.3}) == 0);
    CHECK(argmax_lowest(std::vector<Real>{0.1, 0.45, 0.45}) == 1);
}

TEST_CASE("train config presets and validation") {
    const auto r = TrainConfig::roberta_preset();
    CHECK(r.learning_rate == doctest::Approx(9e-6));
    CHECK(r.epochs == 12);
    CHECK(r.max_len == 256);
    const auto a = TrainConfig::albert_preset();
    CHECK(a.learning_rate == doctest::Approx(1e-5));
    CHECK(a.epochs == 8);
    CHECK(a.max_len == 128);
    const auto d = TrainConfig::deberta_preset();
    CHECK(d.learning_rate == doctest::Approx(1e-5));
    CHECK(d.epochs == 12);
    CHECK(r.accumulation_steps * r.micro_batch == 32);
    TrainConfig bad;
    bad.epsilon = 1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = {};
    bad.accumulation_steps = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("FineTuner rejects unlabeled instances and zero epochs is a no-op") {
    const auto tok = recam::testing::synthetic_tokenizer();
    recam::testing::LinearBagEncoder encoder(static_cast<int>(tok.vocab_size()), 4, 1);
    ScoringHead head(4);
    TrainConfig config;
    config.max_len = 32;
    FineTuner tuner(encoder, head, tok, config);
    auto split = recam::testing::synthetic_split({.instances = 2});
    auto unlabeled = split.instances[0];
    unlabeled.gold_index.reset();
    CHECK_THROWS_AS(tuner.accumulate(unlabeled), Error);

    config.epochs = 0;
    const auto before = encoder.parameters()[0]->value;
    const auto history = train(split, split, encoder, head, tok, config);
    CHECK(history.epochs.empty());
    CHECK(history.updates == 0);
    CHECK(encoder.parameters()[0]->value == before);
}

TEST_CASE("training lowers the loss on a separable synthetic set") {
    const auto tok = recam::testing::synthetic_tokenizer();
    const auto split = recam::testing::synthetic_split({.instances = 8, .passage_words = 4});
    ReferenceEncoderConfig ec;
    ec.vocab_size = static_cast<int>(tok.vocab_size());
    ec.layers = 1;
    ec.heads = 2;
    ec.dim = 16;
    ec.ff_dim = 32;
    ec.max_positions = 32;
    ec.init_std = 0.1;
    ec.mask_token_id = tok.specials().mask;
    ReferenceEncoder encoder(ec);
    ScoringHead head(16, 1, 0.1);
    TrainConfig config = TrainConfig::reference_preset();
    config.epochs = 10;
    config.accumulation_steps = 1;
    config.max_len = 32;
    config.checkpoint = CheckpointPolicy::LastEpoch;
    const auto history = train(split, split, encoder, head, tok, config);
    REQUIRE(history.epochs.size() == 10);
    CHECK(history.epochs.back().train_loss < history.epochs.front().train_loss);
    CHECK(history.updates == 80);
}

TEST_CASE("best-on-dev restores the best snapshot") {
    const auto tok = recam::testing::synthetic_tokenizer();
    const auto split = recam::testing::synthetic_split({.instances = 6, .passage_words = 4});
    recam::testing::LinearBagEncoder encoder(static_cast<int>(tok.vocab_size()), 4, 2);
    ScoringHead head(4, 2, 0.5);
    TrainConfig config;
    config.epochs = 4;
    config.accumulation_steps = 2;
    config.max_len = 32;
    const auto history = train(split, split, encoder, head, tok, config);
    REQUIRE(history.best_dev_accuracy.has_value());
    const auto preds = predict(split, encoder, head, tok, config);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < split.size(); ++i) {
        if (preds.records[i].choice == *split.instances[i].gold_index) ++correct;
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(split.size()) ==
          doctest::Approx(*history.best_dev_accuracy));
    // Partial windows are flushed: 3 updates per epoch for 6 instances and window 2.
    CHECK(history.updates == 12);
}

TEST_CASE("predictions serialize and validate") {
    recam::testing::TempDir dir;
    Predictions p{"m", {{"a", {0.25, 0.75}, 1}, {"b", {0.5, 0.5}, 0}}};
    write_predictions(p, dir / "m.jsonl");
    const auto back = read_predictions(dir / "m.jsonl");
    CHECK(back == p);
    Predictions dup{"m", {{"a", {1.0}, 0}, {"a", {1.0}, 0}}};
    CHECK_THROWS_AS(validate_predictions(dup), Error);
    Predictions unnormalized{"m", {{"a", {0.5, 0.6}, 0}}};
    CHECK_THROWS_AS(validate_predictions(unnormalized), Error);
}

#include <doctest.h>

#include <cmath>
#include <random>

#include "recam/checkpoint.hpp"
#include "recam/nn_ops.hpp"
#include "recam/optimizer.hpp"
#include "recam/transformer.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "support/synthetic.hpp"

using namespace recam;

namespace {

ReferenceEncoderConfig small_config(int vocab, double init_std = 0.02) {
    ReferenceEncoderConfig c;
    c.vocab_size = vocab;
    c.layers = 2;
    c.heads = 2;
    c.dim = 8;
    c.ff_dim = 16;
    c.max_positions = 32;
    c.init_std = init_std;
    return c;
}

}  // namespace

TEST_CASE("softmax is normalized and stable for large logits") {
    Vector x(3);
    x << 1000.0, 1000.0, 999.0;
    const Vector p = nn::softmax(x);
    CHECK(p.sum() == doctest::Approx(1.0));
    CHECK(p(0) == doctest::Approx(p(1)));
    CHECK(std::isfinite(p(2)));
}

TEST_CASE("gelu derivative matches central differences") {
    for (double x = -4.0; x <= 4.0; x += 0.37) {
        const double h = 1e-6;
        const double numeric = (nn::gelu_scalar(x + h) - nn::gelu_scalar(x - h)) / (2 * h);
        CHECK(nn::gelu_grad_scalar(x) == doctest::Approx(numeric).epsilon(1e-6));
    }
    CHECK(nn::gelu_scalar(0.0) == 0.0);
}

TEST_CASE("layer norm backward matches central differences") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    Matrix x(3, 5), gamma(1, 5), beta(1, 5), w(3, 5);
    for (auto* m : {&x, &gamma, &beta, &w}) {
        for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = normal(rng);
    }
    auto loss = [&](const Matrix& in) {
        nn::LayerNormCache<double> c;
        return (nn::layer_norm(in, gamma, beta, 1e-5, c).array() * w.array()).sum();
    };
    nn::LayerNormCache<double> cache;
    nn::layer_norm(x, gamma, beta, 1e-5, cache);
    Matrix dg = Matrix::Zero(1, 5), db = Matrix::Zero(1, 5);
    const Matrix dx = nn::layer_norm_backward<double>(w, cache, gamma, dg, db);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Matrix xp = x, xm = x;
        xp.data()[i] += 1e-6;
        xm.data()[i] -= 1e-6;
        CHECK(dx.data()[i] == doctest::Approx((loss(xp) - loss(xm)) / 2e-6).epsilon(1e-5));
    }
    CHECK(db.row(0).isApprox(w.colwise().sum()));
}

TEST_CASE("encoder config validation") {
    auto c = small_config(10);
    CHECK_NOTHROW(c.validate());
    c.heads = 3;
    CHECK_THROWS_AS(c.validate(), Error);
    c = small_config(0);
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("reference encoder is deterministic and checks its inputs") {
    ReferenceEncoder enc(small_config(12));
    CHECK(enc.parameter_count() > 0);
    const std::vector<TokenId> ids{1, 5, 6, 2, 7, 2};
    const auto a = enc.forward(ids);
    const auto b = enc.forward(ids);
    CHECK(a.hidden == b.hidden);
    CHECK(a.hidden.rows() == 6);
    CHECK(a.hidden.cols() == 8);
    EncodedInput in;
    in.token_ids = ids;
    CHECK(enc.encode(in) == a.hidden.row(0).transpose());

    in.token_ids = {1, 99, 2};
    CHECK_THROWS_AS(enc.encode(in), Error);
    in.token_ids.assign(40, 5);
    CHECK_THROWS_AS(enc.encode(in), Error);

    in.token_ids = {1, 3, 2};
    CHECK_THROWS_AS(enc.mlm_distribution(in), Error);  // no mask_position
    in.mask_position = 1;
    const auto p = enc.mlm_distribution(in);
    CHECK(p.size() == 12);
    CHECK(p.sum() == doctest::Approx(1.0));
}

TEST_CASE("same seed gives the same weights; different seeds differ") {
    ReferenceEncoder a(small_config(12)), b(small_config(12));
    auto c3 = small_config(12);
    c3.seed = 99;
    ReferenceEncoder c(c3);
    CHECK(a.parameters()[0]->value == b.parameters()[0]->value);
    CHECK(a.parameters()[0]->value != c.parameters()[0]->value);
}

TEST_CASE("the encoder template works for float") {
    TransformerEncoder<float> f(small_config(12, 0.3));
    TransformerEncoder<double> d(small_config(12, 0.3));
    const std::vector<TokenId> ids{1, 5, 6, 2};
    TransformerEncoder<float>::Cache cf;
    TransformerEncoder<double>::Cache cd;
    const MatrixX<float> hf = f.forward(ids, cf);
    const MatrixX<double> hd = d.forward(ids, cd);
    CHECK((hf.cast<double>() - hd).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("analytic gradients match central differences") {
    const auto tok = recam::testing::synthetic_tokenizer();
    const auto inst = recam::testing::synthetic_split({.instances = 1, .candidates = 3, .passage_words = 6}).instances[0];
    auto cfg = small_config(static_cast<int>(tok.vocab_size()), 0.5);
    cfg.mask_token_id = tok.specials().mask;
    ReferenceEncoder enc(cfg);
    ScoringHead head(cfg.dim, 3, 0.5);
    TrainConfig tc;
    tc.max_len = 16;
    tc.stride = 3;
    MlmExample ex;
    ex.token_ids = tok.tokenize("[CLS] f1 a2 [MASK] r3 [MASK] [SEP]");
    ex.mask_positions = {3, 5};
    ex.original_ids = {tok.token_to_id("d4"), tok.token_to_id("f7")};
    const auto samples = recam::testing::check_gradients(enc, head, tok, inst, ex, tc, 40, 11);
    REQUIRE(samples.size() == 40);
    for (const auto& s : samples) {
        INFO(s.parameter, "[", s.index, "] analytic=", s.analytic, " numeric=", s.numeric);
        CHECK(s.relative_error < 1e-4);
    }
}

TEST_CASE("AdamW first step matches the closed form") {
    Parameter<double> p("w", Matrix::Constant(1, 2, 1.0));
    p.grad << 0.5, -2.0;
    AdamWConfig c;
    c.learning_rate = 0.1;
    c.weight_decay = 0.01;
    AdamW<double> opt({&p}, c);
    opt.step(0.5);
    // Step 1: m_hat = g, v_hat = g^2, so the Adam term is sign(g) * |g| / (|g| + eps).
    for (int i = 0; i < 2; ++i) {
        const double g = 0.5 * (i == 0 ? 0.5 : -2.0);
        const double expected = 1.0 - 0.1 * (g / (std::abs(g) + 1e-8) + 0.01 * 1.0);
        CHECK(p.value(0, i) == doctest::Approx(expected).epsilon(1e-12));
    }
    CHECK(opt.steps() == 1);
}

TEST_CASE("checkpoint round trip preserves weights, head and tokenizer") {
    recam::testing::TempDir dir;
    const auto tok = recam::testing::synthetic_tokenizer();
    auto cfg = small_config(static_cast<int>(tok.vocab_size()));
    cfg.mask_token_id = tok.specials().mask;
    ReferenceEncoder enc(cfg);
    ScoringHead head(cfg.dim, 4, 0.3);
    save_checkpoint(dir / "m.ckpt", enc, &head, tok, R"({"note":"x"})");
    const auto ck = load_checkpoint(dir / "m.ckpt");
    REQUIRE(ck.head);
    CHECK(ck.encoder->config() == enc.config());
    const auto& a = enc.parameters();
    const auto& b = ck.encoder->parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value == b[i]->value);
    CHECK(ck.head->weight().value == head.weight().value);
    CHECK(ck.tokenizer->fingerprint() == tok.fingerprint());
    CHECK(ck.metadata_json.find("note") != std::string::npos);

    save_checkpoint(dir / "nohead.ckpt", enc, nullptr, tok);
    CHECK_FALSE(load_checkpoint(dir / "nohead.ckpt").head);

    dir.write("junk.ckpt", "not a checkpoint");
    CHECK_THROWS_AS(load_checkpoint(dir / "junk.ckpt"), Error);
    const auto bytes = recam::testing::read_file(dir / "m.ckpt");
    dir.write("short.ckpt", bytes.substr(0, bytes.size() - 16));
    CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), Error);
}

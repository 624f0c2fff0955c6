#include "recam/mcscorer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "recam/nn_ops.hpp"

namespace recam {

int argmax_lowest(const std::vector<Real>& values) {
    if (values.empty()) throw Error(ErrorKind::InvalidArgument, "argmax of an empty vector");
    int best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    return best;
}

int argmax_lowest(const Vector& values) {
    return argmax_lowest(std::vector<Real>(values.data(), values.data() + values.size()));
}

void validate_predictions(const Predictions& predictions) {
    std::unordered_set<std::string> ids;
    for (const auto& rec : predictions.records) {
        if (!ids.insert(rec.id).second) {
            throw Error(ErrorKind::Data, "predictions '" + predictions.model_id + "': duplicate id '" + rec.id + "'");
        }
        if (rec.probs.empty()) {
            throw Error(ErrorKind::Data, "predictions '" + predictions.model_id + "': empty vector for '" + rec.id + "'");
        }
        const auto sum = std::accumulate(rec.probs.begin(), rec.probs.end(), 0.0);
        if (std::abs(sum - 1.0) > 1e-6) {
            throw Error(ErrorKind::Data, "predictions '" + predictions.model_id + "': probabilities for '" + rec.id +
                                             "' sum to " + std::to_string(sum));
        }
        if (rec.choice < 0 || rec.choice >= static_cast<int>(rec.probs.size())) {
            throw Error(ErrorKind::Data, "predictions '" + predictions.model_id + "': choice out of range for '" +
                                             rec.id + "'");
        }
    }
}

std::string serialize_predictions(const Predictions& predictions) {
    std::string out;
    for (const auto& rec : predictions.records) {
        nlohmann::ordered_json j;
        j["id"] = rec.id;
        j["probs"] = rec.probs;
        j["choice"] = rec.choice;
        out += j.dump();
        out.push_back('\n');
    }
    return out;
}

void write_predictions(const Predictions& predictions, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << serialize_predictions(predictions);
}

Predictions read_predictions(const std::filesystem::path& path, std::string model_id) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read predictions file " + path.string());
    Predictions preds;
    preds.model_id = model_id.empty() ? path.stem().string() : std::move(model_id);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            PredictionRecord rec;
            rec.id = j.at("id").get<std::string>();
            rec.probs = j.at("probs").get<std::vector<Real>>();
            rec.choice = j.contains("choice") ? j.at("choice").get<int>() : argmax_lowest(rec.probs);
            preds.records.push_back(std::move(rec));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    validate_predictions(preds);
    return preds;
}

SmoothedTarget smooth_targets(int classes, int gold_index, Real epsilon) {
    if (classes < 2) {
        throw Error(ErrorKind::InvalidArgument, "smooth_targets: need K >= 2, got " + std::to_string(classes));
    }
    if (gold_index < 0 || gold_index >= classes) {
        throw Error(ErrorKind::InvalidArgument, "smooth_targets: gold index " + std::to_string(gold_index) +
                                                    " outside [0, " + std::to_string(classes) + ")");
    }
    if (!(epsilon >= 0.0 && epsilon < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "smooth_targets: epsilon must lie in [0, 1)");
    }
    SmoothedTarget target{classes, gold_index, epsilon, Vector::Constant(classes, epsilon / (classes - 1))};
    target.y(gold_index) = 1.0 - epsilon;
    return target;
}

Real smoothed_cross_entropy(const Vector& probs, const Vector& target) {
    if (probs.size() != target.size()) {
        throw Error(ErrorKind::InvalidArgument, "smoothed_cross_entropy: " + std::to_string(probs.size()) +
                                                    " probabilities vs " + std::to_string(target.size()) + " targets");
    }
    constexpr Real kFloor = 1e-12;
    Real loss = 0.0;
    for (Eigen::Index k = 0; k < probs.size(); ++k) {
        if (target(k) != 0.0) loss -= target(k) * std::log(std::max(probs(k), kFloor));
    }
    return loss;
}

Real smoothed_cross_entropy(const ScoreVector& scores, const SmoothedTarget& target) {
    return smoothed_cross_entropy(scores.probs, target.y);
}

ScoreVector scores_from_logits(std::string instance_id, const Vector& logits) {
    return {std::move(instance_id), logits, nn::softmax(logits)};
}

ScoreVector score_instance(const Instance& instance, const EncoderModel& encoder, const ScoringHead& head,
                           const Tokenizer& tokenizer, int max_len, int stride) {
    const auto inputs = build_inputs(instance, tokenizer, max_len, stride);
    const auto n = static_cast<Eigen::Index>(instance.candidates.size());
    Vector sums = Vector::Zero(n);
    Vector counts = Vector::Zero(n);
    for (const auto& input : inputs) {
        sums(input.candidate_index) += head.logit(encoder.encode(input));
        counts(input.candidate_index) += 1.0;
    }
    return scores_from_logits(instance.id, (sums.array() / counts.array()).matrix());
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw Error(ErrorKind::InvalidArgument, "train config: learning rate must be positive");
    if (epochs < 0) throw Error(ErrorKind::InvalidArgument, "train config: epochs must be >= 0");
    if (micro_batch < 1) throw Error(ErrorKind::InvalidArgument, "train config: micro-batch must be >= 1");
    if (accumulation_steps < 1) {
        throw Error(ErrorKind::InvalidArgument, "train config: accumulation steps must be >= 1");
    }
    if (max_len < 4) throw Error(ErrorKind::InvalidArgument, "train config: max_len must be >= 4");
    if (stride < 0) throw Error(ErrorKind::InvalidArgument, "train config: stride must be >= 0");
    if (!(epsilon >= 0.0 && epsilon < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "train config: epsilon must lie in [0, 1)");
    }
    if (weight_decay < 0.0 || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "train config: invalid optimizer hyperparameters");
    }
}

AdamWConfig TrainConfig::optimizer() const {
    return {learning_rate, beta1, beta2, adam_eps, weight_decay};
}

TrainConfig TrainConfig::roberta_preset() {
    TrainConfig c;
    c.learning_rate = 9e-6;
    c.epochs = 12;
    c.max_len = 256;
    return c;
}

TrainConfig TrainConfig::albert_preset() {
    TrainConfig c;
    c.learning_rate = 1e-5;
    c.epochs = 8;
    c.max_len = 128;
    return c;
}

TrainConfig TrainConfig::deberta_preset() {
    TrainConfig c;
    c.learning_rate = 1e-5;
    c.epochs = 12;
    c.max_len = 256;
    return c;
}

TrainConfig TrainConfig::reference_preset() {
    TrainConfig c;
    c.learning_rate = 1e-3;
    return c;
}

namespace {

std::vector<Parameter<Real>*> collect(TrainableEncoder& encoder, ScoringHead& head) {
    auto params = encoder.parameters();
    for (auto* p : head.parameters()) params.push_back(p);
    return params;
}

int require_gold(const Instance& instance) {
    if (!instance.gold_index) {
        throw Error(ErrorKind::Data, "training instance '" + instance.id + "' has no gold label");
    }
    return *instance.gold_index;
}

}  // namespace

FineTuner::FineTuner(TrainableEncoder& encoder, ScoringHead& head, const Tokenizer& tokenizer,
                     const TrainConfig& config)
    : encoder_(encoder),
      head_(head),
      tokenizer_(tokenizer),
      config_(config),
      params_(collect(encoder, head)),
      optimizer_(params_, config.optimizer()) {
    config_.validate();
    if (head.dim() != encoder.dim()) {
        throw Error(ErrorKind::InvalidArgument, "scoring head dimension does not match the encoder");
    }
}

FineTuner::InstanceResult FineTuner::accumulate(const Instance& instance) {
    const int gold = require_gold(instance);
    const auto inputs = build_inputs(instance, tokenizer_, config_.max_len, config_.stride);
    const auto n = static_cast<Eigen::Index>(instance.candidates.size());

    std::vector<ForwardPass> passes;
    std::vector<Vector> pooled;
    passes.reserve(inputs.size());
    Vector sums = Vector::Zero(n);
    Vector counts = Vector::Zero(n);
    for (const auto& input : inputs) {
        passes.push_back(encoder_.forward(input.token_ids));
        pooled.emplace_back(passes.back().hidden.row(0).transpose());
        sums(input.candidate_index) += head_.logit(pooled.back());
        counts(input.candidate_index) += 1.0;
    }
    const auto scores = scores_from_logits(instance.id, (sums.array() / counts.array()).matrix());
    const auto target = smooth_targets(static_cast<int>(n), gold, config_.epsilon);
    const double loss = smoothed_cross_entropy(scores, target);
    if (!std::isfinite(loss)) {
        throw Error(ErrorKind::Numeric, "non-finite loss on instance '" + instance.id + "' (logits: " +
                                            [&] {
                                                std::ostringstream os;
                                                os << scores.logits.transpose();
                                                return os.str();
                                            }() +
                                            ")");
    }

    const Vector d_logits = scores.probs - target.y;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto c = inputs[i].candidate_index;
        const Real d_chunk = d_logits(c) / counts(c);
        const Vector d_pooled = head_.backward(pooled[i], d_chunk);
        Matrix d_hidden = Matrix::Zero(passes[i].hidden.rows(), passes[i].hidden.cols());
        d_hidden.row(0) = d_pooled.transpose();
        encoder_.backward(passes[i], d_hidden);
    }
    ++pending_;

    const auto prediction = to_prediction(scores, instance.original_candidate_count());
    return {loss, prediction.choice == gold};
}

void FineTuner::step() {
    if (pending_ == 0) return;
    optimizer_.step(1.0 / static_cast<Real>(pending_));
    for (auto* p : params_) p->zero_grad();
    pending_ = 0;
}

double FineTuner::instance_loss(const Instance& instance) const {
    const int gold = require_gold(instance);
    const auto scores = score_instance(instance, encoder_, head_, tokenizer_, config_.max_len, config_.stride);
    return smoothed_cross_entropy(scores, smooth_targets(static_cast<int>(scores.probs.size()), gold, config_.epsilon));
}

PredictionRecord to_prediction(const ScoreVector& scores, int original_candidates) {
    const auto total = static_cast<int>(scores.probs.size());
    if (original_candidates < 1 || original_candidates > total) {
        throw Error(ErrorKind::InvalidArgument, "to_prediction: original candidate count out of range");
    }
    PredictionRecord rec;
    rec.id = scores.instance_id;
    if (original_candidates == total) {
        rec.probs.assign(scores.probs.data(), scores.probs.data() + total);
    } else {
        const Vector kept = nn::softmax(scores.logits.head(original_candidates));
        rec.probs.assign(kept.data(), kept.data() + kept.size());
    }
    rec.choice = argmax_lowest(rec.probs);
    return rec;
}

Predictions predict(const DatasetSplit& split, const EncoderModel& encoder, const ScoringHead& head,
                    const Tokenizer& tokenizer, const TrainConfig& config, std::string model_id) {
    Predictions preds;
    preds.model_id = std::move(model_id);
    preds.records.reserve(split.size());
    for (const auto& inst : split.instances) {
        const auto scores = score_instance(inst, encoder, head, tokenizer, config.max_len, config.stride);
        preds.records.push_back(to_prediction(scores, inst.original_candidate_count()));
    }
    return preds;
}

namespace {

double split_accuracy(const DatasetSplit& split, const Predictions& preds) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < split.size(); ++i) {
        if (preds.records[i].choice == *split.instances[i].gold_index) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(split.size());
}

std::vector<Matrix> snapshot(const std::vector<Parameter<Real>*>& params) {
    std::vector<Matrix> values;
    values.reserve(params.size());
    for (const auto* p : params) values.push_back(p->value);
    return values;
}

void restore(const std::vector<Parameter<Real>*>& params, const std::vector<Matrix>& values) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

}  // namespace

TrainHistory train(const DatasetSplit& train_split, const DatasetSplit& dev_split, TrainableEncoder& encoder,
                   ScoringHead& head, const Tokenizer& tokenizer, const TrainConfig& config) {
    config.validate();
    train_split.require_labels("train");
    dev_split.require_labels("dev");

    TrainHistory history;
    if (config.epochs == 0) return history;

    FineTuner tuner(encoder, head, tokenizer, config);
    const auto params = tuner.parameters();
    for (auto* p : params) p->zero_grad();

    const bool use_dev = config.checkpoint == CheckpointPolicy::BestOnDev && !dev_split.empty();
    std::vector<Matrix> best;
    const auto window = static_cast<std::size_t>(config.micro_batch) * static_cast<std::size_t>(config.accumulation_steps);

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(train_split.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (auto idx : order) {
            const auto result = tuner.accumulate(train_split.instances[idx]);
            loss_sum += result.loss;
            if (result.correct) ++correct;
            if (tuner.pending() == window) tuner.step();
        }
        tuner.step();

        EpochRecord record;
        record.epoch = epoch;
        if (!train_split.empty()) {
            record.train_loss = loss_sum / static_cast<double>(train_split.size());
            record.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_split.size());
        }
        if (!dev_split.empty()) {
            const auto preds = predict(dev_split, encoder, head, tokenizer, config);
            record.dev_accuracy = split_accuracy(dev_split, preds);
        }
        if (use_dev && (!history.best_dev_accuracy || *record.dev_accuracy > *history.best_dev_accuracy)) {
            history.best_dev_accuracy = record.dev_accuracy;
            history.best_epoch = epoch;
            record.improved = true;
            best = snapshot(params);
        }
        history.epochs.push_back(record);
    }
    if (use_dev) {
        restore(params, best);
    } else {
        history.best_epoch = config.epochs;
        history.best_dev_accuracy = history.epochs.back().dev_accuracy;
    }
    history.updates = tuner.updates();
    return history;
}

}  // namespace recam

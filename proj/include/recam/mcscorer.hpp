#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "recam/corpus.hpp"
#include "recam/encoder.hpp"
#include "recam/optimizer.hpp"
#include "recam/predictions.hpp"
#include "recam/textprep.hpp"

namespace recam {

/// Dense layer f(T) = T . w + b mapping a pooled vector to one logit.
template <typename Scalar>
class DenseScoringHead {
public:
    explicit DenseScoringHead(int dim, std::uint64_t seed = 13, double init_std = 0.02)
        : weight_("head.weight", MatrixX<Scalar>::Zero(dim, 1)), bias_("head.bias", MatrixX<Scalar>::Zero(1, 1)) {
        if (dim <= 0) throw Error(ErrorKind::InvalidArgument, "scoring head: dimension must be positive");
        std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
        std::normal_distribution<double> normal(0.0, init_std);
        for (Eigen::Index i = 0; i < weight_.value.size(); ++i) {
            weight_.value.data()[i] = static_cast<Scalar>(normal(rng));
        }
    }

    int dim() const { return static_cast<int>(weight_.value.rows()); }

    template <typename Derived>
    Scalar logit(const Eigen::MatrixBase<Derived>& pooled) const {
        if (pooled.size() != weight_.value.rows()) {
            throw Error(ErrorKind::InvalidArgument, "scoring head: pooled dimension " + std::to_string(pooled.size()) +
                                                        " != head dimension " + std::to_string(dim()));
        }
        return pooled.dot(weight_.value.col(0)) + bias_.value(0, 0);
    }

    /// Accumulates head gradients for dL/dlogit and returns dL/dpooled.
    VectorX<Scalar> backward(const VectorX<Scalar>& pooled, Scalar d_logit) {
        weight_.grad.col(0) += d_logit * pooled;
        bias_.grad(0, 0) += d_logit;
        return d_logit * weight_.value.col(0);
    }

    std::vector<Parameter<Scalar>*> parameters() { return {&weight_, &bias_}; }
    const Parameter<Scalar>& weight() const { return weight_; }
    const Parameter<Scalar>& bias() const { return bias_; }

private:
    Parameter<Scalar> weight_;
    Parameter<Scalar> bias_;
};

using ScoringHead = DenseScoringHead<Real>;

struct ScoreVector {
    std::string instance_id;
    Vector logits;  // per-candidate mean of chunk logits
    Vector probs;   // softmax over candidates

    int argmax() const { return argmax_lowest(probs); }
};

struct SmoothedTarget {
    int classes = 0;
    int gold = 0;
    Real epsilon = 0.0;
    Vector y;
};

/// y[gold] = 1 - eps, y[other] = eps / (K - 1).
SmoothedTarget smooth_targets(int classes, int gold_index, Real epsilon);

/// -sum_k y_k log max(p_k, 1e-12).
Real smoothed_cross_entropy(const Vector& probs, const Vector& target);
Real smoothed_cross_entropy(const ScoreVector& scores, const SmoothedTarget& target);

/// Softmax over per-candidate logits; exposed for the shift-invariance checks.
ScoreVector scores_from_logits(std::string instance_id, const Vector& logits);

/// Mean of chunk logits per candidate, then softmax over candidates.
ScoreVector score_instance(const Instance& instance, const EncoderModel& encoder, const ScoringHead& head,
                           const Tokenizer& tokenizer, int max_len = kDefaultMaxLen, int stride = 0);

enum class CheckpointPolicy { BestOnDev, LastEpoch };

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 12;
    int micro_batch = 1;
    int accumulation_steps = 32;
    int max_len = kDefaultMaxLen;
    int stride = 0;  // 0: half the passage budget
    double epsilon = 0.1;
    std::uint64_t seed = 13;
    CheckpointPolicy checkpoint = CheckpointPolicy::BestOnDev;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
    AdamWConfig optimizer() const;

    // Large-model settings; the reference preset suits the desk-scale encoder.
    static TrainConfig roberta_preset();
    static TrainConfig albert_preset();
    static TrainConfig deberta_preset();
    static TrainConfig reference_preset();
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;  // measured on the fly, before each instance's update
    std::optional<double> dev_accuracy;
    bool improved = false;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;
    std::optional<double> best_dev_accuracy;
    long updates = 0;
};

/// Gradient accumulation over single-instance micro-batches. Each accumulated
/// instance contributes its loss gradient; step() applies the mean.
class FineTuner {
public:
    FineTuner(TrainableEncoder& encoder, ScoringHead& head, const Tokenizer& tokenizer, const TrainConfig& config);

    struct InstanceResult {
        double loss = 0.0;
        bool correct = false;
    };

    /// Forward + backward for one labeled instance; gradients are summed.
    InstanceResult accumulate(const Instance& instance);
    /// Averages the pending gradients, applies AdamW and clears them. No-op when nothing is pending.
    void step();

    /// Loss without touching gradients.
    double instance_loss(const Instance& instance) const;

    std::size_t pending() const { return pending_; }
    long updates() const { return optimizer_.steps(); }
    std::vector<Parameter<Real>*> parameters() const { return params_; }

private:
    TrainableEncoder& encoder_;
    ScoringHead& head_;
    const Tokenizer& tokenizer_;
    TrainConfig config_;
    std::vector<Parameter<Real>*> params_;
    AdamW<Real> optimizer_;
    std::size_t pending_ = 0;
};

/// Fine-tunes with seeded shuffling, accumulation and (by default) best-on-dev
/// parameter retention. Throws on unlabeled data or a non-finite loss.
TrainHistory train(const DatasetSplit& train_split, const DatasetSplit& dev_split, TrainableEncoder& encoder,
                   ScoringHead& head, const Tokenizer& tokenizer, const TrainConfig& config);

/// Probabilities restricted to the original candidates (augmented slot masked
/// out and renormalized); choice is the argmax with ties to the lowest index.
PredictionRecord to_prediction(const ScoreVector& scores, int original_candidates);

Predictions predict(const DatasetSplit& split, const EncoderModel& encoder, const ScoringHead& head,
                    const Tokenizer& tokenizer, const TrainConfig& config, std::string model_id = "model");

}  // namespace recam

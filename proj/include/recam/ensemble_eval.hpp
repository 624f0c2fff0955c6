#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "recam/corpus.hpp"
#include "recam/encoder.hpp"
#include "recam/mcscorer.hpp"
#include "recam/predictions.hpp"
#include "recam/tokenizer.hpp"

namespace recam {

/// Mean of the members' probability vectors per instance; choice is the argmax
/// with ties to the lowest index. Output follows the first member's id order.
Predictions ensemble(const std::vector<Predictions>& members, std::string model_id = "ensemble");

struct AccuracyResult {
    std::size_t correct = 0;
    std::size_t total = 0;
    double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

AccuracyResult score_predictions(const Predictions& predictions, const DatasetSplit& split);
double accuracy(const Predictions& predictions, const DatasetSplit& split);

struct LengthBucket {
    long lower = 0;                                  // inclusive
    long upper = std::numeric_limits<long>::max();   // exclusive; max() for the open bucket
    std::size_t count = 0;
    std::size_t correct = 0;
    std::optional<double> accuracy;                  // empty when count == 0
};

struct LengthBucketReport {
    std::vector<long> edges;
    std::vector<LengthBucket> buckets;
};

inline const std::vector<long> kDefaultBucketEdges{128, 256, 384, 512};

/// Half-open buckets (-inf, e0), [e0, e1), ..., [ek, inf) over passage token counts.
LengthBucketReport length_buckets(const Predictions& predictions, const DatasetSplit& split,
                                  const Tokenizer& tokenizer, const std::vector<long>& edges = kDefaultBucketEdges);

std::string bucket_table(const LengthBucketReport& report);
std::string bucket_csv(const LengthBucketReport& report);
std::string bucket_json(const LengthBucketReport& report);

struct TransferReport {
    std::string source_task;
    std::string target_task;
    double accuracy = 0.0;
    std::size_t instances = 0;
    Predictions predictions;
};

TransferReport transfer_eval(const EncoderModel& encoder, const ScoringHead& head, const Tokenizer& tokenizer,
                             const DatasetSplit& target, const TrainConfig& config, std::string source_task);

struct ErrorCase {
    std::string id;
    std::string passage_excerpt;
    std::string question;
    std::vector<std::string> candidates;
    int gold = 0;
    int chosen = 0;
    double confidence = 0.0;  // probability of the wrong choice
    std::optional<std::string> nal_token;
};

inline constexpr std::size_t kExcerptChars = 300;

/// Wrong predictions, most confident first (ties by id). NAL tokens come from
/// `augmented` when it contains the instance, else from the split itself.
std::vector<ErrorCase> error_report(const Predictions& predictions, const DatasetSplit& split,
                                    const DatasetSplit* augmented = nullptr);

std::string error_report_json(const std::vector<ErrorCase>& cases);
std::string error_report_text(const std::vector<ErrorCase>& cases);

}  // namespace recam

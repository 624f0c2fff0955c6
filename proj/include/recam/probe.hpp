#pragma once

#include <set>
#include <string>
#include <vector>

#include "recam/corpus.hpp"
#include "recam/encoder.hpp"
#include "recam/textprep.hpp"
#include "recam/tokenizer.hpp"

namespace recam {

struct VocabDistribution {
    Vector probs;
    std::string instance_id;
    std::string model_id;

    /// Throws unless entries are non-negative and sum to 1 +- 1e-6.
    void validate() const;
};

struct NegativeCandidate {
    std::string surface;  // detokenized, trimmed
    TokenId token = -1;
    Real probability = 0.0;
    int rank = 0;  // 1-based position in the full vocabulary ordering
};

struct AugmentedInstance {
    Instance instance;  // candidates has the mined word appended; instance.nal is set

    const NalMeta& meta() const { return *instance.nal; }
};

enum class Similarity { EmbeddingCosine, MaskLikelihood };

Similarity parse_similarity(std::string_view text);
std::string to_string(Similarity similarity);

struct RankedCandidate {
    int index = 0;
    Real score = 0.0;
};

/// Masked-LM distribution for the instance's probe input.
VocabDistribution probe_distribution(const Instance& instance, const EncoderModel& model, const Tokenizer& tokenizer,
                                     int max_len = kDefaultMaxLen, std::string model_id = {});

/// Scores every candidate against the masked-LM prediction and returns them
/// best-first (ties to the lower index).
std::vector<RankedCandidate> zero_shot_rank(const Instance& instance, const EncoderModel& model,
                                            const Tokenizer& tokenizer, Similarity similarity,
                                            int max_len = kDefaultMaxLen);

/// The `k` most probable non-special tokens whose normalized surface is not in
/// `exclude` (compared after normalize_word); ties go to the lower id.
std::vector<NegativeCandidate> top_negatives(const VocabDistribution& distribution, const Tokenizer& tokenizer,
                                             int k, const std::set<std::string>& exclude);

/// Appends the most probable non-gold word as an extra wrong candidate.
AugmentedInstance augment_instance(const Instance& instance, const EncoderModel& model, const Tokenizer& tokenizer,
                                   int max_len = kDefaultMaxLen);

DatasetSplit augment_split(const DatasetSplit& split, const EncoderModel& model, const Tokenizer& tokenizer,
                           int max_len = kDefaultMaxLen);

double zero_shot_accuracy(const DatasetSplit& split, const EncoderModel& model, const Tokenizer& tokenizer,
                          Similarity similarity, int max_len = kDefaultMaxLen);

}  // namespace recam

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "recam/corpus.hpp"
#include "recam/encoder.hpp"
#include "recam/textprep.hpp"
#include "recam/tokenizer.hpp"

namespace recam {

struct MlmExample {
    std::vector<TokenId> token_ids;       // with MASK at the masked positions
    std::vector<int> mask_positions;      // ascending
    std::vector<TokenId> original_ids;    // label for each mask position

    /// Undoes the masking.
    std::vector<TokenId> restored() const;
};

struct SentencePair {
    std::vector<TokenId> segment_a;
    std::vector<TokenId> segment_b;
    bool is_next = false;
};

/// `[Q-gold; P]` sequences, one per passage chunk, built exactly like the
/// fine-tuning inputs.
std::vector<std::vector<TokenId>> gen_within_task(const DatasetSplit& split, const Tokenizer& tokenizer,
                                                  int max_len = kDefaultMaxLen, int stride = 0);

/// Documents are cut into `[CLS] window [SEP]` sequences of at most max_len
/// tokens; each masks round(rate * window length) ordinary positions chosen
/// uniformly without replacement (plain replace-with-MASK).
std::vector<MlmExample> gen_in_domain_mlm(const std::vector<std::string>& documents, const Tokenizer& tokenizer,
                                          double mask_rate = 0.15, std::uint64_t seed = 13,
                                          int max_len = kDefaultMaxLen);

/// Same masking applied to already-built sequences (e.g. gen_within_task output).
std::vector<MlmExample> mask_sequences(const std::vector<std::vector<TokenId>>& sequences, const Tokenizer& tokenizer,
                                       double mask_rate, std::uint64_t seed);

/// Sentences split after '.', '!' or '?' followed by whitespace or end of text.
std::vector<std::string> split_sentences(std::string_view document);

/// One pair per consecutive sentence pair. Unless all_true, exactly floor(n/2)
/// pairs (chosen by the seeded shuffle) get segment B replaced by a sentence
/// from a different document.
std::vector<SentencePair> gen_nsp_pairs(const std::vector<std::string>& documents, const Tokenizer& tokenizer,
                                        std::uint64_t seed = 13, bool all_true = false);

struct MlmTrainConfig {
    double learning_rate = 1e-3;
    int epochs = 1;
    int accumulation_steps = 32;
    std::uint64_t seed = 13;
    double weight_decay = 0.01;
};

struct MlmEpochRecord {
    int epoch = 0;
    double loss = 0.0;  // mean over masked positions
};

/// Masked-LM loss for one example: mean over masked positions of -log p(original).
double mlm_loss(const TrainableEncoder& encoder, const MlmExample& example);

/// Continued pretraining with the masked-LM head; examples without masks are skipped.
std::vector<MlmEpochRecord> train_mlm(const std::vector<MlmExample>& examples, TrainableEncoder& encoder,
                                      const MlmTrainConfig& config);

/// Text file: one example per line, ids space-separated. The sidecar lists
/// "position:original_id" pairs per line.
void write_mlm_examples(const std::vector<MlmExample>& examples, const std::filesystem::path& sequences,
                        const std::filesystem::path& labels);
std::vector<MlmExample> read_mlm_examples(const std::filesystem::path& sequences, const std::filesystem::path& labels,
                                          TokenId mask_id);

}  // namespace recam

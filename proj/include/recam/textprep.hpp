#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "recam/corpus.hpp"
#include "recam/tokenizer.hpp"

namespace recam {

/// One `[CLS] Q-A [SEP] passage-chunk [SEP]` sequence. Probe inputs carry the
/// masked question instead of Q-A and set mask_position.
struct EncodedInput {
    std::vector<TokenId> token_ids;
    int candidate_index = 0;
    int chunk_index = 0;
    std::optional<int> mask_position;
    std::string instance_id;
};

/// Half-open token span [begin, end) into the passage.
struct ChunkSpan {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool operator==(const ChunkSpan&) const = default;
};

inline constexpr int kDefaultMaxLen = 256;

std::string substitute(std::string_view question, std::string_view candidate);
std::string mask_question(std::string_view question, const Tokenizer& tokenizer);

/// Sliding windows of at most `budget` tokens starting every `stride` tokens;
/// the last window ends at the passage end. An empty passage yields one empty span.
std::vector<ChunkSpan> chunk_passage(std::size_t passage_length, int budget, int stride);

/// Overload that copies the chunk tokens out.
std::vector<std::vector<TokenId>> chunk_passage(std::span<const TokenId> passage, int budget, int stride);

/// stride <= 0 selects half the per-chunk passage budget.
std::vector<EncodedInput> build_inputs(const Instance& instance, const Tokenizer& tokenizer,
                                       int max_len = kDefaultMaxLen, int stride = 0);

/// Same layout for one explicit answer string (used for within-task sequences).
std::vector<EncodedInput> build_answer_inputs(const Instance& instance, std::string_view answer,
                                              const Tokenizer& tokenizer, int max_len, int stride,
                                              int candidate_index = 0);

/// `[CLS] Q-with-MASK [SEP] first-passage-chunk [SEP]`, mask_position set.
EncodedInput build_probe_input(const Instance& instance, const Tokenizer& tokenizer,
                               int max_len = kDefaultMaxLen);

/// Checks the EncodedInput invariants, throwing on violation.
void check_encoded_input(const EncodedInput& input, const Tokenizer& tokenizer, int max_len);

}  // namespace recam

#include "recam/textprep.hpp"

#include <algorithm>

namespace recam {
namespace {

std::size_t single_marker(std::string_view question, std::string_view op) {
    const auto count = count_placeholders(question);
    if (count == 0) {
        throw Error(ErrorKind::InvalidArgument, std::string(op) + ": missing placeholder");
    }
    if (count > 1) {
        throw Error(ErrorKind::InvalidArgument, std::string(op) + ": multiple placeholders");
    }
    return question.find(kPlaceholder);
}

std::string replace_marker(std::string_view question, std::size_t at, std::string_view with) {
    std::string out;
    out.reserve(question.size() + with.size());
    out.append(question.substr(0, at));
    out.append(with);
    out.append(question.substr(at + kPlaceholder.size()));
    return out;
}

}  // namespace

std::string substitute(std::string_view question, std::string_view candidate) {
    const auto at = single_marker(question, "substitute");
    if (candidate.empty()) {
        throw Error(ErrorKind::InvalidArgument, "substitute: empty candidate");
    }
    return replace_marker(question, at, candidate);
}

std::string mask_question(std::string_view question, const Tokenizer& tokenizer) {
    const auto at = single_marker(question, "mask_question");
    return replace_marker(question, at, tokenizer.mask_surface());
}

std::vector<ChunkSpan> chunk_passage(std::size_t passage_length, int budget, int stride) {
    if (budget < 1) {
        throw Error(ErrorKind::InvalidArgument, "chunk_passage: budget must be >= 1, got " + std::to_string(budget));
    }
    if (stride < 1 || stride > budget) {
        throw Error(ErrorKind::InvalidArgument,
                    "chunk_passage: stride must lie in [1, budget], got " + std::to_string(stride));
    }
    const auto b = static_cast<std::size_t>(budget);
    const auto s = static_cast<std::size_t>(stride);
    std::vector<ChunkSpan> spans;
    for (std::size_t start = 0;; start += s) {
        spans.push_back({start, std::min(start + b, passage_length)});
        if (start + b >= passage_length) break;
    }
    return spans;
}

std::vector<std::vector<TokenId>> chunk_passage(std::span<const TokenId> passage, int budget, int stride) {
    std::vector<std::vector<TokenId>> chunks;
    for (const auto& span : chunk_passage(passage.size(), budget, stride)) {
        chunks.emplace_back(passage.begin() + static_cast<std::ptrdiff_t>(span.begin),
                            passage.begin() + static_cast<std::ptrdiff_t>(span.end));
    }
    return chunks;
}

namespace {

std::vector<EncodedInput> inputs_for_prefix(const std::vector<TokenId>& qa_tokens,
                                            const std::vector<TokenId>& passage_tokens, const Instance& instance,
                                            const Tokenizer& tokenizer, int max_len, int stride,
                                            int candidate_index) {
    const auto& sp = tokenizer.specials();
    const int prefix_len = static_cast<int>(qa_tokens.size()) + 2;  // CLS ... SEP
    const int budget = max_len - prefix_len - 1;                     // terminal SEP
    if (budget < 1) {
        throw Error(ErrorKind::InvalidArgument, "build_inputs: question-answer of " +
                                                    std::to_string(qa_tokens.size()) + " tokens exceeds max_len " +
                                                    std::to_string(max_len) + " (instance '" + instance.id + "')");
    }
    const int effective_stride = stride > 0 ? std::min(stride, budget) : std::max(1, budget / 2);

    std::vector<EncodedInput> inputs;
    const auto spans = chunk_passage(passage_tokens.size(), budget, effective_stride);
    for (std::size_t c = 0; c < spans.size(); ++c) {
        EncodedInput input;
        input.instance_id = instance.id;
        input.candidate_index = candidate_index;
        input.chunk_index = static_cast<int>(c);
        auto& ids = input.token_ids;
        ids.reserve(static_cast<std::size_t>(prefix_len) + spans[c].size() + 1);
        ids.push_back(sp.cls);
        ids.insert(ids.end(), qa_tokens.begin(), qa_tokens.end());
        ids.push_back(sp.sep);
        ids.insert(ids.end(), passage_tokens.begin() + static_cast<std::ptrdiff_t>(spans[c].begin),
                   passage_tokens.begin() + static_cast<std::ptrdiff_t>(spans[c].end));
        ids.push_back(sp.sep);
        inputs.push_back(std::move(input));
    }
    return inputs;
}

}  // namespace

std::vector<EncodedInput> build_answer_inputs(const Instance& instance, std::string_view answer,
                                              const Tokenizer& tokenizer, int max_len, int stride,
                                              int candidate_index) {
    const auto qa = tokenizer.tokenize(substitute(instance.question, answer));
    const auto passage = tokenizer.tokenize(instance.passage);
    return inputs_for_prefix(qa, passage, instance, tokenizer, max_len, stride, candidate_index);
}

std::vector<EncodedInput> build_inputs(const Instance& instance, const Tokenizer& tokenizer, int max_len,
                                       int stride) {
    const auto passage = tokenizer.tokenize(instance.passage);
    std::vector<EncodedInput> all;
    for (std::size_t k = 0; k < instance.candidates.size(); ++k) {
        const auto qa = tokenizer.tokenize(substitute(instance.question, instance.candidates[k]));
        auto inputs = inputs_for_prefix(qa, passage, instance, tokenizer, max_len, stride, static_cast<int>(k));
        std::move(inputs.begin(), inputs.end(), std::back_inserter(all));
    }
    return all;
}

EncodedInput build_probe_input(const Instance& instance, const Tokenizer& tokenizer, int max_len) {
    const auto masked = tokenizer.tokenize(mask_question(instance.question, tokenizer));
    const auto mask_id = tokenizer.specials().mask;
    if (std::count(masked.begin(), masked.end(), mask_id) != 1) {
        throw Error(ErrorKind::Data, "probe input for '" + instance.id + "' does not contain exactly one MASK token");
    }
    const auto passage = tokenizer.tokenize(instance.passage);
    auto inputs = inputs_for_prefix(masked, passage, instance, tokenizer, max_len, 0, 0);
    auto probe = std::move(inputs.front());
    const auto it = std::find(probe.token_ids.begin(), probe.token_ids.end(), mask_id);
    probe.mask_position = static_cast<int>(it - probe.token_ids.begin());
    return probe;
}

void check_encoded_input(const EncodedInput& input, const Tokenizer& tokenizer, int max_len) {
    const auto& ids = input.token_ids;
    const auto& sp = tokenizer.specials();
    if (static_cast<int>(ids.size()) > max_len) {
        throw Error(ErrorKind::Data, "encoded input longer than max_len");
    }
    if (ids.empty() || ids.front() != sp.cls) {
        throw Error(ErrorKind::Data, "encoded input does not begin with CLS");
    }
    if (std::count(ids.begin(), ids.end(), sp.sep) != 2 || ids.back() != sp.sep) {
        throw Error(ErrorKind::Data, "encoded input must contain exactly two SEP ids, the last one terminal");
    }
    if (input.mask_position) {
        const auto pos = *input.mask_position;
        if (pos < 0 || pos >= static_cast<int>(ids.size()) || ids[static_cast<std::size_t>(pos)] != sp.mask) {
            throw Error(ErrorKind::Data, "mask_position does not point at a MASK id");
        }
    }
}

}  // namespace recam

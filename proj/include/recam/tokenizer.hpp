#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "recam/types.hpp"

namespace recam {

struct SpecialTokens {
    TokenId cls = 0;
    TokenId sep = 0;
    TokenId mask = 0;
    TokenId pad = 0;
    TokenId unk = -1;  // -1 when the vocabulary has no unknown token
};

class Tokenizer {
public:
    virtual ~Tokenizer() = default;

    virtual std::vector<TokenId> tokenize(std::string_view text) const = 0;
    virtual std::string detokenize(const std::vector<TokenId>& ids) const = 0;
    virtual TokenId token_to_id(std::string_view token) const = 0;  // -1 if absent
    virtual const std::string& id_to_token(TokenId id) const = 0;
    virtual std::size_t vocab_size() const = 0;
    virtual const SpecialTokens& specials() const = 0;
    /// Text that tokenizes to exactly the MASK id.
    virtual std::string mask_surface() const = 0;
    /// Stable digest of the vocabulary and merge rules.
    virtual std::string fingerprint() const = 0;
    /// Descriptor written into checkpoints so the tokenizer can be rebuilt.
    virtual std::string descriptor_json() const = 0;

    bool is_special(TokenId id) const;
    /// Lower-cased surface form with whitespace and BPE space markers removed;
    /// used wherever words (not ids) are compared.
    std::string normalized_surface(TokenId id) const;
};

std::string normalize_word(std::string_view word);

/// Whitespace-split vocabulary tokenizer. Detokenization joins with single
/// spaces, so round trips are lossless up to whitespace collapsing.
class WhitespaceTokenizer final : public Tokenizer {
public:
    static constexpr std::string_view kPad = "[PAD]";
    static constexpr std::string_view kCls = "[CLS]";
    static constexpr std::string_view kSep = "[SEP]";
    static constexpr std::string_view kMask = "[MASK]";
    static constexpr std::string_view kUnk = "[UNK]";

    /// Specials take ids 0..4; `words` follow in the given order, duplicates skipped.
    explicit WhitespaceTokenizer(const std::vector<std::string>& words);

    /// Vocabulary of every whitespace token in `texts`, in first-seen order.
    static WhitespaceTokenizer from_texts(const std::vector<std::string>& texts);

    std::vector<TokenId> tokenize(std::string_view text) const override;
    std::string detokenize(const std::vector<TokenId>& ids) const override;
    TokenId token_to_id(std::string_view token) const override;
    const std::string& id_to_token(TokenId id) const override;
    std::size_t vocab_size() const override { return tokens_.size(); }
    const SpecialTokens& specials() const override { return specials_; }
    std::string mask_surface() const override { return std::string(kMask); }
    std::string fingerprint() const override;
    std::string descriptor_json() const override;

    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
    SpecialTokens specials_;
};

/// Byte-level BPE over a ranked merges.txt and a vocab.json token-to-id map.
/// Pre-tokenization follows the GPT-2 pattern with an ASCII approximation of
/// the Unicode letter/number classes (bytes >= 0x80 count as letters).
class ByteLevelBpeTokenizer final : public Tokenizer {
public:
    ByteLevelBpeTokenizer(std::unordered_map<std::string, TokenId> vocab,
                          std::vector<std::pair<std::string, std::string>> merges);

    static ByteLevelBpeTokenizer from_files(const std::filesystem::path& vocab_json,
                                            const std::filesystem::path& merges_txt);

    std::vector<TokenId> tokenize(std::string_view text) const override;
    std::string detokenize(const std::vector<TokenId>& ids) const override;
    TokenId token_to_id(std::string_view token) const override;
    const std::string& id_to_token(TokenId id) const override;
    std::size_t vocab_size() const override { return id_to_token_.size(); }
    const SpecialTokens& specials() const override { return specials_; }
    std::string mask_surface() const override { return id_to_token_[static_cast<std::size_t>(specials_.mask)]; }
    std::string fingerprint() const override;
    std::string descriptor_json() const override;

    void set_source_files(std::filesystem::path vocab_json, std::filesystem::path merges_txt);

    /// Maps raw bytes to the printable code points used by byte-level BPE.
    static std::string bytes_to_unicode(std::string_view bytes);
    static std::string unicode_to_bytes(std::string_view encoded);

private:
    std::vector<std::string> bpe(const std::string& word) const;
    std::vector<std::string> pretokenize(std::string_view text) const;

    std::unordered_map<std::string, TokenId> vocab_;
    std::vector<std::string> id_to_token_;
    std::map<std::pair<std::string, std::string>, int> merge_ranks_;
    std::vector<std::pair<std::string, std::string>> merges_;
    std::vector<std::string> special_surfaces_;
    SpecialTokens specials_;
    std::filesystem::path vocab_path_;
    std::filesystem::path merges_path_;
};

/// Rebuilds a tokenizer from Tokenizer::descriptor_json output.
std::unique_ptr<Tokenizer> tokenizer_from_descriptor(const std::string& descriptor_json);

}  // namespace recam

#include "recam/tokenizer.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "recam/digest.hpp"

namespace recam {

bool Tokenizer::is_special(TokenId id) const {
    const auto& s = specials();
    return id == s.cls || id == s.sep || id == s.mask || id == s.pad || (s.unk >= 0 && id == s.unk);
}

std::string normalize_word(std::string_view word) {
    std::string out;
    out.reserve(word.size());
    for (std::size_t i = 0; i < word.size(); ++i) {
        const auto c = static_cast<unsigned char>(word[i]);
        // U+0120 'Ġ' (0xC4 0xA0) marks a leading space in byte-level BPE surfaces.
        if (c == 0xC4 && i + 1 < word.size() && static_cast<unsigned char>(word[i + 1]) == 0xA0) {
            ++i;
            continue;
        }
        if (std::isspace(c)) continue;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

std::string Tokenizer::normalized_surface(TokenId id) const {
    return normalize_word(detokenize({id}));
}

WhitespaceTokenizer::WhitespaceTokenizer(const std::vector<std::string>& words) {
    for (auto special : {kPad, kCls, kSep, kMask, kUnk}) {
        index_.emplace(std::string(special), static_cast<TokenId>(tokens_.size()));
        tokens_.emplace_back(special);
    }
    specials_ = {.cls = 1, .sep = 2, .mask = 3, .pad = 0, .unk = 4};
    for (const auto& word : words) {
        if (word.empty() || word.find_first_of(" \t\n\r\f\v") != std::string::npos) {
            throw Error(ErrorKind::InvalidArgument, "whitespace vocabulary entry '" + word + "' is not a single word");
        }
        if (index_.emplace(word, static_cast<TokenId>(tokens_.size())).second) {
            tokens_.push_back(word);
        }
    }
}

WhitespaceTokenizer WhitespaceTokenizer::from_texts(const std::vector<std::string>& texts) {
    std::vector<std::string> words;
    for (const auto& text : texts) {
        std::istringstream ss(text);
        std::string word;
        while (ss >> word) words.push_back(word);
    }
    return WhitespaceTokenizer(words);
}

std::vector<TokenId> WhitespaceTokenizer::tokenize(std::string_view text) const {
    std::vector<TokenId> ids;
    std::size_t pos = 0;
    while (pos < text.size()) {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
        if (pos >= text.size()) break;
        auto end = pos;
        while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end]))) ++end;
        const auto id = token_to_id(text.substr(pos, end - pos));
        ids.push_back(id >= 0 ? id : specials_.unk);
        pos = end;
    }
    return ids;
}

std::string WhitespaceTokenizer::detokenize(const std::vector<TokenId>& ids) const {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out.push_back(' ');
        out += id_to_token(ids[i]);
    }
    return out;
}

TokenId WhitespaceTokenizer::token_to_id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? -1 : it->second;
}

const std::string& WhitespaceTokenizer::id_to_token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw Error(ErrorKind::InvalidArgument, "token id " + std::to_string(id) + " outside vocabulary");
    }
    return tokens_[static_cast<std::size_t>(id)];
}

std::string WhitespaceTokenizer::fingerprint() const {
    std::string joined = "whitespace\n";
    for (const auto& t : tokens_) {
        joined += t;
        joined.push_back('\n');
    }
    return sha256_hex(joined);
}

std::string WhitespaceTokenizer::descriptor_json() const {
    nlohmann::ordered_json desc;
    desc["kind"] = "whitespace";
    desc["fingerprint"] = fingerprint();
    // Specials are implied; store only the word list.
    desc["words"] = std::vector<std::string>(tokens_.begin() + 5, tokens_.end());
    return desc.dump();
}

std::unique_ptr<Tokenizer> tokenizer_from_descriptor(const std::string& descriptor_json) {
    nlohmann::json desc;
    try {
        desc = nlohmann::json::parse(descriptor_json);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Parse, std::string("tokenizer descriptor: ") + e.what());
    }
    const auto kind = desc.value("kind", std::string());
    std::unique_ptr<Tokenizer> tok;
    if (kind == "whitespace") {
        tok = std::make_unique<WhitespaceTokenizer>(desc.at("words").get<std::vector<std::string>>());
    } else if (kind == "bpe") {
        tok = std::make_unique<ByteLevelBpeTokenizer>(ByteLevelBpeTokenizer::from_files(
            desc.at("vocab").get<std::string>(), desc.at("merges").get<std::string>()));
    } else {
        throw Error(ErrorKind::Parse, "tokenizer descriptor has unknown kind '" + kind + "'");
    }
    if (desc.contains("fingerprint") && desc["fingerprint"].get<std::string>() != tok->fingerprint()) {
        throw Error(ErrorKind::Data, "tokenizer fingerprint mismatch; vocabulary files changed since checkpointing");
    }
    return tok;
}

}  // namespace recam

#include <algorithm>
#include <array>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "recam/digest.hpp"
#include "recam/tokenizer.hpp"

namespace recam {
namespace {

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

// Splits a UTF-8 string into code points; invalid lead bytes decode as themselves.
std::vector<std::string> utf8_chars(std::string_view s) {
    std::vector<std::string> chars;
    for (std::size_t i = 0; i < s.size();) {
        const auto c = static_cast<unsigned char>(s[i]);
        std::size_t len = 1;
        if ((c & 0xE0) == 0xC0) len = 2;
        else if ((c & 0xF0) == 0xE0) len = 3;
        else if ((c & 0xF8) == 0xF0) len = 4;
        len = std::min(len, s.size() - i);
        chars.emplace_back(s.substr(i, len));
        i += len;
    }
    return chars;
}

char32_t decode_utf8(std::string_view s, std::size_t& i) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (c < 0x80 || i + 1 >= s.size()) {
        ++i;
        return c;
    }
    if ((c & 0xE0) == 0xC0) {
        char32_t cp = ((c & 0x1F) << 6) | (static_cast<unsigned char>(s[i + 1]) & 0x3F);
        i += 2;
        return cp;
    }
    if ((c & 0xF0) == 0xE0 && i + 2 < s.size()) {
        char32_t cp = ((c & 0x0F) << 12) | ((static_cast<unsigned char>(s[i + 1]) & 0x3F) << 6) |
                      (static_cast<unsigned char>(s[i + 2]) & 0x3F);
        i += 3;
        return cp;
    }
    ++i;
    return c;
}

struct ByteTable {
    std::array<char32_t, 256> byte_to_cp{};
    std::vector<int> cp_to_byte;

    ByteTable() {
        std::array<bool, 256> direct{};
        for (int b = '!'; b <= '~'; ++b) direct[b] = true;
        for (int b = 0xA1; b <= 0xAC; ++b) direct[b] = true;
        for (int b = 0xAE; b <= 0xFF; ++b) direct[b] = true;
        char32_t next = 256;
        for (int b = 0; b < 256; ++b) {
            byte_to_cp[b] = direct[b] ? static_cast<char32_t>(b) : next++;
        }
        cp_to_byte.assign(next, -1);
        for (int b = 0; b < 256; ++b) cp_to_byte[byte_to_cp[b]] = b;
    }
};

const ByteTable& byte_table() {
    static const ByteTable table;
    return table;
}

enum class CharClass { Letter, Number, Space, Other };

CharClass classify(unsigned char c) {
    if (std::isalpha(c) || c >= 0x80) return CharClass::Letter;
    if (std::isdigit(c)) return CharClass::Number;
    if (std::isspace(c)) return CharClass::Space;
    return CharClass::Other;
}

}  // namespace

std::string ByteLevelBpeTokenizer::bytes_to_unicode(std::string_view bytes) {
    std::string out;
    for (unsigned char b : bytes) append_utf8(out, byte_table().byte_to_cp[b]);
    return out;
}

std::string ByteLevelBpeTokenizer::unicode_to_bytes(std::string_view encoded) {
    const auto& table = byte_table();
    std::string out;
    for (std::size_t i = 0; i < encoded.size();) {
        const auto cp = decode_utf8(encoded, i);
        if (cp < table.cp_to_byte.size() && table.cp_to_byte[cp] >= 0) {
            out.push_back(static_cast<char>(table.cp_to_byte[cp]));
        } else {
            append_utf8(out, cp);
        }
    }
    return out;
}

ByteLevelBpeTokenizer::ByteLevelBpeTokenizer(std::unordered_map<std::string, TokenId> vocab,
                                             std::vector<std::pair<std::string, std::string>> merges)
    : vocab_(std::move(vocab)), merges_(std::move(merges)) {
    TokenId max_id = -1;
    for (const auto& [tok, id] : vocab_) {
        if (id < 0) throw Error(ErrorKind::Parse, "vocab.json: negative id for '" + tok + "'");
        max_id = std::max(max_id, id);
    }
    id_to_token_.assign(static_cast<std::size_t>(max_id + 1), std::string());
    for (const auto& [tok, id] : vocab_) id_to_token_[static_cast<std::size_t>(id)] = tok;
    for (std::size_t r = 0; r < merges_.size(); ++r) {
        merge_ranks_.emplace(merges_[r], static_cast<int>(r));
    }

    auto find_first = [&](std::initializer_list<const char*> names) -> TokenId {
        for (const char* name : names) {
            if (auto it = vocab_.find(name); it != vocab_.end()) {
                special_surfaces_.emplace_back(name);
                return it->second;
            }
        }
        return -1;
    };
    specials_.cls = find_first({"<s>", "[CLS]"});
    specials_.sep = find_first({"</s>", "[SEP]"});
    specials_.mask = find_first({"<mask>", "[MASK]"});
    specials_.pad = find_first({"<pad>", "[PAD]"});
    specials_.unk = find_first({"<unk>", "[UNK]"});
    if (specials_.cls < 0 || specials_.sep < 0 || specials_.mask < 0 || specials_.pad < 0) {
        throw Error(ErrorKind::Data, "BPE vocabulary lacks one of the CLS/SEP/MASK/PAD special tokens");
    }
}

ByteLevelBpeTokenizer ByteLevelBpeTokenizer::from_files(const std::filesystem::path& vocab_json,
                                                        const std::filesystem::path& merges_txt) {
    std::ifstream vin(vocab_json);
    if (!vin) throw Error(ErrorKind::Io, "cannot read " + vocab_json.string());
    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(vin);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Parse, vocab_json.string() + ": " + e.what());
    }
    std::unordered_map<std::string, TokenId> vocab;
    for (const auto& [tok, id] : parsed.items()) vocab.emplace(tok, id.get<TokenId>());

    std::ifstream min(merges_txt);
    if (!min) throw Error(ErrorKind::Io, "cannot read " + merges_txt.string());
    std::vector<std::pair<std::string, std::string>> merges;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(min, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.rfind("#version", 0) == 0) continue;
        const auto space = line.find(' ');
        if (space == std::string::npos || space == 0 || space + 1 >= line.size()) {
            throw Error(ErrorKind::Parse, merges_txt.string() + ":" + std::to_string(line_no) + ": expected 'a b'");
        }
        merges.emplace_back(line.substr(0, space), line.substr(space + 1));
    }
    ByteLevelBpeTokenizer tok(std::move(vocab), std::move(merges));
    tok.set_source_files(std::filesystem::absolute(vocab_json), std::filesystem::absolute(merges_txt));
    return tok;
}

void ByteLevelBpeTokenizer::set_source_files(std::filesystem::path vocab_json, std::filesystem::path merges_txt) {
    vocab_path_ = std::move(vocab_json);
    merges_path_ = std::move(merges_txt);
}

std::vector<std::string> ByteLevelBpeTokenizer::pretokenize(std::string_view text) const {
    std::vector<std::string> pieces;
    const auto n = text.size();
    auto run_end = [&](std::size_t from, CharClass cls) {
        while (from < n && classify(static_cast<unsigned char>(text[from])) == cls) ++from;
        return from;
    };
    std::size_t i = 0;
    while (i < n) {
        if (text[i] == '\'') {
            bool matched = false;
            for (std::string_view suffix : {"s", "t", "re", "ve", "m", "ll", "d"}) {
                if (text.substr(i + 1, suffix.size()) == suffix) {
                    pieces.emplace_back(text.substr(i, suffix.size() + 1));
                    i += suffix.size() + 1;
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
        }
        const auto cls = classify(static_cast<unsigned char>(text[i]));
        if (cls == CharClass::Space) {
            const auto end = run_end(i, CharClass::Space);
            if (end == n) {
                pieces.emplace_back(text.substr(i, end - i));
                i = end;
                continue;
            }
            if (end - i > 1) {
                pieces.emplace_back(text.substr(i, end - i - 1));
                i = end - 1;
            }
            if (text[i] == ' ') {
                const auto next_cls = classify(static_cast<unsigned char>(text[i + 1]));
                const auto stop = run_end(i + 1, next_cls);
                pieces.emplace_back(text.substr(i, stop - i));
                i = stop;
            } else {
                pieces.emplace_back(text.substr(i, 1));
                ++i;
            }
            continue;
        }
        const auto stop = run_end(i, cls);
        pieces.emplace_back(text.substr(i, stop - i));
        i = stop;
    }
    return pieces;
}

std::vector<std::string> ByteLevelBpeTokenizer::bpe(const std::string& word) const {
    auto symbols = utf8_chars(word);
    while (symbols.size() > 1) {
        int best_rank = std::numeric_limits<int>::max();
        std::size_t best = 0;
        for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
            auto it = merge_ranks_.find({symbols[i], symbols[i + 1]});
            if (it != merge_ranks_.end() && it->second < best_rank) {
                best_rank = it->second;
                best = i;
            }
        }
        if (best_rank == std::numeric_limits<int>::max()) break;
        const auto first = symbols[best];
        const auto second = symbols[best + 1];
        std::vector<std::string> merged;
        merged.reserve(symbols.size());
        for (std::size_t i = 0; i < symbols.size();) {
            if (i + 1 < symbols.size() && symbols[i] == first && symbols[i + 1] == second) {
                merged.push_back(first + second);
                i += 2;
            } else {
                merged.push_back(symbols[i]);
                ++i;
            }
        }
        symbols = std::move(merged);
    }
    return symbols;
}

std::vector<TokenId> ByteLevelBpeTokenizer::tokenize(std::string_view text) const {
    std::vector<TokenId> ids;
    auto encode_segment = [&](std::string_view segment) {
        for (const auto& piece : pretokenize(segment)) {
            for (const auto& symbol : bpe(bytes_to_unicode(piece))) {
                auto it = vocab_.find(symbol);
                if (it != vocab_.end()) {
                    ids.push_back(it->second);
                } else if (specials_.unk >= 0) {
                    ids.push_back(specials_.unk);
                } else {
                    throw Error(ErrorKind::Data, "BPE symbol '" + symbol + "' missing from vocabulary");
                }
            }
        }
    };

    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t hit = std::string_view::npos;
        const std::string* hit_surface = nullptr;
        for (const auto& surface : special_surfaces_) {
            const auto at = text.find(surface, pos);
            if (at < hit || (at == hit && hit_surface && surface.size() > hit_surface->size())) {
                hit = at;
                hit_surface = &surface;
            }
        }
        if (hit == std::string_view::npos) {
            encode_segment(text.substr(pos));
            break;
        }
        auto segment = text.substr(pos, hit - pos);
        const auto special_id = vocab_.at(*hit_surface);
        // The mask token absorbs the space in front of it.
        if (special_id == specials_.mask && !segment.empty() && segment.back() == ' ') {
            segment.remove_suffix(1);
        }
        encode_segment(segment);
        ids.push_back(special_id);
        pos = hit + hit_surface->size();
    }
    return ids;
}

std::string ByteLevelBpeTokenizer::detokenize(const std::vector<TokenId>& ids) const {
    std::string out;
    for (auto id : ids) {
        const auto& tok = id_to_token(id);
        if (is_special(id)) {
            if (id == specials_.mask) out.push_back(' ');
            out += tok;
        } else {
            out += unicode_to_bytes(tok);
        }
    }
    return out;
}

TokenId ByteLevelBpeTokenizer::token_to_id(std::string_view token) const {
    auto it = vocab_.find(std::string(token));
    return it == vocab_.end() ? -1 : it->second;
}

const std::string& ByteLevelBpeTokenizer::id_to_token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
        throw Error(ErrorKind::InvalidArgument, "token id " + std::to_string(id) + " outside vocabulary");
    }
    return id_to_token_[static_cast<std::size_t>(id)];
}

std::string ByteLevelBpeTokenizer::fingerprint() const {
    std::string joined = "bpe\n";
    for (std::size_t id = 0; id < id_to_token_.size(); ++id) {
        joined += std::to_string(id) + '\t' + id_to_token_[id] + '\n';
    }
    joined += "merges\n";
    for (const auto& [a, b] : merges_) joined += a + ' ' + b + '\n';
    return sha256_hex(joined);
}

std::string ByteLevelBpeTokenizer::descriptor_json() const {
    if (vocab_path_.empty() || merges_path_.empty()) {
        throw Error(ErrorKind::InvalidArgument, "BPE tokenizer built in memory has no source files to describe");
    }
    nlohmann::ordered_json desc;
    desc["kind"] = "bpe";
    desc["vocab"] = vocab_path_.string();
    desc["merges"] = merges_path_.string();
    desc["fingerprint"] = fingerprint();
    return desc.dump();
}

}  // namespace recam

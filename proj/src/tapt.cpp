#include "recam/tapt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "recam/nn_ops.hpp"
#include "recam/optimizer.hpp"

namespace recam {

std::vector<TokenId> MlmExample::restored() const {
    auto ids = token_ids;
    for (std::size_t i = 0; i < mask_positions.size(); ++i) {
        ids[static_cast<std::size_t>(mask_positions[i])] = original_ids[i];
    }
    return ids;
}

std::vector<std::vector<TokenId>> gen_within_task(const DatasetSplit& split, const Tokenizer& tokenizer, int max_len,
                                                  int stride) {
    split.require_labels("gen_within_task");
    std::vector<std::vector<TokenId>> sequences;
    for (const auto& inst : split.instances) {
        const auto& gold = inst.candidates.at(static_cast<std::size_t>(*inst.gold_index));
        for (auto& input : build_answer_inputs(inst, gold, tokenizer, max_len, stride)) {
            sequences.push_back(std::move(input.token_ids));
        }
    }
    return sequences;
}

namespace {

void check_rate(double mask_rate) {
    if (!(mask_rate > 0.0 && mask_rate < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "mask rate must lie in (0, 1), got " + std::to_string(mask_rate));
    }
}

MlmExample mask_one(std::vector<TokenId> ids, const Tokenizer& tokenizer, double mask_rate, std::mt19937_64& rng) {
    std::vector<int> eligible;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!tokenizer.is_special(ids[i])) eligible.push_back(static_cast<int>(i));
    }
    const auto count = static_cast<std::size_t>(std::lround(mask_rate * static_cast<double>(eligible.size())));
    MlmExample ex;
    std::sample(eligible.begin(), eligible.end(), std::back_inserter(ex.mask_positions), count, rng);
    for (auto pos : ex.mask_positions) {
        ex.original_ids.push_back(ids[static_cast<std::size_t>(pos)]);
        ids[static_cast<std::size_t>(pos)] = tokenizer.specials().mask;
    }
    ex.token_ids = std::move(ids);
    return ex;
}

}  // namespace

std::vector<MlmExample> mask_sequences(const std::vector<std::vector<TokenId>>& sequences, const Tokenizer& tokenizer,
                                       double mask_rate, std::uint64_t seed) {
    check_rate(mask_rate);
    std::mt19937_64 rng(seed);
    std::vector<MlmExample> examples;
    examples.reserve(sequences.size());
    for (const auto& seq : sequences) examples.push_back(mask_one(seq, tokenizer, mask_rate, rng));
    return examples;
}

std::vector<MlmExample> gen_in_domain_mlm(const std::vector<std::string>& documents, const Tokenizer& tokenizer,
                                          double mask_rate, std::uint64_t seed, int max_len) {
    check_rate(mask_rate);
    if (documents.empty()) throw Error(ErrorKind::InvalidArgument, "gen_in_domain_mlm: no documents");
    if (max_len < 3) throw Error(ErrorKind::InvalidArgument, "gen_in_domain_mlm: max_len must be >= 3");
    const auto window = static_cast<std::size_t>(max_len - 2);
    const auto& sp = tokenizer.specials();

    std::vector<std::vector<TokenId>> sequences;
    for (const auto& doc : documents) {
        const auto tokens = tokenizer.tokenize(doc);
        for (std::size_t start = 0; start < tokens.size(); start += window) {
            const auto end = std::min(tokens.size(), start + window);
            std::vector<TokenId> seq{sp.cls};
            seq.insert(seq.end(), tokens.begin() + static_cast<std::ptrdiff_t>(start),
                       tokens.begin() + static_cast<std::ptrdiff_t>(end));
            seq.push_back(sp.sep);
            sequences.push_back(std::move(seq));
        }
    }
    return mask_sequences(sequences, tokenizer, mask_rate, seed);
}

std::vector<std::string> split_sentences(std::string_view document) {
    std::vector<std::string> sentences;
    std::size_t start = 0;
    auto flush = [&](std::size_t end) {
        auto piece = document.substr(start, end - start);
        const auto first = piece.find_first_not_of(" \t\r\n");
        if (first != std::string_view::npos) {
            const auto last = piece.find_last_not_of(" \t\r\n");
            sentences.emplace_back(piece.substr(first, last - first + 1));
        }
        start = end;
    };
    for (std::size_t i = 0; i < document.size(); ++i) {
        const char c = document[i];
        if ((c == '.' || c == '!' || c == '?') &&
            (i + 1 == document.size() || std::isspace(static_cast<unsigned char>(document[i + 1])))) {
            flush(i + 1);
        }
    }
    flush(document.size());
    return sentences;
}

std::vector<SentencePair> gen_nsp_pairs(const std::vector<std::string>& documents, const Tokenizer& tokenizer,
                                        std::uint64_t seed, bool all_true) {
    std::vector<std::vector<std::string>> sentences;
    for (std::size_t d = 0; d < documents.size(); ++d) {
        sentences.push_back(split_sentences(documents[d]));
        if (sentences.back().size() < 2) {
            throw Error(ErrorKind::InvalidArgument,
                        "gen_nsp_pairs: document " + std::to_string(d) + " has fewer than 2 sentences");
        }
    }
    struct Slot {
        std::size_t doc;
        std::size_t sentence;
    };
    std::vector<Slot> slots;
    for (std::size_t d = 0; d < sentences.size(); ++d) {
        for (std::size_t s = 0; s + 1 < sentences[d].size(); ++s) slots.push_back({d, s});
    }

    std::mt19937_64 rng(seed);
    std::vector<bool> is_false(slots.size(), false);
    const std::size_t false_count = all_true ? 0 : slots.size() / 2;
    if (false_count > 0) {
        if (documents.size() < 2) {
            throw Error(ErrorKind::InvalidArgument, "gen_nsp_pairs: false pairs need at least 2 documents");
        }
        std::vector<std::size_t> order(slots.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i = 0; i < false_count; ++i) is_false[order[i]] = true;
    }

    std::vector<SentencePair> pairs;
    pairs.reserve(slots.size());
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const auto [doc, s] = slots[i];
        SentencePair pair;
        pair.segment_a = tokenizer.tokenize(sentences[doc][s]);
        if (is_false[i]) {
            std::uniform_int_distribution<std::size_t> pick_doc(0, documents.size() - 2);
            auto other = pick_doc(rng);
            if (other >= doc) ++other;
            std::uniform_int_distribution<std::size_t> pick_sentence(0, sentences[other].size() - 1);
            pair.segment_b = tokenizer.tokenize(sentences[other][pick_sentence(rng)]);
            pair.is_next = false;
        } else {
            pair.segment_b = tokenizer.tokenize(sentences[doc][s + 1]);
            pair.is_next = true;
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

namespace {

void require_mlm_head(const TrainableEncoder& encoder) {
    if (!encoder.has_mlm_head()) throw Error(ErrorKind::InvalidArgument, "encoder has no masked-LM head");
}

}  // namespace

double mlm_loss(const TrainableEncoder& encoder, const MlmExample& example) {
    require_mlm_head(encoder);
    if (example.mask_positions.empty()) return 0.0;
    const auto pass = encoder.forward(example.token_ids);
    double loss = 0.0;
    for (std::size_t i = 0; i < example.mask_positions.size(); ++i) {
        const Vector p = nn::softmax(encoder.mlm_logits(pass, example.mask_positions[i]));
        loss -= std::log(std::max(p(example.original_ids[i]), 1e-12));
    }
    return loss / static_cast<double>(example.mask_positions.size());
}

std::vector<MlmEpochRecord> train_mlm(const std::vector<MlmExample>& examples, TrainableEncoder& encoder,
                                      const MlmTrainConfig& config) {
    require_mlm_head(encoder);
    if (config.epochs < 0 || config.accumulation_steps < 1 || !(config.learning_rate > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "train_mlm: invalid configuration");
    }
    auto params = encoder.parameters();
    AdamW<Real> optimizer(params, {config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
    encoder.zero_grad();

    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (!examples[i].mask_positions.empty()) order.push_back(i);
    }
    std::mt19937_64 rng(config.seed);
    std::vector<MlmEpochRecord> history;
    std::size_t pending = 0;
    auto flush = [&] {
        if (pending == 0) return;
        optimizer.step(1.0 / static_cast<Real>(pending));
        encoder.zero_grad();
        pending = 0;
    };

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (auto idx : order) {
            const auto& ex = examples[idx];
            const auto pass = encoder.forward(ex.token_ids);
            Matrix d_hidden = Matrix::Zero(pass.hidden.rows(), pass.hidden.cols());
            const auto m = static_cast<double>(ex.mask_positions.size());
            double loss = 0.0;
            for (std::size_t i = 0; i < ex.mask_positions.size(); ++i) {
                const int pos = ex.mask_positions[i];
                Vector d_logits = nn::softmax(encoder.mlm_logits(pass, pos));
                loss -= std::log(std::max(d_logits(ex.original_ids[i]), 1e-12));
                d_logits(ex.original_ids[i]) -= 1.0;
                encoder.mlm_backward(pass, pos, d_logits / m, d_hidden);
            }
            loss /= m;
            if (!std::isfinite(loss)) throw Error(ErrorKind::Numeric, "train_mlm: non-finite loss");
            encoder.backward(pass, d_hidden);
            loss_sum += loss;
            if (++pending == static_cast<std::size_t>(config.accumulation_steps)) flush();
        }
        flush();
        history.push_back({epoch, order.empty() ? 0.0 : loss_sum / static_cast<double>(order.size())});
    }
    return history;
}

void write_mlm_examples(const std::vector<MlmExample>& examples, const std::filesystem::path& sequences,
                        const std::filesystem::path& labels) {
    std::ofstream seq_out(sequences, std::ios::binary);
    std::ofstream lab_out(labels, std::ios::binary);
    if (!seq_out || !lab_out) {
        throw Error(ErrorKind::Io, "cannot write " + sequences.string() + " / " + labels.string());
    }
    for (const auto& ex : examples) {
        for (std::size_t i = 0; i < ex.token_ids.size(); ++i) {
            if (i) seq_out << ' ';
            seq_out << ex.token_ids[i];
        }
        seq_out << '\n';
        for (std::size_t i = 0; i < ex.mask_positions.size(); ++i) {
            if (i) lab_out << ' ';
            lab_out << ex.mask_positions[i] << ':' << ex.original_ids[i];
        }
        lab_out << '\n';
    }
}

std::vector<MlmExample> read_mlm_examples(const std::filesystem::path& sequences, const std::filesystem::path& labels,
                                          TokenId mask_id) {
    std::ifstream seq_in(sequences);
    std::ifstream lab_in(labels);
    if (!seq_in || !lab_in) {
        throw Error(ErrorKind::Io, "cannot read " + sequences.string() + " / " + labels.string());
    }
    std::vector<MlmExample> examples;
    std::string seq_line;
    std::string lab_line;
    std::size_t line_no = 0;
    while (std::getline(seq_in, seq_line)) {
        ++line_no;
        if (!std::getline(lab_in, lab_line)) {
            throw Error(ErrorKind::Parse, labels.string() + ": fewer lines than " + sequences.string());
        }
        MlmExample ex;
        std::istringstream ss(seq_line);
        TokenId id = 0;
        while (ss >> id) ex.token_ids.push_back(id);
        std::istringstream ls(lab_line);
        std::string pair;
        while (ls >> pair) {
            const auto colon = pair.find(':');
            if (colon == std::string::npos) {
                throw Error(ErrorKind::Parse, labels.string() + ":" + std::to_string(line_no) + ": expected pos:id");
            }
            const int pos = std::stoi(pair.substr(0, colon));
            if (pos < 0 || pos >= static_cast<int>(ex.token_ids.size()) ||
                ex.token_ids[static_cast<std::size_t>(pos)] != mask_id) {
                throw Error(ErrorKind::Parse,
                            labels.string() + ":" + std::to_string(line_no) + ": label position is not masked");
            }
            ex.mask_positions.push_back(pos);
            ex.original_ids.push_back(std::stoi(pair.substr(colon + 1)));
        }
        examples.push_back(std::move(ex));
    }
    return examples;
}

}  // namespace recam

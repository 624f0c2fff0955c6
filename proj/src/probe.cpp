#include "recam/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace recam {

void VocabDistribution::validate() const {
    if (probs.size() == 0) throw Error(ErrorKind::Data, "vocabulary distribution is empty");
    if (!probs.allFinite() || (probs.array() < 0.0).any()) {
        throw Error(ErrorKind::Numeric, "vocabulary distribution has negative or non-finite entries");
    }
    if (std::abs(probs.sum() - 1.0) > 1e-6) {
        throw Error(ErrorKind::Numeric, "vocabulary distribution sums to " + std::to_string(probs.sum()));
    }
}

Similarity parse_similarity(std::string_view text) {
    if (text == "embedding-cosine" || text == "cosine") return Similarity::EmbeddingCosine;
    if (text == "mask-likelihood" || text == "likelihood") return Similarity::MaskLikelihood;
    throw Error(ErrorKind::InvalidArgument, "unknown similarity '" + std::string(text) + "'");
}

std::string to_string(Similarity similarity) {
    return similarity == Similarity::EmbeddingCosine ? "embedding-cosine" : "mask-likelihood";
}

VocabDistribution probe_distribution(const Instance& instance, const EncoderModel& model, const Tokenizer& tokenizer,
                                     int max_len, std::string model_id) {
    const int budget = std::min(max_len, model.max_positions());
    const auto input = build_probe_input(instance, tokenizer, budget);
    VocabDistribution dist{model.mlm_distribution(input), instance.id, std::move(model_id)};
    if (static_cast<std::size_t>(dist.probs.size()) != tokenizer.vocab_size()) {
        throw Error(ErrorKind::Data, "model vocabulary size does not match the tokenizer");
    }
    dist.validate();
    return dist;
}

namespace {

std::vector<TokenId> candidate_tokens(const std::string& candidate, const Tokenizer& tokenizer) {
    // Leading space so byte-level BPE picks the in-sentence form of the word.
    auto ids = tokenizer.tokenize(" " + candidate);
    if (ids.empty()) {
        throw Error(ErrorKind::Data, "candidate '" + candidate + "' tokenizes to nothing");
    }
    return ids;
}

// Non-special ids ordered by probability (descending), ties to the lower id.
std::vector<TokenId> ranked_vocabulary(const Vector& probs, const Tokenizer& tokenizer) {
    std::vector<TokenId> ids;
    ids.reserve(static_cast<std::size_t>(probs.size()));
    for (TokenId id = 0; id < static_cast<TokenId>(probs.size()); ++id) {
        if (!tokenizer.is_special(id)) ids.push_back(id);
    }
    std::stable_sort(ids.begin(), ids.end(), [&](TokenId a, TokenId b) { return probs(a) > probs(b); });
    return ids;
}

Real cosine(const Vector& a, const Vector& b) {
    const Real denom = a.norm() * b.norm();
    return denom > 0.0 ? a.dot(b) / denom : 0.0;
}

}  // namespace

std::vector<RankedCandidate> zero_shot_rank(const Instance& instance, const EncoderModel& model,
                                            const Tokenizer& tokenizer, Similarity similarity, int max_len) {
    const auto dist = probe_distribution(instance, model, tokenizer, max_len);
    std::vector<RankedCandidate> ranked;
    ranked.reserve(instance.candidates.size());

    Vector predicted;
    if (similarity == Similarity::EmbeddingCosine) {
        const auto order = ranked_vocabulary(dist.probs, tokenizer);
        if (order.empty()) throw Error(ErrorKind::Data, "vocabulary has no ordinary tokens");
        predicted = model.token_embedding(order.front());
    }
    for (std::size_t i = 0; i < instance.candidates.size(); ++i) {
        const auto ids = candidate_tokens(instance.candidates[i], tokenizer);
        Real score = 0.0;
        if (similarity == Similarity::MaskLikelihood) {
            score = dist.probs(ids.front());
        } else {
            Vector mean = Vector::Zero(model.dim());
            for (auto id : ids) mean += model.token_embedding(id);
            mean /= static_cast<Real>(ids.size());
            score = cosine(predicted, mean);
        }
        ranked.push_back({static_cast<int>(i), score});
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const RankedCandidate& a, const RankedCandidate& b) { return a.score > b.score; });
    return ranked;
}

std::vector<NegativeCandidate> top_negatives(const VocabDistribution& distribution, const Tokenizer& tokenizer,
                                             int k, const std::set<std::string>& exclude) {
    if (k < 1) throw Error(ErrorKind::InvalidArgument, "top_negatives: k must be >= 1");
    std::set<std::string> excluded;
    for (const auto& word : exclude) excluded.insert(normalize_word(word));

    std::vector<NegativeCandidate> out;
    int rank = 0;
    for (auto id : ranked_vocabulary(distribution.probs, tokenizer)) {
        const auto key = tokenizer.normalized_surface(id);
        if (key.empty()) continue;
        ++rank;
        if (excluded.count(key)) continue;
        auto surface = tokenizer.detokenize({id});
        const auto first = surface.find_first_not_of(" \t\n");
        const auto last = surface.find_last_not_of(" \t\n");
        surface = first == std::string::npos ? std::string() : surface.substr(first, last - first + 1);
        out.push_back({std::move(surface), id, distribution.probs(id), rank});
        if (static_cast<int>(out.size()) == k) return out;
    }
    throw Error(ErrorKind::InvalidArgument, "top_negatives: only " + std::to_string(out.size()) +
                                                " eligible tokens, " + std::to_string(k) + " requested");
}

AugmentedInstance augment_instance(const Instance& instance, const EncoderModel& model, const Tokenizer& tokenizer,
                                   int max_len) {
    if (!instance.gold_index) {
        throw Error(ErrorKind::InvalidArgument, "augmentation requires gold (instance '" + instance.id + "')");
    }
    if (instance.nal) {
        throw Error(ErrorKind::InvalidArgument, "instance '" + instance.id + "' is already augmented");
    }
    const auto& gold = instance.candidates.at(static_cast<std::size_t>(*instance.gold_index));
    const auto dist = probe_distribution(instance, model, tokenizer, max_len);
    const auto mined = top_negatives(dist, tokenizer, 1, {gold}).front();

    NalMeta meta;
    meta.token = mined.surface;
    meta.probability = mined.probability;
    meta.rank = mined.rank;
    meta.skipped_gold = mined.rank > 1;
    const auto key = normalize_word(mined.surface);
    meta.matches_distractor = std::any_of(instance.candidates.begin(), instance.candidates.end(),
                                          [&](const std::string& c) { return normalize_word(c) == key; });

    AugmentedInstance out{instance};
    out.instance.candidates.push_back(mined.surface);
    out.instance.nal = meta;
    return out;
}

DatasetSplit augment_split(const DatasetSplit& split, const EncoderModel& model, const Tokenizer& tokenizer,
                           int max_len) {
    DatasetSplit out{split.name, split.task, {}};
    out.instances.reserve(split.size());
    for (const auto& inst : split.instances) {
        out.instances.push_back(augment_instance(inst, model, tokenizer, max_len).instance);
    }
    return out;
}

double zero_shot_accuracy(const DatasetSplit& split, const EncoderModel& model, const Tokenizer& tokenizer,
                          Similarity similarity, int max_len) {
    if (split.empty()) throw Error(ErrorKind::InvalidArgument, "zero_shot_accuracy: empty split");
    split.require_labels("zero_shot_accuracy");
    std::size_t correct = 0;
    for (const auto& inst : split.instances) {
        if (zero_shot_rank(inst, model, tokenizer, similarity, max_len).front().index == *inst.gold_index) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(split.size());
}

}  // namespace recam

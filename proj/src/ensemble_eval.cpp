#include "recam/ensemble_eval.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace recam {

Predictions ensemble(const std::vector<Predictions>& members, std::string model_id) {
    if (members.empty()) throw Error(ErrorKind::InvalidArgument, "ensemble: no members");
    const auto& first = members.front();
    std::vector<std::unordered_map<std::string, const PredictionRecord*>> lookup(members.size());
    for (std::size_t m = 0; m < members.size(); ++m) {
        validate_predictions(members[m]);
        if (members[m].records.size() != first.records.size()) {
            throw Error(ErrorKind::Data, "ensemble: member '" + members[m].model_id + "' covers a different id set");
        }
        for (const auto& rec : members[m].records) lookup[m].emplace(rec.id, &rec);
    }

    Predictions out;
    out.model_id = std::move(model_id);
    out.records.reserve(first.records.size());
    for (const auto& base : first.records) {
        // Sorted values, averaged as offsets from the smallest: the result is
        // independent of member order and exact when all members agree.
        std::vector<std::vector<Real>> values(base.probs.size());
        for (std::size_t m = 0; m < members.size(); ++m) {
            auto it = lookup[m].find(base.id);
            if (it == lookup[m].end()) {
                throw Error(ErrorKind::Data, "ensemble: id '" + base.id + "' missing from '" + members[m].model_id + "'");
            }
            const auto& probs = it->second->probs;
            if (probs.size() != values.size()) {
                throw Error(ErrorKind::Data, "ensemble: candidate count mismatch for '" + base.id + "'");
            }
            for (std::size_t k = 0; k < values.size(); ++k) values[k].push_back(probs[k]);
        }
        std::vector<Real> mean(values.size(), 0.0);
        for (std::size_t k = 0; k < values.size(); ++k) {
            std::sort(values[k].begin(), values[k].end());
            const Real base = values[k].front();
            Real offset = 0.0;
            for (auto v : values[k]) offset += v - base;
            mean[k] = base + offset / static_cast<Real>(members.size());
        }
        PredictionRecord rec{base.id, std::move(mean), 0};
        rec.choice = argmax_lowest(rec.probs);
        out.records.push_back(std::move(rec));
    }
    return out;
}

namespace {

std::unordered_map<std::string, const PredictionRecord*> index_predictions(const Predictions& predictions,
                                                                           const DatasetSplit& split) {
    std::unordered_map<std::string, const PredictionRecord*> by_id;
    for (const auto& rec : predictions.records) by_id.emplace(rec.id, &rec);
    if (by_id.size() != split.size()) {
        throw Error(ErrorKind::Data, "predictions cover " + std::to_string(by_id.size()) + " ids but the split has " +
                                         std::to_string(split.size()));
    }
    for (const auto& inst : split.instances) {
        if (!by_id.count(inst.id)) throw Error(ErrorKind::Data, "no prediction for instance '" + inst.id + "'");
    }
    return by_id;
}

}  // namespace

AccuracyResult score_predictions(const Predictions& predictions, const DatasetSplit& split) {
    if (split.empty()) throw Error(ErrorKind::InvalidArgument, "accuracy: empty split");
    split.require_labels("accuracy");
    const auto by_id = index_predictions(predictions, split);
    AccuracyResult result;
    result.total = split.size();
    for (const auto& inst : split.instances) {
        if (by_id.at(inst.id)->choice == *inst.gold_index) ++result.correct;
    }
    return result;
}

double accuracy(const Predictions& predictions, const DatasetSplit& split) {
    return score_predictions(predictions, split).accuracy();
}

LengthBucketReport length_buckets(const Predictions& predictions, const DatasetSplit& split,
                                  const Tokenizer& tokenizer, const std::vector<long>& edges) {
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (edges[i] <= edges[i - 1]) {
            throw Error(ErrorKind::InvalidArgument, "length_buckets: edges must be strictly increasing");
        }
    }
    split.require_labels("length_buckets");
    const auto by_id = index_predictions(predictions, split);

    LengthBucketReport report;
    report.edges = edges;
    long lower = std::numeric_limits<long>::min();
    for (auto e : edges) {
        report.buckets.push_back({lower, e, 0, 0, std::nullopt});
        lower = e;
    }
    report.buckets.push_back({lower, std::numeric_limits<long>::max(), 0, 0, std::nullopt});

    for (const auto& inst : split.instances) {
        const auto length = static_cast<long>(tokenizer.tokenize(inst.passage).size());
        const auto b = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), length) - edges.begin());
        auto& bucket = report.buckets[b];
        ++bucket.count;
        if (by_id.at(inst.id)->choice == *inst.gold_index) ++bucket.correct;
    }
    for (auto& bucket : report.buckets) {
        if (bucket.count) bucket.accuracy = static_cast<double>(bucket.correct) / static_cast<double>(bucket.count);
    }
    return report;
}

namespace {

std::string bucket_label(const LengthBucket& b) {
    const bool open_low = b.lower == std::numeric_limits<long>::min();
    const bool open_high = b.upper == std::numeric_limits<long>::max();
    std::string low = open_low ? "0" : std::to_string(b.lower);
    std::string high = open_high ? "inf" : std::to_string(b.upper);
    return "[" + low + "," + high + ")";
}

}  // namespace

std::string bucket_table(const LengthBucketReport& report) {
    std::ostringstream os;
    os << std::left << std::setw(16) << "bucket" << std::right << std::setw(8) << "count" << std::setw(10)
       << "accuracy" << '\n';
    for (const auto& b : report.buckets) {
        os << std::left << std::setw(16) << bucket_label(b) << std::right << std::setw(8) << b.count << std::setw(10);
        if (b.accuracy) {
            os << std::fixed << std::setprecision(4) << *b.accuracy;
        } else {
            os << "n/a";
        }
        os << '\n';
    }
    return os.str();
}

std::string bucket_csv(const LengthBucketReport& report) {
    std::ostringstream os;
    os << "bucket,count,accuracy\n";
    for (const auto& b : report.buckets) {
        os << bucket_label(b) << ',' << b.count << ',';
        if (b.accuracy) os << std::setprecision(17) << *b.accuracy;
        os << '\n';
    }
    return os.str();
}

std::string bucket_json(const LengthBucketReport& report) {
    nlohmann::ordered_json j;
    j["edges"] = report.edges;
    j["buckets"] = nlohmann::ordered_json::array();
    for (const auto& b : report.buckets) {
        nlohmann::ordered_json entry;
        entry["bucket"] = bucket_label(b);
        entry["count"] = b.count;
        entry["correct"] = b.correct;
        entry["accuracy"] = b.accuracy ? nlohmann::ordered_json(*b.accuracy) : nlohmann::ordered_json(nullptr);
        j["buckets"].push_back(entry);
    }
    return j.dump(2);
}

TransferReport transfer_eval(const EncoderModel& encoder, const ScoringHead& head, const Tokenizer& tokenizer,
                             const DatasetSplit& target, const TrainConfig& config, std::string source_task) {
    if (target.empty()) throw Error(ErrorKind::InvalidArgument, "transfer_eval: empty target split");
    target.require_labels("transfer_eval");
    TransferReport report;
    report.source_task = std::move(source_task);
    report.target_task = to_string(target.task);
    report.predictions = predict(target, encoder, head, tokenizer, config, report.source_task + "->" + report.target_task);
    report.accuracy = accuracy(report.predictions, target);
    report.instances = target.size();
    return report;
}

std::vector<ErrorCase> error_report(const Predictions& predictions, const DatasetSplit& split,
                                    const DatasetSplit* augmented) {
    split.require_labels("error_report");
    const auto by_id = index_predictions(predictions, split);
    std::unordered_map<std::string, const Instance*> aug_by_id;
    if (augmented) {
        for (const auto& inst : augmented->instances) aug_by_id.emplace(inst.id, &inst);
    }

    std::vector<ErrorCase> cases;
    for (const auto& inst : split.instances) {
        const auto& rec = *by_id.at(inst.id);
        if (rec.choice == *inst.gold_index) continue;
        ErrorCase c;
        c.id = inst.id;
        c.passage_excerpt = inst.passage.size() > kExcerptChars ? inst.passage.substr(0, kExcerptChars) + "..."
                                                                : inst.passage;
        c.question = inst.question;
        const auto original = static_cast<std::size_t>(inst.original_candidate_count());
        c.candidates.assign(inst.candidates.begin(), inst.candidates.begin() + static_cast<std::ptrdiff_t>(original));
        c.gold = *inst.gold_index;
        c.chosen = rec.choice;
        c.confidence = rec.probs.at(static_cast<std::size_t>(rec.choice));
        if (inst.nal) {
            c.nal_token = inst.nal->token;
        } else if (auto it = aug_by_id.find(inst.id); it != aug_by_id.end() && it->second->nal) {
            c.nal_token = it->second->nal->token;
        }
        cases.push_back(std::move(c));
    }
    std::stable_sort(cases.begin(), cases.end(), [](const ErrorCase& a, const ErrorCase& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        return a.id < b.id;
    });
    return cases;
}

std::string error_report_json(const std::vector<ErrorCase>& cases) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& c : cases) {
        nlohmann::ordered_json j;
        j["id"] = c.id;
        j["passage"] = c.passage_excerpt;
        j["question"] = c.question;
        j["candidates"] = c.candidates;
        j["gold"] = c.gold;
        j["chosen"] = c.chosen;
        j["confidence"] = c.confidence;
        j["nal_token"] = c.nal_token ? nlohmann::ordered_json(*c.nal_token) : nlohmann::ordered_json(nullptr);
        arr.push_back(j);
    }
    return arr.dump(2);
}

std::string error_report_text(const std::vector<ErrorCase>& cases) {
    std::ostringstream os;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        os << "Case " << (i + 1) << " [" << c.id << "]\n";
        os << "  Passage:  " << c.passage_excerpt << '\n';
        os << "  Question: " << c.question << '\n';
        os << "  Answer:  ";
        for (std::size_t k = 0; k < c.candidates.size(); ++k) {
            os << " (" << static_cast<char>('A' + k) << ") " << c.candidates[k];
        }
        os << '\n';
        if (c.nal_token) os << "  Negative augmented choice: " << *c.nal_token << '\n';
        os << "  Right option: (" << static_cast<char>('A' + c.gold) << ") "
           << c.candidates.at(static_cast<std::size_t>(c.gold)) << '\n';
        os << "  Model chose:  (" << static_cast<char>('A' + c.chosen) << ") "
           << c.candidates.at(static_cast<std::size_t>(c.chosen)) << " with p=" << std::fixed << std::setprecision(4)
           << c.confidence << "\n\n";
    }
    return os.str();
}

}  // namespace recam

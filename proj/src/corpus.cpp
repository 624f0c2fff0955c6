#include "recam/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "recam/tokenizer.hpp"

namespace recam {

using ordered_json = nlohmann::ordered_json;

std::string to_string(SplitName name) {
    switch (name) {
    case SplitName::Train: return "train";
    case SplitName::Trial: return "trial";
    case SplitName::Dev: return "dev";
    case SplitName::Test: return "test";
    }
    return "train";
}

std::string to_string(TaskTag tag) {
    switch (tag) {
    case TaskTag::Subtask1: return "subtask1";
    case TaskTag::Subtask2: return "subtask2";
    case TaskTag::Synthetic: return "synthetic";
    }
    return "synthetic";
}

SplitName parse_split_name(std::string_view text) {
    if (text == "train") return SplitName::Train;
    if (text == "trial") return SplitName::Trial;
    if (text == "dev") return SplitName::Dev;
    if (text == "test") return SplitName::Test;
    throw Error(ErrorKind::InvalidArgument, "unknown split name '" + std::string(text) + "'");
}

TaskTag parse_task_tag(std::string_view text) {
    if (text == "subtask1" || text == "1") return TaskTag::Subtask1;
    if (text == "subtask2" || text == "2") return TaskTag::Subtask2;
    if (text == "synthetic") return TaskTag::Synthetic;
    throw Error(ErrorKind::InvalidArgument, "unknown task tag '" + std::string(text) + "'");
}

std::string to_string(IssueCode code) {
    switch (code) {
    case IssueCode::MissingPlaceholder: return "missing placeholder";
    case IssueCode::MultiplePlaceholders: return "multiple placeholders";
    case IssueCode::TooFewCandidates: return "too few candidates";
    case IssueCode::EmptyCandidate: return "empty candidate";
    case IssueCode::GoldOutOfRange: return "gold index out of range";
    }
    return "unknown issue";
}

void DatasetSplit::require_labels(std::string_view context) const {
    for (const auto& inst : instances) {
        if (!inst.gold_index) {
            throw Error(ErrorKind::Data,
                        std::string(context) + ": instance '" + inst.id + "' has no gold label");
        }
    }
}

std::size_t count_placeholders(std::string_view text) {
    std::size_t count = 0;
    for (auto pos = text.find(kPlaceholder); pos != std::string_view::npos;
         pos = text.find(kPlaceholder, pos + kPlaceholder.size())) {
        ++count;
    }
    return count;
}

std::vector<Issue> validate_instance(const Instance& instance) {
    std::vector<Issue> issues;
    const auto markers = count_placeholders(instance.question);
    if (markers == 0) {
        issues.push_back({IssueCode::MissingPlaceholder, "question has no " + std::string(kPlaceholder)});
    } else if (markers > 1) {
        issues.push_back({IssueCode::MultiplePlaceholders,
                          "question has " + std::to_string(markers) + " placeholder markers"});
    }
    if (instance.candidates.size() < 2) {
        issues.push_back({IssueCode::TooFewCandidates,
                          "need at least 2 candidates, got " + std::to_string(instance.candidates.size())});
    }
    for (std::size_t i = 0; i < instance.candidates.size(); ++i) {
        if (instance.candidates[i].empty()) {
            issues.push_back({IssueCode::EmptyCandidate, "candidate " + std::to_string(i) + " is empty"});
        }
    }
    if (instance.gold_index) {
        const int gold = *instance.gold_index;
        if (gold < 0 || gold >= static_cast<int>(instance.candidates.size())) {
            issues.push_back({IssueCode::GoldOutOfRange, "label " + std::to_string(gold) + " outside [0, " +
                                                             std::to_string(instance.candidates.size()) + ")"});
        }
    }
    return issues;
}

namespace {

std::string option_key(std::size_t k) { return "option_" + std::to_string(k); }

const ordered_json& require_field(const ordered_json& record, const std::string& key) {
    auto it = record.find(key);
    if (it == record.end()) {
        throw Error(ErrorKind::Parse, "missing field '" + key + "'");
    }
    return *it;
}

std::string require_string(const ordered_json& record, const std::string& key) {
    const auto& value = require_field(record, key);
    if (!value.is_string()) {
        throw Error(ErrorKind::Parse, "field '" + key + "' is not a string");
    }
    return value.get<std::string>();
}

}  // namespace

Instance parse_record(std::string_view line, const std::string& fallback_id) {
    ordered_json record;
    try {
        record = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Parse, std::string("invalid JSON: ") + e.what());
    }
    if (!record.is_object()) {
        throw Error(ErrorKind::Parse, "record is not a JSON object");
    }

    Instance inst;
    if (auto it = record.find("id"); it != record.end()) {
        inst.id = it->is_string() ? it->get<std::string>() : it->dump();
    } else {
        inst.id = fallback_id;
    }
    inst.passage = require_string(record, "article");
    inst.question = require_string(record, "question");

    std::size_t highest = 0;
    bool any_option = false;
    for (const auto& [key, value] : record.items()) {
        if (key.rfind("option_", 0) != 0) continue;
        const auto suffix = key.substr(7);
        if (suffix.empty() || !std::all_of(suffix.begin(), suffix.end(), [](char c) { return c >= '0' && c <= '9'; })) {
            continue;
        }
        highest = std::max<std::size_t>(highest, std::stoul(suffix));
        any_option = true;
    }
    if (!any_option) {
        throw Error(ErrorKind::Parse, "missing field 'option_0'");
    }
    for (std::size_t k = 0; k <= highest; ++k) {
        inst.candidates.push_back(require_string(record, option_key(k)));
    }

    if (auto it = record.find("label"); it != record.end() && !it->is_null()) {
        if (it->is_number_integer()) {
            inst.gold_index = it->get<int>();
        } else if (it->is_string() && !it->get<std::string>().empty()) {
            try {
                inst.gold_index = std::stoi(it->get<std::string>());
            } catch (const std::exception&) {
                throw Error(ErrorKind::Parse, "field 'label' is not an integer");
            }
        } else {
            throw Error(ErrorKind::Parse, "field 'label' is not an integer");
        }
    }

    if (auto it = record.find("nal_meta"); it != record.end() && !it->is_null()) {
        const auto& meta = *it;
        NalMeta nal;
        nal.token = inst.candidates.back();
        nal.probability = meta.value("probability", 0.0);
        nal.rank = meta.value("rank", 0);
        nal.skipped_gold = meta.value("skipped_gold", false);
        nal.matches_distractor = meta.value("matches_distractor", false);
        if (inst.candidates.size() < 3) {
            throw Error(ErrorKind::Parse, "nal_meta present but fewer than 3 options");
        }
        inst.nal = nal;
    }
    return inst;
}

std::string serialize_record(const Instance& instance) {
    ordered_json record;
    record["id"] = instance.id;
    record["article"] = instance.passage;
    record["question"] = instance.question;
    for (std::size_t k = 0; k < instance.candidates.size(); ++k) {
        record[option_key(k)] = instance.candidates[k];
    }
    if (instance.gold_index) {
        record["label"] = *instance.gold_index;
    }
    if (instance.nal) {
        record["nal_meta"] = {{"probability", instance.nal->probability},
                              {"rank", instance.nal->rank},
                              {"skipped_gold", instance.nal->skipped_gold},
                              {"matches_distractor", instance.nal->matches_distractor}};
    }
    return record.dump();
}

SplitName infer_split_name(const std::filesystem::path& path) {
    auto stem = path.stem().string();
    std::transform(stem.begin(), stem.end(), stem.begin(), [](unsigned char c) { return std::tolower(c); });
    if (stem.find("trial") != std::string::npos) return SplitName::Trial;
    if (stem.find("dev") != std::string::npos) return SplitName::Dev;
    if (stem.find("test") != std::string::npos) return SplitName::Test;
    return SplitName::Train;
}

LoadResult load_jsonl_with_report(const std::filesystem::path& path, TaskTag task,
                                  std::optional<SplitName> name) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot read dataset file " + path.string());
    }
    LoadResult result;
    result.split.task = task;
    result.split.name = name.value_or(infer_split_name(path));

    const auto stem = path.stem().string();
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;

        Instance inst;
        try {
            inst = parse_record(line, stem + "-" + std::to_string(line_no));
        } catch (const Error& e) {
            throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (!seen.insert(inst.id).second) {
            throw Error(ErrorKind::Data, path.string() + ":" + std::to_string(line_no) + ": duplicate id '" +
                                             inst.id + "'");
        }
        ++result.report.total;
        auto issues = validate_instance(inst);
        if (issues.empty()) {
            ++result.report.accepted;
            result.split.instances.push_back(std::move(inst));
        } else {
            ++result.report.rejected;
            result.report.rejections.push_back({line_no, inst.id, std::move(issues)});
        }
    }
    return result;
}

DatasetSplit load_jsonl(const std::filesystem::path& path, TaskTag task, std::optional<SplitName> name) {
    return load_jsonl_with_report(path, task, name).split;
}

void save_jsonl(const DatasetSplit& split, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot write " + path.string());
    }
    for (const auto& inst : split.instances) {
        out << serialize_record(inst) << '\n';
    }
}

SplitStats split_stats(const DatasetSplit& split, const Tokenizer& tokenizer) {
    if (split.empty()) {
        throw Error(ErrorKind::InvalidArgument, "split_stats: empty split has no average passage length");
    }
    SplitStats stats;
    stats.count = split.size();
    Real tokens = 0.0;
    Real words = 0.0;
    for (const auto& inst : split.instances) {
        tokens += static_cast<Real>(tokenizer.tokenize(inst.passage).size());
        std::istringstream ss(inst.passage);
        std::string word;
        while (ss >> word) words += 1.0;
    }
    stats.avg_passage_tokens = tokens / static_cast<Real>(stats.count);
    stats.avg_passage_words = words / static_cast<Real>(stats.count);
    return stats;
}

}  // namespace recam

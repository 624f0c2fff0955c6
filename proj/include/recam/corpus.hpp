#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "recam/types.hpp"

namespace recam {

class Tokenizer;

inline constexpr std::string_view kPlaceholder = "@placeholder";

/// Bookkeeping for a candidate appended by negative augmentation. The mined
/// candidate always sits in the last slot of Instance::candidates.
struct NalMeta {
    std::string token;
    Real probability = 0.0;
    int rank = 0;                 // rank in the full vocabulary ordering, 1 = most probable
    bool skipped_gold = false;    // the model's top-1 was the gold answer
    bool matches_distractor = false;

    bool operator==(const NalMeta&) const = default;
};

struct Instance {
    std::string id;
    std::string passage;
    std::string question;
    std::vector<std::string> candidates;
    std::optional<int> gold_index;
    std::optional<NalMeta> nal;

    /// Number of candidates before augmentation.
    int original_candidate_count() const {
        return static_cast<int>(candidates.size()) - (nal ? 1 : 0);
    }

    bool operator==(const Instance&) const = default;
};

enum class SplitName { Train, Trial, Dev, Test };
enum class TaskTag { Subtask1, Subtask2, Synthetic };

std::string to_string(SplitName name);
std::string to_string(TaskTag tag);
SplitName parse_split_name(std::string_view text);
TaskTag parse_task_tag(std::string_view text);

struct DatasetSplit {
    SplitName name = SplitName::Train;
    TaskTag task = TaskTag::Synthetic;
    std::vector<Instance> instances;

    std::size_t size() const { return instances.size(); }
    bool empty() const { return instances.empty(); }
    /// Throws if an instance lacks a gold index.
    void require_labels(std::string_view context) const;
};

enum class IssueCode {
    MissingPlaceholder,
    MultiplePlaceholders,
    TooFewCandidates,
    EmptyCandidate,
    GoldOutOfRange,
};

std::string to_string(IssueCode code);

struct Issue {
    IssueCode code;
    std::string detail;
};

/// Empty iff every Instance invariant holds.
std::vector<Issue> validate_instance(const Instance& instance);

struct RejectedRecord {
    std::size_t line = 0;
    std::string id;
    std::vector<Issue> issues;
};

struct ValidationReport {
    std::size_t total = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::vector<RejectedRecord> rejections;
};

struct LoadResult {
    DatasetSplit split;
    ValidationReport report;
};

/// Strict JSON-Lines reader. Schema errors (bad JSON, missing fields, duplicate
/// ids) throw with the offending line number; records that parse but violate
/// Instance invariants are dropped and listed in the report.
LoadResult load_jsonl_with_report(const std::filesystem::path& path, TaskTag task,
                                  std::optional<SplitName> name = std::nullopt);

DatasetSplit load_jsonl(const std::filesystem::path& path, TaskTag task,
                        std::optional<SplitName> name = std::nullopt);

/// Parses one record. `fallback_id` is used when the record has no "id".
Instance parse_record(std::string_view line, const std::string& fallback_id);

std::string serialize_record(const Instance& instance);
void save_jsonl(const DatasetSplit& split, const std::filesystem::path& path);

/// Guesses the split from a file name ("dev", "trial", "test", otherwise train).
SplitName infer_split_name(const std::filesystem::path& path);

struct SplitStats {
    std::size_t count = 0;
    Real avg_passage_tokens = 0.0;
    Real avg_passage_words = 0.0;
};

SplitStats split_stats(const DatasetSplit& split, const Tokenizer& tokenizer);

std::size_t count_placeholders(std::string_view text);

}  // namespace recam

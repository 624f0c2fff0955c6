#include <doctest.h>

#include "recam/corpus.hpp"
#include "recam/tokenizer.hpp"
#include "support/fixtures.hpp"

using namespace recam;
using recam::testing::TempDir;

namespace {

const char* kRecord =
    R"({"id":"r1","article":"the cat sat .","question":"a @placeholder sat .","option_0":"cat","option_1":"dog","option_2":"cow","option_3":"pig","option_4":"hen","label":0})";

bool has_issue(const std::vector<Issue>& issues, IssueCode code) {
    for (const auto& i : issues) {
        if (i.code == code) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("parse_record reads the released schema") {
    const auto inst = parse_record(kRecord, "fallback");
    CHECK(inst.id == "r1");
    CHECK(inst.passage == "the cat sat .");
    REQUIRE(inst.candidates.size() == 5);
    CHECK(inst.candidates[4] == "hen");
    CHECK(inst.gold_index == 0);
    CHECK_FALSE(inst.nal.has_value());
}

TEST_CASE("parse_record accepts a string label and falls back on a missing id") {
    const auto inst = parse_record(
        R"({"article":"p","question":"@placeholder","option_0":"a","option_1":"b","label":"1"})", "file-7");
    CHECK(inst.id == "file-7");
    CHECK(inst.gold_index == 1);
}

TEST_CASE("unlabeled records have no gold") {
    const auto inst =
        parse_record(R"({"id":"t","article":"p","question":"@placeholder","option_0":"a","option_1":"b"})", "x");
    CHECK_FALSE(inst.gold_index.has_value());
}

TEST_CASE("serialize_record round-trips, including NAL bookkeeping") {
    auto inst = recam::testing::davies_instance();
    inst.candidates.push_back("won");
    inst.nal = NalMeta{"won", 0.42, 1, false, false};
    const auto back = parse_record(serialize_record(inst), "unused");
    CHECK(back == inst);
    CHECK(back.original_candidate_count() == 5);
}

TEST_CASE("validate_instance reports each invariant") {
    auto inst = recam::testing::davies_instance();
    CHECK(validate_instance(inst).empty());

    auto none = inst;
    none.question = "no marker";
    CHECK(has_issue(validate_instance(none), IssueCode::MissingPlaceholder));

    auto twice = inst;
    twice.question = "@placeholder and @placeholder";
    CHECK(has_issue(validate_instance(twice), IssueCode::MultiplePlaceholders));

    auto one = inst;
    one.candidates = {"only"};
    one.gold_index = 0;
    CHECK(has_issue(validate_instance(one), IssueCode::TooFewCandidates));

    auto blank = inst;
    blank.candidates[2] = "";
    CHECK(has_issue(validate_instance(blank), IssueCode::EmptyCandidate));

    auto range = inst;
    range.gold_index = 5;
    CHECK(has_issue(validate_instance(range), IssueCode::GoldOutOfRange));
}

TEST_CASE("load_jsonl keeps valid records and reports rejected ones") {
    TempDir dir;
    const auto path = dir.write(
        "train.jsonl",
        std::string(kRecord) + "\n" +
            R"({"id":"bad","article":"p","question":"no marker","option_0":"a","option_1":"b","label":0})" + "\n\n");
    const auto result = load_jsonl_with_report(path, TaskTag::Subtask1);
    CHECK(result.report.total == 2);
    CHECK(result.report.accepted == 1);
    CHECK(result.report.rejected == 1);
    REQUIRE(result.report.rejections.size() == 1);
    CHECK(result.report.rejections[0].line == 2);
    CHECK(result.report.rejections[0].id == "bad");
    CHECK(result.split.size() == 1);
    CHECK(result.split.name == SplitName::Train);
}

TEST_CASE("schema errors carry the line number") {
    TempDir dir;
    const auto broken = dir.write("dev.jsonl", std::string(kRecord) + "\n{not json\n");
    try {
        load_jsonl(broken, TaskTag::Subtask1);
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Parse);
        CHECK(std::string(e.what()).find("dev.jsonl:2") != std::string::npos);
    }

    const auto missing = dir.write("m.jsonl", R"({"id":"x","question":"@placeholder","option_0":"a","option_1":"b"})");
    CHECK_THROWS_AS(load_jsonl(missing, TaskTag::Subtask1), Error);

    const auto dup = dir.write("d.jsonl", std::string(kRecord) + "\n" + kRecord + "\n");
    CHECK_THROWS_WITH_AS(load_jsonl(dup, TaskTag::Subtask1), doctest::Contains("duplicate"), Error);

    CHECK_THROWS_AS(load_jsonl(dir / "absent.jsonl", TaskTag::Subtask1), Error);
}

TEST_CASE("save_jsonl then load_jsonl is the identity") {
    TempDir dir;
    DatasetSplit split;
    split.name = SplitName::Dev;
    split.instances = {recam::testing::davies_instance(), recam::testing::aurora_instance()};
    save_jsonl(split, dir / "dev.jsonl");
    const auto back = load_jsonl(dir / "dev.jsonl", TaskTag::Subtask2);
    CHECK(back.name == SplitName::Dev);
    CHECK(back.task == TaskTag::Subtask2);
    CHECK(back.instances == split.instances);
}

TEST_CASE("split names and task tags") {
    CHECK(infer_split_name("data/Task_1_dev.jsonl") == SplitName::Dev);
    CHECK(infer_split_name("trial.jsonl") == SplitName::Trial);
    CHECK(infer_split_name("x/test.jsonl") == SplitName::Test);
    CHECK(infer_split_name("Task_2_train.jsonl") == SplitName::Train);
    for (auto n : {SplitName::Train, SplitName::Trial, SplitName::Dev, SplitName::Test}) {
        CHECK(parse_split_name(to_string(n)) == n);
    }
    for (auto t : {TaskTag::Subtask1, TaskTag::Subtask2, TaskTag::Synthetic}) {
        CHECK(parse_task_tag(to_string(t)) == t);
    }
    CHECK_THROWS_AS(parse_split_name("bogus"), Error);
}

TEST_CASE("split_stats averages passage lengths") {
    const WhitespaceTokenizer tok({"a", "b", "c"});
    DatasetSplit split;
    Instance x{"x", "a b c", "@placeholder", {"a", "b"}, 0, std::nullopt};
    Instance y{"y", "a", "@placeholder", {"a", "b"}, 0, std::nullopt};
    split.instances = {x, y};
    const auto s = split_stats(split, tok);
    CHECK(s.count == 2);
    CHECK(s.avg_passage_tokens == doctest::Approx(2.0));
    CHECK(s.avg_passage_words == doctest::Approx(2.0));
    CHECK_THROWS_AS(split_stats(DatasetSplit{}, tok), Error);
}

TEST_CASE("require_labels rejects unlabeled data") {
    DatasetSplit split;
    split.instances = {recam::testing::davies_instance()};
    CHECK_NOTHROW(split.require_labels("test"));
    split.instances[0].gold_index.reset();
    CHECK_THROWS_AS(split.require_labels("test"), Error);
}

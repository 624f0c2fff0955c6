#include <doctest.h>

#include <algorithm>
#include <random>

#include "recam/textprep.hpp"
#include "support/fixtures.hpp"

using namespace recam;

TEST_CASE("substitute fills the single placeholder") {
    const auto inst = recam::testing::davies_instance();
    const auto qa = substitute(inst.question, "achieved");
    CHECK(qa.find("Davies achieved two gold medals") != std::string::npos);
    CHECK(qa.find("@placeholder") == std::string::npos);
    CHECK(substitute("@placeholder", "x") == "x");
    CHECK_THROWS_WITH_AS(substitute("no marker", "x"), doctest::Contains("missing placeholder"), Error);
    CHECK_THROWS_WITH_AS(substitute("@placeholder @placeholder", "x"), doctest::Contains("multiple placeholders"),
                         Error);
    CHECK_THROWS_AS(substitute("@placeholder", ""), Error);
}

TEST_CASE("mask_question inserts the tokenizer's mask surface") {
    const WhitespaceTokenizer tok({"a", "b"});
    CHECK(mask_question("a @placeholder b", tok) == "a [MASK] b");
}

TEST_CASE("chunk_passage example: length 10, budget 4, stride 2") {
    const auto spans = chunk_passage(10, 4, 2);
    CHECK(spans == std::vector<ChunkSpan>{{0, 4}, {2, 6}, {4, 8}, {6, 10}});
}

TEST_CASE("chunk_passage edge cases") {
    CHECK(chunk_passage(0, 4, 2) == std::vector<ChunkSpan>{{0, 0}});
    CHECK(chunk_passage(3, 4, 2) == std::vector<ChunkSpan>{{0, 3}});
    CHECK(chunk_passage(5, 4, 4) == std::vector<ChunkSpan>{{0, 4}, {4, 5}});
    CHECK_THROWS_AS(chunk_passage(5, 0, 1), Error);
    CHECK_THROWS_AS(chunk_passage(5, 4, 0), Error);
    CHECK_THROWS_AS(chunk_passage(5, 4, 5), Error);
}

TEST_CASE("chunk_passage property: bounded, covering, strided") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = std::uniform_int_distribution<std::size_t>(0, 300)(rng);
        const int budget = std::uniform_int_distribution<int>(1, 40)(rng);
        const int stride = std::uniform_int_distribution<int>(1, budget)(rng);
        const auto spans = chunk_passage(n, budget, stride);
        std::vector<int> hits(n, 0);
        for (std::size_t c = 0; c < spans.size(); ++c) {
            CHECK(spans[c].size() <= static_cast<std::size_t>(budget));
            CHECK(spans[c].begin == c * static_cast<std::size_t>(stride));
            for (auto t = spans[c].begin; t < spans[c].end; ++t) ++hits[t];
        }
        CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h > 0; }));
        CHECK(spans.back().end == n);
    }
}

TEST_CASE("build_inputs produces [CLS] Q-A [SEP] chunk [SEP] per candidate and chunk") {
    const auto inst = recam::testing::davies_instance();
    const auto tok = WhitespaceTokenizer::from_texts({inst.passage, inst.question, "suffered promoted remains wants achieved"});
    const int max_len = 48;
    const auto inputs = build_inputs(inst, tok, max_len);
    const auto passage = tok.tokenize(inst.passage);

    int chunks_per_candidate = -1;
    for (int k = 0; k < 5; ++k) {
        const auto qa = tok.tokenize(substitute(inst.question, inst.candidates[static_cast<std::size_t>(k)]));
        std::vector<TokenId> prefix{tok.specials().cls};
        prefix.insert(prefix.end(), qa.begin(), qa.end());
        prefix.push_back(tok.specials().sep);
        int chunks = 0;
        std::vector<int> hits(passage.size(), 0);
        for (const auto& in : inputs) {
            if (in.candidate_index != k) continue;
            CHECK(in.chunk_index == chunks);
            ++chunks;
            CHECK(in.token_ids.size() <= static_cast<std::size_t>(max_len));
            CHECK(std::equal(prefix.begin(), prefix.end(), in.token_ids.begin()));
            CHECK(in.token_ids.back() == tok.specials().sep);
            CHECK_NOTHROW(check_encoded_input(in, tok, max_len));
            // The chunk body is a contiguous passage window.
            const std::vector<TokenId> body(in.token_ids.begin() + static_cast<std::ptrdiff_t>(prefix.size()),
                                            in.token_ids.end() - 1);
            const auto at = std::search(passage.begin(), passage.end(), body.begin(), body.end());
            REQUIRE(at != passage.end());
            for (std::size_t t = 0; t < body.size(); ++t) ++hits[static_cast<std::size_t>(at - passage.begin()) + t];
        }
        CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h > 0; }));
        if (chunks_per_candidate < 0) chunks_per_candidate = chunks;
        CHECK(chunks == chunks_per_candidate);
    }
    CHECK(chunks_per_candidate > 1);
    // Candidate-major ordering.
    CHECK(std::is_sorted(inputs.begin(), inputs.end(),
                         [](const EncodedInput& a, const EncodedInput& b) { return a.candidate_index < b.candidate_index; }));
}

TEST_CASE("build_inputs rejects a question that leaves no passage budget") {
    const auto inst = recam::testing::davies_instance();
    const auto tok = WhitespaceTokenizer::from_texts({inst.passage, inst.question});
    CHECK_THROWS_AS(build_inputs(inst, tok, 10), Error);
}

TEST_CASE("build_probe_input masks the question and uses the first chunk") {
    const auto inst = recam::testing::davies_instance();
    const auto tok = WhitespaceTokenizer::from_texts({inst.passage, inst.question});
    const auto probe = build_probe_input(inst, tok, 40);
    REQUIRE(probe.mask_position.has_value());
    CHECK(probe.token_ids[static_cast<std::size_t>(*probe.mask_position)] == tok.specials().mask);
    CHECK(std::count(probe.token_ids.begin(), probe.token_ids.end(), tok.specials().mask) == 1);
    CHECK(probe.chunk_index == 0);
    CHECK(probe.token_ids.size() <= 40);
    CHECK_NOTHROW(check_encoded_input(probe, tok, 40));
    const auto passage = tok.tokenize(inst.passage);
    const auto sep = std::find(probe.token_ids.begin(), probe.token_ids.end(), tok.specials().sep);
    CHECK(*(sep + 1) == passage.front());
}

TEST_CASE("check_encoded_input catches malformed sequences") {
    const WhitespaceTokenizer tok({"a"});
    EncodedInput in;
    in.token_ids = {1, 5, 2, 5, 2};
    CHECK_NOTHROW(check_encoded_input(in, tok, 8));
    CHECK_THROWS_AS(check_encoded_input(in, tok, 4), Error);
    in.token_ids = {5, 2, 5, 2};
    CHECK_THROWS_AS(check_encoded_input(in, tok, 8), Error);
    in.token_ids = {1, 5, 2, 5, 2};
    in.mask_position = 1;
    CHECK_THROWS_AS(check_encoded_input(in, tok, 8), Error);
}

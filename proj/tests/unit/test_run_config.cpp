#include <doctest.h>

#include <json.hpp>

#include "recam/digest.hpp"
#include "recam/run_config.hpp"
#include "support/fixtures.hpp"

using namespace recam;

TEST_CASE("defaults come from the schema") {
    const RunConfig c;
    CHECK(c.get_int("max_len") == 256);
    CHECK(c.get_double("epsilon") == 0.1);
    CHECK(c.get_int("accumulation_steps") == 32);
    CHECK(c.get_long_list("bucket_edges") == std::vector<long>{128, 256, 384, 512});
    CHECK(c.values().size() == config_schema().size());
}

TEST_CASE("config files parse key = value with comments") {
    const auto c = RunConfig::parse("# small run\nseed = 7\nepochs=3  # few\n\nmax_len = 64\n");
    CHECK(c.get_u64("seed") == 7);
    CHECK(c.get_int("epochs") == 3);
    const auto t = c.train_config();
    CHECK(t.max_len == 64);
    CHECK(t.seed == 7);
    CHECK_THROWS_WITH_AS(RunConfig::parse("nope = 1"), doctest::Contains("unknown config key"), Error);
    CHECK_THROWS_WITH_AS(RunConfig::parse("seed 7"), doctest::Contains("<config>:1"), Error);
    auto bad = RunConfig::parse("epochs = many");
    CHECK_THROWS_AS(bad.get_int("epochs"), Error);
    bad = RunConfig::parse("checkpoint_policy = sometimes");
    CHECK_THROWS_AS(bad.train_config(), Error);
}

TEST_CASE("sha256 digests") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    recam::testing::TempDir dir;
    CHECK(sha256_file(dir.write("a.txt", "abc")) == sha256_hex("abc"));
}

TEST_CASE("manifests record digests next to the artifact") {
    recam::testing::TempDir dir;
    const auto input = dir.write("in.jsonl", "data");
    RunManifest m;
    m.command = "ingest";
    m.seed = 13;
    m.config = RunConfig().values();
    m.add_input(input);
    m.outputs = {(dir / "out.json").string()};
    m.started_at = m.finished_at = utc_timestamp();
    const auto path = write_manifest(m, dir / "out.json");
    CHECK(path.filename() == "out.json.manifest.json");
    const auto j = nlohmann::json::parse(recam::testing::read_file(path));
    CHECK(j["command"] == "ingest");
    CHECK(j["inputs"][0]["sha256"] == sha256_hex("data"));
    CHECK(j["version"] == kPipelineVersion);
    CHECK(j["config"]["max_len"] == "256");
}

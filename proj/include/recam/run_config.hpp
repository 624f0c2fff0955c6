#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "recam/mcscorer.hpp"
#include "recam/tapt.hpp"
#include "recam/transformer.hpp"

namespace recam {

inline constexpr const char* kPipelineVersion = "1.0.0";
inline constexpr const char* kConfigEnvVar = "RECAM_CONFIG";

struct ConfigKey {
    const char* name;
    const char* default_value;
    const char* help;
};

/// Every key accepted in a config file, with its default.
const std::vector<ConfigKey>& config_schema();

/// Flat `key = value` settings; '#' starts a comment. Unknown keys are rejected.
class RunConfig {
public:
    RunConfig();  // schema defaults

    static RunConfig from_file(const std::filesystem::path& path);
    static RunConfig parse(const std::string& text, const std::string& origin = "<config>");

    void set(const std::string& key, const std::string& value);
    const std::string& get(const std::string& key) const;
    int get_int(const std::string& key) const;
    long get_long(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    std::vector<long> get_long_list(const std::string& key) const;

    const std::map<std::string, std::string>& values() const { return values_; }

    TrainConfig train_config() const;
    MlmTrainConfig tapt_config() const;
    ReferenceEncoderConfig encoder_config(int vocab_size, TokenId mask_id) const;

private:
    std::map<std::string, std::string> values_;
};

struct FileDigest {
    std::string path;
    std::string sha256;
};

struct RunManifest {
    std::string command;
    std::map<std::string, std::string> config;
    std::uint64_t seed = 0;
    std::vector<FileDigest> inputs;
    std::vector<std::string> outputs;
    std::string started_at;
    std::string finished_at;
    std::string version = kPipelineVersion;

    void add_input(const std::filesystem::path& path);
    std::string to_json() const;
};

std::string utc_timestamp();

/// Writes `<artifact>.manifest.json` and returns its path.
std::filesystem::path write_manifest(const RunManifest& manifest, const std::filesystem::path& artifact);

}  // namespace recam

#include "recam/run_config.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "recam/digest.hpp"

namespace recam {

const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> schema{
        {"seed", "13", "seed for initialization, shuffling and masking"},
        {"max_len", "256", "token budget per [CLS] Q-A [SEP] chunk [SEP] input"},
        {"stride", "0", "chunk stride in passage tokens; 0 = half the chunk budget"},
        {"epsilon", "0.1", "label smoothing"},
        {"learning_rate", "0.001", "AdamW learning rate"},
        {"epochs", "12", "fine-tuning epochs"},
        {"micro_batch", "1", "instances per micro-batch"},
        {"accumulation_steps", "32", "micro-batches per optimizer update"},
        {"weight_decay", "0.01", "decoupled weight decay"},
        {"checkpoint_policy", "best-on-dev", "best-on-dev | last-epoch"},
        {"layers", "2", "reference encoder layers"},
        {"heads", "4", "attention heads"},
        {"dim", "64", "model dimension"},
        {"ff_dim", "256", "feed-forward dimension"},
        {"init_std", "0.02", "initialization standard deviation"},
        {"tapt_epochs", "0", "within-task masked-LM epochs run before fine-tuning"},
        {"tapt_mask_rate", "0.15", "masking rate for generated TAPT examples"},
        {"tapt_learning_rate", "0.001", "masked-LM learning rate"},
        {"tapt_accumulation_steps", "32", "masked-LM examples per update"},
        {"similarity", "mask-likelihood", "zero-shot similarity: mask-likelihood | embedding-cosine"},
        {"bucket_edges", "128,256,384,512", "passage-length bucket edges in tokens"},
        {"tokenizer", "whitespace", "whitespace | bpe"},
        {"bpe_vocab", "", "vocab.json for the bpe tokenizer"},
        {"bpe_merges", "", "merges.txt for the bpe tokenizer"},
    };
    return schema;
}

RunConfig::RunConfig() {
    for (const auto& key : config_schema()) values_[key.name] = key.default_value;
}

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
    RunConfig config;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::Parse, origin + ":" + std::to_string(line_no) + ": expected key = value");
        }
        try {
            config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const Error& e) {
            throw Error(ErrorKind::Parse, origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return config;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) throw Error(ErrorKind::InvalidArgument, "unknown config key '" + key + "'");
    values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw Error(ErrorKind::InvalidArgument, "unknown config key '" + key + "'");
    return it->second;
}

namespace {

template <typename T, typename Parse>
T parse_number(const std::string& key, const std::string& text, Parse parse) {
    try {
        std::size_t used = 0;
        const T value = parse(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return value;
    } catch (const std::exception&) {
        throw Error(ErrorKind::InvalidArgument, "config key '" + key + "': '" + text + "' is not a valid number");
    }
}

}  // namespace

int RunConfig::get_int(const std::string& key) const {
    return parse_number<int>(key, get(key), [](const std::string& s, std::size_t* n) { return std::stoi(s, n); });
}

long RunConfig::get_long(const std::string& key) const {
    return parse_number<long>(key, get(key), [](const std::string& s, std::size_t* n) { return std::stol(s, n); });
}

double RunConfig::get_double(const std::string& key) const {
    return parse_number<double>(key, get(key), [](const std::string& s, std::size_t* n) { return std::stod(s, n); });
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
    return parse_number<std::uint64_t>(key, get(key),
                                       [](const std::string& s, std::size_t* n) { return std::stoull(s, n); });
}

std::vector<long> RunConfig::get_long_list(const std::string& key) const {
    std::vector<long> out;
    std::stringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(parse_number<long>(key, item, [](const std::string& s, std::size_t* n) { return std::stol(s, n); }));
    }
    return out;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig c;
    c.learning_rate = get_double("learning_rate");
    c.epochs = get_int("epochs");
    c.micro_batch = get_int("micro_batch");
    c.accumulation_steps = get_int("accumulation_steps");
    c.max_len = get_int("max_len");
    c.stride = get_int("stride");
    c.epsilon = get_double("epsilon");
    c.seed = get_u64("seed");
    c.weight_decay = get_double("weight_decay");
    const auto& policy = get("checkpoint_policy");
    if (policy == "best-on-dev") {
        c.checkpoint = CheckpointPolicy::BestOnDev;
    } else if (policy == "last-epoch") {
        c.checkpoint = CheckpointPolicy::LastEpoch;
    } else {
        throw Error(ErrorKind::InvalidArgument, "checkpoint_policy must be best-on-dev or last-epoch");
    }
    c.validate();
    return c;
}

MlmTrainConfig RunConfig::tapt_config() const {
    MlmTrainConfig c;
    c.learning_rate = get_double("tapt_learning_rate");
    c.epochs = get_int("tapt_epochs");
    c.accumulation_steps = get_int("tapt_accumulation_steps");
    c.seed = get_u64("seed");
    c.weight_decay = get_double("weight_decay");
    return c;
}

ReferenceEncoderConfig RunConfig::encoder_config(int vocab_size, TokenId mask_id) const {
    ReferenceEncoderConfig c;
    c.vocab_size = vocab_size;
    c.layers = get_int("layers");
    c.heads = get_int("heads");
    c.dim = get_int("dim");
    c.ff_dim = get_int("ff_dim");
    c.max_positions = get_int("max_len");
    c.seed = get_u64("seed");
    c.init_std = get_double("init_std");
    c.mask_token_id = mask_id;
    c.validate();
    return c;
}

void RunManifest::add_input(const std::filesystem::path& path) {
    inputs.push_back({path.string(), sha256_file(path)});
}

std::string RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["version"] = version;
    j["seed"] = seed;
    j["config"] = config;
    auto in = nlohmann::ordered_json::array();
    for (const auto& d : inputs) in.push_back({{"path", d.path}, {"sha256", d.sha256}});
    j["inputs"] = in;
    j["outputs"] = outputs;
    j["started_at"] = started_at;
    j["finished_at"] = finished_at;
    return j.dump(2);
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::filesystem::path write_manifest(const RunManifest& manifest, const std::filesystem::path& artifact) {
    auto path = artifact;
    path += ".manifest.json";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write manifest " + path.string());
    out << manifest.to_json() << '\n';
    return path;
}

}  // namespace recam

#include "recam/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace recam {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw Error(ErrorKind::Parse, "checkpoint truncated");
    return value;
}

nlohmann::ordered_json config_json(const ReferenceEncoderConfig& c) {
    nlohmann::ordered_json j;
    j["vocab_size"] = c.vocab_size;
    j["layers"] = c.layers;
    j["heads"] = c.heads;
    j["dim"] = c.dim;
    j["ff_dim"] = c.ff_dim;
    j["max_positions"] = c.max_positions;
    j["seed"] = c.seed;
    j["init_std"] = c.init_std;
    j["layer_norm_eps"] = c.layer_norm_eps;
    j["mask_token_id"] = c.mask_token_id;
    return j;
}

ReferenceEncoderConfig config_from_json(const nlohmann::json& j) {
    ReferenceEncoderConfig c;
    c.vocab_size = j.at("vocab_size").get<int>();
    c.layers = j.at("layers").get<int>();
    c.heads = j.at("heads").get<int>();
    c.dim = j.at("dim").get<int>();
    c.ff_dim = j.at("ff_dim").get<int>();
    c.max_positions = j.at("max_positions").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.init_std = j.at("init_std").get<double>();
    c.layer_norm_eps = j.at("layer_norm_eps").get<double>();
    c.mask_token_id = j.at("mask_token_id").get<TokenId>();
    return c;
}

void read_tensor(std::istream& in, Parameter<Real>& p, const nlohmann::json& entry) {
    if (entry.at("name").get<std::string>() != p.name || entry.at("rows").get<Eigen::Index>() != p.value.rows() ||
        entry.at("cols").get<Eigen::Index>() != p.value.cols()) {
        throw Error(ErrorKind::Parse, "checkpoint tensor table does not match '" + p.name + "'");
    }
    in.read(reinterpret_cast<char*>(p.value.data()), static_cast<std::streamsize>(sizeof(Real) * p.value.size()));
    if (!in) throw Error(ErrorKind::Parse, "checkpoint truncated inside tensor '" + p.name + "'");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ReferenceEncoder& encoder, const ScoringHead* head,
                     const Tokenizer& tokenizer, const std::string& metadata_json) {
    if (tokenizer.vocab_size() != encoder.vocab_size()) {
        throw Error(ErrorKind::InvalidArgument, "checkpoint: tokenizer and encoder vocabularies differ in size");
    }
    std::vector<const Parameter<Real>*> tensors = encoder.parameters();
    if (head) {
        tensors.push_back(&head->weight());
        tensors.push_back(&head->bias());
    }

    nlohmann::ordered_json header;
    header["format"] = "recam-checkpoint";
    header["version"] = kCheckpointVersion;
    header["encoder"] = config_json(encoder.config());
    header["tokenizer"] = nlohmann::ordered_json::parse(tokenizer.descriptor_json());
    header["has_head"] = head != nullptr;
    header["metadata"] = nlohmann::ordered_json::parse(metadata_json);
    auto table = nlohmann::ordered_json::array();
    for (const auto* p : tensors) {
        table.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
    }
    header["tensors"] = table;
    const auto text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write checkpoint " + path.string());
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_pod(out, kCheckpointVersion);
    write_pod(out, static_cast<std::uint64_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto* p : tensors) {
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(sizeof(Real) * p->value.size()));
    }
    if (!out) throw Error(ErrorKind::Io, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read checkpoint " + path.string());
    char magic[sizeof(kCheckpointMagic)] = {};
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw Error(ErrorKind::Parse, path.string() + " is not a checkpoint file");
    }
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kCheckpointVersion) {
        throw Error(ErrorKind::Parse, "unsupported checkpoint version " + std::to_string(version));
    }
    const auto header_len = read_pod<std::uint64_t>(in);
    std::string text(header_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw Error(ErrorKind::Parse, "checkpoint header truncated");

    Checkpoint ckpt;
    try {
        const auto header = nlohmann::json::parse(text);
        ckpt.tokenizer = tokenizer_from_descriptor(header.at("tokenizer").dump());
        ckpt.encoder = std::make_unique<ReferenceEncoder>(config_from_json(header.at("encoder")));
        if (ckpt.tokenizer->vocab_size() != ckpt.encoder->vocab_size()) {
            throw Error(ErrorKind::Data, "checkpoint tokenizer does not match the encoder vocabulary");
        }
        const auto& table = header.at("tensors");
        std::size_t t = 0;
        auto params = ckpt.encoder->parameters();
        if (header.at("has_head").get<bool>()) {
            ckpt.head = std::make_unique<ScoringHead>(ckpt.encoder->dim());
            for (auto* p : ckpt.head->parameters()) params.push_back(p);
        }
        if (table.size() != params.size()) throw Error(ErrorKind::Parse, "checkpoint tensor count mismatch");
        for (auto* p : params) read_tensor(in, *p, table.at(t++));
        ckpt.metadata_json = header.value("metadata", nlohmann::json::object()).dump();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, "checkpoint header: " + std::string(e.what()));
    }
    return ckpt;
}

}  // namespace recam

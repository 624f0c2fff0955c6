#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "recam/mcscorer.hpp"
#include "recam/tokenizer.hpp"
#include "recam/transformer.hpp"

namespace recam {

inline constexpr char kCheckpointMagic[8] = {'R', 'E', 'C', 'A', 'M', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::unique_ptr<ReferenceEncoder> encoder;
    std::unique_ptr<ScoringHead> head;  // null when saved without a head
    std::unique_ptr<Tokenizer> tokenizer;
    std::string metadata_json = "{}";
};

/// Layout: 8-byte magic, u32 version, u64 header length, JSON header (encoder
/// config, tokenizer descriptor with fingerprint, tensor table, metadata),
/// then every tensor as row-major little-endian float64 in table order.
void save_checkpoint(const std::filesystem::path& path, const ReferenceEncoder& encoder, const ScoringHead* head,
                     const Tokenizer& tokenizer, const std::string& metadata_json = "{}");

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace recam

#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "topgan/network.hpp"

namespace topgan::nn {

/// NNCK layout: "NNCK", u32 version, u32 length + JSON descriptor
/// {"architecture", "metadata"}, u32 tensor count, then per tensor
/// u32 name length + name, u32 rank, rank x u32 dims, f32 LE data.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Network<float>& net,
                     const nlohmann::json& metadata = nlohmann::json::object());

struct LoadedCheckpoint {
  Network<float> network;
  nlohmann::json metadata;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Loads weights into an existing network; throws ValidationError when the
/// stored architecture differs from `net.architecture()`.
nlohmann::json load_into(Network<float>& net, const std::filesystem::path& path);

/// FNV-1a 64 of the file bytes, hex-encoded.
std::string file_hash(const std::filesystem::path& path);

}  // namespace topgan::nn

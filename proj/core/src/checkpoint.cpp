#include "topgan/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

namespace topgan::nn {
namespace {

static_assert(std::endian::native == std::endian::little,
              "NNCK writer assumes a little-endian host");

constexpr std::array<char, 4> kMagic{'N', 'N', 'C', 'K'};

void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw IoError("checkpoint truncated");
  return v;
}

struct RawCheckpoint {
  nlohmann::json descriptor;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

RawCheckpoint read_raw(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw IoError("not an NNCK checkpoint: " + path.string());
  const auto version = get_u32(is);
  if (version != kCheckpointVersion)
    throw IoError(fmt::format("unsupported checkpoint version {} in {}", version, path.string()));

  RawCheckpoint raw;
  std::string json(get_u32(is), '\0');
  is.read(json.data(), static_cast<std::streamsize>(json.size()));
  if (!is) throw IoError("checkpoint truncated: " + path.string());
  raw.descriptor = nlohmann::json::parse(json);

  const auto count = get_u32(is);
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name(get_u32(is), '\0');
    is.read(name.data(), static_cast<std::streamsize>(name.size()));
    Shape shape(get_u32(is));
    for (auto& d : shape) d = get_u32(is);
    Tensor tensor(shape);
    is.read(reinterpret_cast<char*>(tensor.data()),
            static_cast<std::streamsize>(tensor.size() * sizeof(float)));
    if (!is) throw IoError("checkpoint truncated: " + path.string());
    raw.tensors.emplace_back(std::move(name), std::move(tensor));
  }
  return raw;
}

void assign_state(Network<float>& net, const RawCheckpoint& raw, const std::filesystem::path& path) {
  auto state = net.state();
  if (state.size() != raw.tensors.size())
    throw ValidationError(fmt::format("checkpoint {} holds {} tensors, network expects {}",
                                      path.string(), raw.tensors.size(), state.size()));
  for (std::size_t i = 0; i < state.size(); ++i) {
    const auto& [name, tensor] = raw.tensors[i];
    if (name != state[i].first || tensor.shape() != state[i].second->shape())
      throw ValidationError(fmt::format("checkpoint tensor {} {} does not match network tensor {} {}",
                                        name, shape_string(tensor.shape()), state[i].first,
                                        shape_string(state[i].second->shape())));
    *state[i].second = tensor;
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Network<float>& net,
                     const nlohmann::json& metadata) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  const nlohmann::json descriptor{{"architecture", net.architecture()}, {"metadata", metadata}};
  const std::string json = descriptor.dump();
  os.write(kMagic.data(), kMagic.size());
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<std::uint32_t>(json.size()));
  os.write(json.data(), static_cast<std::streamsize>(json.size()));
  const auto state = net.state();
  put_u32(os, static_cast<std::uint32_t>(state.size()));
  for (const auto& [name, tensor] : state) {
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, static_cast<std::uint32_t>(tensor->rank()));
    for (auto d : tensor->shape()) put_u32(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(tensor->data()),
             static_cast<std::streamsize>(tensor->size() * sizeof(float)));
  }
  if (!os) throw IoError("checkpoint write failed: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  RawCheckpoint raw = read_raw(path);
  const auto& arch = raw.descriptor.at("architecture");
  Network<float> net(arch.at("input_shape").get<Shape>(),
                     arch.at("layers").get<std::vector<LayerSpec>>(), 0);
  assign_state(net, raw, path);
  return {std::move(net), raw.descriptor.value("metadata", nlohmann::json::object())};
}

nlohmann::json load_into(Network<float>& net, const std::filesystem::path& path) {
  RawCheckpoint raw = read_raw(path);
  if (raw.descriptor.at("architecture") != net.architecture())
    throw ValidationError("checkpoint architecture mismatch: " + path.string() + " stores " +
                          raw.descriptor.at("architecture").dump() + ", network is " +
                          net.architecture().dump());
  assign_state(net, raw, path);
  return raw.descriptor.value("metadata", nlohmann::json::object());
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::istreambuf_iterator<char> it(is), end; it != end; ++it) {
    h ^= static_cast<unsigned char>(*it);
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace topgan::nn

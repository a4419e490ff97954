#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "topgan/opd_io.hpp"

namespace topgan {
namespace {

static_assert(std::endian::native == std::endian::little,
              "OPD1 writer assumes a little-endian host");

constexpr std::array<char, 4> kMagic{'O', 'P', 'D', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace

void write_opd_file(const std::filesystem::path& path, const RealGrid& opd_nm) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(kMagic.data(), kMagic.size());
  put_u32(os, static_cast<std::uint32_t>(opd_nm.width()));
  put_u32(os, static_cast<std::uint32_t>(opd_nm.height()));
  std::vector<float> buf(opd_nm.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(opd_nm[i]);
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!os) throw IoError("write failed: " + path.string());
}

RealGrid read_opd_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw IoError("not an OPD1 file: " + path.string());
  const auto w = get_u32(is);
  const auto h = get_u32(is);
  if (!is || w == 0 || h == 0) throw IoError("bad OPD1 header: " + path.string());
  std::vector<float> buf(static_cast<std::size_t>(w) * h);
  is.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!is) throw IoError("truncated OPD1 payload: " + path.string());
  RealGrid out(w, h);
  for (std::size_t i = 0; i < buf.size(); ++i) out[i] = buf[i];
  return out;
}

}  // namespace topgan

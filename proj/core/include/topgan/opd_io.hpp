#pragma once

#include <filesystem>

#include "topgan/grid.hpp"

namespace topgan {

/// "OPD1" file: magic, u32 LE width, u32 LE height, width*height f32 LE
/// values in nm, row-major. Values are narrowed to float on write.
void write_opd_file(const std::filesystem::path& path, const RealGrid& opd_nm);
RealGrid read_opd_file(const std::filesystem::path& path);

}  // namespace topgan

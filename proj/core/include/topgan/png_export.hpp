#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "topgan/grid.hpp"

namespace topgan::png {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

using Image = Grid<Rgb>;

// Perceptual blue-green-yellow ramp for inspection only. t is clamped to [0,1].
Rgb colormap(double t);

Image colorize(const RealGrid& values, double lo, double hi);

// Tiles equally-sized images into a near-square mosaic with 2 px gutters.
Image mosaic(const std::vector<Image>& tiles);

// 8-bit RGB, no ancillary chunks (no timestamps).
void write(const std::filesystem::path& path, const Image& image);

}  // namespace topgan::png

#include "topgan/png_export.hpp"

#include <png.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <memory>

namespace topgan::png {

Rgb colormap(double t) {
  // Anchors sampled from a viridis-like ramp.
  static constexpr std::array<std::array<double, 3>, 5> kAnchors{{
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  if (!std::isfinite(t)) t = 0;
  t = std::clamp(t, 0.0, 1.0) * (kAnchors.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(t), kAnchors.size() - 2);
  const double f = t - static_cast<double>(i);
  auto mix = [&](int c) {
    return static_cast<std::uint8_t>(
        std::lround(kAnchors[i][c] * (1 - f) + kAnchors[i + 1][c] * f));
  };
  return {mix(0), mix(1), mix(2)};
}

Image colorize(const RealGrid& values, double lo, double hi) {
  require(hi > lo, "colorize: empty value range");
  Image out(values.width(), values.height());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = colormap((values[i] - lo) / (hi - lo));
  return out;
}

Image mosaic(const std::vector<Image>& tiles) {
  require(!tiles.empty(), "mosaic: no tiles");
  const auto tw = tiles.front().width();
  const auto th = tiles.front().height();
  for (const auto& t : tiles) require(t.width() == tw && t.height() == th, "mosaic: tile sizes differ");
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(tiles.size()))));
  const auto rows = (tiles.size() + cols - 1) / cols;
  constexpr std::size_t gap = 2;
  Image out(cols * tw + (cols + 1) * gap, rows * th + (rows + 1) * gap, Rgb{255, 255, 255});
  for (std::size_t n = 0; n < tiles.size(); ++n) {
    const auto ox = gap + (n % cols) * (tw + gap);
    const auto oy = gap + (n / cols) * (th + gap);
    for (std::size_t y = 0; y < th; ++y)
      for (std::size_t x = 0; x < tw; ++x) out(ox + x, oy + y) = tiles[n](x, y);
  }
  return out;
}

void write(const std::filesystem::path& path, const Image& image) {
  require(!image.empty(), "png: empty image");
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw IoError("cannot open for writing: " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialisation failed");
  }
  std::vector<png_byte> row(image.width() * 3);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng write failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
               static_cast<png_uint_32>(image.height()), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < image.height(); ++y) {
    for (std::size_t x = 0; x < image.width(); ++x) {
      const auto& p = image(x, y);
      row[3 * x] = p.r;
      row[3 * x + 1] = p.g;
      row[3 * x + 2] = p.b;
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace topgan::png

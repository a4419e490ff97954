#include <algorithm>
#include <cmath>
#include <cstdint>

#include "topgan/holography.hpp"

namespace topgan::holo {

std::vector<CellCrop> segment_cells(const OpdMap& opd, double threshold_nm, std::size_t min_area,
                                    std::size_t canvas) {
  require(threshold_nm > 0, "segment_cells: threshold must be positive");
  require(canvas > 0, "segment_cells: canvas must be positive");
  const auto& g = opd.opd_nm;
  const auto w = g.width(), h = g.height();

  struct Component {
    std::vector<std::size_t> pixels;
    std::size_t first = 0;  // scan-order index of the seed pixel
  };
  std::vector<Component> components;
  std::vector<std::uint8_t> seen(g.size(), 0);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < g.size(); ++start) {
    if (seen[start] || !(g[start] > threshold_nm)) continue;
    Component comp;
    comp.first = start;
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const auto p = stack.back();
      stack.pop_back();
      comp.pixels.push_back(p);
      const auto x = p % w, y = p / w;
      auto visit = [&](std::size_t q) {
        if (!seen[q] && g[q] > threshold_nm) {
          seen[q] = 1;
          stack.push_back(q);
        }
      };
      if (x > 0) visit(p - 1);
      if (x + 1 < w) visit(p + 1);
      if (y > 0) visit(p - w);
      if (y + 1 < h) visit(p + w);
    }
    if (comp.pixels.size() >= min_area) components.push_back(std::move(comp));
  }
  std::stable_sort(components.begin(), components.end(), [](const auto& a, const auto& b) {
    return a.pixels.size() > b.pixels.size();
  });

  std::vector<CellCrop> out;
  for (const auto& comp : components) {
    CellCrop cell;
    cell.area = comp.pixels.size();
    double mass = 0, mx = 0, my = 0;
    std::size_t x_min = w, x_max = 0, y_min = h, y_max = 0;
    for (auto p : comp.pixels) {
      const auto x = p % w, y = p / w;
      mass += g[p];
      mx += g[p] * x;
      my += g[p] * y;
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
    cell.centroid_x = mx / mass;
    cell.centroid_y = my / mass;
    const auto cx = static_cast<std::ptrdiff_t>(std::lround(cell.centroid_x));
    const auto cy = static_cast<std::ptrdiff_t>(std::lround(cell.centroid_y));
    const auto half = static_cast<std::ptrdiff_t>(canvas / 2);
    auto to_canvas = [&](std::size_t v, std::ptrdiff_t c) {
      return static_cast<std::ptrdiff_t>(v) - c + half;
    };
    const auto n = static_cast<std::ptrdiff_t>(canvas);
    if (to_canvas(x_min, cx) < 0 || to_canvas(y_min, cy) < 0 || to_canvas(x_max, cx) >= n ||
        to_canvas(y_max, cy) >= n) {
      cell.error = "component of " + std::to_string(x_max - x_min + 1) + "x" +
                   std::to_string(y_max - y_min + 1) + " px does not fit a " +
                   std::to_string(canvas) + " px canvas";
    } else {
      OpdMap crop{RealGrid(canvas, canvas), opd.pixel_pitch_nm};
      for (auto p : comp.pixels) {
        const auto x = p % w, y = p / w;
        crop.opd_nm(static_cast<std::size_t>(to_canvas(x, cx)),
                    static_cast<std::size_t>(to_canvas(y, cy))) = g[p];
      }
      cell.crop = std::move(crop);
    }
    out.push_back(std::move(cell));
  }
  return out;
}

}  // namespace topgan::holo

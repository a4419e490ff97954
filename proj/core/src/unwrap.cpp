#include <cmath>
#include <numbers>

#include "topgan/fft.hpp"
#include "topgan/holography.hpp"

namespace topgan::holo {

RealGrid unwrap_ls(const WrappedPhaseMap& wrapped) {
  const auto& psi = wrapped.phase;
  const auto w = psi.width(), h = psi.height();
  require(w >= 2 && h >= 2, "unwrap_ls: grid must be at least 2x2");

  // Divergence of the wrapped forward differences, with zero flux across the
  // border (Neumann).
  RealGrid rho(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double dx = x + 1 < w ? wrap_phase(psi(x + 1, y) - psi(x, y)) : 0.0;
      const double dx_prev = x > 0 ? wrap_phase(psi(x, y) - psi(x - 1, y)) : 0.0;
      const double dy = y + 1 < h ? wrap_phase(psi(x, y + 1) - psi(x, y)) : 0.0;
      const double dy_prev = y > 0 ? wrap_phase(psi(x, y) - psi(x, y - 1)) : 0.0;
      rho(x, y) = (dx - dx_prev) + (dy - dy_prev);
    }
  }

  RealGrid spectrum = fft::dct2(rho);
  using std::numbers::pi;
  for (std::size_t ky = 0; ky < h; ++ky) {
    const double cy = 2.0 * std::cos(pi * ky / h);
    for (std::size_t kx = 0; kx < w; ++kx) {
      const double denom = cy + 2.0 * std::cos(pi * kx / w) - 4.0;
      spectrum(kx, ky) = (kx == 0 && ky == 0) ? 0.0 : spectrum(kx, ky) / denom;
    }
  }
  RealGrid phi = fft::idct2(spectrum);

  double border = 0;
  std::size_t n = 0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      if (x == 0 || y == 0 || x + 1 == w || y + 1 == h) {
        border += phi(x, y);
        ++n;
      }
  border /= static_cast<double>(n);
  for (auto& v : phi.values()) v -= border;
  return phi;
}

}  // namespace topgan::holo

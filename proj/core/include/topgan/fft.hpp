#pragma once

#include "topgan/grid.hpp"

namespace topgan::fft {

// Unnormalized forward transform, X[k] = sum x[n] exp(-2 pi i k n / N).
ComplexGrid forward(const ComplexGrid& in);
// Normalized inverse (includes the 1/(W*H) factor).
ComplexGrid inverse(const ComplexGrid& in);

ComplexGrid to_complex(const RealGrid& in);

// Orthogonal-free DCT pair with Neumann symmetry: dct2 is FFTW's REDFT10,
// idct2 undoes it exactly (REDFT01 scaled by 1/(4WH)).
RealGrid dct2(const RealGrid& in);
RealGrid idct2(const RealGrid& in);

/// Signed frequency in cycles/px of FFT bin `k` on an axis of length `n`.
inline double bin_frequency(std::size_t k, std::size_t n) {
  const auto kk = static_cast<double>(k);
  const auto nn = static_cast<double>(n);
  return (2 * k < n) ? kk / nn : (kk - nn) / nn;
}

}  // namespace topgan::fft

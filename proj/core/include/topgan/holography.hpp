#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "topgan/grid.hpp"
#include "topgan/phantom.hpp"
#include "topgan/tensor.hpp"

namespace topgan::holo {

inline constexpr double kHeNeWavelengthNm = 632.8;

struct SpatialFrequency {
  double fx = 0;  // cycles/px
  double fy = 0;
  double magnitude() const;
};

struct OpticalConfig {
  double wavelength_nm = kHeNeWavelengthNm;
  SpatialFrequency carrier{0.25, 0.0};
  double noise_std = 0.0;  // fraction of the fringe amplitude (2)

  void validate() const;
  /// Radius of the circular lobe filter: 0.6 x |carrier|.
  double lobe_radius() const { return 0.6 * carrier.magnitude(); }
};

void to_json(nlohmann::json& j, const OpticalConfig& c);
void from_json(const nlohmann::json& j, OpticalConfig& c);

struct OpdMap {
  RealGrid opd_nm;
  double pixel_pitch_nm = 100.0;
};

struct Hologram {
  RealGrid intensity;
  OpticalConfig config;
};

struct WrappedPhaseMap {
  RealGrid phase;  // radians in (-pi, pi]
};

/// OPD = (n_cell - n_medium) * h, pointwise.
OpdMap opd_forward(const synth::CellPhantom& phantom);

/// Two-beam off-axis interferogram I = 2 + 2 cos(2 pi OPD / lambda + 2 pi f.r)
/// plus N(0, (2 noise_std)^2) intensity noise, clamped at 0.
Hologram synthesize_hologram(const OpdMap& opd, const OpticalConfig& cfg, std::uint64_t seed);

/// FFT, circular mask around `lobe_center`, demodulation of the lobe to the
/// spectral origin, inverse FFT. arg() of the result is the wrapped phase.
ComplexGrid extract_complex_field(const Hologram& holo, SpatialFrequency lobe_center,
                                  double lobe_radius);

RealGrid field_phase(const ComplexGrid& field);

/// Principal value in (-pi, pi].
double wrap_phase(double radians);
WrappedPhaseMap wrap_to_principal(const RealGrid& phase);
WrappedPhaseMap wrap_to_principal(const RealGrid& sample_phase, const RealGrid& reference_phase);

/// Unweighted least-squares unwrapping: solves the Neumann Poisson problem
/// whose source is the divergence of the wrapped forward differences with a
/// DCT-II solver. The free constant is chosen so the border mean is zero.
RealGrid unwrap_ls(const WrappedPhaseMap& wrapped);

OpdMap phase_to_opd(const RealGrid& phase, double wavelength_nm, double pixel_pitch_nm = 100.0);

/// Full chain: extract both fields at the carrier, subtract the reference
/// phase, unwrap, convert to nm.
OpdMap reconstruct_opd(const Hologram& sample, const Hologram& reference,
                       double pixel_pitch_nm = 100.0);

struct CellCrop {
  std::optional<OpdMap> crop;  // empty when the cell does not fit on the canvas
  std::size_t area = 0;
  double centroid_x = 0;  // OPD-weighted, source coordinates
  double centroid_y = 0;
  std::string error;
};

/// 4-connected components of {OPD > threshold} with area >= min_area, each
/// pasted onto a zero canvas x canvas background with its rounded centroid at
/// (canvas/2, canvas/2). Ordered by descending area, ties by scan order.
std::vector<CellCrop> segment_cells(const OpdMap& opd, double threshold_nm, std::size_t min_area,
                                    std::size_t canvas);

enum class InputEncoding { replicate, colormap };

/// Clip to [opd_min, opd_max], map linearly to [-1, 1], bilinearly resample to
/// size x size and emit an HWC tensor with three channels. `replicate` copies
/// the value into every channel; `colormap` is the inspection ramp rescaled
/// to [-1, 1].
nn::Tensor encode_input(const OpdMap& crop, double opd_min, double opd_max, std::size_t size,
                        InputEncoding encoding = InputEncoding::replicate);

}  // namespace topgan::holo

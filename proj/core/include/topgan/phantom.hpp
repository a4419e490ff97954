#pragma once

#include "topgan/grid.hpp"

namespace topgan::synth {

/// Ground-truth model of one cell: thickness h_c(x, y) in nm and the
/// thickness-averaged refractive index over the same grid.
struct CellPhantom {
  RealGrid thickness_nm;
  RealGrid index;
  double medium_index = 1.337;
  double pixel_pitch_nm = 100.0;
};

/// Throws ValidationError unless h >= 0 everywhere and index >= medium
/// wherever h > 0.
void validate(const CellPhantom& phantom);

}  // namespace topgan::synth

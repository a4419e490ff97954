#include "topgan/holography.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "topgan/fft.hpp"
#include "topgan/png_export.hpp"
#include "topgan/seed.hpp"

namespace topgan::holo {

using std::numbers::pi;

double SpatialFrequency::magnitude() const { return std::hypot(fx, fy); }

void OpticalConfig::validate() const {
  require(wavelength_nm > 0, "optics: wavelength must be positive");
  const double f = carrier.magnitude();
  require(f > 0 && f < 0.5, "optics: carrier frequency must lie in (0, 0.5) cycles/px");
  require(noise_std >= 0, "optics: noise_std must be non-negative");
}

void to_json(nlohmann::json& j, const OpticalConfig& c) {
  j = {{"wavelength_nm", c.wavelength_nm},
       {"carrier_fx", c.carrier.fx},
       {"carrier_fy", c.carrier.fy},
       {"noise_std", c.noise_std}};
}

void from_json(const nlohmann::json& j, OpticalConfig& c) {
  OpticalConfig d;
  c.wavelength_nm = j.value("wavelength_nm", d.wavelength_nm);
  c.carrier.fx = j.value("carrier_fx", d.carrier.fx);
  c.carrier.fy = j.value("carrier_fy", d.carrier.fy);
  c.noise_std = j.value("noise_std", d.noise_std);
}

OpdMap opd_forward(const synth::CellPhantom& phantom) {
  synth::validate(phantom);
  OpdMap out{RealGrid(phantom.thickness_nm.width(), phantom.thickness_nm.height()),
             phantom.pixel_pitch_nm};
  for (std::size_t i = 0; i < out.opd_nm.size(); ++i)
    out.opd_nm[i] = (phantom.index[i] - phantom.medium_index) * phantom.thickness_nm[i];
  return out;
}

Hologram synthesize_hologram(const OpdMap& opd, const OpticalConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto& g = opd.opd_nm;
  Hologram h{RealGrid(g.width(), g.height()), cfg};
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 2.0 * cfg.noise_std);
  for (std::size_t y = 0; y < g.height(); ++y) {
    for (std::size_t x = 0; x < g.width(); ++x) {
      const double phi = 2 * pi * g(x, y) / cfg.wavelength_nm;
      const double carrier = 2 * pi * (cfg.carrier.fx * x + cfg.carrier.fy * y);
      double v = 2.0 + 2.0 * std::cos(phi + carrier);
      if (cfg.noise_std > 0) v += noise(rng);
      h.intensity(x, y) = std::max(v, 0.0);
    }
  }
  return h;
}

ComplexGrid extract_complex_field(const Hologram& holo, SpatialFrequency lobe_center,
                                  double lobe_radius) {
  const double fc = lobe_center.magnitude();
  require(lobe_radius > 0, "extract: lobe radius must be positive");
  require(lobe_radius < fc, "extract: lobe window overlaps the DC term (carrier too low)");
  require(std::abs(lobe_center.fx) + lobe_radius <= 0.5 &&
              std::abs(lobe_center.fy) + lobe_radius <= 0.5,
          "extract: lobe window extends past the Nyquist frequency");

  const auto w = holo.intensity.width(), h = holo.intensity.height();
  ComplexGrid spectrum = fft::forward(fft::to_complex(holo.intensity));
  for (std::size_t ky = 0; ky < h; ++ky) {
    const double fy = fft::bin_frequency(ky, h) - lobe_center.fy;
    for (std::size_t kx = 0; kx < w; ++kx) {
      const double fx = fft::bin_frequency(kx, w) - lobe_center.fx;
      if (fx * fx + fy * fy > lobe_radius * lobe_radius) spectrum(kx, ky) = 0;
    }
  }
  ComplexGrid field = fft::inverse(spectrum);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      field(x, y) *= std::polar(1.0, -2 * pi * (lobe_center.fx * x + lobe_center.fy * y));
  return field;
}

RealGrid field_phase(const ComplexGrid& field) {
  RealGrid out(field.width(), field.height());
  for (std::size_t i = 0; i < field.size(); ++i) out[i] = wrap_phase(std::arg(field[i]));
  return out;
}

double wrap_phase(double radians) {
  double r = std::remainder(radians, 2 * pi);
  if (r <= -pi) r += 2 * pi;
  if (r > pi) r -= 2 * pi;
  return r;
}

WrappedPhaseMap wrap_to_principal(const RealGrid& phase) {
  WrappedPhaseMap out{RealGrid(phase.width(), phase.height())};
  for (std::size_t i = 0; i < phase.size(); ++i) out.phase[i] = wrap_phase(phase[i]);
  return out;
}

WrappedPhaseMap wrap_to_principal(const RealGrid& sample_phase, const RealGrid& reference_phase) {
  require_same_shape(sample_phase, reference_phase, "wrap_to_principal");
  WrappedPhaseMap out{RealGrid(sample_phase.width(), sample_phase.height())};
  for (std::size_t i = 0; i < sample_phase.size(); ++i)
    out.phase[i] = wrap_phase(sample_phase[i] - reference_phase[i]);
  return out;
}

OpdMap phase_to_opd(const RealGrid& phase, double wavelength_nm, double pixel_pitch_nm) {
  require(wavelength_nm > 0, "phase_to_opd: wavelength must be positive");
  OpdMap out{RealGrid(phase.width(), phase.height()), pixel_pitch_nm};
  const double scale = wavelength_nm / (2 * pi);
  for (std::size_t i = 0; i < phase.size(); ++i) out.opd_nm[i] = phase[i] * scale;
  return out;
}

OpdMap reconstruct_opd(const Hologram& sample, const Hologram& reference, double pixel_pitch_nm) {
  require_same_shape(sample.intensity, reference.intensity, "reconstruct_opd");
  const auto& cfg = sample.config;
  cfg.validate();
  const auto sample_phase = field_phase(extract_complex_field(sample, cfg.carrier, cfg.lobe_radius()));
  const auto reference_phase =
      field_phase(extract_complex_field(reference, cfg.carrier, cfg.lobe_radius()));
  const auto unwrapped = unwrap_ls(wrap_to_principal(sample_phase, reference_phase));
  return phase_to_opd(unwrapped, cfg.wavelength_nm, pixel_pitch_nm);
}

nn::Tensor encode_input(const OpdMap& crop, double opd_min, double opd_max, std::size_t size,
                        InputEncoding encoding) {
  require(opd_min < opd_max, "encode_input: opd_min must be below opd_max");
  require(size > 0 && !crop.opd_nm.empty(), "encode_input: empty input or size");
  const auto& g = crop.opd_nm;
  const auto w = g.width(), h = g.height();
  RealGrid mapped(w, h);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = std::clamp(g[i], opd_min, opd_max);
    mapped[i] = 2.0 * (v - opd_min) / (opd_max - opd_min) - 1.0;
  }
  auto sample = [&](double sx, double sy) {
    sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
    sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
    const auto x0 = static_cast<std::size_t>(sx), y0 = static_cast<std::size_t>(sy);
    const auto x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    const double fx = sx - x0, fy = sy - y0;
    return (1 - fy) * ((1 - fx) * mapped(x0, y0) + fx * mapped(x1, y0)) +
           fy * ((1 - fx) * mapped(x0, y1) + fx * mapped(x1, y1));
  };
  nn::Tensor out({size, size, 3});
  const double scale_x = static_cast<double>(w) / size, scale_y = static_cast<double>(h) / size;
  for (std::size_t oy = 0; oy < size; ++oy) {
    for (std::size_t ox = 0; ox < size; ++ox) {
      const double v = sample((ox + 0.5) * scale_x - 0.5, (oy + 0.5) * scale_y - 0.5);
      float* px = out.data() + (oy * size + ox) * 3;
      if (encoding == InputEncoding::replicate) {
        px[0] = px[1] = px[2] = static_cast<float>(v);
      } else {
        const auto c = png::colormap((v + 1.0) / 2.0);
        px[0] = static_cast<float>(c.r / 127.5 - 1.0);
        px[1] = static_cast<float>(c.g / 127.5 - 1.0);
        px[2] = static_cast<float>(c.b / 127.5 - 1.0);
      }
    }
  }
  return out;
}

}  // namespace topgan::holo

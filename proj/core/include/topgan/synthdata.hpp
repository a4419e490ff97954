#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "topgan/holography.hpp"
#include "topgan/phantom.hpp"

namespace topgan::synth {

/// Morphology and texture distribution of one synthetic cell population.
///
/// Cells are ellipses with a flattened dome thickness h = peak (1 - r^4)^2 in
/// the normalised elliptical radius r. The refractive index carries a texture
/// made of concentric rings at `texture_frequency` (cycles/px, centred on
/// the cell) blended with isotropic band-limited noise at the same frequency;
/// `ring_weight` sets the blend.
struct PhantomClassSpec {
  std::string class_id = "class";
  double radius_min_px = 26;
  double radius_max_px = 32;
  double eccentricity_min = 0.0;
  double eccentricity_max = 0.5;
  double index_mean = 1.375;
  double index_std = 0.003;
  double medium_index = 1.337;
  double peak_thickness_nm = 5000;
  double thickness_jitter = 0.1;  // relative, uniform +-
  double texture_frequency = 0.06;
  double texture_frequency_jitter = 0.0;  // absolute, uniform +-
  double texture_amplitude = 0.004;       // refractive index units
  double ring_weight = 0.5;
  double center_jitter_px = 2;
  int count = 100;
  std::size_t grid = 128;
  double pixel_pitch_nm = 100;

  void validate() const;
  friend bool operator==(const PhantomClassSpec&, const PhantomClassSpec&) = default;
};

void to_json(nlohmann::json& j, const PhantomClassSpec& s);
void from_json(const nlohmann::json& j, PhantomClassSpec& s);

/// Two-class preset standing in for the healthy/cancer pair: identical
/// morphology, differing texture frequency.
std::vector<PhantomClassSpec> default_class_specs();

/// Elongated, head-like cells used as the unlabeled pretraining family.
PhantomClassSpec pretrain_family_spec();

CellPhantom make_phantom(const PhantomClassSpec& spec, std::uint64_t rng_seed);

std::vector<CellPhantom> make_pretrain_family(int count, std::uint64_t rng_seed);

/// Second-moment eccentricity of the support {h > 0}.
double support_eccentricity(const CellPhantom& phantom);

inline constexpr const char* kUnlabeled = "UNLABELED";
inline constexpr int kFolds = 5;

struct ManifestEntry {
  std::string path;              // relative to the manifest directory
  std::string label;             // class_id or kUnlabeled
  std::optional<int> fold;       // 0..4 for labeled entries
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  std::vector<PhantomClassSpec> specs;
  nlohmann::json generation = nlohmann::json::object();
  std::vector<ManifestEntry> entries;

  void validate() const;
  /// Index of `label` in specs, or -1 for unlabeled.
  int class_index(const std::string& label) const;

  void save(const std::filesystem::path& path) const;
  static DatasetManifest load(const std::filesystem::path& path);
};

void to_json(nlohmann::json& j, const DatasetManifest& m);
void from_json(const nlohmann::json& j, DatasetManifest& m);

enum class Route { direct, holographic };

struct BuildOptions {
  std::vector<PhantomClassSpec> class_specs = default_class_specs();
  int pretrain_count = 500;
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  Route route = Route::direct;
  holo::OpticalConfig optics;
  double threshold_nm = 20;
  std::size_t min_area = 50;
};

/// Writes OPD1 crops under out_dir/{labeled,unlabeled}/ plus
/// out_dir/manifest.json. Labeled entries are assigned to five stratified
/// folds at generation time.
DatasetManifest build_dataset(const BuildOptions& options);

/// The single-cell OPD crop produced for one phantom by the chosen route.
holo::OpdMap render_cell(const CellPhantom& phantom, Route route, const holo::OpticalConfig& optics,
                         double threshold_nm, std::size_t min_area, std::uint64_t seed);

}  // namespace topgan::synth

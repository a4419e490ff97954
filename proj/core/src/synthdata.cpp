#include "topgan/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include <fmt/format.h>

#include "topgan/fft.hpp"
#include "topgan/opd_io.hpp"
#include "topgan/seed.hpp"

namespace topgan::synth {

using std::numbers::pi;

void validate(const CellPhantom& p) {
  require(!p.thickness_nm.empty() && p.thickness_nm.same_shape(p.index),
          "phantom: thickness and index grids must be non-empty and equally sized");
  require(p.pixel_pitch_nm > 0, "phantom: pixel pitch must be positive");
  for (std::size_t i = 0; i < p.thickness_nm.size(); ++i) {
    require(p.thickness_nm[i] >= 0 && std::isfinite(p.thickness_nm[i]),
            "phantom: thickness must be finite and non-negative");
    if (p.thickness_nm[i] > 0)
      require(p.index[i] >= p.medium_index, "phantom: cell index below medium index");
  }
}

void PhantomClassSpec::validate() const {
  require(!class_id.empty(), "phantom spec: empty class_id");
  require(class_id.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-") ==
              std::string::npos,
          "phantom spec: class_id must be alphanumeric, '-' or '_': " + class_id);
  require(class_id != kUnlabeled, "phantom spec: class_id collides with the unlabeled marker");
  require(radius_min_px > 0 && radius_max_px >= radius_min_px, "phantom spec: bad radius range");
  require(eccentricity_min >= 0 && eccentricity_max >= eccentricity_min && eccentricity_max < 1,
          "phantom spec: eccentricity range must lie in [0, 1)");
  require(medium_index > 0, "phantom spec: medium index must be positive");
  require(index_mean > medium_index, "phantom spec: index_mean must exceed the medium index");
  require(index_std >= 0, "phantom spec: index_std must be non-negative");
  require(peak_thickness_nm > 0, "phantom spec: peak thickness must be positive");
  require(thickness_jitter >= 0 && thickness_jitter < 1, "phantom spec: thickness jitter in [0, 1)");
  require(texture_frequency > 0 && texture_frequency < 0.5,
          "phantom spec: texture frequency must lie in (0, 0.5) cycles/px");
  require(texture_frequency_jitter >= 0 && texture_frequency_jitter < texture_frequency,
          "phantom spec: texture frequency jitter must be below the frequency");
  require(texture_amplitude >= 0, "phantom spec: texture amplitude must be non-negative");
  require(ring_weight >= 0 && ring_weight <= 1, "phantom spec: ring weight in [0, 1]");
  require(center_jitter_px >= 0, "phantom spec: center jitter must be non-negative");
  require(count >= 1, "phantom spec: count must be at least 1");
  require(grid >= 8, "phantom spec: grid must be at least 8 px");
  require(2 * (radius_max_px + center_jitter_px) < static_cast<double>(grid),
          "phantom spec: cell does not fit the grid");
  require(pixel_pitch_nm > 0, "phantom spec: pixel pitch must be positive");
}

void to_json(nlohmann::json& j, const PhantomClassSpec& s) {
  j = {{"class_id", s.class_id},
       {"radius_range_px", {s.radius_min_px, s.radius_max_px}},
       {"eccentricity_range", {s.eccentricity_min, s.eccentricity_max}},
       {"index_mean", s.index_mean},
       {"index_std", s.index_std},
       {"medium_index", s.medium_index},
       {"peak_thickness_nm", s.peak_thickness_nm},
       {"thickness_jitter", s.thickness_jitter},
       {"texture_frequency", s.texture_frequency},
       {"texture_frequency_jitter", s.texture_frequency_jitter},
       {"texture_amplitude", s.texture_amplitude},
       {"ring_weight", s.ring_weight},
       {"center_jitter_px", s.center_jitter_px},
       {"count", s.count},
       {"grid", s.grid},
       {"pixel_pitch_nm", s.pixel_pitch_nm}};
}

void from_json(const nlohmann::json& j, PhantomClassSpec& s) {
  const PhantomClassSpec d;
  s.class_id = j.value("class_id", d.class_id);
  if (j.contains("radius_range_px")) {
    s.radius_min_px = j.at("radius_range_px").at(0).get<double>();
    s.radius_max_px = j.at("radius_range_px").at(1).get<double>();
  }
  if (j.contains("eccentricity_range")) {
    s.eccentricity_min = j.at("eccentricity_range").at(0).get<double>();
    s.eccentricity_max = j.at("eccentricity_range").at(1).get<double>();
  }
  s.index_mean = j.value("index_mean", d.index_mean);
  s.index_std = j.value("index_std", d.index_std);
  s.medium_index = j.value("medium_index", d.medium_index);
  s.peak_thickness_nm = j.value("peak_thickness_nm", d.peak_thickness_nm);
  s.thickness_jitter = j.value("thickness_jitter", d.thickness_jitter);
  s.texture_frequency = j.value("texture_frequency", d.texture_frequency);
  s.texture_frequency_jitter = j.value("texture_frequency_jitter", d.texture_frequency_jitter);
  s.texture_amplitude = j.value("texture_amplitude", d.texture_amplitude);
  s.ring_weight = j.value("ring_weight", d.ring_weight);
  s.center_jitter_px = j.value("center_jitter_px", d.center_jitter_px);
  s.count = j.value("count", d.count);
  s.grid = j.value("grid", d.grid);
  s.pixel_pitch_nm = j.value("pixel_pitch_nm", d.pixel_pitch_nm);
}

std::vector<PhantomClassSpec> default_class_specs() {
  PhantomClassSpec healthy;
  healthy.class_id = "healthy";
  healthy.texture_frequency = 0.05;
  PhantomClassSpec cancer = healthy;
  cancer.class_id = "cancer";
  cancer.texture_frequency = 0.09;
  return {healthy, cancer};
}

PhantomClassSpec pretrain_family_spec() {
  PhantomClassSpec s;
  s.class_id = "pretrain";
  s.radius_min_px = 24;
  s.radius_max_px = 34;
  s.eccentricity_min = 0.8;
  s.eccentricity_max = 0.92;
  s.texture_frequency = 0.08;
  s.texture_frequency_jitter = 0.05;
  return s;
}

namespace {

// Unit-variance isotropic noise band-passed to [0.8 f, 1.2 f].
RealGrid band_limited_noise(std::size_t n, double f, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  RealGrid white(n, n);
  for (auto& v : white.values()) v = normal(rng);
  ComplexGrid spec = fft::forward(fft::to_complex(white));
  for (std::size_t ky = 0; ky < n; ++ky)
    for (std::size_t kx = 0; kx < n; ++kx) {
      const double r = std::hypot(fft::bin_frequency(kx, n), fft::bin_frequency(ky, n));
      if (r < 0.8 * f || r > 1.2 * f) spec(kx, ky) = 0;
    }
  const ComplexGrid back = fft::inverse(spec);
  RealGrid out(n, n);
  double sq = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = back[i].real();
    sq += out[i] * out[i];
  }
  const double std = std::sqrt(sq / static_cast<double>(out.size()));
  if (std > 0)
    for (auto& v : out.values()) v /= std;
  return out;
}

}  // namespace

CellPhantom make_phantom(const PhantomClassSpec& spec, std::uint64_t rng_seed) {
  spec.validate();
  Rng rng(rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const double semi_major = uniform(spec.radius_min_px, spec.radius_max_px);
  const double ecc = uniform(spec.eccentricity_min, spec.eccentricity_max);
  const double semi_minor = semi_major * std::sqrt(1 - ecc * ecc);
  const double angle = uniform(0, pi);
  const double half = static_cast<double>(spec.grid) / 2;
  const double cx = half + uniform(-spec.center_jitter_px, spec.center_jitter_px);
  const double cy = half + uniform(-spec.center_jitter_px, spec.center_jitter_px);
  const double peak = spec.peak_thickness_nm * (1 + uniform(-spec.thickness_jitter, spec.thickness_jitter));
  const double n_cell = std::max(spec.index_mean + spec.index_std * normal(rng), spec.medium_index);
  const double freq = spec.texture_frequency +
                      uniform(-spec.texture_frequency_jitter, spec.texture_frequency_jitter);
  const RealGrid noise = band_limited_noise(spec.grid, freq, rng);

  CellPhantom p{RealGrid(spec.grid, spec.grid), RealGrid(spec.grid, spec.grid, spec.medium_index),
                spec.medium_index, spec.pixel_pitch_nm};
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (std::size_t y = 0; y < spec.grid; ++y) {
    for (std::size_t x = 0; x < spec.grid; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double u = (ca * dx + sa * dy) / semi_major;
      const double v = (-sa * dx + ca * dy) / semi_minor;
      const double r2 = u * u + v * v;
      if (r2 >= 1) continue;
      const double dome = 1 - r2 * r2;
      p.thickness_nm(x, y) = peak * dome * dome;
      const double ring = std::sqrt(2.0) * std::cos(2 * pi * freq * std::hypot(dx, dy));
      const double texture = spec.ring_weight * ring + (1 - spec.ring_weight) * noise(x, y);
      p.index(x, y) = std::max(n_cell + spec.texture_amplitude * texture, spec.medium_index);
    }
  }
  return p;
}

std::vector<CellPhantom> make_pretrain_family(int count, std::uint64_t rng_seed) {
  require(count >= 1, "make_pretrain_family: count must be at least 1");
  const auto spec = pretrain_family_spec();
  std::vector<CellPhantom> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    out.push_back(make_phantom(spec, derive_seed(rng_seed, {static_cast<std::uint64_t>(i)})));
  return out;
}

double support_eccentricity(const CellPhantom& phantom) {
  const auto& h = phantom.thickness_nm;
  double n = 0, mx = 0, my = 0;
  for (std::size_t y = 0; y < h.height(); ++y)
    for (std::size_t x = 0; x < h.width(); ++x)
      if (h(x, y) > 0) {
        n += 1;
        mx += x;
        my += y;
      }
  require(n > 0, "support_eccentricity: empty support");
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t y = 0; y < h.height(); ++y)
    for (std::size_t x = 0; x < h.width(); ++x)
      if (h(x, y) > 0) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
      }
  const double tr = (sxx + syy) / 2, det = std::sqrt(std::max(0.0, (sxx - syy) * (sxx - syy) / 4 + sxy * sxy));
  const double l1 = tr + det, l2 = tr - det;
  return l1 > 0 ? std::sqrt(std::max(0.0, 1 - l2 / l1)) : 0.0;
}

void DatasetManifest::validate() const {
  std::set<std::string> paths, classes;
  for (const auto& s : specs) {
    s.validate();
    require(classes.insert(s.class_id).second, "manifest: duplicate class_id " + s.class_id);
  }
  for (const auto& e : entries) {
    require(paths.insert(e.path).second, "manifest: duplicate path " + e.path);
    if (e.label == kUnlabeled) continue;
    require(classes.count(e.label) == 1, "manifest: entry label not among specs: " + e.label);
    require(e.fold && *e.fold >= 0 && *e.fold < kFolds, "manifest: labeled entry without fold 0..4");
  }
}

int DatasetManifest::class_index(const std::string& label) const {
  for (std::size_t i = 0; i < specs.size(); ++i)
    if (specs[i].class_id == label) return static_cast<int>(i);
  return -1;
}

void to_json(nlohmann::json& j, const DatasetManifest& m) {
  auto entries = nlohmann::json::array();
  for (const auto& e : m.entries)
    entries.push_back({{"path", e.path},
                       {"label", e.label},
                       {"fold", e.fold ? nlohmann::json(*e.fold) : nlohmann::json(nullptr)}});
  j = {{"seed", m.seed}, {"specs", m.specs}, {"generation", m.generation}, {"entries", entries}};
}

void from_json(const nlohmann::json& j, DatasetManifest& m) {
  m.seed = j.at("seed").get<std::uint64_t>();
  m.specs = j.at("specs").get<std::vector<PhantomClassSpec>>();
  m.generation = j.value("generation", nlohmann::json::object());
  m.entries.clear();
  for (const auto& e : j.at("entries")) {
    ManifestEntry entry{e.at("path").get<std::string>(), e.at("label").get<std::string>(), {}};
    if (!e.at("fold").is_null()) entry.fold = e.at("fold").get<int>();
    m.entries.push_back(std::move(entry));
  }
}

void DatasetManifest::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write manifest: " + path.string());
  os << nlohmann::json(*this).dump(2) << '\n';
  if (!os) throw IoError("manifest write failed: " + path.string());
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest: " + path.string());
  DatasetManifest m = nlohmann::json::parse(is).get<DatasetManifest>();
  m.validate();
  return m;
}

holo::OpdMap render_cell(const CellPhantom& phantom, Route route, const holo::OpticalConfig& optics,
                         double threshold_nm, std::size_t min_area, std::uint64_t seed) {
  holo::OpdMap opd = holo::opd_forward(phantom);
  if (route == Route::holographic) {
    const holo::OpdMap flat{RealGrid(opd.opd_nm.width(), opd.opd_nm.height()), opd.pixel_pitch_nm};
    const auto sample = holo::synthesize_hologram(opd, optics, derive_seed(seed, {0}));
    const auto reference = holo::synthesize_hologram(flat, optics, derive_seed(seed, {1}));
    opd = holo::reconstruct_opd(sample, reference, phantom.pixel_pitch_nm);
  }
  const auto canvas = opd.opd_nm.width();
  for (auto& cell : holo::segment_cells(opd, threshold_nm, min_area, canvas))
    if (cell.crop) return std::move(*cell.crop);
  throw ValidationError(fmt::format("render_cell: no cell above {} nm with area >= {} px",
                                    threshold_nm, min_area));
}

DatasetManifest build_dataset(const BuildOptions& options) {
  require(!options.class_specs.empty(), "build_dataset: no class specs");
  require(options.pretrain_count >= 0, "build_dataset: negative pretrain count");
  options.optics.validate();

  DatasetManifest m;
  m.seed = options.seed;
  m.specs = options.class_specs;
  m.generation = {{"route", options.route == Route::direct ? "direct" : "holographic"},
                  {"optics", options.optics},
                  {"threshold_nm", options.threshold_nm},
                  {"min_area", options.min_area},
                  {"pretrain_count", options.pretrain_count},
                  {"pretrain_spec", pretrain_family_spec()}};
  {
    std::set<std::string> ids;
    for (const auto& s : m.specs) {
      s.validate();
      if (!ids.insert(s.class_id).second)
        throw ValidationError("build_dataset: duplicate output paths for class " + s.class_id);
    }
  }

  std::error_code ec;
  std::filesystem::create_directories(options.out_dir / "labeled", ec);
  if (!ec) std::filesystem::create_directories(options.out_dir / "unlabeled", ec);
  if (ec) throw IoError("cannot create dataset directories under " + options.out_dir.string() +
                        ": " + ec.message());

  for (std::size_t c = 0; c < m.specs.size(); ++c) {
    const auto& spec = m.specs[c];
    std::vector<int> folds(static_cast<std::size_t>(spec.count));
    std::vector<std::size_t> order(folds.size());
    std::iota(order.begin(), order.end(), 0);
    Rng fold_rng(derive_seed(options.seed, {2, c}));
    std::shuffle(order.begin(), order.end(), fold_rng);
    for (std::size_t j = 0; j < order.size(); ++j) folds[order[j]] = static_cast<int>(j % kFolds);

    for (int i = 0; i < spec.count; ++i) {
      const auto item_seed = derive_seed(options.seed, {1, c, static_cast<std::uint64_t>(i)});
      const auto phantom = make_phantom(spec, item_seed);
      const auto crop = render_cell(phantom, options.route, options.optics, options.threshold_nm,
                                    options.min_area, derive_seed(item_seed, {7}));
      const auto rel = fmt::format("labeled/{}_{:04d}.opd", spec.class_id, i);
      write_opd_file(options.out_dir / rel, crop.opd_nm);
      m.entries.push_back({rel, spec.class_id, folds[static_cast<std::size_t>(i)]});
    }
  }

  if (options.pretrain_count > 0) {
    const auto pretrain_seed = derive_seed(options.seed, {3});
    const auto family = make_pretrain_family(options.pretrain_count, pretrain_seed);
    for (std::size_t i = 0; i < family.size(); ++i) {
      const auto crop = render_cell(family[i], options.route, options.optics, options.threshold_nm,
                                    options.min_area, derive_seed(pretrain_seed, {8, i}));
      const auto rel = fmt::format("unlabeled/u_{:05d}.opd", i);
      write_opd_file(options.out_dir / rel, crop.opd_nm);
      m.entries.push_back({rel, kUnlabeled, std::nullopt});
    }
  }

  m.validate();
  m.save(options.out_dir / "manifest.json");
  return m;
}

}  // namespace topgan::synth

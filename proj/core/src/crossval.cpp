#include "topgan/crossval.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <numeric>

#include "topgan/holography.hpp"
#include "topgan/opd_io.hpp"
#include "topgan/png_export.hpp"

namespace topgan::eval {

void to_json(nlohmann::json& j, const EncodeConfig& c) {
  j = {{"opd_min_nm", c.opd_min_nm}, {"opd_max_nm", c.opd_max_nm}, {"size", c.size}};
}

void from_json(const nlohmann::json& j, EncodeConfig& c) {
  EncodeConfig d;
  c.opd_min_nm = j.value("opd_min_nm", d.opd_min_nm);
  c.opd_max_nm = j.value("opd_max_nm", d.opd_max_nm);
  c.size = j.value("size", d.size);
}

namespace {

nn::Tensor load_encoded(const std::filesystem::path& path, const synth::DatasetManifest& m,
                        const EncodeConfig& enc) {
  holo::OpdMap map{read_opd_file(path), 100.0};
  if (!m.specs.empty()) map.pixel_pitch_nm = m.specs.front().pixel_pitch_nm;
  return holo::encode_input(map, enc.opd_min_nm, enc.opd_max_nm, enc.size);
}

}  // namespace

LabeledSet load_labeled(const synth::DatasetManifest& manifest,
                        const std::filesystem::path& manifest_dir, const EncodeConfig& enc) {
  manifest.validate();
  require(manifest.specs.size() == 2, "eval: binary classification needs exactly 2 classes");
  LabeledSet set;
  for (const auto& e : manifest.entries) {
    const int c = manifest.class_index(e.label);
    if (c < 0) continue;
    require(e.fold.has_value(), "eval: labeled entry without fold: " + e.path);
    set.images.push_back(load_encoded(manifest_dir / e.path, manifest, enc));
    set.labels.push_back(c);
    set.folds.push_back(*e.fold);
  }
  return set;
}

std::vector<nn::Tensor> load_unlabeled(const synth::DatasetManifest& manifest,
                                       const std::filesystem::path& manifest_dir,
                                       const EncodeConfig& enc) {
  std::vector<nn::Tensor> out;
  for (const auto& e : manifest.entries)
    if (e.label == synth::kUnlabeled) out.push_back(load_encoded(manifest_dir / e.path, manifest, enc));
  return out;
}

std::vector<FoldSplit> make_splits(const LabeledSet& data, std::size_t train_size, std::uint64_t seed) {
  require(data.labels.size() == data.folds.size(), "eval: labels and folds differ in length");
  require(train_size >= 2 && train_size % 2 == 0,
          fmt::format("eval: train_size {} must be even and >= 2 for a class-balanced draw", train_size));
  const std::size_t per_class = train_size / 2;
  std::vector<FoldSplit> splits;
  for (int f = 0; f < synth::kFolds; ++f) {
    FoldSplit s;
    s.fold = f;
    for (std::size_t i = 0; i < data.folds.size(); ++i)
      if (data.folds[i] == f) s.test.push_back(i);
    require(!s.test.empty(), fmt::format("eval: fold {} is empty", f));
    for (int c = 0; c < 2; ++c) {
      std::vector<std::size_t> pool;
      for (std::size_t i = 0; i < data.folds.size(); ++i)
        if (data.folds[i] != f && data.labels[i] == c) pool.push_back(i);
      require(pool.size() >= per_class,
              fmt::format("eval: fold {} has {} class-{} images outside the test fold, need {}", f,
                          pool.size(), c, per_class));
      Rng rng(derive_seed(seed, {train_size, static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(c)}));
      std::shuffle(pool.begin(), pool.end(), rng);
      s.train.insert(s.train.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(per_class));
    }
    std::sort(s.train.begin(), s.train.end());
    splits.push_back(std::move(s));
  }
  return splits;
}

std::string split_hash(const std::vector<FoldSplit>& splits) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& s : splits) {
    mix(static_cast<std::uint64_t>(s.fold));
    mix(s.train.size());
    for (auto i : s.train) mix(i);
    mix(s.test.size());
    for (auto i : s.test) mix(i);
  }
  return fmt::format("{:016x}", h);
}

namespace {

template <class T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

class KnnMethod : public Method {
 public:
  explicit KnnMethod(clf::KnnConfig cfg) : cfg_(cfg) {}
  std::string name() const override { return "knn"; }
  FoldOutcome run(const LabeledSet& data, const FoldSplit& split, std::uint64_t) override {
    const auto votes = clf::knn_vote(pick(data.images, split.train), pick(data.labels, split.train),
                                     pick(data.images, split.test), cfg_);
    FoldOutcome o;
    for (const auto& v : votes) {
      o.predictions.push_back(v.label);
      o.scores.push_back(v.positive_share);
    }
    return o;
  }

 private:
  clf::KnnConfig cfg_;
};

class NetworkMethod : public Method {
 public:
  NetworkMethod(std::string name, bool transfer, bool augment, const MethodConfig& cfg)
      : name_(std::move(name)), transfer_(transfer), train_(cfg.train), arch_(cfg.arch) {
    train_.augment = augment;
    if (transfer_) {
      require(cfg.discriminator.has_value(), "eval: method " + name_ + " needs a discriminator checkpoint");
      disc_ = *cfg.discriminator;
    }
  }
  std::string name() const override { return name_; }
  FoldOutcome run(const LabeledSet& data, const FoldSplit& split, std::uint64_t seed) override {
    nn::Network<float> net = transfer_ ? clf::build_topgan(disc_, derive_seed(seed, {1}))
                                       : clf::build_scratch_cnn(arch_, derive_seed(seed, {1}));
    clf::ClfTrainConfig cfg = train_;
    cfg.seed = derive_seed(seed, {2});
    clf::train_classifier(net, pick(data.images, split.train), pick(data.labels, split.train), cfg);
    FoldOutcome o;
    for (const auto& p : clf::predict(net, pick(data.images, split.test))) {
      o.predictions.push_back(p.label);
      o.scores.push_back(p.margin);
    }
    return o;
  }

 private:
  std::string name_;
  bool transfer_;
  clf::ClfTrainConfig train_;
  gan::ArchConfig arch_;
  nn::Network<float> disc_;
};

}  // namespace

std::unique_ptr<Method> make_method(const std::string& name, const MethodConfig& cfg) {
  if (name == "knn") return std::make_unique<KnnMethod>(cfg.knn);
  if (name == "cnn") return std::make_unique<NetworkMethod>(name, false, false, cfg);
  if (name == "cnn-aug") return std::make_unique<NetworkMethod>(name, false, true, cfg);
  if (name == "topgan") return std::make_unique<NetworkMethod>(name, true, false, cfg);
  if (name == "topgan-aug") return std::make_unique<NetworkMethod>(name, true, true, cfg);
  throw ValidationError("eval: unknown method '" + name + "'");
}

SweepRow run_cv(Method& method, const LabeledSet& data, std::size_t train_size, std::uint64_t seed) {
  const auto splits = make_splits(data, train_size, seed);
  SweepRow row;
  row.method = method.name();
  row.train_size = train_size;
  row.split_hash = split_hash(splits);
  bool sens = true, spec = true, auc = true;
  double s_sum = 0, p_sum = 0, a_sum = 0, acc_sum = 0;
  for (const auto& split : splits) {
    const FoldOutcome o = method.run(data, split, derive_seed(seed, {train_size, static_cast<std::uint64_t>(split.fold)}));
    require(o.predictions.size() == split.test.size() && o.scores.size() == split.test.size(),
            "eval: method returned the wrong number of predictions");
    const auto truth = pick(data.labels, split.test);
    FoldResult r;
    r.fold = split.fold;
    r.counts = confusion(o.predictions, truth, 1);
    r.metrics = metrics(r.counts);
    const bool both = std::count(truth.begin(), truth.end(), 1) > 0 && std::count(truth.begin(), truth.end(), 0) > 0;
    if (both) r.metrics.auc = roc_auc(o.scores, truth, 1);

    acc_sum += r.metrics.accuracy;
    sens = sens && r.metrics.sensitivity.has_value();
    spec = spec && r.metrics.specificity.has_value();
    auc = auc && r.metrics.auc.has_value();
    s_sum += r.metrics.sensitivity.value_or(0);
    p_sum += r.metrics.specificity.value_or(0);
    a_sum += r.metrics.auc.value_or(0);
    row.folds.push_back(r);
  }
  const auto n = static_cast<double>(row.folds.size());
  row.mean.accuracy = acc_sum / n;
  if (sens) row.mean.sensitivity = s_sum / n;
  if (spec) row.mean.specificity = p_sum / n;
  if (auc) row.mean.auc = a_sum / n;
  const auto [lo, hi] = std::minmax_element(row.folds.begin(), row.folds.end(), [](const auto& a, const auto& b) {
    return a.metrics.accuracy < b.metrics.accuracy;
  });
  row.accuracy_min = lo->metrics.accuracy;
  row.accuracy_max = hi->metrics.accuracy;
  return row;
}

SweepResult sweep(const std::vector<Method*>& methods, const std::vector<std::size_t>& train_sizes,
                  const LabeledSet& data, std::uint64_t seed, const ProgressCallback& progress) {
  require(!methods.empty() && !train_sizes.empty(), "sweep: need at least one method and one size");
  SweepResult result;
  result.seed = seed;
  for (Method* m : methods)
    for (std::size_t size : train_sizes) {
      result.rows.push_back(run_cv(*m, data, size, seed));
      if (progress) progress(result.rows.back());
    }
  return result;
}

namespace {

std::string num(const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : "NA"; }

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

nlohmann::json metrics_json(const MetricSet& m) {
  return {{"accuracy", m.accuracy},
          {"sensitivity", opt_json(m.sensitivity)},
          {"specificity", opt_json(m.specificity)},
          {"auc", opt_json(m.auc)}};
}

}  // namespace

void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "method,train_size,fold,acc,sens,spec,auc\n";
  for (const auto& row : result.rows) {
    for (const auto& f : row.folds)
      out << fmt::format("{},{},{},{},{},{},{}\n", row.method, row.train_size, f.fold, num(f.metrics.accuracy),
                         num(f.metrics.sensitivity), num(f.metrics.specificity), num(f.metrics.auc));
    out << fmt::format("{},{},mean,{},{},{},{}\n", row.method, row.train_size, num(row.mean.accuracy),
                       num(row.mean.sensitivity), num(row.mean.specificity), num(row.mean.auc));
  }
}

nlohmann::json sweep_json(const SweepResult& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : result.rows) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : row.folds)
      folds.push_back({{"fold", f.fold},
                       {"tp", f.counts.tp},
                       {"tn", f.counts.tn},
                       {"fp", f.counts.fp},
                       {"fn", f.counts.fn},
                       {"metrics", metrics_json(f.metrics)}});
    rows.push_back({{"method", row.method},
                    {"train_size", row.train_size},
                    {"split_hash", row.split_hash},
                    {"mean", metrics_json(row.mean)},
                    {"accuracy_min", row.accuracy_min},
                    {"accuracy_max", row.accuracy_max},
                    {"folds", folds}});
  }
  return {{"seed", result.seed}, {"rows", rows}};
}

void write_sweep_plot(const std::filesystem::path& path, const SweepResult& result) {
  constexpr std::size_t kW = 640, kH = 400, kL = 40, kR = 20, kT = 20, kB = 40;
  png::Image img(kW, kH, png::Rgb{255, 255, 255});

  std::vector<std::string> methods;
  std::vector<std::size_t> sizes;
  for (const auto& r : result.rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    if (std::find(sizes.begin(), sizes.end(), r.train_size) == sizes.end()) sizes.push_back(r.train_size);
  }
  std::sort(sizes.begin(), sizes.end());
  const double xmin = static_cast<double>(sizes.front());
  const double xmax = std::max(static_cast<double>(sizes.back()), xmin + 1);
  auto px = [&](double s) { return static_cast<double>(kL) + (s - xmin) / (xmax - xmin) * static_cast<double>(kW - kL - kR); };
  // Accuracy axis spans [0.4, 1.0].
  auto py = [&](double a) {
    const double t = std::clamp((a - 0.4) / 0.6, 0.0, 1.0);
    return static_cast<double>(kT) + (1 - t) * static_cast<double>(kH - kT - kB);
  };
  auto put = [&](long x, long y, png::Rgb c) {
    if (x >= 0 && y >= 0 && x < static_cast<long>(kW) && y < static_cast<long>(kH))
      img(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = c;
  };

  const png::Rgb axis{80, 80, 80}, grid{225, 225, 225};
  for (int g = 0; g <= 6; ++g) {
    const long y = std::lround(py(0.4 + 0.1 * g));
    for (std::size_t x = kL; x < kW - kR; ++x) put(static_cast<long>(x), y, grid);
  }
  for (std::size_t y = kT; y <= kH - kB; ++y) put(static_cast<long>(kL), static_cast<long>(y), axis);
  for (std::size_t x = kL; x < kW - kR; ++x) put(static_cast<long>(x), static_cast<long>(kH - kB), axis);
  for (std::size_t s : sizes) {
    const long x = std::lround(px(static_cast<double>(s)));
    for (std::size_t d = 0; d < 6; ++d) put(x, static_cast<long>(kH - kB + d), axis);
  }

  const std::vector<png::Rgb> palette{{31, 119, 180}, {255, 127, 14}, {44, 160, 44}, {214, 39, 40}, {148, 103, 189}};
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const png::Rgb c = palette[mi % palette.size()];
    const png::Rgb band{static_cast<std::uint8_t>(255 - (255 - c.r) / 4), static_cast<std::uint8_t>(255 - (255 - c.g) / 4),
                        static_cast<std::uint8_t>(255 - (255 - c.b) / 4)};
    std::vector<const SweepRow*> pts;
    for (const auto& r : result.rows)
      if (r.method == methods[mi]) pts.push_back(&r);
    std::sort(pts.begin(), pts.end(), [](auto* a, auto* b) { return a->train_size < b->train_size; });

    auto segment = [&](auto value_of, bool fill_band) {
      for (std::size_t k = 0; k + 1 < pts.size() || (pts.size() == 1 && k == 0); ++k) {
        const SweepRow* a = pts[k];
        const SweepRow* b = pts.size() == 1 ? a : pts[k + 1];
        const long x0 = std::lround(px(static_cast<double>(a->train_size)));
        const long x1 = std::lround(px(static_cast<double>(b->train_size)));
        for (long x = x0; x <= x1; ++x) {
          const double t = x1 == x0 ? 0.0 : static_cast<double>(x - x0) / static_cast<double>(x1 - x0);
          if (fill_band) {
            const double lo = a->accuracy_min + t * (b->accuracy_min - a->accuracy_min);
            const double hi = a->accuracy_max + t * (b->accuracy_max - a->accuracy_max);
            for (long y = std::lround(py(hi)); y <= std::lround(py(lo)); ++y) put(x, y, band);
          } else {
            const long y = std::lround(py(value_of(*a) + t * (value_of(*b) - value_of(*a))));
            for (long d = -1; d <= 1; ++d) put(x, y + d, c);
          }
        }
      }
    };
    segment([](const SweepRow& r) { return r.mean.accuracy; }, true);
    segment([](const SweepRow& r) { return r.mean.accuracy; }, false);
    for (const auto* r : pts) {
      const long x = std::lround(px(static_cast<double>(r->train_size)));
      const long y = std::lround(py(r->mean.accuracy));
      for (long dy = -3; dy <= 3; ++dy)
        for (long dx = -3; dx <= 3; ++dx) put(x + dx, y + dy, c);
    }
    // Legend swatch per method, top-left, in method order.
    for (long dy = 0; dy < 8; ++dy)
      for (long dx = 0; dx < 16; ++dx) put(static_cast<long>(kL + 8 + mi * 22) + dx, static_cast<long>(kT + 4) + dy, c);
  }
  png::write(path, img);
}

}  // namespace topgan::eval

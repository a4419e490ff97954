#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "desk_preset.hpp"
#include "oracles.hpp"
#include "test_support.hpp"
#include "topgan/checkpoint.hpp"
#include "topgan/classify.hpp"
#include "topgan/cli.hpp"
#include "topgan/crossval.hpp"
#include "topgan/gan.hpp"
#include "topgan/holography.hpp"
#include "topgan/metrics.hpp"
#include "topgan/network.hpp"
#include "topgan/synthdata.hpp"

using namespace topgan;
using namespace topgan::test;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// 1. Reconstruction round trip

Outcome reconstruction_round_trip() {
  double worst_rms = 0, worst_secs = 0, peak_max = 0;
  const holo::OpticalConfig cfg;
  int images = 0;
  for (const auto& spec : synth::default_class_specs())
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto phantom = synth::make_phantom(spec, derive_seed(seed, {101}));
      const auto truth = holo::opd_forward(phantom);
      double peak = 0;
      for (double v : truth.opd_nm.values()) peak = std::max(peak, v);
      peak_max = std::max(peak_max, peak);
      if (truth.opd_nm.width() != 128 || peak > 500) return {false, "phantom outside the 128 px / 500 nm envelope"};
      const Clock clock;
      const auto sample = holo::synthesize_hologram(truth, cfg, seed);
      const auto reference = holo::synthesize_hologram(holo::OpdMap{RealGrid(128, 128)}, cfg, seed + 1000);
      const auto rec = holo::reconstruct_opd(sample, reference);
      worst_secs = std::max(worst_secs, clock.seconds());
      worst_rms = std::max(worst_rms, rms_minus_constant(rec.opd_nm, truth.opd_nm, 3));
      ++images;
    }
  return {worst_rms < 1.0 && worst_secs < 1.0,
          fmt::format("{} phantoms, peak <= {:.0f} nm, worst RMS {:.4f} nm (< 1), worst {:.3f} s/image (< 1)", images,
                      peak_max, worst_rms, worst_secs)};
}

// ---------------------------------------------------------------------------
// 2. Unwrapping

Outcome unwrapping() {
  const std::size_t n = 128;
  RealGrid ramp(n, n), dome = gaussian_dome(n, 4 * pi, 18.0);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) ramp(x, y) = 12.7 * (0.7 * x + 0.3 * y) / static_cast<double>(n - 1);
  const double ramp_rms = rms_minus_constant(holo::unwrap_ls(holo::wrap_to_principal(ramp)), ramp, 0);
  const double dome_rms = rms_minus_constant(holo::unwrap_ls(holo::wrap_to_principal(dome)), dome, 0);

  // Residue-carrying 8x8 fields against the integer-shift candidates.
  bool minimal = true;
  std::size_t candidates = 0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.2);
    RealGrid truth = gaussian_dome(8, 9.0, 2.0);
    for (auto& v : truth.values()) v += noise(rng);
    const auto psi = holo::wrap_to_principal(truth).phase;
    const double e_ls = ls_energy(holo::unwrap_ls(holo::WrappedPhaseMap{psi}), psi);
    RealGrid cand = itoh_unwrap(psi);
    double best = std::min(ls_energy(cand, psi), ls_energy(truth, psi));
    candidates += 2;
    for (std::size_t i = 0; i < 64; ++i)
      for (int si : {-1, 1}) {
        cand[i] += si * 2 * pi;
        best = std::min(best, ls_energy(cand, psi));
        ++candidates;
        for (std::size_t j = i + 1; j < 64; ++j)
          for (int sj : {-1, 1}) {
            cand[j] += sj * 2 * pi;
            best = std::min(best, ls_energy(cand, psi));
            cand[j] -= sj * 2 * pi;
            ++candidates;
          }
        cand[i] -= si * 2 * pi;
      }
    minimal = minimal && e_ls <= best + 1e-9;
  }
  return {ramp_rms < 1e-4 && dome_rms < 1e-4 && minimal,
          fmt::format("ramp RMS {:.2e} rad, 4pi dome RMS {:.2e} rad (< 1e-4); LS minimal vs {} shift candidates: {}",
                      ramp_rms, dome_rms, candidates, minimal ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 3. Gradient suite

Outcome gradient_suite() {
  const Clock clock;
  double worst = 0;
  std::string where;
  for (const auto& c : layer_cases()) {
    nn::Network<double> net(c.in, c.specs, 17, 0.5);
    nn::Shape batch{3};
    batch.insert(batch.end(), c.in.begin(), c.in.end());
    if (c.mode == Mode::eval) net.forward(random_tensor<double>(batch, 8), Mode::train, 1);
    std::string w;
    const double err = fd_max_rel_error(net, random_tensor<double>(batch, 23), c.mode, 7, &w);
    if (err > worst) {
      worst = err;
      where = c.name + ":" + w;
    }
  }
  gan::ArchConfig arch;
  arch.image_size = 32;
  arch.base_channels = 4;
  nn::Network<double> disc(gan::image_shape(arch), gan::discriminator_specs(arch), 5, 0.2);
  const auto d = nn::grad_check(disc, random_tensor<double>({3, 32, 32, 3}, 4), 1e-5, Mode::train, 1, 40);
  arch.latent_dim = 100;
  nn::Network<double> gen({100}, gan::generator_specs(arch), 6, 0.2);
  const auto g = nn::grad_check(gen, random_tensor<double>({3, 100}, 9), 1e-6, Mode::train, 1, 40);
  for (const auto* r : {&d, &g})
    if (r->max_rel_error > worst) {
      worst = r->max_rel_error;
      where = r->worst;
    }
  const double secs = clock.seconds();
  return {worst < 1e-4 && secs < 120,
          fmt::format("{} layer kinds + discriminator 32x32 + generator from latent 100; max rel error {:.2e} at {} "
                      "(< 1e-4); {:.1f} s (< 120)",
                      layer_cases().size(), worst, where, secs)};
}

// ---------------------------------------------------------------------------
// 4. Optimizer oracle

Outcome optimizer_oracle() {
  const nn::AdamConfig cfg{0.05, 0.5, 0.99, 1e-8};
  const double a = 3.0, c = -0.4;
  nn::Param<double> p("t", nn::Tensor64({1}, std::vector<double>{1.3}));
  const auto oracle = adam_oracle(1.3, a, c, cfg, 3);
  double traj_err = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    p.grad[0] = a * (p.value[0] - c);
    nn::adam_step<double>({&p}, cfg);
    traj_err = std::max(traj_err, std::abs(p.value[0] - oracle[k]));
  }
  const nn::AdamConfig gan_adam{2e-4, 0.5, 0.99, 1e-8};
  const auto start = random_tensor<double>({1000}, 4);
  nn::Param<double> q("w", start);
  q.grad = random_tensor<double>({1000}, 5);
  nn::adam_step<double>({&q}, gan_adam);
  double step_err = 0;
  for (std::size_t i = 0; i < 1000; ++i)
    step_err = std::max(step_err, std::abs(std::abs(q.value[i] - start[i]) - gan_adam.lr) / gan_adam.lr);
  return {traj_err <= 1e-12 && step_err < 1e-4,
          fmt::format("3-step trajectory error {:.1e} (<= 1e-12); first-step |dw| within {:.1e} of lr (relative)",
                      traj_err, step_err)};
}

// ---------------------------------------------------------------------------
// 5. Loss and metric oracles

Outcome loss_metric_oracles() {
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> len(1, 60), level(0, 6);
  std::bernoulli_distribution b(0.5);
  const int trials = 1000;
  double loss_err = 0, auc_err = 0;
  int metric_mismatch = 0;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> r(static_cast<std::size_t>(len(rng))), f(static_cast<std::size_t>(len(rng)));
    for (auto& v : r) v = t % 10 == 0 ? std::round(u(rng)) : u(rng);
    for (auto& v : f) v = t % 10 == 1 ? std::round(u(rng)) : u(rng);
    loss_err = std::max(loss_err, std::abs(gan::d_loss(r, f) - d_loss_oracle(r, f)));
    loss_err = std::max(loss_err, std::abs(gan::g_loss(f) - g_loss_oracle(f)));

    const auto n = static_cast<std::size_t>(len(rng)) + 1;
    std::vector<int> pred(n), truth(n);
    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = b(rng);
      truth[i] = b(rng);
      score[i] = t % 2 ? u(rng) : 0.1 * level(rng);
    }
    truth[0] = 1;
    truth[1] = 0;
    const auto c = eval::confusion(pred, truth);
    const auto o = count_oracle(pred, truth);
    const auto m = eval::metrics(c);
    const std::size_t pos = o.tp + o.fn, neg = o.tn + o.fp;
    const auto ratio = [](std::size_t a, std::size_t b) { return static_cast<double>(a) / static_cast<double>(b); };
    const bool exact = c == o && m.accuracy == ratio(o.tp + o.tn, n) && *m.sensitivity == ratio(o.tp, pos) &&
                       *m.specificity == ratio(o.tn, neg);
    metric_mismatch += !exact;
    auc_err = std::max(auc_err, std::abs(eval::roc_auc(score, truth) - auc_oracle(score, truth)));
  }
  return {loss_err <= 1e-12 && auc_err <= 1e-12 && metric_mismatch == 0,
          fmt::format("{} instances each: loss error {:.1e}, AUC error {:.1e} (<= 1e-12), metric mismatches {}", trials,
                      loss_err, auc_err, metric_mismatch)};
}

// ---------------------------------------------------------------------------
// 6. Augmentation

Outcome augmentation() {
  const auto img = random_tensor<float>({6, 6, 2}, 3);
  const auto orbit = clf::augment_x8(img);
  std::set<std::vector<float>> distinct;
  for (const auto& t : orbit) distinct.insert({t.values().begin(), t.values().end()});
  bool inverse = true, closure = true;
  for (int i = 0; i < 8; ++i) {
    inverse = inverse && clf::inverse_dihedral(orbit[static_cast<std::size_t>(i)], i) == img;
    for (int j = 0; j < 8; ++j) {
      const auto twice = clf::dihedral(orbit[static_cast<std::size_t>(i)], j);
      closure = closure && std::any_of(orbit.begin(), orbit.end(), [&](const nn::Tensor& t) { return t == twice; });
    }
  }
  return {orbit.size() == 8 && distinct.size() == 8 && inverse && closure,
          fmt::format("{} outputs, {} distinct, inverse recovery {}, closure under composition {}", orbit.size(),
                      distinct.size(), inverse ? "yes" : "no", closure ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 7. KNN equivalence

Outcome knn_equivalence() {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> ntrain(9, 40), ntest(1, 10), levels(0, 3);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<nn::Tensor> train, query;
    std::vector<int> labels;
    const int n = ntrain(rng);
    for (int i = 0; i < n; ++i) {
      nn::Tensor t({3, 3, 1});
      // Coarse values make distance ties common.
      for (auto& v : t.values()) v = trial % 2 ? static_cast<float>(levels(rng)) : static_cast<float>(rng() % 1000) / 100;
      train.push_back(t);
      labels.push_back(static_cast<int>(rng() % 2));
    }
    for (int i = 0; i < ntest(rng); ++i) {
      nn::Tensor t({3, 3, 1});
      for (auto& v : t.values()) v = static_cast<float>(levels(rng));
      query.push_back(t);
    }
    mismatches += clf::knn_classify(train, labels, query, clf::KnnConfig{9}) != knn_oracle(train, labels, query, 9);
  }
  return {mismatches == 0, fmt::format("100 random instances (k = 9, L1), {} mismatches", mismatches)};
}

// ---------------------------------------------------------------------------
// Shared desk-scale pretraining for 8 and 9

struct Pretrained {
  std::vector<nn::Tensor> unlabeled;
  gan::GanResult gan;
  double seconds = 0;
};

Pretrained& desk_pretrain() {
  static Pretrained p = [] {
    Pretrained out;
    const Clock clock;
    const auto dir = scratch_dir("acceptance_pretrain");
    synth::BuildOptions o;
    o.class_specs = desk::class_specs();
    o.pretrain_count = desk::kPretrainImages;
    o.out_dir = dir;
    o.seed = desk::kPretrainSeed;
    const auto m = synth::build_dataset(o);
    out.unlabeled = eval::load_unlabeled(m, dir, desk::encoding());
    std::vector<nn::Tensor> expanded;
    for (const auto& im : out.unlabeled)
      for (auto& t : clf::augment_x8(im)) expanded.push_back(std::move(t));
    out.gan = gan::train_gan(expanded, desk::gan_config(), [&](const gan::EpochStats& e, gan::GanTrainer&) {
      fmt::print("  [pretrain] epoch {:2d}  d_loss {:.3f}  g_loss {:.3f}  D(real) {:.2f}  D(fake) {:.2f}  {:.0f} s\n",
                 e.epoch, e.d_loss, e.g_loss, e.d_real_mean, e.d_fake_mean, clock.seconds());
      std::fflush(stdout);
    });
    out.seconds = clock.seconds();
    return out;
  }();
  return p;
}

// ---------------------------------------------------------------------------
// 8. Method ranking at desk scale

Outcome desk_trend() {
  const Clock clock;
  auto& pre = desk_pretrain();
  eval::MethodConfig mc;
  mc.arch = desk::arch();
  mc.train = desk::classifier_config();
  mc.discriminator = pre.gan.discriminator;

  int seeds_ok = 0;
  std::string detail;
  for (std::uint64_t seed : desk::kTrendSeeds) {
    const auto dir = scratch_dir(fmt::format("acceptance_trend_{}", seed));
    synth::BuildOptions o;
    o.class_specs = desk::class_specs();
    o.pretrain_count = 0;
    o.out_dir = dir;
    o.seed = seed;
    const auto data = eval::load_labeled(synth::build_dataset(o), dir, desk::encoding());
    std::map<std::string, eval::SweepRow> rows;
    for (const std::string name : {"cnn", "cnn-aug", "topgan"}) {
      auto method = eval::make_method(name, mc);
      rows[name] = eval::run_cv(*method, data, desk::kTrainSize, seed);
      const auto& r = rows[name];
      fmt::print("  [seed {}] {:<8} mean acc {:.3f}  range [{:.3f}, {:.3f}]  AUC {:.3f}  {:.0f} s\n", seed, name,
                 r.mean.accuracy, r.accuracy_min, r.accuracy_max, r.mean.auc.value_or(NAN), clock.seconds());
      std::fflush(stdout);
    }
    const double cnn = rows["cnn"].mean.accuracy;
    const double cnn_range = rows["cnn"].accuracy_max - rows["cnn"].accuracy_min;
    const double top_range = rows["topgan"].accuracy_max - rows["topgan"].accuracy_min;
    const bool a = rows["topgan"].mean.accuracy >= cnn + 0.05 - 1e-12;
    const bool b = rows["cnn-aug"].mean.accuracy >= cnn + 0.03 - 1e-12;
    const bool c = top_range <= cnn_range + 1e-12;
    seeds_ok += a && b && c;
    detail += fmt::format("seed {}: cnn {:.3f}, cnn-aug {:.3f} ({}), topgan {:.3f} ({}), ranges {:.3f} vs {:.3f} ({}); ",
                          seed, cnn, rows["cnn-aug"].mean.accuracy, b ? "ok" : "no", rows["topgan"].mean.accuracy,
                          a ? "ok" : "no", top_range, cnn_range, c ? "ok" : "no");
  }
  const double total = pre.seconds + clock.seconds();
  return {seeds_ok >= 2 && total <= 30 * 60,
          detail + fmt::format("{} of 3 seeds satisfy all three (need 2); {:.0f} s total incl. pretrain (<= 1800)",
                               seeds_ok, total)};
}

// ---------------------------------------------------------------------------
// 9. GAN sanity

Outcome gan_sanity() {
  auto& pre = desk_pretrain();
  const std::size_t n = 256;
  const auto real = gan::mean_radial_spectrum(pre.unlabeled);
  auto fresh = gan::build_generator(desk::arch(), desk::gan_config().seed);
  const double before = gan::spectral_distance(gan::mean_radial_spectrum(gan::sample_images(fresh, n, 77)), real);
  const double after =
      gan::spectral_distance(gan::mean_radial_spectrum(gan::sample_images(pre.gan.generator, n, 77)), real);

  auto cfg = desk::gan_config();
  cfg.freeze_generator = true;
  cfg.seed = 91;
  gan::GanTrainer trainer(cfg);
  const auto batch = static_cast<std::size_t>(cfg.batch);
  for (std::size_t step = 0; step < 200; ++step) {
    std::vector<const nn::Tensor*> members;
    for (std::size_t i = 0; i < batch; ++i) members.push_back(&pre.unlabeled[(step * batch + i) % pre.unlabeled.size()]);
    trainer.discriminator_step(nn::stack(members));
  }
  const auto dir = scratch_dir("acceptance_gan_heldout");
  synth::BuildOptions o;
  o.class_specs = desk::class_specs();
  o.pretrain_count = static_cast<int>(n);
  o.out_dir = dir;
  o.seed = desk::kPretrainSeed + 1;
  const auto held_out = eval::load_unlabeled(synth::build_dataset(o), dir, desk::encoding());
  const auto fakes = gan::sample_images(trainer.generator(), n, 93);
  const auto pr = trainer.discriminator().forward(nn::stack<float>(std::span<const nn::Tensor>(held_out)), Mode::eval);
  const auto pf = trainer.discriminator().forward(nn::stack<float>(std::span<const nn::Tensor>(fakes)), Mode::eval);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) correct += (pr[i] > 0.5f) + (pf[i] <= 0.5f);
  const double acc = static_cast<double>(correct) / static_cast<double>(2 * n);
  return {after < before && acc > 0.95,
          fmt::format("spectral L1 to real: trained {:.3f} vs untrained {:.3f}; frozen-generator D accuracy after 200 "
                      "steps {:.3f} (> 0.95, {} held-out real + {} fake)",
                      after, before, acc, n, n)};
}

// ---------------------------------------------------------------------------
// 10. Determinism

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "topgan");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::main(static_cast<int>(argv.size()), argv.data());
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  return files;
}

Outcome determinism() {
  const auto base = scratch_dir("acceptance_determinism");
  const std::vector<std::string> model{"--image-size", "32", "--base-channels", "4", "--latent-dim", "16"};
  auto with = [](std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  std::vector<std::string> failures;
  std::vector<std::map<std::string, std::string>> runs;
  const std::string out = (base / "run").string();
  for (int run = 0; run < 2; ++run) {
    fs::remove_all(out);
    const std::vector<std::vector<std::string>> commands{
        {"synth", "--out", out, "--per-class", "20", "--unlabeled", "32", "--seed", "4"},
        with({"train-gan", "--out", out, "--epochs", "3", "--batch", "8", "--augment", "false", "--seed", "4",
              "--checkpoint-every", "1", "--samples", "4"},
             model),
        with({"train-clf", "--out", out + "/clf_topgan", "--data", "../manifest.json", "--disc", "../discriminator.nnck",
              "--method", "topgan", "--fold", "0", "--train-size", "10", "--max-epochs", "4", "--seed", "4"},
             model),
        with({"train-clf", "--out", out + "/clf_cnn_aug", "--data", "../manifest.json", "--method", "cnn-aug",
              "--fold", "1", "--train-size", "10", "--max-epochs", "2", "--seed", "4"},
             model),
        with({"eval", "--out", out, "--max-epochs", "2", "--seed", "4"}, model),
        with({"sweep", "--out", out, "--sizes", "10,20", "--methods", "knn,cnn,topgan", "--max-epochs", "2", "--seed",
              "4"},
             model),
        {"sample", "--out", out, "--n", "4", "--seed", "4"},
    };
    for (const auto& c : commands)
      if (cli(c) != 0) failures.push_back(c[0] + " failed");
    runs.push_back(tree(out));
  }
  const auto& a = runs[0];
  const auto& b = runs[1];
  std::size_t logs = 0, checkpoints = 0;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != bytes) failures.push_back(name);
    logs += name.ends_with(".csv");
    checkpoints += name.ends_with(".nnck");
  }
  if (a.size() != b.size()) failures.push_back("file sets differ");
  std::string detail = fmt::format("{} files ({} CSV, {} checkpoints) from synth, train-gan, train-clf x2, eval, "
                                   "sweep, sample; ",
                                   a.size(), logs, checkpoints);
  detail += failures.empty() ? "all byte-identical" : "differing: " + failures.front();
  return {failures.empty() && logs >= 5 && checkpoints >= 4, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"reconstruction round trip", reconstruction_round_trip},
      {"phase unwrapping", unwrapping},
      {"gradient suite", gradient_suite},
      {"optimizer oracle", optimizer_oracle},
      {"loss and metric oracles", loss_metric_oracles},
      {"augmentation group", augmentation},
      {"KNN equivalence", knn_equivalence},
      {"method ranking at desk scale", desk_trend},
      {"GAN sanity", gan_sanity},
      {"determinism", determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.contains(id)) continue;
    const Clock clock;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    fmt::print("{} criterion {:2d} ({}): {} [{:.1f} s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail,
               clock.seconds());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

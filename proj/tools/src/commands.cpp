#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <map>
#include <set>

#include "topgan/checkpoint.hpp"
#include "topgan/classify.hpp"
#include "topgan/cli.hpp"
#include "topgan/crossval.hpp"
#include "topgan/gan.hpp"
#include "topgan/png_export.hpp"
#include "topgan/synthdata.hpp"

namespace topgan::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::set<std::string> kPathKeys{"out", "data", "disc", "generator"};

json model_defaults() {
  return {{"image_size", 64},   {"base_channels", 64}, {"latent_dim", 100},
          {"opd_min_nm", 0.0},  {"opd_max_nm", 250.0}};
}

json clf_defaults() {
  return {{"max_epochs", 900},         {"batch", 16},  {"lr", 1e-5}, {"beta1", 0.6}, {"beta2", 0.99},
          {"freeze_body", false},      {"convergence_delta", 1e-5}, {"convergence_window", 20},
          {"k", 9},                    {"disc", "discriminator.nnck"}};
}

void merge(json& into, const json& from) {
  for (auto it = from.begin(); it != from.end(); ++it) into[it.key()] = it.value();
}

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

std::string file_name(std::string command) {
  std::replace(command.begin(), command.end(), '-', '_');
  return command;
}

bool same_kind(const json& a, const json& b) {
  if (a.is_null() || b.is_null()) return true;
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

json parse_scalar(const std::string& key, const json& like, const std::string& text) {
  try {
    std::size_t used = 0;
    json v;
    if (like.is_boolean()) {
      if (text.empty() || text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      throw ValidationError("");
    } else if (like.is_number_unsigned()) {
      require(!text.empty() && text[0] != '-', "");
      v = std::stoull(text, &used);
    } else if (like.is_number_integer()) {
      v = std::stoll(text, &used);
    } else if (like.is_number_float()) {
      v = std::stod(text, &used);
    } else {
      return text;
    }
    require(used == text.size(), "");
    return v;
  } catch (const std::exception&) {
    throw ValidationError(fmt::format("--{}: cannot parse '{}'", flag_name(key), text));
  }
}

json parse_flag(const std::string& key, const json& like, const std::string& text) {
  if (!like.is_array()) return parse_scalar(key, like, text);
  json out = json::array();
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const std::string item = text.substr(start, comma - start);
    if (!item.empty()) out.push_back(parse_scalar(key, like.empty() ? json("") : like.front(), item));
    start = comma + 1;
  }
  return out;
}

template <class T>
T get(const json& cfg, const char* key) {
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("config '{}': {}", key, e.what()));
  }
}

fs::path at(const json& cfg, const char* key) {
  const fs::path p = get<std::string>(cfg, key);
  return p.is_absolute() ? p : fs::path(get<std::string>(cfg, "out")) / p;
}

json without_paths(const json& cfg) {
  json out = cfg;
  for (const auto& k : kPathKeys) out.erase(k);
  return out;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

gan::ArchConfig arch_from(const json& cfg) {
  gan::ArchConfig a;
  a.image_size = get<std::size_t>(cfg, "image_size");
  a.base_channels = get<int>(cfg, "base_channels");
  a.latent_dim = get<int>(cfg, "latent_dim");
  a.validate();
  return a;
}

eval::EncodeConfig encode_from(const json& cfg) {
  eval::EncodeConfig e;
  e.opd_min_nm = get<double>(cfg, "opd_min_nm");
  e.opd_max_nm = get<double>(cfg, "opd_max_nm");
  e.size = get<std::size_t>(cfg, "image_size");
  require(e.opd_max_nm > e.opd_min_nm, "config: opd_max_nm must exceed opd_min_nm");
  return e;
}

clf::ClfTrainConfig clf_from(const json& cfg) {
  clf::ClfTrainConfig c;
  c.adam = {get<double>(cfg, "lr"), get<double>(cfg, "beta1"), get<double>(cfg, "beta2"), 1e-8};
  c.max_epochs = get<int>(cfg, "max_epochs");
  c.batch = get<int>(cfg, "batch");
  c.freeze_body = get<bool>(cfg, "freeze_body");
  c.convergence_delta = get<double>(cfg, "convergence_delta");
  c.convergence_window = get<int>(cfg, "convergence_window");
  c.validate();
  return c;
}

nn::Network<float> load_discriminator(const fs::path& path, const gan::ArchConfig& arch) {
  auto loaded = nn::load_checkpoint(path);
  require(loaded.network.input_shape() == gan::image_shape(arch),
          "discriminator " + path.string() + " expects input " + nn::shape_string(loaded.network.input_shape()) +
              ", config has image_size " + std::to_string(arch.image_size));
  return std::move(loaded.network);
}

void write_sample_grid(const fs::path& path, const std::vector<nn::Tensor>& samples) {
  std::vector<png::Image> tiles;
  for (const auto& s : samples) {
    RealGrid g(s.dim(1), s.dim(0));
    for (std::size_t y = 0; y < s.dim(0); ++y)
      for (std::size_t x = 0; x < s.dim(1); ++x) g(x, y) = s[(y * s.dim(1) + x) * s.dim(2)];
    tiles.push_back(png::colorize(g, -1.0, 1.0));
  }
  png::write(path, png::mosaic(tiles));
}

synth::DatasetManifest load_manifest(const json& cfg, fs::path& dir) {
  const fs::path path = at(cfg, "data");
  dir = path.parent_path();
  return synth::DatasetManifest::load(path);
}

json cmd_synth(const json& cfg, const fs::path& out) {
  synth::BuildOptions o;
  o.out_dir = out;
  o.seed = get<std::uint64_t>(cfg, "seed");
  const auto route = get<std::string>(cfg, "route");
  require(route == "direct" || route == "holographic", "synth: route must be direct or holographic");
  o.route = route == "direct" ? synth::Route::direct : synth::Route::holographic;
  o.optics.noise_std = get<double>(cfg, "noise_std");
  o.threshold_nm = get<double>(cfg, "threshold_nm");
  o.min_area = get<std::size_t>(cfg, "min_area");
  o.pretrain_count = get<int>(cfg, "unlabeled");

  auto specs = cfg.at("class_specs").is_null() ? synth::default_class_specs()
                                               : get<std::vector<synth::PhantomClassSpec>>(cfg, "class_specs");
  const int classes = get<int>(cfg, "classes");
  require(classes >= 1 && static_cast<std::size_t>(classes) <= specs.size(),
          fmt::format("synth: classes must be in 1..{} (supply class_specs for more)", specs.size()));
  specs.resize(static_cast<std::size_t>(classes));
  for (auto& s : specs) {
    s.count = get<int>(cfg, "per_class");
    s.grid = get<std::size_t>(cfg, "grid");
  }
  o.class_specs = specs;
  const auto m = synth::build_dataset(o);
  std::size_t labeled = 0;
  for (const auto& e : m.entries) labeled += e.label != synth::kUnlabeled;
  return {{"entries", m.entries.size()}, {"labeled", labeled}, {"unlabeled", m.entries.size() - labeled}};
}

std::vector<int> sample_epochs(int epochs) {
  std::set<int> s;
  for (int num : {10, 20, 75}) {
    const int e = static_cast<int>(std::lround(epochs * num / 75.0));
    if (e >= 1 && e <= epochs) s.insert(e);
  }
  return {s.begin(), s.end()};
}

json cmd_train_gan(const json& cfg, const fs::path& out) {
  fs::path dir;
  const auto manifest = load_manifest(cfg, dir);
  auto images = eval::load_unlabeled(manifest, dir, encode_from(cfg));
  require(!images.empty(), "train-gan: manifest has no unlabeled images");
  if (get<bool>(cfg, "augment")) {
    std::vector<nn::Tensor> expanded;
    for (const auto& im : images)
      for (auto& t : clf::augment_x8(im)) expanded.push_back(std::move(t));
    images = std::move(expanded);
  }

  gan::GanTrainConfig g;
  g.arch = arch_from(cfg);
  g.batch = get<int>(cfg, "batch");
  g.adam = {get<double>(cfg, "lr"), get<double>(cfg, "beta1"), get<double>(cfg, "beta2"), 1e-8};
  g.epochs = get<int>(cfg, "epochs");
  g.init_std = get<double>(cfg, "init_std");
  g.seed = get<std::uint64_t>(cfg, "seed");
  g.validate();
  const int every = get<int>(cfg, "checkpoint_every");
  const auto n_samples = get<std::size_t>(cfg, "samples");
  const auto marks = sample_epochs(g.epochs);
  const json meta_cfg = without_paths(cfg);

  std::vector<std::string> grids;
  auto on_epoch = [&](const gan::EpochStats& e, gan::GanTrainer& t) {
    fmt::print(stderr, "epoch {:3d}  d_loss {:.4f}  g_loss {:.4f}  D(real) {:.3f}  D(fake) {:.3f}\n", e.epoch,
               e.d_loss, e.g_loss, e.d_real_mean, e.d_fake_mean);
    if (std::find(marks.begin(), marks.end(), e.epoch) != marks.end()) {
      const auto name = fmt::format("samples_epoch_{:03d}.png", e.epoch);
      write_sample_grid(out / name, gan::sample_images(t.generator(), n_samples, derive_seed(g.seed, {20})));
      grids.push_back(name);
    }
    if (every > 0 && e.epoch % every == 0) {
      fs::create_directories(out / "checkpoints");
      const json meta{{"epoch", e.epoch}, {"config", meta_cfg}};
      nn::save_checkpoint(out / fmt::format("checkpoints/generator_epoch_{:03d}.nnck", e.epoch), t.generator(), meta);
      nn::save_checkpoint(out / fmt::format("checkpoints/discriminator_epoch_{:03d}.nnck", e.epoch),
                          t.discriminator(), meta);
    }
  };
  const auto result = gan::train_gan(images, g, on_epoch, out);
  const json meta{{"epoch", g.epochs}, {"config", meta_cfg}};
  nn::save_checkpoint(out / "generator.nnck", result.generator, meta);
  nn::save_checkpoint(out / "discriminator.nnck", result.discriminator, meta);
  gan::write_loss_csv(out / "gan_loss.csv", result.log);
  return {{"images", images.size()}, {"epochs", g.epochs}, {"sample_grids", grids}};
}

bool is_topgan(const std::string& method) { return method.rfind("topgan", 0) == 0; }

json cmd_train_clf(const json& cfg, const fs::path& out) {
  const auto method = get<std::string>(cfg, "method");
  require(method != "knn" && std::find(eval::kMethodNames.begin(), eval::kMethodNames.end(), method) !=
                                 eval::kMethodNames.end(),
          "train-clf: method must be one of topgan, topgan-aug, cnn, cnn-aug");
  const auto seed = get<std::uint64_t>(cfg, "seed");
  const auto arch = arch_from(cfg);
  fs::path dir;
  const auto manifest = load_manifest(cfg, dir);
  const auto data = eval::load_labeled(manifest, dir, encode_from(cfg));

  const int fold = get<int>(cfg, "fold");
  const auto train_size = get<std::size_t>(cfg, "train_size");
  require(fold >= -1 && fold < synth::kFolds, "train-clf: fold must be -1 (none) or 0..4");
  eval::FoldSplit split;
  if (fold >= 0 && train_size > 0) {
    split = eval::make_splits(data, train_size, seed).at(static_cast<std::size_t>(fold));
  } else {
    require(train_size == 0, "train-clf: a train_size draw needs a held-out fold");
    for (std::size_t i = 0; i < data.labels.size(); ++i)
      (data.folds[i] == fold ? split.test : split.train).push_back(i);
  }

  nn::Network<float> net;
  json body_source = nullptr;
  if (is_topgan(method)) {
    const auto disc_path = at(cfg, "disc");
    net = clf::build_topgan(load_discriminator(disc_path, arch), derive_seed(seed, {1}));
    body_source = nn::file_hash(disc_path);
  } else {
    net = clf::build_scratch_cnn(arch, derive_seed(seed, {1}));
  }
  auto tc = clf_from(cfg);
  tc.augment = method.ends_with("-aug");
  tc.seed = derive_seed(seed, {2});

  std::vector<nn::Tensor> xs;
  std::vector<int> ys;
  for (auto i : split.train) {
    xs.push_back(data.images[i]);
    ys.push_back(data.labels[i]);
  }
  const auto log = clf::train_classifier(net, xs, ys, tc);
  nn::save_checkpoint(out / "classifier.nnck", net,
                      {{"method", method}, {"body_source", body_source}, {"config", without_paths(cfg)}});
  clf::write_train_log_csv(out / "clf_log.csv", log);

  json summary{{"method", method}, {"train_images", xs.size()}, {"epochs", log.epochs.size()},
               {"converged", log.converged}};
  if (!split.test.empty()) {
    std::vector<nn::Tensor> test;
    std::vector<int> truth, pred;
    std::vector<double> score;
    for (auto i : split.test) {
      test.push_back(data.images[i]);
      truth.push_back(data.labels[i]);
    }
    for (const auto& p : clf::predict(net, test)) {
      pred.push_back(p.label);
      score.push_back(p.margin);
    }
    const auto m = eval::metrics(eval::confusion(pred, truth, 1));
    summary["test_accuracy"] = m.accuracy;
    summary["test_auc"] = eval::roc_auc(score, truth, 1);
  }
  write_json(out / "train_clf_report.json", summary);
  return summary;
}

json run_grid(const json& cfg, const fs::path& out, const std::vector<std::size_t>& sizes, const std::string& stem) {
  const auto methods = get<std::vector<std::string>>(cfg, "methods");
  require(!methods.empty(), "config: methods is empty");
  for (const auto& m : methods)
    require(std::find(eval::kMethodNames.begin(), eval::kMethodNames.end(), m) != eval::kMethodNames.end(),
            "config: unknown method '" + m + "'");
  const auto arch = arch_from(cfg);
  eval::MethodConfig mc;
  mc.knn.k = get<int>(cfg, "k");
  mc.train = clf_from(cfg);
  mc.arch = arch;
  fs::path dir;
  const auto manifest = load_manifest(cfg, dir);
  const auto data = eval::load_labeled(manifest, dir, encode_from(cfg));
  for (const auto& m : methods)
    if (is_topgan(m) && !mc.discriminator) mc.discriminator = load_discriminator(at(cfg, "disc"), arch);
  std::vector<std::unique_ptr<eval::Method>> owned;
  std::vector<eval::Method*> ptrs;
  for (const auto& m : methods) {
    owned.push_back(eval::make_method(m, mc));
    ptrs.push_back(owned.back().get());
  }
  const auto result = eval::sweep(ptrs, sizes, data, get<std::uint64_t>(cfg, "seed"), [](const eval::SweepRow& r) {
    fmt::print(stderr, "{:<10} n={:<3} acc {:.3f} [{:.3f}, {:.3f}]\n", r.method, r.train_size, r.mean.accuracy,
               r.accuracy_min, r.accuracy_max);
  });
  eval::write_sweep_csv(out / (stem + ".csv"), result);
  write_json(out / (stem + ".json"), eval::sweep_json(result));
  if (stem == "sweep") eval::write_sweep_plot(out / "sweep.png", result);
  return eval::sweep_json(result);
}

json cmd_sample(const json& cfg, const fs::path& out) {
  auto loaded = nn::load_checkpoint(at(cfg, "generator"));
  require(loaded.network.input_shape().size() == 1 && loaded.network.output_shape().size() == 3,
          "sample: checkpoint is not a generator");
  const auto n = get<std::size_t>(cfg, "n");
  require(n >= 1, "sample: n must be >= 1");
  const auto samples = gan::sample_images(loaded.network, n, get<std::uint64_t>(cfg, "seed"));
  write_sample_grid(out / "samples.png", samples);
  return {{"samples", n}};
}

}  // namespace

json defaults(const std::string& command) {
  json d{{"out", "."}, {"seed", std::uint64_t{0}}};
  if (command == "synth") {
    merge(d, {{"classes", 2},          {"per_class", 100},  {"unlabeled", 500},   {"route", "direct"},
              {"noise_std", 0.0},      {"grid", 128},       {"threshold_nm", 20.0}, {"min_area", 50},
              {"class_specs", nullptr}});
  } else if (command == "train-gan") {
    merge(d, model_defaults());
    merge(d, {{"data", "manifest.json"}, {"epochs", 75},  {"batch", 64},         {"lr", 2e-4},
              {"beta1", 0.5},            {"beta2", 0.99}, {"init_std", 0.02},    {"checkpoint_every", 0},
              {"samples", 16},           {"augment", true}});
  } else if (command == "train-clf") {
    merge(d, model_defaults());
    merge(d, clf_defaults());
    merge(d, {{"data", "manifest.json"}, {"method", "topgan"}, {"fold", -1}, {"train_size", 0}});
  } else if (command == "eval" || command == "sweep") {
    merge(d, model_defaults());
    merge(d, clf_defaults());
    merge(d, {{"data", "manifest.json"}, {"methods", eval::kMethodNames}});
    if (command == "eval")
      d["train_size"] = 10;
    else
      d["sizes"] = json::array({10, 20, 40, 60});
  } else if (command == "sample") {
    merge(d, {{"generator", "generator.nnck"}, {"n", 16}});
  } else {
    throw ValidationError("unknown command '" + command + "'");
  }
  return d;
}

json resolve(const std::string& command, const json& file, const json& flags) {
  json cfg = defaults(command);
  for (const json* layer : {&file, &flags}) {
    if (layer->is_null()) continue;
    require(layer->is_object(), "config must be a JSON object");
    for (auto it = layer->begin(); it != layer->end(); ++it) {
      require(cfg.contains(it.key()), "unknown config key '" + it.key() + "' for " + command);
      require(same_kind(cfg[it.key()], it.value()), "config key '" + it.key() + "' has the wrong type");
      cfg[it.key()] = it.value();
    }
  }
  return cfg;
}

json run(const std::string& command, const json& config) {
  const fs::path out = get<std::string>(config, "out");
  fs::create_directories(out);
  write_json(out / (file_name(command) + "_config.json"), config);
  if (command == "synth") return cmd_synth(config, out);
  if (command == "train-gan") return cmd_train_gan(config, out);
  if (command == "train-clf") return cmd_train_clf(config, out);
  if (command == "eval") return run_grid(config, out, {get<std::size_t>(config, "train_size")}, "eval");
  if (command == "sweep") return run_grid(config, out, get<std::vector<std::size_t>>(config, "sizes"), "sweep");
  if (command == "sample") return cmd_sample(config, out);
  throw ValidationError("unknown command '" + command + "'");
}

const std::map<std::string, std::string> kDescriptions{
    {"synth", "Generate phantoms, holograms and reconstructed OPD maps"},
    {"train-gan", "Train the DCGAN on the unlabeled pool"},
    {"train-clf", "Train one classifier on one fold"},
    {"eval", "Cross-validate every method at one training size"},
    {"sweep", "Cross-validate every method over several training sizes"},
    {"sample", "Write generator samples from a checkpoint"},
};

int main(int argc, char** argv) {
  CLI::App app{"TOP-GAN desk-scale pipeline"};
  app.require_subcommand(1);
  struct Sub {
    CLI::App* app;
    std::string config_file;
    std::map<std::string, std::string> values;
  };
  std::map<std::string, Sub> subs;
  for (const auto& command : kCommands) {
    Sub& s = subs[command];
    s.app = app.add_subcommand(command, kDescriptions.at(command));
    s.app->add_option("--config", s.config_file, "JSON config file");
    const json d = defaults(command);
    for (auto it = d.begin(); it != d.end(); ++it) {
      if (it.value().is_null() || it.value().is_object()) continue;
      const std::string name = "--" + flag_name(it.key());
      auto* opt = s.app->add_option(name, s.values[it.key()], "default " + it.value().dump());
      if (it.value().is_boolean()) opt->expected(0, 1);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  for (auto& [command, s] : subs) {
    if (!s.app->parsed()) continue;
    try {
      json file = nullptr;
      if (!s.config_file.empty()) {
        std::ifstream in(s.config_file);
        if (!in) throw ValidationError("cannot read config " + s.config_file);
        file = json::parse(in);
      }
      const json d = defaults(command);
      json flags = json::object();
      for (const auto& [key, text] : s.values)
        if (s.app->get_option("--" + flag_name(key))->count() > 0) flags[key] = parse_flag(key, d[key], text);
      const json cfg = resolve(command, file, flags);
      const json summary = run(command, cfg);
      fmt::print("{}\n", summary.dump());
      return kExitOk;
    } catch (const ValidationError& e) {
      fmt::print(stderr, "config error: {}\n", e.what());
      return kExitConfig;
    } catch (const json::exception& e) {
      fmt::print(stderr, "config error: {}\n", e.what());
      return kExitConfig;
    } catch (const std::exception& e) {
      fmt::print(stderr, "error: {}\n", e.what());
      return kExitRuntime;
    }
  }
  return kExitConfig;
}

}  // namespace topgan::cli

#include "topgan/gan.hpp"

#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <numeric>

#include "topgan/checkpoint.hpp"
#include "topgan/fft.hpp"

namespace topgan::gan {

using nn::LayerSpec;

int ArchConfig::layers() const {
  if (conv_layers > 0) return conv_layers;
  int n = 0;
  for (std::size_t s = image_size; s > 8; s /= 2) ++n;
  return n;
}

void ArchConfig::validate() const {
  require(image_size >= 8, "arch: image_size must be at least 8");
  require(base_channels > 0 && latent_dim > 0 && channels > 0, "arch: sizes must be positive");
  require(conv_layers >= 0, "arch: conv_layers must be >= 0");
  const int n = layers();
  require(n >= 1, "arch: need at least one conv layer");
  require(n < 20 && (image_size % (std::size_t{1} << n)) == 0,
          fmt::format("arch: image_size {} not divisible by 2^{}", image_size, n));
}

void to_json(nlohmann::json& j, const ArchConfig& a) {
  j = {{"image_size", a.image_size},
       {"base_channels", a.base_channels},
       {"latent_dim", a.latent_dim},
       {"conv_layers", a.conv_layers},
       {"channels", a.channels}};
}

void from_json(const nlohmann::json& j, ArchConfig& a) {
  ArchConfig d;
  a.image_size = j.value("image_size", d.image_size);
  a.base_channels = j.value("base_channels", d.base_channels);
  a.latent_dim = j.value("latent_dim", d.latent_dim);
  a.conv_layers = j.value("conv_layers", d.conv_layers);
  a.channels = j.value("channels", d.channels);
}

nn::Shape image_shape(const ArchConfig& arch) {
  const auto c = static_cast<std::size_t>(arch.channels);
  return {arch.image_size, arch.image_size, c};
}

std::vector<LayerSpec> discriminator_body_specs(const ArchConfig& arch) {
  arch.validate();
  std::vector<LayerSpec> specs;
  for (int i = 0; i < arch.layers(); ++i) {
    specs.push_back(LayerSpec::conv(arch.base_channels << i, 5, 2, i == 0));
    if (i > 0) specs.push_back(LayerSpec::batchnorm());
    specs.push_back(LayerSpec::leaky_relu(0.1));
  }
  return specs;
}

std::vector<LayerSpec> discriminator_specs(const ArchConfig& arch) {
  auto specs = discriminator_body_specs(arch);
  specs.push_back(LayerSpec::fc(1));
  specs.push_back(LayerSpec::sigmoid());
  return specs;
}

std::vector<LayerSpec> generator_specs(const ArchConfig& arch) {
  arch.validate();
  const int n = arch.layers();
  const std::size_t start = arch.image_size >> n;
  const int top = arch.base_channels << (n - 1);
  std::vector<LayerSpec> specs;
  specs.push_back(LayerSpec::fc(static_cast<int>(start * start) * top));
  specs.push_back(LayerSpec::reshape({start, start, static_cast<std::size_t>(top)}));
  specs.push_back(LayerSpec::batchnorm());
  specs.push_back(LayerSpec::relu());
  for (int i = n - 2; i >= 0; --i) {
    specs.push_back(LayerSpec::tconv(arch.base_channels << i, 5, 2, false));
    specs.push_back(LayerSpec::batchnorm());
    specs.push_back(LayerSpec::relu());
  }
  specs.push_back(LayerSpec::tconv(arch.channels));
  specs.push_back(LayerSpec::tanh());
  return specs;
}

nn::Network<float> build_discriminator(const ArchConfig& arch, std::uint64_t seed, double init_std) {
  nn::Network<float> net(image_shape(arch), discriminator_specs(arch), seed, init_std);
  require(net.output_shape() == nn::Shape{1}, "gan: discriminator must end in one unit");
  return net;
}

nn::Network<float> build_generator(const ArchConfig& arch, std::uint64_t seed, double init_std) {
  nn::Network<float> net({static_cast<std::size_t>(arch.latent_dim)}, generator_specs(arch), seed,
                         init_std);
  require(net.output_shape() == image_shape(arch),
          "gan: generator output " + nn::shape_string(net.output_shape()) +
              " does not match discriminator input " + nn::shape_string(image_shape(arch)));
  return net;
}

double d_loss(std::span<const double> d_real, std::span<const double> d_fake) {
  require(!d_real.empty() && !d_fake.empty(), "d_loss: empty batch");
  double r = 0, f = 0;
  for (double p : d_real) r += std::log(clamp_probability(p));
  for (double p : d_fake) f += std::log(1.0 - clamp_probability(p));
  return r / static_cast<double>(d_real.size()) + f / static_cast<double>(d_fake.size());
}

double g_loss(std::span<const double> d_fake) {
  require(!d_fake.empty(), "g_loss: empty batch");
  double f = 0;
  for (double p : d_fake) f += std::log(clamp_probability(p));
  return f / static_cast<double>(d_fake.size());
}

void GanTrainConfig::validate() const {
  require(batch >= 1, "gan: batch must be >= 1");
  require(epochs >= 0, "gan: epochs must be >= 0");
  require(init_std > 0, "gan: init_std must be positive");
  adam.validate();
  arch.validate();
}

void to_json(nlohmann::json& j, const GanTrainConfig& c) {
  j = {{"batch", c.batch},   {"adam", c.adam}, {"epochs", c.epochs},
       {"init_std", c.init_std}, {"seed", c.seed}, {"arch", c.arch},
       {"freeze_generator", c.freeze_generator}};
}

void from_json(const nlohmann::json& j, GanTrainConfig& c) {
  GanTrainConfig d;
  c.batch = j.value("batch", d.batch);
  c.adam = j.value("adam", d.adam);
  c.epochs = j.value("epochs", d.epochs);
  c.init_std = j.value("init_std", d.init_std);
  c.seed = j.value("seed", d.seed);
  c.arch = j.value("arch", d.arch);
  c.freeze_generator = j.value("freeze_generator", d.freeze_generator);
}

namespace {

std::vector<double> column(const nn::Tensor& probs) {
  return {probs.values().begin(), probs.values().end()};
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// d/dp of (1/n) sum log(p) or log(1 - p); zero where the clamp is active.
nn::Tensor log_grad(const nn::Tensor& probs, bool complement, float sign) {
  nn::Tensor g(probs.shape());
  const float n = static_cast<float>(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (p != clamp_probability(p)) continue;
    const double d = complement ? -1.0 / (1.0 - p) : 1.0 / p;
    g[i] = sign * static_cast<float>(d) / n;
  }
  return g;
}

}  // namespace

GanTrainer::GanTrainer(const GanTrainConfig& cfg)
    : GanTrainer(cfg, build_generator(cfg.arch, derive_seed(cfg.seed, {10}), cfg.init_std),
                 build_discriminator(cfg.arch, derive_seed(cfg.seed, {11}), cfg.init_std)) {}

GanTrainer::GanTrainer(const GanTrainConfig& cfg, nn::Network<float> generator,
                       nn::Network<float> discriminator)
    : cfg_(cfg),
      generator_(std::move(generator)),
      discriminator_(std::move(discriminator)),
      rng_(derive_seed(cfg.seed, {12})) {
  cfg_.validate();
  require(generator_.output_shape() == discriminator_.input_shape(),
          "gan: generator output does not match discriminator input");
  require(discriminator_.output_shape() == nn::Shape{1}, "gan: discriminator must output one unit");
}

std::uint64_t GanTrainer::next_seed() { return derive_seed(cfg_.seed, {13, step_++}); }

nn::Tensor GanTrainer::sample_latent(std::size_t n) {
  const std::size_t d = generator_.input_shape().at(0);
  nn::Tensor z({n, d});
  std::normal_distribution<float> normal(0.0f, 1.0f);
  for (float& v : z.values()) v = normal(rng_);
  return z;
}

StepStats GanTrainer::discriminator_step(const nn::Tensor& real_batch) {
  const std::size_t n = real_batch.dim(0);
  const nn::Tensor fake = generator_.forward(sample_latent(n), nn::Mode::train, next_seed());

  discriminator_.zero_grad();
  // Ascent on d_loss == descent on -d_loss, hence the negative sign.
  const nn::Tensor p_real = discriminator_.forward(real_batch, nn::Mode::train, next_seed());
  discriminator_.backward(log_grad(p_real, false, -1.0f));
  const nn::Tensor p_fake = discriminator_.forward(fake, nn::Mode::train, next_seed());
  discriminator_.backward(log_grad(p_fake, true, -1.0f));
  discriminator_.adam_step(cfg_.adam);

  const auto r = column(p_real), f = column(p_fake);
  StepStats s;
  s.d_loss = d_loss(r, f);
  s.d_real_mean = mean(r);
  s.d_fake_mean = mean(f);
  return s;
}

double GanTrainer::generator_step(std::size_t n) {
  generator_.zero_grad();
  const nn::Tensor fake = generator_.forward(sample_latent(n), nn::Mode::train, next_seed());
  discriminator_.zero_grad();
  const nn::Tensor p = discriminator_.forward(fake, nn::Mode::train, next_seed());
  const nn::Tensor dfake = discriminator_.backward(log_grad(p, false, -1.0f));
  generator_.backward(dfake);
  generator_.adam_step(cfg_.adam);
  discriminator_.zero_grad();
  return g_loss(column(p));
}

EpochStats GanTrainer::train_epoch(const std::vector<nn::Tensor>& images) {
  const std::size_t n = images.size();
  const auto b = static_cast<std::size_t>(cfg_.batch);
  require(n >= b, fmt::format("gan: dataset of {} images is smaller than batch {}", n, b));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(derive_seed(cfg_.seed, {14, static_cast<std::uint64_t>(epoch_)}));
  std::shuffle(order.begin(), order.end(), shuffle_rng);

  const std::size_t batches = n / b;
  EpochStats e;
  e.epoch = ++epoch_;
  for (std::size_t k = 0; k < batches; ++k) {
    const std::size_t first = k * b;
    const std::size_t last = (k + 1 == batches) ? n : first + b;
    std::vector<const nn::Tensor*> members;
    for (std::size_t i = first; i < last; ++i) members.push_back(&images[order[i]]);
    const nn::Tensor real = nn::stack(members);

    const StepStats s = discriminator_step(real);
    const double g = cfg_.freeze_generator ? g_loss(std::vector<double>{s.d_fake_mean})
                                           : generator_step(last - first);
    if (!std::isfinite(s.d_loss) || !std::isfinite(g))
      throw NumericError(fmt::format("gan: non-finite loss at epoch {} batch {}", e.epoch, k));
    e.d_loss += s.d_loss;
    e.g_loss += g;
    e.d_real_mean += s.d_real_mean;
    e.d_fake_mean += s.d_fake_mean;
  }
  const auto nb = static_cast<double>(batches);
  e.d_loss /= nb;
  e.g_loss /= nb;
  e.d_real_mean /= nb;
  e.d_fake_mean /= nb;
  return e;
}

GanResult train_gan(const std::vector<nn::Tensor>& images, const GanTrainConfig& cfg,
                    const EpochCallback& on_epoch, const std::filesystem::path& diagnostic_dir) {
  require(!images.empty(), "gan: unlabeled set is empty");
  for (const auto& im : images)
    require(im.shape() == image_shape(cfg.arch),
            "gan: image shape " + nn::shape_string(im.shape()) + " does not match arch");
  GanTrainer trainer(cfg);
  GanResult result;
  try {
    for (int e = 0; e < cfg.epochs; ++e) {
      result.log.push_back(trainer.train_epoch(images));
      if (on_epoch) on_epoch(result.log.back(), trainer);
    }
  } catch (const NumericError&) {
    if (!diagnostic_dir.empty()) {
      std::filesystem::create_directories(diagnostic_dir);
      const nlohmann::json meta = {{"diagnostic", true}, {"epoch", trainer.epochs_done()}};
      nn::save_checkpoint(diagnostic_dir / "diagnostic_generator.nnck", trainer.generator(), meta);
      nn::save_checkpoint(diagnostic_dir / "diagnostic_discriminator.nnck", trainer.discriminator(),
                          meta);
    }
    throw;
  }
  result.generator = trainer.generator();
  result.discriminator = trainer.discriminator();
  return result;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochStats>& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,d_loss,g_loss,d_real_mean,d_fake_mean\n";
  for (const auto& e : log)
    out << fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f}\n", e.epoch, e.d_loss, e.g_loss,
                       e.d_real_mean, e.d_fake_mean);
}

std::vector<nn::Tensor> sample_images(nn::Network<float>& generator, std::size_t n,
                                      std::uint64_t seed) {
  require(generator.input_shape().size() == 1, "sample: generator must take a latent vector");
  const std::size_t d = generator.input_shape()[0];
  Rng rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  nn::Tensor z({n, d});
  for (float& v : z.values()) v = normal(rng);
  std::vector<nn::Tensor> out;
  constexpr std::size_t kChunk = 64;
  for (std::size_t first = 0; first < n; first += kChunk) {
    const std::size_t m = std::min(kChunk, n - first);
    nn::Tensor zc({m, d}, std::vector<float>(z.data() + first * d, z.data() + (first + m) * d));
    const nn::Tensor y = generator.forward(zc, nn::Mode::eval);
    for (std::size_t i = 0; i < m; ++i) out.push_back(nn::unstack(y, i));
  }
  return out;
}

std::vector<double> radial_power_spectrum(const nn::Tensor& image) {
  require(image.rank() == 3, "spectrum: expected an HWC image");
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  ComplexGrid g(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) g(x, y) = image[(y * w + x) * c];
  const ComplexGrid f = fft::forward(g);
  const std::size_t bins = std::min(w, h) / 2 + 1;
  std::vector<double> power(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = fft::bin_frequency(x, w) * static_cast<double>(w);
      const double fy = fft::bin_frequency(y, h) * static_cast<double>(h);
      const auto r = static_cast<std::size_t>(std::lround(std::hypot(fx, fy)));
      if (r >= bins) continue;
      power[r] += std::norm(f(x, y));
      ++count[r];
    }
  for (std::size_t r = 0; r < bins; ++r) power[r] /= static_cast<double>(std::max<std::size_t>(count[r], 1));
  return power;
}

std::vector<double> mean_radial_spectrum(const std::vector<nn::Tensor>& images) {
  require(!images.empty(), "spectrum: no images");
  std::vector<double> acc;
  for (const auto& im : images) {
    const auto s = radial_power_spectrum(im);
    if (acc.empty()) acc.assign(s.size(), 0.0);
    require(s.size() == acc.size(), "spectrum: images differ in size");
    for (std::size_t i = 0; i < s.size(); ++i) acc[i] += s[i];
  }
  for (double& v : acc) v /= static_cast<double>(images.size());
  return acc;
}

double spectral_distance(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size(), "spectrum: length mismatch");
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    d += std::abs(std::log10(a[i] + 1e-12) - std::log10(b[i] + 1e-12));
  return d;
}

}  // namespace topgan::gan

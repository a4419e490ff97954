#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

#include "topgan/network.hpp"
#include "topgan/seed.hpp"

namespace topgan::gan {

/// Shape family shared by the generator, discriminator and classifiers.
/// The conv stacks run image_size -> 8 in stride-2 steps, so 128 px uses four
/// layers (64-128-256-512 channels at base 64) and 64 px drops the widest.
struct ArchConfig {
  std::size_t image_size = 64;
  int base_channels = 64;
  int latent_dim = 100;
  int conv_layers = 0;  // 0: derived from image_size
  int channels = 3;

  int layers() const;
  void validate() const;
  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

void to_json(nlohmann::json& j, const ArchConfig& a);
void from_json(const nlohmann::json& j, ArchConfig& a);

nn::Shape image_shape(const ArchConfig& arch);

/// conv(5, s2) -> [batchnorm except first] -> leaky_relu(0.1), per layer.
std::vector<nn::LayerSpec> discriminator_body_specs(const ArchConfig& arch);
/// Body followed by fc(1) and sigmoid.
std::vector<nn::LayerSpec> discriminator_specs(const ArchConfig& arch);
/// fc -> reshape 8x8xC -> batchnorm -> relu, then tconv(5, s2) stages with
/// batchnorm + relu, the last one to `channels` with tanh.
std::vector<nn::LayerSpec> generator_specs(const ArchConfig& arch);

nn::Network<float> build_discriminator(const ArchConfig& arch, std::uint64_t seed,
                                       double init_std = nn::kInitStd);
nn::Network<float> build_generator(const ArchConfig& arch, std::uint64_t seed,
                                   double init_std = nn::kInitStd);

inline constexpr double kProbClamp = 1e-7;

inline double clamp_probability(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

/// mean(log D(x)) + mean(log(1 - D(G(z)))); the discriminator maximises it.
double d_loss(std::span<const double> d_real, std::span<const double> d_fake);
/// mean(log D(G(z))); the generator maximises it.
double g_loss(std::span<const double> d_fake);

struct GanTrainConfig {
  int batch = 64;
  nn::AdamConfig adam{2e-4, 0.5, 0.99, 1e-8};
  int epochs = 75;
  double init_std = nn::kInitStd;
  std::uint64_t seed = 0;
  ArchConfig arch;
  bool freeze_generator = false;

  void validate() const;
};

void to_json(nlohmann::json& j, const GanTrainConfig& c);
void from_json(const nlohmann::json& j, GanTrainConfig& c);

struct StepStats {
  double d_loss = 0;
  double g_loss = 0;
  double d_real_mean = 0;
  double d_fake_mean = 0;
};

struct EpochStats {
  int epoch = 0;
  double d_loss = 0;
  double g_loss = 0;
  double d_real_mean = 0;
  double d_fake_mean = 0;
  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

/// Alternating DCGAN updates. Fake = 0, real = 1.
class GanTrainer {
 public:
  explicit GanTrainer(const GanTrainConfig& cfg);
  GanTrainer(const GanTrainConfig& cfg, nn::Network<float> generator,
             nn::Network<float> discriminator);

  /// One ascent step of the discriminator on a real batch and an equally
  /// sized fresh fake batch.
  StepStats discriminator_step(const nn::Tensor& real_batch);
  /// One ascent step of the generator on a fresh latent batch of size n.
  double generator_step(std::size_t n);
  /// Every image exactly once in a seed-determined order; a trailing partial
  /// batch is merged into the last full one.
  EpochStats train_epoch(const std::vector<nn::Tensor>& images);

  nn::Tensor sample_latent(std::size_t n);

  nn::Network<float>& generator() { return generator_; }
  nn::Network<float>& discriminator() { return discriminator_; }
  const GanTrainConfig& config() const { return cfg_; }
  int epochs_done() const { return epoch_; }

 private:
  std::uint64_t next_seed();

  GanTrainConfig cfg_;
  nn::Network<float> generator_;
  nn::Network<float> discriminator_;
  Rng rng_;
  int epoch_ = 0;
  std::uint64_t step_ = 0;
};

struct GanResult {
  nn::Network<float> generator;
  nn::Network<float> discriminator;
  std::vector<EpochStats> log;
};

using EpochCallback = std::function<void(const EpochStats&, GanTrainer&)>;

/// Runs cfg.epochs epochs over `images` (HWC tensors in [-1, 1]). On a
/// non-finite loss, writes diagnostic_{generator,discriminator}.nnck into
/// `diagnostic_dir` (when non-empty) and rethrows.
GanResult train_gan(const std::vector<nn::Tensor>& images, const GanTrainConfig& cfg,
                    const EpochCallback& on_epoch = {},
                    const std::filesystem::path& diagnostic_dir = {});

/// epoch,d_loss,g_loss,d_real_mean,d_fake_mean with 6 decimals.
void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochStats>& log);

/// Eval-mode samples from z ~ N(0, I) drawn from `seed`.
std::vector<nn::Tensor> sample_images(nn::Network<float>& generator, std::size_t n,
                                      std::uint64_t seed);

/// Mean power of channel 0 per integer radial frequency bin, DC through
/// Nyquist.
std::vector<double> radial_power_spectrum(const nn::Tensor& image);
std::vector<double> mean_radial_spectrum(const std::vector<nn::Tensor>& images);
/// L1 distance between log10 radial spectra.
double spectral_distance(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace topgan::gan

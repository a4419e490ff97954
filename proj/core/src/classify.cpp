#include "topgan/classify.hpp"

#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <numeric>

namespace topgan::clf {

using nn::LayerSpec;

std::vector<LayerSpec> head_specs() {
  return {LayerSpec::fc(kHeadUnits),    LayerSpec::leaky_relu(0.1), LayerSpec::dropout(kHeadDropout),
          LayerSpec::fc(kHeadUnits),    LayerSpec::leaky_relu(0.1), LayerSpec::dropout(kHeadDropout),
          LayerSpec::fc(2),             LayerSpec::sigmoid()};
}

std::vector<LayerSpec> classifier_specs(const gan::ArchConfig& arch) {
  auto specs = gan::discriminator_body_specs(arch);
  for (auto& s : head_specs()) specs.push_back(s);
  return specs;
}

std::size_t body_length(const std::vector<LayerSpec>& specs) {
  for (std::size_t i = 0; i < specs.size(); ++i)
    if (specs[i].kind == nn::LayerKind::fc) return i;
  return specs.size();
}

nn::Network<float> build_topgan(const nn::Network<float>& discriminator, std::uint64_t seed) {
  const auto& dspecs = discriminator.specs();
  const std::size_t body = body_length(dspecs);
  require(body > 0 && body + 2 == dspecs.size() && dspecs[body] == LayerSpec::fc(1) &&
              dspecs[body + 1] == LayerSpec::sigmoid(),
          "topgan: checkpoint is not a discriminator (body, fc(1), sigmoid)");
  for (std::size_t i = 0; i < body; ++i)
    require(dspecs[i].kind != nn::LayerKind::dropout, "topgan: unexpected dropout in body");

  std::vector<LayerSpec> specs(dspecs.begin(), dspecs.begin() + static_cast<std::ptrdiff_t>(body));
  for (auto& s : head_specs()) specs.push_back(s);
  nn::Network<float> net(discriminator.input_shape(), specs, seed);

  nn::Network<float> source = discriminator;
  for (std::size_t i = 0; i < body; ++i) {
    auto src_p = source.layer(i).params();
    auto dst_p = net.layer(i).params();
    require(src_p.size() == dst_p.size(), "topgan: parameter layout mismatch");
    for (std::size_t k = 0; k < src_p.size(); ++k) {
      require(src_p[k]->value.shape() == dst_p[k]->value.shape(), "topgan: parameter shape mismatch");
      dst_p[k]->value = src_p[k]->value;
    }
    auto src_b = source.layer(i).buffers();
    auto dst_b = net.layer(i).buffers();
    require(src_b.size() == dst_b.size(), "topgan: buffer layout mismatch");
    for (std::size_t k = 0; k < src_b.size(); ++k) dst_b[k]->value = src_b[k]->value;
  }
  return net;
}

nn::Network<float> build_scratch_cnn(const gan::ArchConfig& arch, std::uint64_t seed) {
  return nn::Network<float>(gan::image_shape(arch), classifier_specs(arch), seed);
}

namespace {

void require_square(const nn::Tensor& image) {
  require(image.rank() == 3 && image.dim(0) == image.dim(1),
          "augment: expected a square HWC image, got " + nn::shape_string(image.shape()));
}

nn::Tensor flip(const nn::Tensor& in) {
  const std::size_t n = in.dim(0), c = in.dim(2);
  nn::Tensor out(in.shape());
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t k = 0; k < c; ++k) out[(y * n + x) * c + k] = in[(y * n + (n - 1 - x)) * c + k];
  return out;
}

// Quarter turn counter-clockwise: out(y, x) = in(x, n - 1 - y).
nn::Tensor rotate(const nn::Tensor& in) {
  const std::size_t n = in.dim(0), c = in.dim(2);
  nn::Tensor out(in.shape());
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t k = 0; k < c; ++k) out[(y * n + x) * c + k] = in[(x * n + (n - 1 - y)) * c + k];
  return out;
}

nn::Tensor rotate(nn::Tensor x, int turns) {
  for (int i = 0; i < turns; ++i) x = rotate(x);
  return x;
}

}  // namespace

nn::Tensor dihedral(const nn::Tensor& image, int index) {
  require_square(image);
  require(index >= 0 && index < 8, "augment: dihedral index must be in 0..7");
  nn::Tensor x = (index % 2) ? flip(image) : image;
  return rotate(std::move(x), index / 2);
}

nn::Tensor inverse_dihedral(const nn::Tensor& image, int index) {
  require_square(image);
  require(index >= 0 && index < 8, "augment: dihedral index must be in 0..7");
  nn::Tensor x = rotate(image, (4 - index / 2) % 4);
  return (index % 2) ? flip(x) : x;
}

std::array<nn::Tensor, 8> augment_x8(const nn::Tensor& image) {
  std::array<nn::Tensor, 8> out;
  for (int i = 0; i < 8; ++i) out[static_cast<std::size_t>(i)] = dihedral(image, i);
  return out;
}

void ClfTrainConfig::validate() const {
  adam.validate();
  require(max_epochs >= 0, "classifier: max_epochs must be >= 0");
  require(batch >= 1, "classifier: batch must be >= 1");
  require(convergence_delta >= 0, "classifier: convergence_delta must be >= 0");
  require(convergence_window >= 1, "classifier: convergence_window must be >= 1");
}

void to_json(nlohmann::json& j, const ClfTrainConfig& c) {
  j = {{"adam", c.adam},
       {"max_epochs", c.max_epochs},
       {"batch", c.batch},
       {"augment", c.augment},
       {"freeze_body", c.freeze_body},
       {"convergence_delta", c.convergence_delta},
       {"convergence_window", c.convergence_window},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ClfTrainConfig& c) {
  ClfTrainConfig d;
  c.adam = j.value("adam", d.adam);
  c.max_epochs = j.value("max_epochs", d.max_epochs);
  c.batch = j.value("batch", d.batch);
  c.augment = j.value("augment", d.augment);
  c.freeze_body = j.value("freeze_body", d.freeze_body);
  c.convergence_delta = j.value("convergence_delta", d.convergence_delta);
  c.convergence_window = j.value("convergence_window", d.convergence_window);
  c.seed = j.value("seed", d.seed);
}

Prediction decide(float p0, float p1) {
  Prediction p;
  p.label = p1 > p0 ? 1 : 0;
  p.score = p.label ? p1 : p0;
  p.margin = p1 - p0;
  return p;
}

TrainLog train_classifier(nn::Network<float>& net, const std::vector<nn::Tensor>& images,
                          const std::vector<int>& labels, const ClfTrainConfig& cfg) {
  cfg.validate();
  require(images.size() == labels.size(), "classifier: images and labels differ in length");
  require(net.output_shape() == nn::Shape{2}, "classifier: network must output 2 values");
  bool seen[2] = {false, false};
  for (int l : labels) {
    require(l == 0 || l == 1, "classifier: labels must be 0 or 1");
    seen[l] = true;
  }
  require(seen[0] && seen[1], "classifier: training set must contain both classes");

  std::vector<nn::Tensor> augmented;
  std::vector<int> aug_labels;
  const std::vector<nn::Tensor>* xs = &images;
  const std::vector<int>* ys = &labels;
  if (cfg.augment) {
    for (std::size_t i = 0; i < images.size(); ++i)
      for (auto& t : augment_x8(images[i])) {
        augmented.push_back(std::move(t));
        aug_labels.push_back(labels[i]);
      }
    xs = &augmented;
    ys = &aug_labels;
  }

  const std::size_t body = body_length(net.specs());
  net.set_trainable(0, body, !cfg.freeze_body);

  const std::size_t n = xs->size();
  const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), n);
  const std::size_t batches = n / b;
  std::vector<std::size_t> order(n);

  TrainLog log;
  int stable = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, {1, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t k = 0; k < batches; ++k) {
      const std::size_t first = k * b;
      const std::size_t last = (k + 1 == batches) ? n : first + b;
      const std::size_t m = last - first;
      std::vector<const nn::Tensor*> members;
      for (std::size_t i = first; i < last; ++i) members.push_back(&(*xs)[order[i]]);

      net.zero_grad();
      const nn::Tensor p = net.forward(nn::stack(members), nn::Mode::train,
                                       derive_seed(cfg.seed, {2, static_cast<std::uint64_t>(epoch), k}));
      nn::Tensor grad(p.shape());
      const double scale = 1.0 / static_cast<double>(2 * m);
      for (std::size_t i = 0; i < m; ++i) {
        const int y = (*ys)[order[first + i]];
        for (int c = 0; c < 2; ++c) {
          const double pi = p[i * 2 + static_cast<std::size_t>(c)];
          const double pc = gan::clamp_probability(pi);
          const double t = (c == y) ? 1.0 : 0.0;
          loss_sum -= t * std::log(pc) + (1 - t) * std::log(1 - pc);
          if (pi == pc) grad[i * 2 + static_cast<std::size_t>(c)] = static_cast<float>(scale * (pc - t) / (pc * (1 - pc)));
        }
        if (decide(p[i * 2], p[i * 2 + 1]).label == y) ++correct;
      }
      net.backward(grad);
      net.adam_step(cfg.adam);
    }
    const double loss = loss_sum / static_cast<double>(2 * n);
    if (!std::isfinite(loss)) throw NumericError(fmt::format("classifier: non-finite loss at epoch {}", epoch));

    if (!log.epochs.empty() && std::abs(loss - log.epochs.back().loss) < cfg.convergence_delta)
      ++stable;
    else
      stable = 0;
    log.epochs.push_back({epoch, loss, static_cast<double>(correct) / static_cast<double>(n)});
    if (stable >= cfg.convergence_window) {
      log.converged = true;
      break;
    }
  }
  return log;
}

void write_train_log_csv(const std::filesystem::path& path, const TrainLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,loss,train_acc\n";
  for (const auto& e : log.epochs) out << fmt::format("{},{:.6f},{:.6f}\n", e.epoch, e.loss, e.train_accuracy);
}

std::vector<Prediction> predict(nn::Network<float>& net, const std::vector<nn::Tensor>& images,
                                std::size_t batch) {
  require(batch >= 1, "predict: batch must be >= 1");
  require(net.output_shape() == nn::Shape{2}, "predict: network must output 2 values");
  std::vector<Prediction> out;
  out.reserve(images.size());
  for (std::size_t first = 0; first < images.size(); first += batch) {
    const std::size_t last = std::min(images.size(), first + batch);
    std::vector<const nn::Tensor*> members;
    for (std::size_t i = first; i < last; ++i) {
      require(images[i].shape() == net.input_shape(),
              "predict: image shape " + nn::shape_string(images[i].shape()) + " does not match network input " +
                  nn::shape_string(net.input_shape()));
      members.push_back(&images[i]);
    }
    const nn::Tensor p = net.forward(nn::stack(members), nn::Mode::eval);
    for (std::size_t i = 0; i < last - first; ++i) out.push_back(decide(p[i * 2], p[i * 2 + 1]));
  }
  return out;
}

}  // namespace topgan::clf

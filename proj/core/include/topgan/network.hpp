#pragma once

#include <cstdint>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "topgan/layers.hpp"

namespace topgan::nn {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.99;
  double epsilon = 1e-8;

  void validate() const;
  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

void to_json(nlohmann::json& j, const AdamConfig& c);
void from_json(const nlohmann::json& j, AdamConfig& c);

inline constexpr double kInitStd = 0.02;

/// Sequential stack of layers with gradients and per-parameter Adam state.
///
/// Layer `i` initialises from derive_seed(init_seed, {i}) and draws its
/// dropout mask from derive_seed(forward_seed, {i}), so a network is a pure
/// function of (specs, init seed) and a forward pass of (params, input, mode,
/// forward seed).
template <class T>
class Network {
 public:
  Network() = default;
  Network(Shape input_shape, std::vector<LayerSpec> specs, std::uint64_t init_seed,
          double init_std = kInitStd);

  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const;
  const std::vector<LayerSpec>& specs() const { return specs_; }
  std::size_t layer_count() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }
  const Layer<T>& layer(std::size_t i) const { return *layers_.at(i); }

  /// {"input_shape": [...], "layers": [...]}; weights excluded.
  nlohmann::json architecture() const;

  BasicTensor<T> forward(const BasicTensor<T>& batch, Mode mode, std::uint64_t seed = 0);
  /// Runs layers [first, last) only; `batch` must match layer(first)'s input.
  BasicTensor<T> forward_range(const BasicTensor<T>& batch, std::size_t first, std::size_t last,
                               Mode mode, std::uint64_t seed = 0);
  /// Backpropagates through the most recent forward; accumulates into
  /// Param::grad and returns dL/d(input).
  BasicTensor<T> backward(const BasicTensor<T>& loss_grad);

  void zero_grad();
  void adam_step(const AdamConfig& cfg);

  std::vector<Param<T>*> parameters();
  std::vector<const Param<T>*> parameters() const;
  /// Checkpointed state in a fixed order: per layer, params then buffers.
  std::vector<std::pair<std::string, BasicTensor<T>*>> state();
  std::vector<std::pair<std::string, const BasicTensor<T>*>> state() const;

  void set_trainable(std::size_t first, std::size_t last, bool trainable);

  template <class U>
  Network<U> cast() const;

 private:
  Shape input_shape_;
  std::vector<LayerSpec> specs_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::size_t cached_first_ = 0;
  std::size_t cached_last_ = 0;
  bool has_cache_ = false;
};

/// Applies one bias-corrected Adam update to `params` using their `grad`.
template <class T>
void adam_step(std::vector<Param<T>*> params, const AdamConfig& cfg);

struct GradCheckReport {
  double max_rel_error = 0;
  std::string worst;  // "<tensor>[index]" of the worst element
  std::size_t checked = 0;
};

/// Central finite-difference check of every parameter tensor (up to
/// `samples_per_tensor` random elements each, all if 0) and of the input,
/// against backward(), on the scalar loss L = sum(r * forward(input)) with a
/// fixed random projection r. Relative error is |a-n| / max(|a|, |n|, 1e-7).
GradCheckReport grad_check(Network<double>& net, const Tensor64& input, double eps = 1e-4,
                           Mode mode = Mode::train, std::uint64_t seed = 1,
                           std::size_t samples_per_tensor = 0);

extern template class Network<float>;
extern template class Network<double>;

}  // namespace topgan::nn

#pragma once

#include <cstdint>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "topgan/tensor.hpp"

namespace topgan::nn {

enum class LayerKind { conv2d, tconv2d, fc, batchnorm, dropout, relu, leaky_relu, tanh, sigmoid, reshape };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

enum class Mode { train, eval };

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  int kernel = 0;
  int stride = 0;
  int out_channels = 0;
  int units = 0;
  double slope = 0;
  double drop_prob = 0;
  Shape target_shape;
  bool bias = true;  // conv/tconv only; off when a batchnorm follows

  static LayerSpec conv(int out_channels, int kernel = 5, int stride = 2, bool bias = true);
  static LayerSpec tconv(int out_channels, int kernel = 5, int stride = 2, bool bias = true);
  static LayerSpec fc(int units);
  static LayerSpec batchnorm();
  static LayerSpec dropout(double p = 0.5);
  static LayerSpec relu();
  static LayerSpec leaky_relu(double slope = 0.1);
  static LayerSpec tanh();
  static LayerSpec sigmoid();
  static LayerSpec reshape(Shape shape);

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

void to_json(nlohmann::json& j, const LayerSpec& s);
void from_json(const nlohmann::json& j, LayerSpec& s);

/// Trainable tensor with its gradient accumulator and Adam moments.
template <class T>
struct Param {
  std::string name;
  BasicTensor<T> value;
  BasicTensor<T> grad;
  BasicTensor<T> adam_m;
  BasicTensor<T> adam_v;
  std::uint64_t adam_steps = 0;
  bool trainable = true;

  Param() = default;
  Param(std::string n, BasicTensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()), adam_m(value.shape()),
        adam_v(value.shape()) {}
};

/// Non-trainable persistent state (batchnorm running statistics).
template <class T>
struct Buffer {
  std::string name;
  BasicTensor<T> value;
};

template <class T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual const LayerSpec& spec() const = 0;
  virtual const Shape& input_shape() const = 0;
  virtual const Shape& output_shape() const = 0;

  // `x` is a batch [N, ...input_shape]. Caches whatever backward needs.
  virtual BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode, std::uint64_t seed) = 0;
  // Accumulates parameter gradients, returns dL/dx.
  virtual BasicTensor<T> backward(const BasicTensor<T>& dy) = 0;

  virtual std::vector<Param<T>*> params() { return {}; }
  virtual std::vector<Buffer<T>*> buffers() { return {}; }

  virtual std::unique_ptr<Layer> clone() const = 0;
};

/// Builds a layer for per-sample `input_shape`; parameters drawn N(0, init_std)
/// from `rng_seed`, biases 0, batchnorm gamma 1 / beta 0.
template <class T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, const Shape& input_shape,
                                     std::uint64_t rng_seed, double init_std, std::size_t index);

}  // namespace topgan::nn

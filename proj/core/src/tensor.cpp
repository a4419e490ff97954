#include "topgan/tensor.hpp"

#include <algorithm>
#include <numeric>

namespace topgan::nn {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <class T>
BasicTensor<T> stack(const std::vector<const BasicTensor<T>*>& samples) {
  require(!samples.empty(), "stack: no samples");
  const Shape& inner = samples.front()->shape();
  Shape shape{samples.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  BasicTensor<T> out(shape);
  const std::size_t n = shape_size(inner);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    require(samples[i]->shape() == inner, "stack: sample shapes differ");
    std::copy_n(samples[i]->data(), n, out.data() + i * n);
  }
  return out;
}

template <class T>
BasicTensor<T> stack(std::span<const BasicTensor<T>> samples) {
  std::vector<const BasicTensor<T>*> ptrs;
  ptrs.reserve(samples.size());
  for (const auto& s : samples) ptrs.push_back(&s);
  return stack(ptrs);
}

template <class T>
BasicTensor<T> unstack(const BasicTensor<T>& batch, std::size_t index) {
  require(batch.rank() >= 1 && index < batch.dim(0), "unstack: index out of range");
  Shape inner(batch.shape().begin() + 1, batch.shape().end());
  const std::size_t n = shape_size(inner);
  std::vector<T> data(batch.data() + index * n, batch.data() + (index + 1) * n);
  return BasicTensor<T>(std::move(inner), std::move(data));
}

template BasicTensor<float> stack(std::span<const BasicTensor<float>>);
template BasicTensor<double> stack(std::span<const BasicTensor<double>>);
template BasicTensor<float> stack(const std::vector<const BasicTensor<float>*>&);
template BasicTensor<double> stack(const std::vector<const BasicTensor<double>*>&);
template BasicTensor<float> unstack(const BasicTensor<float>&, std::size_t);
template BasicTensor<double> unstack(const BasicTensor<double>&, std::size_t);

}  // namespace topgan::nn

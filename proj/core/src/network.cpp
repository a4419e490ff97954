#include "topgan/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "topgan/seed.hpp"

namespace topgan::nn {

void AdamConfig::validate() const {
  require(lr >= 0, "adam: learning rate must be non-negative");
  require(beta1 >= 0 && beta1 < 1, "adam: beta1 must be in [0, 1)");
  require(beta2 >= 0 && beta2 < 1, "adam: beta2 must be in [0, 1)");
  require(epsilon > 0, "adam: epsilon must be positive");
}

void to_json(nlohmann::json& j, const AdamConfig& c) {
  j = {{"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"epsilon", c.epsilon}};
}

void from_json(const nlohmann::json& j, AdamConfig& c) {
  AdamConfig d;
  c.lr = j.value("lr", d.lr);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.epsilon = j.value("epsilon", d.epsilon);
}

template <class T>
Network<T>::Network(Shape input_shape, std::vector<LayerSpec> specs, std::uint64_t init_seed,
                    double init_std)
    : input_shape_(std::move(input_shape)), specs_(std::move(specs)) {
  require(!specs_.empty(), "network: no layers");
  Shape shape = input_shape_;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    layers_.push_back(make_layer<T>(specs_[i], shape, derive_seed(init_seed, {i}), init_std, i));
    shape = layers_.back()->output_shape();
  }
}

template <class T>
Network<T>::Network(const Network& other)
    : input_shape_(other.input_shape_),
      specs_(other.specs_),
      cached_first_(other.cached_first_),
      cached_last_(other.cached_last_),
      has_cache_(other.has_cache_) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

template <class T>
Network<T>& Network<T>::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

template <class T>
const Shape& Network<T>::output_shape() const {
  require(!layers_.empty(), "network: empty");
  return layers_.back()->output_shape();
}

template <class T>
nlohmann::json Network<T>::architecture() const {
  return {{"input_shape", input_shape_}, {"layers", specs_}};
}

template <class T>
BasicTensor<T> Network<T>::forward(const BasicTensor<T>& batch, Mode mode, std::uint64_t seed) {
  return forward_range(batch, 0, layers_.size(), mode, seed);
}

template <class T>
BasicTensor<T> Network<T>::forward_range(const BasicTensor<T>& batch, std::size_t first,
                                         std::size_t last, Mode mode, std::uint64_t seed) {
  require(first < last && last <= layers_.size(), "network: bad layer range");
  BasicTensor<T> x = batch;
  for (std::size_t i = first; i < last; ++i) {
    x = layers_[i]->forward(x, mode, derive_seed(seed, {i}));
    if (!x.all_finite())
      throw NumericError("non-finite activation after layer " + std::to_string(i) + " (" +
                         std::string(to_string(specs_[i].kind)) + ")");
  }
  cached_first_ = first;
  cached_last_ = last;
  has_cache_ = true;
  return x;
}

template <class T>
BasicTensor<T> Network<T>::backward(const BasicTensor<T>& loss_grad) {
  if (!has_cache_) throw ValidationError("network: backward called without a forward cache");
  BasicTensor<T> g = loss_grad;
  for (std::size_t i = cached_last_; i-- > cached_first_;) g = layers_[i]->backward(g);
  return g;
}

template <class T>
void Network<T>::zero_grad() {
  for (auto* p : parameters()) p->grad.fill(T{0});
}

template <class T>
void Network<T>::adam_step(const AdamConfig& cfg) {
  nn::adam_step(parameters(), cfg);
}

template <class T>
std::vector<Param<T>*> Network<T>::parameters() {
  std::vector<Param<T>*> out;
  for (auto& l : layers_)
    for (auto* p : l->params()) out.push_back(p);
  return out;
}

template <class T>
std::vector<const Param<T>*> Network<T>::parameters() const {
  std::vector<const Param<T>*> out;
  for (auto& l : layers_)
    for (auto* p : l->params()) out.push_back(p);
  return out;
}

template <class T>
std::vector<std::pair<std::string, BasicTensor<T>*>> Network<T>::state() {
  std::vector<std::pair<std::string, BasicTensor<T>*>> out;
  for (auto& l : layers_) {
    for (auto* p : l->params()) out.emplace_back(p->name, &p->value);
    for (auto* b : l->buffers()) out.emplace_back(b->name, &b->value);
  }
  return out;
}

template <class T>
std::vector<std::pair<std::string, const BasicTensor<T>*>> Network<T>::state() const {
  std::vector<std::pair<std::string, const BasicTensor<T>*>> out;
  for (auto& l : layers_) {
    for (auto* p : l->params()) out.emplace_back(p->name, &p->value);
    for (auto* b : l->buffers()) out.emplace_back(b->name, &b->value);
  }
  return out;
}

template <class T>
void Network<T>::set_trainable(std::size_t first, std::size_t last, bool trainable) {
  require(first <= last && last <= layers_.size(), "network: bad layer range");
  for (std::size_t i = first; i < last; ++i)
    for (auto* p : layers_[i]->params()) p->trainable = trainable;
}

template <class T>
template <class U>
Network<U> Network<T>::cast() const {
  Network<U> out(input_shape_, specs_, 0);
  auto dst = out.state();
  auto src = state();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].second = src[i].second->template cast<U>();
  auto dp = out.parameters();
  auto sp = parameters();
  for (std::size_t i = 0; i < sp.size(); ++i) dp[i]->trainable = sp[i]->trainable;
  return out;
}

template <class T>
void adam_step(std::vector<Param<T>*> params, const AdamConfig& cfg) {
  cfg.validate();
  for (auto* p : params) {
    if (!p->trainable) continue;
    ++p->adam_steps;
    const double t = static_cast<double>(p->adam_steps);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      const double m = cfg.beta1 * p->adam_m[i] + (1.0 - cfg.beta1) * g;
      const double v = cfg.beta2 * p->adam_v[i] + (1.0 - cfg.beta2) * g * g;
      p->adam_m[i] = static_cast<T>(m);
      p->adam_v[i] = static_cast<T>(v);
      const double update = cfg.lr * (m / c1) / (std::sqrt(v / c2) + cfg.epsilon);
      p->value[i] = static_cast<T>(p->value[i] - update);
    }
  }
}

namespace {

double projected_loss(Network<double>& net, const Tensor64& input, const Tensor64& r, Mode mode,
                      std::uint64_t seed) {
  const Tensor64 y = net.forward(input, mode, seed);
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
  return s;
}

std::vector<std::size_t> pick_indices(std::size_t n, std::size_t samples, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (samples == 0 || samples >= n) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(samples);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckReport grad_check(Network<double>& net, const Tensor64& input, double eps, Mode mode,
                           std::uint64_t seed, std::size_t samples_per_tensor) {
  require(eps > 0, "grad_check: eps must be positive");
  Rng rng(derive_seed(seed, {0x67636b}));
  std::normal_distribution<double> normal(0.0, 1.0);

  net.zero_grad();
  const Tensor64 y = net.forward(input, mode, seed);
  Tensor64 r(y.shape());
  for (auto& v : r.values()) v = normal(rng);
  const Tensor64 dx = net.backward(r);

  GradCheckReport report;
  auto record = [&](double analytic, double numeric, const std::string& where) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
    const double err = std::abs(analytic - numeric) / denom;
    if (report.checked++ == 0 || err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst = where;
    }
  };

  for (auto* p : net.parameters()) {
    const Tensor64 analytic = p->grad;
    for (auto i : pick_indices(p->value.size(), samples_per_tensor, rng)) {
      const double orig = p->value[i];
      p->value[i] = orig + eps;
      const double up = projected_loss(net, input, r, mode, seed);
      p->value[i] = orig - eps;
      const double down = projected_loss(net, input, r, mode, seed);
      p->value[i] = orig;
      record(analytic[i], (up - down) / (2 * eps), p->name + "[" + std::to_string(i) + "]");
    }
  }

  Tensor64 x = input;
  for (auto i : pick_indices(x.size(), samples_per_tensor, rng)) {
    const double orig = x[i];
    x[i] = orig + eps;
    const double up = projected_loss(net, x, r, mode, seed);
    x[i] = orig - eps;
    const double down = projected_loss(net, x, r, mode, seed);
    x[i] = orig;
    record(dx[i], (up - down) / (2 * eps), "input[" + std::to_string(i) + "]");
  }
  return report;
}

template class Network<float>;
template class Network<double>;
template Network<double> Network<float>::cast<double>() const;
template Network<float> Network<double>::cast<float>() const;
template Network<float> Network<float>::cast<float>() const;
template Network<double> Network<double>::cast<double>() const;
template void adam_step(std::vector<Param<float>*>, const AdamConfig&);
template void adam_step(std::vector<Param<double>*>, const AdamConfig&);

}  // namespace topgan::nn

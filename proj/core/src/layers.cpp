#include "topgan/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "topgan/seed.hpp"

namespace topgan::nn {
namespace {

constexpr std::array<std::string_view, 10> kKindNames{
    "conv2d", "tconv2d", "fc", "batchnorm", "dropout", "relu", "leaky_relu", "tanh", "sigmoid",
    "reshape"};

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

std::size_t batch_of(const Shape& s) { return s.empty() ? 0 : s.front(); }

Shape with_batch(std::size_t n, const Shape& inner) {
  Shape s{n};
  s.insert(s.end(), inner.begin(), inner.end());
  return s;
}

template <class T>
void fill_normal(BasicTensor<T>& t, Rng& rng, double std) {
  std::normal_distribution<double> dist(0.0, std);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
}

template <class T>
class LayerBase : public Layer<T> {
 public:
  LayerBase(LayerSpec spec, Shape in, Shape out)
      : spec_(std::move(spec)), in_(std::move(in)), out_(std::move(out)) {}

  const LayerSpec& spec() const override { return spec_; }
  const Shape& input_shape() const override { return in_; }
  const Shape& output_shape() const override { return out_; }

 protected:
  void check_input(const BasicTensor<T>& x) const {
    if (x.rank() != in_.size() + 1 || !std::equal(in_.begin(), in_.end(), x.shape().begin() + 1))
      throw ValidationError(std::string(to_string(spec_.kind)) + ": expected input " +
                            shape_string(with_batch(batch_of(x.shape()), in_)) + ", got " +
                            shape_string(x.shape()));
  }
  void check_grad(const BasicTensor<T>& dy, std::size_t n) const {
    if (dy.shape() != with_batch(n, out_))
      throw ValidationError(std::string(to_string(spec_.kind)) + ": gradient shape " +
                            shape_string(dy.shape()) + " does not match output");
  }

  LayerSpec spec_;
  Shape in_;
  Shape out_;
};

// SAME-padded strided sliding-window geometry between a "wide" HxWxC image
// and a "narrow" HoxWo grid of windows; shared by conv (wide -> narrow) and
// its adjoint tconv (narrow -> wide).
struct WindowGeometry {
  std::size_t h, w, c;    // wide side
  std::size_t ho, wo;     // narrow side
  std::size_t k, stride;
  std::ptrdiff_t pad_top, pad_left;

  std::size_t patch() const { return k * k * c; }
  std::size_t windows() const { return ho * wo; }

  static WindowGeometry make(std::size_t h, std::size_t w, std::size_t c, std::size_t k,
                             std::size_t s) {
    WindowGeometry g{h, w, c, (h + s - 1) / s, (w + s - 1) / s, k, s, 0, 0};
    const auto pad_h = std::max<std::ptrdiff_t>(
        static_cast<std::ptrdiff_t>((g.ho - 1) * s + k) - static_cast<std::ptrdiff_t>(h), 0);
    const auto pad_w = std::max<std::ptrdiff_t>(
        static_cast<std::ptrdiff_t>((g.wo - 1) * s + k) - static_cast<std::ptrdiff_t>(w), 0);
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
    return g;
  }

  // col[p, (ky*k + kx)*c + ch] = img[iy, ix, ch]
  template <class T>
  void im2col(const T* img, T* col) const {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        T* row = col + (oy * wo + ox) * patch();
        for (std::size_t ky = 0; ky < k; ++ky) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad_top;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - pad_left;
            T* dst = row + (ky * k + kx) * c;
            if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(h) ||
                ix >= static_cast<std::ptrdiff_t>(w)) {
              std::fill_n(dst, c, T{0});
            } else {
              std::copy_n(img + (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * c,
                          c, dst);
            }
          }
        }
      }
    }
  }

  // Adjoint of im2col: img += scatter(col). `img` must be pre-zeroed by caller.
  template <class T>
  void col2im(const T* col, T* img) const {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const T* row = col + (oy * wo + ox) * patch();
        for (std::size_t ky = 0; ky < k; ++ky) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad_top;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - pad_left;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            const T* src = row + (ky * k + kx) * c;
            T* dst = img + (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * c;
            for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
          }
        }
      }
    }
  }
};

template <class T>
class Conv2d final : public LayerBase<T> {
 public:
  Conv2d(const LayerSpec& spec, const Shape& in, Rng& rng, double init_std, std::size_t index)
      : LayerBase<T>(spec, in, {}),
        geom_(WindowGeometry::make(in.at(0), in.at(1), in.at(2), spec.kernel, spec.stride)) {
    const auto cout = static_cast<std::size_t>(spec.out_channels);
    this->out_ = {geom_.ho, geom_.wo, cout};
    const auto prefix = std::to_string(index) + ".conv2d.";
    weight_ = Param<T>(prefix + "weight", BasicTensor<T>({geom_.k, geom_.k, geom_.c, cout}));
    if (spec.bias) bias_ = Param<T>(prefix + "bias", BasicTensor<T>({cout}));
    fill_normal(weight_.value, rng, init_std);
  }

  BasicTensor<T> forward(const BasicTensor<T>& x, Mode, std::uint64_t) override {
    this->check_input(x);
    input_ = x;
    const std::size_t n = x.dim(0), cout = this->out_[2];
    const bool has_bias = this->spec_.bias;
    BasicTensor<T> y(with_batch(n, this->out_));
    col_.resize(geom_.windows() * geom_.patch());
    ConstMatMap<T> wm(weight_.value.data(), geom_.patch(), cout);
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bias(bias_.value.data(), has_bias ? cout : 0);
    const std::size_t in_stride = shape_size(this->in_), out_stride = shape_size(this->out_);
    for (std::size_t i = 0; i < n; ++i) {
      geom_.im2col(x.data() + i * in_stride, col_.data());
      ConstMatMap<T> col(col_.data(), geom_.windows(), geom_.patch());
      MatMap<T> ym(y.data() + i * out_stride, geom_.windows(), cout);
      ym.noalias() = col * wm;
      if (has_bias) ym.rowwise() += bias;
    }
    return y;
  }

  BasicTensor<T> backward(const BasicTensor<T>& dy) override {
    const std::size_t n = input_.dim(0), cout = this->out_[2];
    this->check_grad(dy, n);
    BasicTensor<T> dx(input_.shape());
    col_.resize(geom_.windows() * geom_.patch());
    dcol_.resize(col_.size());
    ConstMatMap<T> wm(weight_.value.data(), geom_.patch(), cout);
    MatMap<T> dw(weight_.grad.data(), geom_.patch(), cout);
    const bool has_bias = this->spec_.bias;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(bias_.grad.data(), has_bias ? cout : 0);
    const std::size_t in_stride = shape_size(this->in_), out_stride = shape_size(this->out_);
    for (std::size_t i = 0; i < n; ++i) {
      geom_.im2col(input_.data() + i * in_stride, col_.data());
      ConstMatMap<T> col(col_.data(), geom_.windows(), geom_.patch());
      ConstMatMap<T> dym(dy.data() + i * out_stride, geom_.windows(), cout);
      dw.noalias() += col.transpose() * dym;
      if (has_bias) db += dym.colwise().sum();
      MatMap<T> dcol(dcol_.data(), geom_.windows(), geom_.patch());
      dcol.noalias() = dym * wm.transpose();
      geom_.col2im(dcol_.data(), dx.data() + i * in_stride);
    }
    return dx;
  }

  std::vector<Param<T>*> params() override {
    if (!this->spec_.bias) return {&weight_};
    return {&weight_, &bias_};
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }

 private:
  WindowGeometry geom_;
  Param<T> weight_, bias_;
  BasicTensor<T> input_;
  AlignedVector<T> col_, dcol_;
};

// Transposed convolution: the exact adjoint of a SAME conv mapping the
// (stride*h) x (stride*w) output back onto the h x w input.
template <class T>
class TConv2d final : public LayerBase<T> {
 public:
  TConv2d(const LayerSpec& spec, const Shape& in, Rng& rng, double init_std, std::size_t index)
      : LayerBase<T>(spec, in, {}),
        geom_(WindowGeometry::make(in.at(0) * spec.stride, in.at(1) * spec.stride,
                                   static_cast<std::size_t>(spec.out_channels), spec.kernel,
                                   spec.stride)) {
    const auto cout = static_cast<std::size_t>(spec.out_channels);
    this->out_ = {geom_.h, geom_.w, cout};
    const auto prefix = std::to_string(index) + ".tconv2d.";
    weight_ = Param<T>(prefix + "weight", BasicTensor<T>({geom_.k, geom_.k, cout, in.at(2)}));
    if (spec.bias) bias_ = Param<T>(prefix + "bias", BasicTensor<T>({cout}));
    fill_normal(weight_.value, rng, init_std);
  }

  BasicTensor<T> forward(const BasicTensor<T>& x, Mode, std::uint64_t) override {
    this->check_input(x);
    input_ = x;
    const std::size_t n = x.dim(0), cin = this->in_[2], cout = this->out_[2];
    BasicTensor<T> y(with_batch(n, this->out_));
    col_.resize(geom_.windows() * geom_.patch());
    ConstMatMap<T> wm(weight_.value.data(), geom_.patch(), cin);
    const std::size_t in_stride = shape_size(this->in_), out_stride = shape_size(this->out_);
    for (std::size_t i = 0; i < n; ++i) {
      ConstMatMap<T> xm(x.data() + i * in_stride, geom_.windows(), cin);
      MatMap<T> col(col_.data(), geom_.windows(), geom_.patch());
      col.noalias() = xm * wm.transpose();
      T* yi = y.data() + i * out_stride;
      geom_.col2im(col_.data(), yi);
      if (!this->spec_.bias) continue;
      for (std::size_t p = 0; p < geom_.h * geom_.w; ++p)
        for (std::size_t c = 0; c < cout; ++c) yi[p * cout + c] += bias_.value[c];
    }
    return y;
  }

  BasicTensor<T> backward(const BasicTensor<T>& dy) override {
    const std::size_t n = input_.dim(0), cin = this->in_[2], cout = this->out_[2];
    this->check_grad(dy, n);
    BasicTensor<T> dx(input_.shape());
    col_.resize(geom_.windows() * geom_.patch());
    ConstMatMap<T> wm(weight_.value.data(), geom_.patch(), cin);
    MatMap<T> dw(weight_.grad.data(), geom_.patch(), cin);
    const std::size_t in_stride = shape_size(this->in_), out_stride = shape_size(this->out_);
    for (std::size_t i = 0; i < n; ++i) {
      const T* dyi = dy.data() + i * out_stride;
      if (this->spec_.bias)
        for (std::size_t p = 0; p < geom_.h * geom_.w; ++p)
          for (std::size_t c = 0; c < cout; ++c) bias_.grad[c] += dyi[p * cout + c];
      geom_.im2col(dyi, col_.data());
      ConstMatMap<T> dcol(col_.data(), geom_.windows(), geom_.patch());
      ConstMatMap<T> xm(input_.data() + i * in_stride, geom_.windows(), cin);
      MatMap<T> dxm(dx.data() + i * in_stride, geom_.windows(), cin);
      dxm.noalias() = dcol * wm;
      dw.noalias() += dcol.transpose() * xm;
    }
    return dx;
  }

  std::vector<Param<T>*> params() override {
    if (!this->spec_.bias) return {&weight_};
    return {&weight_, &bias_};
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<TConv2d>(*this); }

 private:
  WindowGeometry geom_;
  Param<T> weight_, bias_;
  BasicTensor<T> input_;
  AlignedVector<T> col_;
};

// Fully connected on the flattened sample.
template <class T>
class Dense final : public LayerBase<T> {
 public:
  Dense(const LayerSpec& spec, const Shape& in, Rng& rng, double init_std, std::size_t index)
      : LayerBase<T>(spec, in, {static_cast<std::size_t>(spec.units)}) {
    const auto prefix = std::to_string(index) + ".fc.";
    weight_ = Param<T>(prefix + "weight", BasicTensor<T>({shape_size(in), this->out_[0]}));
    bias_ = Param<T>(prefix + "bias", BasicTensor<T>({this->out_[0]}));
    fill_normal(weight_.value, rng, init_std);
  }

  BasicTensor<T> forward(const BasicTensor<T>& x, Mode, std::uint64_t) override {
    this->check_input(x);
    input_ = x;
    const std::size_t n = x.dim(0), d = shape_size(this->in_), u = this->out_[0];
    BasicTensor<T> y({n, u});
    ConstMatMap<T> xm(x.data(), n, d);
    ConstMatMap<T> wm(weight_.value.data(), d, u);
    MatMap<T> ym(y.data(), n, u);
    ym.noalias() = xm * wm;
    ym.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias_.value.data(), u);
    return y;
  }

  BasicTensor<T> backward(const BasicTensor<T>& dy) override {
    const std::size_t n = input_.dim(0), d = shape_size(this->in_), u = this->out_[0];
    this->check_grad(dy, n);
    ConstMatMap<T> xm(input_.data(), n, d);
    ConstMatMap<T> dym(dy.data(), n, u);
    ConstMatMap<T> wm(weight_.value.data(), d, u);
    MatMap<T>(weight_.grad.data(), d, u).noalias() += xm.transpose() * dym;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias_.grad.data(), u) += dym.colwise().sum();
    BasicTensor<T> dx(input_.shape());
    MatMap<T>(dx.data(), n, d).noalias() = dym * wm.transpose();
    return dx;
  }

  std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }

 private:
  Param<T> weight_, bias_;
  BasicTensor<T> input_;
};

// Per-channel (last axis) batch normalisation over batch and spatial axes.
template <class T>
class BatchNorm final : public LayerBase<T> {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.9;

  BatchNorm(const LayerSpec& spec, const Shape& in, std::size_t index)
      : LayerBase<T>(spec, in, in) {
    const std::size_t c = in.back();
    const auto prefix = std::to_string(index) + ".batchnorm.";
    gamma_ = Param<T>(prefix + "gamma", BasicTensor<T>({c}, T{1}));
    beta_ = Param<T>(prefix + "beta", BasicTensor<T>({c}));
    running_mean_ = {prefix + "running_mean", BasicTensor<T>({c})};
    running_var_ = {prefix + "running_var", BasicTensor<T>({c}, T{1})};
  }

  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode, std::uint64_t) override {
    this->check_input(x);
    const std::size_t c = this->in_.back(), m = x.size() / c;
    mode_ = mode;
    BasicTensor<T> y(x.shape());
    inv_std_.assign(c, 0.0);
    xhat_ = BasicTensor<T>(x.shape());
    if (mode == Mode::eval) {
      for (std::size_t ch = 0; ch < c; ++ch)
        inv_std_[ch] = 1.0 / std::sqrt(static_cast<double>(running_var_.value[ch]) + kEps);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double xh = (x[i * c + ch] - static_cast<double>(running_mean_.value[ch])) * inv_std_[ch];
          xhat_[i * c + ch] = static_cast<T>(xh);
          y[i * c + ch] = static_cast<T>(gamma_.value[ch] * xh + beta_.value[ch]);
        }
      return y;
    }
    require(x.dim(0) >= 2, "batchnorm: training mode needs a batch of at least 2");
    std::vector<double> mean(c, 0.0), var(c, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t ch = 0; ch < c; ++ch) mean[ch] += x[i * c + ch];
    for (auto& v : mean) v /= static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double d = x[i * c + ch] - mean[ch];
        var[ch] += d * d;
      }
    for (auto& v : var) v /= static_cast<double>(m);
    for (std::size_t ch = 0; ch < c; ++ch) inv_std_[ch] = 1.0 / std::sqrt(var[ch] + kEps);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double xh = (x[i * c + ch] - mean[ch]) * inv_std_[ch];
        xhat_[i * c + ch] = static_cast<T>(xh);
        y[i * c + ch] = static_cast<T>(gamma_.value[ch] * xh + beta_.value[ch]);
      }
    const double unbias = static_cast<double>(m) / static_cast<double>(m - 1);
    for (std::size_t ch = 0; ch < c; ++ch) {
      running_mean_.value[ch] =
          static_cast<T>(kMomentum * running_mean_.value[ch] + (1 - kMomentum) * mean[ch]);
      running_var_.value[ch] =
          static_cast<T>(kMomentum * running_var_.value[ch] + (1 - kMomentum) * var[ch] * unbias);
    }
    return y;
  }

  BasicTensor<T> backward(const BasicTensor<T>& dy) override {
    const std::size_t c = this->in_.back(), m = dy.size() / c;
    BasicTensor<T> dx(dy.shape());
    require(xhat_.shape() == dy.shape(), "batchnorm: gradient shape does not match cached input");
    std::vector<double> dbeta(c, 0.0), dgamma(c, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t ch = 0; ch < c; ++ch) {
        dbeta[ch] += dy[i * c + ch];
        dgamma[ch] += static_cast<double>(dy[i * c + ch]) * xhat_[i * c + ch];
      }
    for (std::size_t ch = 0; ch < c; ++ch) {
      gamma_.grad[ch] += static_cast<T>(dgamma[ch]);
      beta_.grad[ch] += static_cast<T>(dbeta[ch]);
    }
    if (mode_ == Mode::eval) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t ch = 0; ch < c; ++ch)
          dx[i * c + ch] = static_cast<T>(dy[i * c + ch] * gamma_.value[ch] * inv_std_[ch]);
      return dx;
    }
    const double md = static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double g = gamma_.value[ch] * inv_std_[ch] / md;
        dx[i * c + ch] = static_cast<T>(
            g * (md * dy[i * c + ch] - dbeta[ch] - xhat_[i * c + ch] * dgamma[ch]));
      }
    return dx;
  }

  std::vector<Param<T>*> params() override { return {&gamma_, &beta_}; }
  std::vector<Buffer<T>*> buffers() override { return {&running_mean_, &running_var_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<BatchNorm>(*this); }

 private:
  Param<T> gamma_, beta_;
  Buffer<T> running_mean_, running_var_;
  Mode mode_ = Mode::eval;
  BasicTensor<T> xhat_;
  std::vector<double> inv_std_;
};

// Inverted dropout: survivors scaled by 1/(1-p) in training, identity in eval.
template <class T>
class Dropout final : public LayerBase<T> {
 public:
  Dropout(const LayerSpec& spec, const Shape& in) : LayerBase<T>(spec, in, in) {}

  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode, std::uint64_t seed) override {
    this->check_input(x);
    if (mode == Mode::eval || this->spec_.drop_prob == 0) {
      mask_ = BasicTensor<T>(x.shape(), T{1});
      return x;
    }
    const double keep = 1.0 - this->spec_.drop_prob;
    const T scale = static_cast<T>(1.0 / keep);
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    mask_ = BasicTensor<T>(x.shape());
    BasicTensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
      mask_[i] = u(rng) < keep ? scale : T{0};
      y[i] = x[i] * mask_[i];
    }
    return y;
  }

  BasicTensor<T> backward(const BasicTensor<T>& dy) override {
    require(dy.shape() == mask_.shape(), "dropout: gradient shape does not match cache");
    BasicTensor<T> dx(dy.shape());
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * mask_[i];
    return dx;
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dropout>(*this); }

 private:
  BasicTensor<T> mask_;
};

template <class T>
class Activation final : public LayerBase<T> {
 public:
  Activation(const LayerSpec& spec, const Shape& in) : LayerBase<T>(spec, in, in) {}

  BasicTensor<T> forward(const BasicTensor<T>& x, Mode, std::uint64_t) override {
    this->check_input(x);
    BasicTensor<T> y(x.shape());
    const T slope = static_cast<T>(this->spec_.slope);
    switch (this->spec_.kind) {
      case LayerKind::relu:
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0 ? x[i] : T{0};
        break;
      case LayerKind::leaky_relu:
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0 ? x[i] : slope * x[i];
        break;
      case LayerKind::tanh:
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
        break;
      case LayerKind::sigmoid:
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = T{1} / (T{1} + std::exp(-x[i]));
        break;
      default:
        throw ValidationError("activation: unsupported kind");
    }
    cache_ = (this->spec_.kind == LayerKind::tanh || this->spec_.kind == LayerKind::sigmoid) ? y : x;
    return y;
  }

  BasicTensor<T> backward(const BasicTensor<T>& dy) override {
    require(dy.shape() == cache_.shape(), "activation: gradient shape does not match cache");
    BasicTensor<T> dx(dy.shape());
    const T slope = static_cast<T>(this->spec_.slope);
    switch (this->spec_.kind) {
      case LayerKind::relu:
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = cache_[i] > 0 ? dy[i] : T{0};
        break;
      case LayerKind::leaky_relu:
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = cache_[i] > 0 ? dy[i] : slope * dy[i];
        break;
      case LayerKind::tanh:
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * (T{1} - cache_[i] * cache_[i]);
        break;
      case LayerKind::sigmoid:
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * cache_[i] * (T{1} - cache_[i]);
        break;
      default:
        break;
    }
    return dx;
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Activation>(*this); }

 private:
  BasicTensor<T> cache_;
};

template <class T>
class Reshape final : public LayerBase<T> {
 public:
  Reshape(const LayerSpec& spec, const Shape& in) : LayerBase<T>(spec, in, spec.target_shape) {
    require(shape_size(in) == shape_size(spec.target_shape),
            "reshape: " + shape_string(in) + " cannot become " + shape_string(spec.target_shape));
  }

  BasicTensor<T> forward(const BasicTensor<T>& x, Mode, std::uint64_t) override {
    this->check_input(x);
    batch_ = x.dim(0);
    return x.reshaped(with_batch(batch_, this->out_));
  }

  BasicTensor<T> backward(const BasicTensor<T>& dy) override {
    return dy.reshaped(with_batch(batch_, this->in_));
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Reshape>(*this); }

 private:
  std::size_t batch_ = 0;
};

void validate_spec(const LayerSpec& s, const Shape& in) {
  const auto name = std::string(to_string(s.kind));
  switch (s.kind) {
    case LayerKind::conv2d:
    case LayerKind::tconv2d:
      require(in.size() == 3, name + ": input must be HxWxC, got " + shape_string(in));
      require(s.kernel > 0 && s.stride > 0 && s.out_channels > 0,
              name + ": kernel, stride and out_channels must be positive");
      break;
    case LayerKind::fc:
      require(s.units > 0, "fc: units must be positive");
      break;
    case LayerKind::dropout:
      require(s.drop_prob >= 0 && s.drop_prob < 1, "dropout: probability must be in [0, 1)");
      break;
    case LayerKind::leaky_relu:
      require(s.slope >= 0 && s.slope < 1, "leaky_relu: slope must be in [0, 1)");
      break;
    default:
      break;
  }
}

}  // namespace

std::string_view to_string(LayerKind kind) { return kKindNames.at(static_cast<std::size_t>(kind)); }

LayerKind layer_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == name) return static_cast<LayerKind>(i);
  throw ValidationError("unknown layer kind: " + std::string(name));
}

LayerSpec LayerSpec::conv(int out_channels, int kernel, int stride, bool bias) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.out_channels = out_channels;
  s.kernel = kernel;
  s.stride = stride;
  s.bias = bias;
  return s;
}

LayerSpec LayerSpec::tconv(int out_channels, int kernel, int stride, bool bias) {
  LayerSpec s = conv(out_channels, kernel, stride, bias);
  s.kind = LayerKind::tconv2d;
  return s;
}

LayerSpec LayerSpec::fc(int units) {
  LayerSpec s;
  s.kind = LayerKind::fc;
  s.units = units;
  return s;
}

LayerSpec LayerSpec::batchnorm() {
  LayerSpec s;
  s.kind = LayerKind::batchnorm;
  return s;
}

LayerSpec LayerSpec::dropout(double p) {
  LayerSpec s;
  s.kind = LayerKind::dropout;
  s.drop_prob = p;
  return s;
}

LayerSpec LayerSpec::relu() {
  LayerSpec s;
  s.kind = LayerKind::relu;
  return s;
}

LayerSpec LayerSpec::leaky_relu(double slope) {
  LayerSpec s;
  s.kind = LayerKind::leaky_relu;
  s.slope = slope;
  return s;
}

LayerSpec LayerSpec::tanh() {
  LayerSpec s;
  s.kind = LayerKind::tanh;
  return s;
}

LayerSpec LayerSpec::sigmoid() {
  LayerSpec s;
  s.kind = LayerKind::sigmoid;
  return s;
}

LayerSpec LayerSpec::reshape(Shape shape) {
  LayerSpec s;
  s.kind = LayerKind::reshape;
  s.target_shape = std::move(shape);
  return s;
}

void to_json(nlohmann::json& j, const LayerSpec& s) {
  j = nlohmann::json{{"kind", to_string(s.kind)}};
  switch (s.kind) {
    case LayerKind::conv2d:
    case LayerKind::tconv2d:
      j["kernel"] = s.kernel;
      j["stride"] = s.stride;
      j["out_channels"] = s.out_channels;
      j["bias"] = s.bias;
      break;
    case LayerKind::fc:
      j["units"] = s.units;
      break;
    case LayerKind::dropout:
      j["drop_prob"] = s.drop_prob;
      break;
    case LayerKind::leaky_relu:
      j["slope"] = s.slope;
      break;
    case LayerKind::reshape:
      j["target_shape"] = s.target_shape;
      break;
    default:
      break;
  }
}

void from_json(const nlohmann::json& j, LayerSpec& s) {
  s = LayerSpec{};
  s.kind = layer_kind_from_string(j.at("kind").get<std::string>());
  s.kernel = j.value("kernel", 0);
  s.stride = j.value("stride", 0);
  s.out_channels = j.value("out_channels", 0);
  s.units = j.value("units", 0);
  s.slope = j.value("slope", 0.0);
  s.drop_prob = j.value("drop_prob", 0.0);
  s.bias = j.value("bias", true);
  if (j.contains("target_shape")) s.target_shape = j.at("target_shape").get<Shape>();
}

template <class T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, const Shape& input_shape,
                                     std::uint64_t rng_seed, double init_std, std::size_t index) {
  validate_spec(spec, input_shape);
  Rng rng(rng_seed);
  switch (spec.kind) {
    case LayerKind::conv2d:
      return std::make_unique<Conv2d<T>>(spec, input_shape, rng, init_std, index);
    case LayerKind::tconv2d:
      return std::make_unique<TConv2d<T>>(spec, input_shape, rng, init_std, index);
    case LayerKind::fc:
      return std::make_unique<Dense<T>>(spec, input_shape, rng, init_std, index);
    case LayerKind::batchnorm:
      return std::make_unique<BatchNorm<T>>(spec, input_shape, index);
    case LayerKind::dropout:
      return std::make_unique<Dropout<T>>(spec, input_shape);
    case LayerKind::relu:
    case LayerKind::leaky_relu:
    case LayerKind::tanh:
    case LayerKind::sigmoid:
      return std::make_unique<Activation<T>>(spec, input_shape);
    case LayerKind::reshape:
      return std::make_unique<Reshape<T>>(spec, input_shape);
  }
  throw ValidationError("make_layer: unhandled kind");
}

template std::unique_ptr<Layer<float>> make_layer(const LayerSpec&, const Shape&, std::uint64_t,
                                                  double, std::size_t);
template std::unique_ptr<Layer<double>> make_layer(const LayerSpec&, const Shape&, std::uint64_t,
                                                   double, std::size_t);

}  // namespace topgan::nn

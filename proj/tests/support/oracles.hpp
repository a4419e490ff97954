#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "test_support.hpp"
#include "topgan/grid.hpp"
#include "topgan/metrics.hpp"
#include "topgan/network.hpp"

// Brute-force reference implementations shared by the unit and acceptance
// suites. None of them calls into the library code they check.
namespace topgan::test {

using nn::LayerSpec;
using nn::Mode;
using std::numbers::pi;

// RMS of (a - b) with the mean difference removed, over pixels at least
// `margin` from the edge.
inline double rms_minus_constant(const RealGrid& a, const RealGrid& b, std::size_t margin) {
  double mean = 0, n = 0;
  for (std::size_t y = margin; y + margin < a.height(); ++y)
    for (std::size_t x = margin; x + margin < a.width(); ++x) {
      mean += a(x, y) - b(x, y);
      n += 1;
    }
  mean /= n;
  double ss = 0;
  for (std::size_t y = margin; y + margin < a.height(); ++y)
    for (std::size_t x = margin; x + margin < a.width(); ++x) {
      const double d = a(x, y) - b(x, y) - mean;
      ss += d * d;
    }
  return std::sqrt(ss / n);
}

// Naive principal value: fmod-based, no std::remainder.
inline double naive_wrap(double v) {
  double r = std::fmod(v + pi, 2 * pi);
  if (r <= 0) r += 2 * pi;
  return r - pi;
}

// Row-wise 1D Itoh unwrapping of the first row, then columns.
inline RealGrid itoh_unwrap(const RealGrid& wrapped) {
  RealGrid out = wrapped;
  for (std::size_t x = 1; x < out.width(); ++x)
    out(x, 0) = out(x - 1, 0) + naive_wrap(wrapped(x, 0) - wrapped(x - 1, 0));
  for (std::size_t x = 0; x < out.width(); ++x)
    for (std::size_t y = 1; y < out.height(); ++y)
      out(x, y) = out(x, y - 1) + naive_wrap(wrapped(x, y) - wrapped(x, y - 1));
  return out;
}

// Unweighted least-squares misfit between the forward differences of `phi`
// and the wrapped forward differences of `psi`.
inline double ls_energy(const RealGrid& phi, const RealGrid& psi) {
  double e = 0;
  for (std::size_t y = 0; y < phi.height(); ++y)
    for (std::size_t x = 0; x < phi.width(); ++x) {
      if (x + 1 < phi.width()) {
        const double d = (phi(x + 1, y) - phi(x, y)) - naive_wrap(psi(x + 1, y) - psi(x, y));
        e += d * d;
      }
      if (y + 1 < phi.height()) {
        const double d = (phi(x, y + 1) - phi(x, y)) - naive_wrap(psi(x, y + 1) - psi(x, y));
        e += d * d;
      }
    }
  return e;
}

inline RealGrid gaussian_dome(std::size_t n, double peak, double sigma) {
  RealGrid g(n, n);
  const double c = (n - 1) / 2.0;
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x)
      g(x, y) = peak * std::exp(-((x - c) * (x - c) + (y - c) * (y - c)) / (2 * sigma * sigma));
  return g;
}

// Independent central differences of L = sum(r * f(x)) over every input and
// parameter element, compared against backward().
inline double fd_max_rel_error(nn::Network<double>& net, const nn::Tensor64& input, Mode mode, std::uint64_t seed,
                        std::string* worst = nullptr) {
  const double eps = 1e-5;
  net.zero_grad();
  const auto y = net.forward(input, mode, seed);
  const auto r = random_tensor<double>(y.shape(), 99);
  const auto dx = net.backward(r);
  auto loss = [&](const nn::Tensor64& in) {
    const auto out = net.forward(in, mode, seed);
    double l = 0;
    for (std::size_t i = 0; i < out.size(); ++i) l += r[i] * out[i];
    return l;
  };
  double max_err = 0;
  auto check = [&](double a, double n, const std::string& where) {
    const double err = std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-7});
    if (err > max_err) {
      max_err = err;
      if (worst) *worst = where;
    }
  };
  for (auto* p : net.parameters()) {
    const auto g = p->grad;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double o = p->value[i];
      p->value[i] = o + eps;
      const double up = loss(input);
      p->value[i] = o - eps;
      const double dn = loss(input);
      p->value[i] = o;
      check(g[i], (up - dn) / (2 * eps), p->name);
    }
  }
  auto x = input;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double o = x[i];
    x[i] = o + eps;
    const double up = loss(x);
    x[i] = o - eps;
    const double dn = loss(x);
    x[i] = o;
    check(dx[i], (up - dn) / (2 * eps), "input");
  }
  return max_err;
}

struct LayerCase {
  std::string name;
  nn::Shape in;
  std::vector<LayerSpec> specs;
  Mode mode;
};

inline std::vector<LayerCase> layer_cases() {
  return {
      {"conv_s2", {6, 6, 2}, {LayerSpec::conv(3, 5, 2)}, Mode::train},
      {"conv_s1_odd", {5, 7, 2}, {LayerSpec::conv(2, 3, 1)}, Mode::train},
      {"tconv_s2", {3, 3, 3}, {LayerSpec::tconv(2, 5, 2)}, Mode::train},
      {"fc", {2, 2, 3}, {LayerSpec::fc(4)}, Mode::train},
      {"batchnorm_train", {3, 3, 2}, {LayerSpec::batchnorm()}, Mode::train},
      {"batchnorm_eval", {3, 3, 2}, {LayerSpec::batchnorm()}, Mode::eval},
      {"batchnorm_vector", {5}, {LayerSpec::batchnorm()}, Mode::train},
      {"dropout", {10}, {LayerSpec::dropout(0.5)}, Mode::train},
      {"relu", {8}, {LayerSpec::relu()}, Mode::train},
      {"leaky_relu", {8}, {LayerSpec::leaky_relu(0.1)}, Mode::train},
      {"tanh", {8}, {LayerSpec::tanh()}, Mode::train},
      {"sigmoid", {8}, {LayerSpec::sigmoid()}, Mode::train},
      {"reshape", {8}, {LayerSpec::reshape({2, 2, 2}), LayerSpec::conv(1, 3, 1)}, Mode::train},
  };
}

// Hand-rolled bias-corrected Adam on f(t) = 0.5 a (t - c)^2.
inline std::vector<double> adam_oracle(double t, double a, double c, const nn::AdamConfig& cfg, int steps) {
  double m = 0, v = 0;
  std::vector<double> out;
  for (int k = 1; k <= steps; ++k) {
    const double g = a * (t - c);
    m = cfg.beta1 * m + (1 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
    const double mh = m / (1 - std::pow(cfg.beta1, k));
    const double vh = v / (1 - std::pow(cfg.beta2, k));
    t -= cfg.lr * mh / (std::sqrt(vh) + cfg.epsilon);
    out.push_back(t);
  }
  return out;
}

// Exhaustive KNN: full sort of (distance, index) pairs, then count votes.
inline std::vector<int> knn_oracle(const std::vector<nn::Tensor>& train, const std::vector<int>& labels,
                            const std::vector<nn::Tensor>& test, int k) {
  std::vector<int> out;
  for (const auto& q : test) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t i = 0; i < train.size(); ++i) {
      double s = 0;
      for (std::size_t j = 0; j < q.size(); ++j) s += std::abs(double(train[i][j]) - double(q[j]));
      d.emplace_back(s, i);
    }
    std::sort(d.begin(), d.end());
    int votes[2] = {0, 0};
    double sums[2] = {0, 0};
    for (int i = 0; i < k; ++i) {
      votes[labels[d[static_cast<std::size_t>(i)].second]]++;
      sums[labels[d[static_cast<std::size_t>(i)].second]] += d[static_cast<std::size_t>(i)].first;
    }
    if (votes[0] != votes[1]) out.push_back(votes[1] > votes[0] ? 1 : 0);
    else out.push_back(sums[1] < sums[0] ? 1 : 0);
  }
  return out;
}

// Per-sample sums of the clamped log terms.
inline double d_loss_oracle(const std::vector<double>& r, const std::vector<double>& f) {
  double a = 0, b = 0;
  for (double p : r) a += std::log(std::min(std::max(p, 1e-7), 1 - 1e-7));
  for (double p : f) b += std::log(1 - std::min(std::max(p, 1e-7), 1 - 1e-7));
  return a / r.size() + b / f.size();
}

inline eval::ConfusionCounts count_oracle(const std::vector<int>& p, const std::vector<int>& y) {
  eval::ConfusionCounts c;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 1 && p[i] == 1) ++c.tp;
    if (y[i] == 0 && p[i] == 0) ++c.tn;
    if (y[i] == 0 && p[i] == 1) ++c.fp;
    if (y[i] == 1 && p[i] == 0) ++c.fn;
  }
  return c;
}

inline double auc_oracle(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return wins / pairs;
}

inline double g_loss_oracle(const std::vector<double>& f) {
  double s = 0;
  for (double p : f) s += std::log(std::min(std::max(p, 1e-7), 1 - 1e-7));
  return s / f.size();
}

}  // namespace topgan::test

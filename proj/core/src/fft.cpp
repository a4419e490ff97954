#include "topgan/fft.hpp"

#include <fftw3.h>

#include <mutex>

namespace topgan::fft {
namespace {

// FFTW's planner is not reentrant; execution on distinct arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class Plan {
 public:
  template <class Make>
  explicit Plan(Make&& make) {
    std::lock_guard lock(planner_mutex());
    plan_ = make();
  }
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;

  void execute() const { fftw_execute(plan_); }

 private:
  fftw_plan plan_ = nullptr;
};

ComplexGrid transform(const ComplexGrid& in, int sign) {
  require(!in.empty(), "fft: empty grid");
  ComplexGrid out(in.width(), in.height());
  ComplexGrid work = in;
  auto* src = reinterpret_cast<fftw_complex*>(work.data());
  auto* dst = reinterpret_cast<fftw_complex*>(out.data());
  Plan plan([&] {
    return fftw_plan_dft_2d(static_cast<int>(in.height()), static_cast<int>(in.width()), src, dst,
                            sign, FFTW_ESTIMATE);
  });
  plan.execute();
  return out;
}

RealGrid r2r(const RealGrid& in, fftw_r2r_kind kind) {
  require(!in.empty(), "dct: empty grid");
  RealGrid work = in;
  RealGrid out(in.width(), in.height());
  Plan plan([&] {
    return fftw_plan_r2r_2d(static_cast<int>(in.height()), static_cast<int>(in.width()),
                            work.data(), out.data(), kind, kind, FFTW_ESTIMATE);
  });
  plan.execute();
  return out;
}

}  // namespace

ComplexGrid forward(const ComplexGrid& in) { return transform(in, FFTW_FORWARD); }

ComplexGrid inverse(const ComplexGrid& in) {
  ComplexGrid out = transform(in, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(in.size());
  for (auto& v : out.values()) v *= scale;
  return out;
}

ComplexGrid to_complex(const RealGrid& in) {
  ComplexGrid out(in.width(), in.height());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i];
  return out;
}

RealGrid dct2(const RealGrid& in) { return r2r(in, FFTW_REDFT10); }

RealGrid idct2(const RealGrid& in) {
  RealGrid out = r2r(in, FFTW_REDFT01);
  const double scale = 1.0 / (4.0 * static_cast<double>(in.size()));
  for (auto& v : out.values()) v *= scale;
  return out;
}

}  // namespace topgan::fft

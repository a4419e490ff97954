#include <benchmark/benchmark.h>

#include <random>

#include "topgan/gan.hpp"
#include "topgan/holography.hpp"
#include "topgan/network.hpp"
#include "topgan/synthdata.hpp"

using namespace topgan;

namespace {

nn::Tensor noise(nn::Shape shape) {
  nn::Tensor t(std::move(shape));
  std::mt19937_64 rng(3);
  std::normal_distribution<float> n(0.f, 1.f);
  for (auto& v : t.values()) v = n(rng);
  return t;
}

void BM_ConvForwardBackward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  nn::Network<float> net({side, side, 16}, {nn::LayerSpec::conv(32, 5, 2)}, 1, 0.02);
  const auto x = noise({16, side, side, 16});
  const auto y = net.forward(x, nn::Mode::train, 1);
  const auto g = noise(y.shape());
  for (auto _ : state) {
    net.zero_grad();
    benchmark::DoNotOptimize(net.forward(x, nn::Mode::train, 1));
    benchmark::DoNotOptimize(net.backward(g));
  }
}
BENCHMARK(BM_ConvForwardBackward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_UnwrapLs(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  RealGrid phase(n, n);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) phase(x, y) = 0.2 * x + 0.1 * y;
  const auto wrapped = holo::wrap_to_principal(phase);
  for (auto _ : state) benchmark::DoNotOptimize(holo::unwrap_ls(wrapped));
}
BENCHMARK(BM_UnwrapLs)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Reconstruct(benchmark::State& state) {
  const auto truth = holo::opd_forward(synth::make_phantom(synth::default_class_specs()[0], 5));
  const holo::OpticalConfig cfg;
  const auto sample = holo::synthesize_hologram(truth, cfg, 1);
  const auto reference = holo::synthesize_hologram(holo::OpdMap{RealGrid(128, 128)}, cfg, 2);
  for (auto _ : state) benchmark::DoNotOptimize(holo::reconstruct_opd(sample, reference));
}
BENCHMARK(BM_Reconstruct)->Unit(benchmark::kMillisecond);

void BM_DiscriminatorStep(benchmark::State& state) {
  gan::ArchConfig arch;
  arch.base_channels = static_cast<int>(state.range(0));
  nn::Network<float> d(gan::image_shape(arch), gan::discriminator_specs(arch), 1, 0.02);
  const auto x = noise({64, 64, 64, 3});
  const auto y = d.forward(x, nn::Mode::train, 1);
  const auto g = noise(y.shape());
  for (auto _ : state) {
    d.zero_grad();
    benchmark::DoNotOptimize(d.forward(x, nn::Mode::train, 1));
    benchmark::DoNotOptimize(d.backward(g));
  }
}
BENCHMARK(BM_DiscriminatorStep)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

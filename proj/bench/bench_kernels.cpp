// Serial reference against the OpenMP kernels. Run with
// `bench_kernels --benchmark_filter=project` and OMP_NUM_THREADS to taste.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "sist/kernels.hpp"
#include "sist/projector.hpp"

namespace k = sist::kernels;

namespace {

std::vector<double> noise(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

const sist::FanGeometry& geometry() {
  static const auto g = sist::FanGeometry::exact_fan(360, 129, 1, 2.0);
  return g;
}

template <auto Project>
void BM_project(benchmark::State& state) {
  const int w = static_cast<int>(state.range(0));
  const sist::Image img = sist::rasterize(sist::shepp_logan(), w);
  std::vector<double> sino(geometry().size());
  for (auto _ : state) {
    Project(img.values, w, geometry(), sino);
    benchmark::DoNotOptimize(sino.data());
  }
}

template <auto Backproject>
void BM_backproject(benchmark::State& state) {
  const int w = static_cast<int>(state.range(0));
  const auto filtered = noise(geometry().size(), 1);
  std::vector<double> image(static_cast<std::size_t>(w) * w);
  for (auto _ : state) {
    Backproject(filtered, geometry(), w, 0.01, image);
    benchmark::DoNotOptimize(image.data());
  }
}

template <auto Gemm>
void BM_gemm(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = noise(static_cast<std::size_t>(n) * n, 2), b = noise(static_cast<std::size_t>(n) * n, 3);
  std::vector<double> c(static_cast<std::size_t>(n) * n);
  for (auto _ : state) {
    Gemm(false, false, n, n, n, a.data(), b.data(), c.data(), false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}

template <auto Conv>
void BM_conv2d(benchmark::State& state) {
  const int w = static_cast<int>(state.range(0));
  const k::ConvShape s{16, 16, w, w, 3};
  const auto in = noise(static_cast<std::size_t>(16) * w * w, 4), weight = noise(16 * 16 * 9, 5), bias = noise(16, 6);
  std::vector<double> out(static_cast<std::size_t>(16) * w * w);
  for (auto _ : state) {
    Conv(s, in.data(), weight.data(), bias.data(), out.data());
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_project<k::serial::project>)->Name("project/serial")->Arg(64)->Arg(128);
BENCHMARK(BM_project<k::omp::project>)->Name("project/omp")->Arg(64)->Arg(128);
BENCHMARK(BM_backproject<k::serial::backproject>)->Name("backproject/serial")->Arg(64)->Arg(128);
BENCHMARK(BM_backproject<k::omp::backproject>)->Name("backproject/omp")->Arg(64)->Arg(128);
BENCHMARK(BM_gemm<k::serial::gemm<double>>)->Name("gemm/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_gemm<k::omp::gemm<double>>)->Name("gemm/omp")->Arg(64)->Arg(256);
BENCHMARK(BM_conv2d<k::serial::conv2d_forward<double>>)->Name("conv2d/serial")->Arg(32)->Arg(64);
BENCHMARK(BM_conv2d<k::omp::conv2d_forward<double>>)->Name("conv2d/omp")->Arg(32)->Arg(64);

BENCHMARK_MAIN();

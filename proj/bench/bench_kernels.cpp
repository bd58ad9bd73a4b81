// Parallel kernels against their serial reference implementations, on the
// layer shapes of the default 32x32 backbone at batch 32.

#include <benchmark/benchmark.h>

#include <random>

#include "qtae/kernels.hpp"
#include "qtae/lattice.hpp"
#include "qtae/model.hpp"
#include "qtae/reference.hpp"

using namespace qtae;

namespace {

Tensor<float> random_tensor(Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d;
  Tensor<float> t(std::move(s));
  for (auto& v : t.storage()) v = d(rng);
  return t;
}

// (in_channels, out_channels, input extent) of each encoder layer
constexpr std::size_t kLayers[4][3] = {{1, 32, 32}, {32, 64, 16}, {64, 128, 8}, {128, 128, 4}};
constexpr ConvParams kDown{2, 1, PadMode::zero};

template <bool Parallel>
void Conv2d(benchmark::State& state) {
  const auto* l = kLayers[state.range(0)];
  const auto x = random_tensor({32, l[0], l[2], l[2]}, 1), k = random_tensor({l[1], l[0], 4, 4}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Parallel ? kernels::conv2d(x, k, kDown) : reference::conv2d(x, k, kDown));
}

template <bool Parallel>
void Deconv2d(benchmark::State& state) {
  const auto* l = kLayers[state.range(0)];
  const auto x = random_tensor({32, l[1], l[2] / 2, l[2] / 2}, 3), k = random_tensor({l[1], l[0], 4, 4}, 4);
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? kernels::deconv2d(x, k, kDown) : reference::deconv2d(x, k, kDown));
}

template <bool Parallel>
void ConvKernelGrad(benchmark::State& state) {
  const auto* l = kLayers[state.range(0)];
  const auto x = random_tensor({32, l[0], l[2], l[2]}, 5);
  const Tensor<float> k({l[1], l[0], 4, 4});
  const auto g = conv_geometry(x.shape(), k.shape(), kDown);
  const auto go = random_tensor({32, l[1], g.out_h, g.out_w}, 6);
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? kernels::conv2d_kernel_grad(x, go, g) : reference::conv2d_kernel_grad(x, go, g));
}

template <bool Parallel>
void Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_tensor({n, n}, 7), b = random_tensor({n, n}, 8);
  Tensor<float> c({n, n});
  for (auto _ : state) {
    if (Parallel)
      kernels::gemm(false, true, n, n, n, 1.0f, a.ptr(), b.ptr(), 0.0f, c.ptr());
    else
      reference::gemm(false, true, n, n, n, 1.0f, a.ptr(), b.ptr(), 0.0f, c.ptr());
    benchmark::DoNotOptimize(c.ptr());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

// Index-map shift (used in training) against composing per-axis rolls.
template <bool Gather>
void LatticeShift(benchmark::State& state) {
  const LatticeSpec spec{{{"a", 10, true, 1}, {"b", 10, true, 1}, {"c", 4, false, 1}}, 8, LatticeMode::product};
  const EmbeddingTensor y(random_tensor(spec.embedding_shape(), 9), spec);
  const LatticeOffset u{{3, -2, 1}};
  const auto map = shift_index_map(spec, u);
  for (auto _ : state) {
    if (Gather) {
      Var<float> v(y.tensor().reshaped({1, spec.element_count()}));
      benchmark::DoNotOptimize(ag::gather(v, {map}).value().ptr());
    } else {
      benchmark::DoNotOptimize(apply_offset(y, u).tensor().ptr());
    }
  }
}

void BackboneForward(benchmark::State& state) {
  const BackboneConfig config;
  const LatticeSpec spec{{{"rotation", 8, true, 1}}, 16, LatticeMode::product};
  const QtaeModel model(config, spec, 1);
  const auto x = random_tensor({32, 1, 32, 32}, 10);
  const std::vector<LatticeOffset> u(32, LatticeOffset{{1}});
  for (auto _ : state) benchmark::DoNotOptimize(model.predict_batch(x, u).ptr());
}

}  // namespace

BENCHMARK(Conv2d<false>)->Name("conv2d/reference")->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(Conv2d<true>)->Name("conv2d/parallel")->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(Deconv2d<false>)->Name("deconv2d/reference")->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(Deconv2d<true>)->Name("deconv2d/parallel")->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(ConvKernelGrad<false>)->Name("conv_kernel_grad/reference")->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(ConvKernelGrad<true>)->Name("conv_kernel_grad/parallel")->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(Gemm<false>)->Name("gemm/reference")->RangeMultiplier(2)->Range(64, 256);
BENCHMARK(Gemm<true>)->Name("gemm/parallel")->RangeMultiplier(2)->Range(64, 256);
BENCHMARK(LatticeShift<false>)->Name("lattice_shift/rolls");
BENCHMARK(LatticeShift<true>)->Name("lattice_shift/index_map");
BENCHMARK(BackboneForward)->Name("backbone/predict_batch32")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

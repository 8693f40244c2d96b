// Serial reference kernels against their OpenMP counterparts.

#include <random>

#include <benchmark/benchmark.h>
#include <omp.h>

#include "gsf/kernels.hpp"
#include "gsf/taft.hpp"

using namespace gsf;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = d(rng);
  return t;
}

template <Tensor (*Matmul)(const Tensor&, const Tensor&)>
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
  state.counters["threads"] = omp_get_max_threads();
}

using ConvFn = Tensor (*)(const Tensor&, const Tensor&, const Tensor&, const kernels::ConvGeometry&);

template <ConvFn Conv>
void BM_Conv2d(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0)), ch = static_cast<std::size_t>(state.range(1));
  const Tensor in = random_tensor({ch, side, side}, 3), w = random_tensor({ch, ch, 3, 3}, 4), b = random_tensor({ch}, 5);
  const kernels::ConvGeometry g{1, 1};
  for (auto _ : state) benchmark::DoNotOptimize(Conv(in, w, b, g));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(side * side * ch * ch * 9));
  state.counters["threads"] = omp_get_max_threads();
}

using GradInputFn = Tensor (*)(const Tensor&, const Tensor&, const Shape&, const kernels::ConvGeometry&);

template <GradInputFn GradInput>
void BM_Conv2dGradInput(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0)), ch = static_cast<std::size_t>(state.range(1));
  const Tensor grad = random_tensor({ch, side, side}, 6), w = random_tensor({ch, ch, 3, 3}, 7);
  const kernels::ConvGeometry g{1, 1};
  for (auto _ : state) benchmark::DoNotOptimize(GradInput(grad, w, {ch, side, side}, g));
  state.counters["threads"] = omp_get_max_threads();
}

// One forward and backward pass of the default generator on a 64x64 frame.
void BM_GeneratorStep(benchmark::State& state) {
  const taft::Generator gen(taft::GeneratorConfig{}, 1);
  const ad::Var input = ad::constant(random_tensor({6, 64, 64}, 8));
  for (auto _ : state) {
    const ad::Var loss = ad::mean(ad::square(gen.forward(input)));
    ad::backward(loss);
    benchmark::DoNotOptimize(loss.item());
  }
  state.counters["threads"] = omp_get_max_threads();
}

}  // namespace

BENCHMARK(BM_Matmul<kernels::serial::matmul>)->Name("matmul/serial")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_Matmul<kernels::parallel::matmul>)->Name("matmul/omp")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_Conv2d<kernels::serial::conv2d>)->Name("conv2d/serial")->Args({32, 16})->Args({64, 32});
BENCHMARK(BM_Conv2d<kernels::parallel::conv2d>)->Name("conv2d/omp")->Args({32, 16})->Args({64, 32});
BENCHMARK(BM_Conv2dGradInput<kernels::serial::conv2d_grad_input>)->Name("conv2d_grad_input/serial")->Args({64, 32});
BENCHMARK(BM_Conv2dGradInput<kernels::parallel::conv2d_grad_input>)->Name("conv2d_grad_input/omp")->Args({64, 32});
BENCHMARK(BM_GeneratorStep)->Name("generator_step/64x64")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

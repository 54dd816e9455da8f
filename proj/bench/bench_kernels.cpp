#include <benchmark/benchmark.h>

#include <random>

#include "dyged/graph.hpp"
#include "dyged/kernels.hpp"
#include "dyged/model.hpp"
#include "dyged/synthgen.hpp"

using namespace dyged;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (auto& v : m.data()) v = u(rng);
  return m;
}

DynamicGraph random_graph(std::size_t n, std::size_t T, double p) {
  synth::GenSpec spec;
  spec.n = n;
  spec.T = T;
  spec.base_edge_prob = p;
  spec.clique_size = 4;
  return synth::generate(spec);
}

template <void (*Kernel)(const Matrix&, const Matrix&, Matrix&)>
void BM_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, 64, 1);
  const auto b = random_matrix(64, 64, 2);
  Matrix out;
  for (auto _ : state) {
    Kernel(a, b, out);
    benchmark::DoNotOptimize(out.data().data());
  }
}

template <void (*Kernel)(const SparseMatrix&, const Matrix&, Matrix&)>
void BM_spmm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto g = random_graph(n, 1, 0.05);
  const auto a = normalized_adjacency_sparse(g.snapshots[0], n);
  const auto b = random_matrix(n, 64, 3);
  Matrix out;
  for (auto _ : state) {
    Kernel(a, b, out);
    benchmark::DoNotOptimize(out.data().data());
  }
}

template <std::vector<PreparedSnapshot> (*Prepare)(const DynamicGraph&, FeatureMode)>
void BM_prepare(benchmark::State& state) {
  const auto g = random_graph(static_cast<std::size_t>(state.range(0)), 32, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(Prepare(g, FeatureMode::both));
}

void BM_forward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto g = random_graph(n, 4, 0.1);
  std::vector<PreparedSnapshot> prepared = serial::prepare_graph(g, FeatureMode::static_only);
  ModelConfig cfg;
  cfg.d_in = g.feature_dim();
  const auto params = init_params(cfg, 1);
  for (auto _ : state) benchmark::DoNotOptimize(forward(prepared, params, Mode::eval));
}

}  // namespace

BENCHMARK(BM_matmul<kernels::serial::matmul>)->Name("matmul/serial")->Arg(256)->Arg(2048);
BENCHMARK(BM_matmul<kernels::parallel::matmul>)->Name("matmul/parallel")->Arg(256)->Arg(2048);
BENCHMARK(BM_spmm<kernels::serial::spmm>)->Name("spmm/serial")->Arg(512)->Arg(4096);
BENCHMARK(BM_spmm<kernels::parallel::spmm>)->Name("spmm/parallel")->Arg(512)->Arg(4096);
BENCHMARK(BM_prepare<serial::prepare_graph>)->Name("prepare_graph/serial")->Arg(100);
BENCHMARK(BM_prepare<parallel::prepare_graph>)->Name("prepare_graph/parallel")->Arg(100);
BENCHMARK(BM_forward)->Name("forward/full")->Arg(100)->Arg(400);

BENCHMARK_MAIN();

// Parallel kernels against their serial reference versions.
#include "lockserv/kernels.hpp"
#include "lockserv/rng.hpp"
#include "lockserv/synth.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace lockserv;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd ratings(Index n, Index p) {
  PortableRng rng(11);
  MatrixXd x(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) x(i, j) = static_cast<double>(1 + rng.below(5));
  return x;
}

struct Groups {
  std::vector<std::vector<Index>> idx;
  std::vector<std::vector<double>> w;
};

Groups six_groups(Index p) {
  Groups g;
  g.idx.resize(6);
  g.w.resize(6);
  for (Index j = 0; j < p; ++j) {
    g.idx[static_cast<std::size_t>(j % 6)].push_back(j);
    g.w[static_cast<std::size_t>(j % 6)].push_back(0.5 + 0.01 * static_cast<double>(j));
  }
  return g;
}

template <auto Fn>
void bm_covariance(benchmark::State& st) {
  const MatrixXd x = ratings(st.range(0), 32);
  for (auto _ : st) benchmark::DoNotOptimize(Fn(x));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

template <auto Fn>
void bm_entropy(benchmark::State& st) {
  const MatrixXd x = ratings(st.range(0), 32);
  for (auto _ : st) benchmark::DoNotOptimize(Fn(x));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

template <auto Fn>
void bm_grouped(benchmark::State& st) {
  const MatrixXd x = ratings(st.range(0), 32);
  const auto g = six_groups(32);
  for (auto _ : st) benchmark::DoNotOptimize(Fn(x, g.idx, g.w));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

template <auto Fn>
void bm_probit(benchmark::State& st) {
  VectorXd beta(8), kappa(4);
  beta << 0.3, -0.2, 0.1, 0.0, 0.25, -0.1, 0.05, 0.15;
  kappa << -1.2, -0.4, 0.4, 1.2;
  const auto s = synth::gen_probit(beta, kappa, static_cast<std::size_t>(st.range(0)), 5);
  for (auto _ : st) benchmark::DoNotOptimize(Fn(s.x, s.y, beta, kappa, true));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

}  // namespace

BENCHMARK(bm_covariance<kernels::covariance>)->Name("covariance/parallel")->Arg(1000)->Arg(100000);
BENCHMARK(bm_covariance<kernels::reference::covariance>)->Name("covariance/reference")->Arg(1000)->Arg(100000);
BENCHMARK(bm_entropy<kernels::column_entropy>)->Name("column_entropy/parallel")->Arg(1000)->Arg(100000);
BENCHMARK(bm_entropy<kernels::reference::column_entropy>)->Name("column_entropy/reference")->Arg(1000)->Arg(100000);
BENCHMARK(bm_grouped<kernels::grouped_weighted_means>)->Name("grouped_means/parallel")->Arg(1000)->Arg(100000);
BENCHMARK(bm_grouped<kernels::reference::grouped_weighted_means>)->Name("grouped_means/reference")->Arg(1000)->Arg(100000);
BENCHMARK(bm_probit<kernels::probit_terms>)->Name("probit_terms/parallel")->Arg(1000)->Arg(100000);
BENCHMARK(bm_probit<kernels::reference::probit_terms>)->Name("probit_terms/reference")->Arg(1000)->Arg(100000);

BENCHMARK_MAIN();

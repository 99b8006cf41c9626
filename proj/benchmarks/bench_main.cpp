#include <benchmark/benchmark.h>

#include <random>

#include "rsls/blockops.hpp"
#include "rsls/remainder.hpp"

namespace {

rsls::CausalOperator random_causal(std::mt19937& rng, int T, int p, int q) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  rsls::CausalOperator M(T, p, q);
  for (int k = 0; k < T; ++k)
    for (int j = 0; j <= k; ++j)
      M.block(k, j) = Eigen::MatrixXd::NullaryExpr(p, q, [&]() { return u(rng); });
  return M;
}

void BM_compose(benchmark::State& state) {
  std::mt19937 rng(1);
  auto A = random_causal(rng, 10, 6, 6);
  auto B = random_causal(rng, 10, 6, 6);
  for (auto _ : state) benchmark::DoNotOptimize(rsls::compose(A, B));
}
BENCHMARK(BM_compose);

void BM_apply(benchmark::State& state) {
  std::mt19937 rng(2);
  auto A = random_causal(rng, 10, 6, 6);
  Eigen::VectorXd w = Eigen::VectorXd::Random(60);
  for (auto _ : state) benchmark::DoNotOptimize(rsls::apply(A, w));
}
BENCHMARK(BM_apply);

void BM_estimate_mu(benchmark::State& state) {
  auto m = rsls::satellite_model();
  auto C = rsls::ParamBox::centered(Eigen::VectorXd::Ones(8));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        rsls::estimate_mu(m, C, m.Theta, state.range(0), 1.0, 1));
}
BENCHMARK(BM_estimate_mu)->Arg(256)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();

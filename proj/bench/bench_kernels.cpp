// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <random>

#include "cmoe/kernels.hpp"

namespace {

using cmoe::Matrix;
namespace k = cmoe::kernels;

struct Problem {
  Matrix x;
  std::vector<double> w, y, sigma2;
  Matrix coef, pi, gates, means;
  std::vector<std::size_t> cols;
  Matrix inv;
};

Problem make(std::size_t n, std::size_t p, std::size_t c) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.1, 1.0);
  Problem pr{Matrix(n, p), std::vector<double>(n), std::vector<double>(n), std::vector<double>(c, 0.5),
             Matrix(c, p), Matrix(c, n), Matrix(c, n), Matrix(c, n), {}, Matrix::identity(p)};
  for (std::size_t i = 0; i < n; ++i) {
    pr.x(i, 0) = 1.0;
    for (std::size_t j = 1; j < p; ++j) pr.x(i, j) = z(rng);
    pr.w[i] = u(rng);
    pr.y[i] = z(rng);
  }
  for (std::size_t r = 0; r < c; ++r)
    for (std::size_t j = 0; j < p; ++j) pr.coef(r, j) = z(rng);
  for (std::size_t r = 0; r < c; ++r)
    for (std::size_t i = 0; i < n; ++i) pr.pi(r, i) = u(rng), pr.means(r, i) = z(rng);
  pr.gates = k::serial::softmax_columns(k::serial::linear_scores(pr.x, pr.coef));
  for (std::size_t j = 0; j < p; ++j) pr.cols.push_back(j);
  pr.inv = cmoe::LuFactorization(k::serial::weighted_gram(pr.x, pr.w, pr.y).gram).inverse();
  return pr;
}

template <bool Parallel>
void BM_Gram(benchmark::State& state) {
  const auto pr = make(static_cast<std::size_t>(state.range(0)), 21, 3);
  for (auto _ : state) {
    auto g = Parallel ? k::omp::weighted_gram(pr.x, pr.w, pr.y) : k::serial::weighted_gram(pr.x, pr.w, pr.y);
    benchmark::DoNotOptimize(g);
  }
}

template <bool Parallel>
void BM_Responsibilities(benchmark::State& state) {
  const auto pr = make(static_cast<std::size_t>(state.range(0)), 21, 3);
  for (auto _ : state) {
    auto r = Parallel ? k::omp::responsibilities(pr.pi, pr.gates, pr.means, pr.y, pr.sigma2)
                      : k::serial::responsibilities(pr.pi, pr.gates, pr.means, pr.y, pr.sigma2);
    benchmark::DoNotOptimize(r);
  }
}

template <bool Parallel>
void BM_HatDiagonal(benchmark::State& state) {
  const auto pr = make(static_cast<std::size_t>(state.range(0)), 21, 3);
  for (auto _ : state) {
    auto h = Parallel ? k::omp::hat_diagonal(pr.x, pr.cols, pr.w, pr.inv)
                      : k::serial::hat_diagonal(pr.x, pr.cols, pr.w, pr.inv);
    benchmark::DoNotOptimize(h);
  }
}

template <bool Parallel>
void BM_Scores(benchmark::State& state) {
  const auto pr = make(static_cast<std::size_t>(state.range(0)), 21, 3);
  for (auto _ : state) {
    auto s = Parallel ? k::omp::softmax_columns(k::omp::linear_scores(pr.x, pr.coef))
                      : k::serial::softmax_columns(k::serial::linear_scores(pr.x, pr.coef));
    benchmark::DoNotOptimize(s);
  }
}

}  // namespace

BENCHMARK(BM_Gram<false>)->Name("gram/serial")->Range(1 << 10, 1 << 17);
BENCHMARK(BM_Gram<true>)->Name("gram/omp")->Range(1 << 10, 1 << 17);
BENCHMARK(BM_Responsibilities<false>)->Name("responsibilities/serial")->Range(1 << 10, 1 << 17);
BENCHMARK(BM_Responsibilities<true>)->Name("responsibilities/omp")->Range(1 << 10, 1 << 17);
BENCHMARK(BM_HatDiagonal<false>)->Name("hat_diagonal/serial")->Range(1 << 10, 1 << 17);
BENCHMARK(BM_HatDiagonal<true>)->Name("hat_diagonal/omp")->Range(1 << 10, 1 << 17);
BENCHMARK(BM_Scores<false>)->Name("gate_softmax/serial")->Range(1 << 10, 1 << 17);
BENCHMARK(BM_Scores<true>)->Name("gate_softmax/omp")->Range(1 << 10, 1 << 17);

BENCHMARK_MAIN();

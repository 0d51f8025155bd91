#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "vsplit/core/kernels.hpp"
#include "vsplit/privacy/paillier.hpp"

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

template <bool Parallel>
void BM_gemm_nn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t p = 64, q = 32;
  auto a = random_values(n * p, 1);
  auto b = random_values(p * q, 2);
  std::vector<double> c(n * q);
  for (auto _ : state) {
    if constexpr (Parallel)
      vsplit::kernels::gemm_nn(a, b, c, n, p, q, false);
    else
      vsplit::kernels::serial::gemm_nn(a, b, c, n, p, q, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * p * q));
}

template <bool Parallel>
void BM_gemm_tn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t p = 64, q = 32;
  auto a = random_values(n * p, 3);
  auto g = random_values(n * q, 4);
  std::vector<double> c(p * q);
  for (auto _ : state) {
    if constexpr (Parallel)
      vsplit::kernels::gemm_tn(a, g, c, n, p, q, false);
    else
      vsplit::kernels::serial::gemm_tn(a, g, c, n, p, q, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * p * q));
}

template <bool Parallel>
void BM_paillier_encrypt(benchmark::State& state) {
  static const vsplit::KeyPair key = vsplit::keygen(512, 1);
  std::vector<mpz_class> m(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<unsigned long>(i * 7919);
  vsplit::Encryptor enc(key.pub, 2);
  for (auto _ : state) {
    auto c = Parallel ? enc.encrypt_batch(m) : enc.encrypt_batch_serial(m);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_paillier_encrypt<false>)->Arg(64);
BENCHMARK(BM_paillier_encrypt<true>)->Arg(64);
BENCHMARK(BM_gemm_nn<false>)->Arg(256)->Arg(4096);
BENCHMARK(BM_gemm_nn<true>)->Arg(256)->Arg(4096);
BENCHMARK(BM_gemm_tn<false>)->Arg(256)->Arg(4096);
BENCHMARK(BM_gemm_tn<true>)->Arg(256)->Arg(4096);

BENCHMARK_MAIN();

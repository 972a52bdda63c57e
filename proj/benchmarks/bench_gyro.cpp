#include <benchmark/benchmark.h>

#include "horo/gyro.hpp"

namespace {

using namespace horo;

std::vector<double> random_in_ball(Rng& rng, std::size_t d, double max_norm) {
  std::vector<double> v(d);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  const double n = norm(v);
  for (double& x : v) x *= max_norm * rng.next_double() / std::max(n, 1e-12);
  return v;
}

void BM_MobiusAdd(benchmark::State& state) {
  Rng rng(1);
  const std::size_t d = state.range(0);
  const auto x = random_in_ball(rng, d, 0.9);
  const auto y = random_in_ball(rng, d, 0.9);
  std::vector<double> out(d);
  for (auto _ : state) {
    gyro::mobius_add(x, y, 1.0, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_MobiusAdd)->Arg(16)->Arg(64)->Arg(400);

void BM_ExpLogRoundtrip(benchmark::State& state) {
  Rng rng(2);
  const std::size_t d = state.range(0);
  const auto base = random_in_ball(rng, d, 0.8);
  const auto y = random_in_ball(rng, d, 0.8);
  std::vector<double> tangent(d), back(d);
  for (auto _ : state) {
    gyro::log_map(base, y, 1.0, tangent);
    gyro::exp_map(base, tangent, 1.0, back);
    benchmark::DoNotOptimize(back.data());
  }
}
BENCHMARK(BM_ExpLogRoundtrip)->Arg(16)->Arg(64);

void BM_Distance(benchmark::State& state) {
  Rng rng(3);
  const std::size_t d = state.range(0);
  const auto x = random_in_ball(rng, d, 0.9);
  const auto y = random_in_ball(rng, d, 0.9);
  for (auto _ : state) benchmark::DoNotOptimize(gyro::distance(x, y));
}
BENCHMARK(BM_Distance)->Arg(16)->Arg(400);

}  // namespace

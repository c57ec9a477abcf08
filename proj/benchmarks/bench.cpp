#include <benchmark/benchmark.h>

#include "rfodmr/fit.hpp"
#include "rfodmr/link.hpp"
#include "rfodmr/spectrum.hpp"
#include "rfodmr/spin.hpp"

using namespace rfodmr;

static void BM_TransitionsExact(benchmark::State& state) {
  const FieldVector b = FieldVector::along({1, 2, 3}, 30.0);
  for (auto _ : state) benchmark::DoNotOptimize(transition_frequencies_exact({}, b));
}
BENCHMARK(BM_TransitionsExact);

static void BM_Synthesize(benchmark::State& state) {
  const FrequencyGrid grid{2750.0, 2990.0, static_cast<std::size_t>(state.range(0))};
  const FieldVector b = FieldVector::along({1, 1, 1}, 11.2);
  for (auto _ : state) benchmark::DoNotOptimize(synthesize_spectrum({}, b, {}, grid, 0.001, 1));
}
BENCHMARK(BM_Synthesize)->Arg(1201)->Arg(12001);

static void BM_FitFourLines(benchmark::State& state) {
  const auto s = synthesize_spectrum({}, FieldVector::along({1, 1, 1}, 11.2), {},
                                     {2750.0, 2990.0, 1201}, 0.001, 1);
  FitConfig cfg;
  cfg.n_lines = 4;
  for (auto _ : state) benchmark::DoNotOptimize(fit_spectrum(s, cfg));
}
BENCHMARK(BM_FitFourLines);

static void BM_LinkForward(benchmark::State& state) {
  LinkParameters l;
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_link(l));
}
BENCHMARK(BM_LinkForward);

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "rdd/decoder.hpp"
#include "rdd/harness.hpp"
#include "rdd/remask.hpp"
#include "rdd/scripted.hpp"

namespace {

using namespace rdd;

DecodeConfig config_for(Method m, bool cache) {
  DecodeConfig cfg;
  cfg.method = m;
  cfg.schedule.rollback_budget = m == Method::kBlock ? 0 : 1;
  cfg.use_cache = cache;
  return cfg;
}

void decode_scenario(benchmark::State& state, const Scenario& sc, Method m, bool cache) {
  DecodeConfig cfg = config_for(m, cache);
  cfg.total_len = sc.total_len();
  std::uint64_t seed = 0;
  std::uint64_t nfe = 0;
  for (auto _ : state) {
    cfg.seed = seed++;
    auto d = sc.make_denoiser(cfg.seed);
    const DecodeResult r = decode(*d, sc.prompt, cfg);
    nfe += r.metrics.nfe;
    benchmark::DoNotOptimize(r.buffer);
  }
  state.counters["tokens/s"] = benchmark::Counter(static_cast<double>(sc.ground_truth.size() * state.iterations()),
                                                  benchmark::Counter::kIsRate);
  state.counters["nfe"] = static_cast<double>(nfe) / static_cast<double>(state.iterations());
}

const Scenario& trap_scenario() {
  static const Scenario s = scenario_from_trap("canonical", canonical_trap());
  return s;
}

const Scenario& markov_scenario() {
  static const Scenario s = generate_bigram_scenarios(1, 3, false)[0];
  return s;
}

void BM_TrapDecode(benchmark::State& state) {
  decode_scenario(state, trap_scenario(), static_cast<Method>(state.range(0)), state.range(1) != 0);
}
BENCHMARK(BM_TrapDecode)
    ->ArgNames({"method", "cache"})
    ->ArgsProduct({{static_cast<int>(Method::kVanilla), static_cast<int>(Method::kBlock), static_cast<int>(Method::kRdd)},
                   {0, 1}});

void BM_MarkovDecode(benchmark::State& state) {
  decode_scenario(state, markov_scenario(), static_cast<Method>(state.range(0)), state.range(1) != 0);
}
BENCHMARK(BM_MarkovDecode)
    ->ArgNames({"method", "cache"})
    ->ArgsProduct({{static_cast<int>(Method::kBlock), static_cast<int>(Method::kRdd)}, {0, 1}});

void BM_Remask(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  TokenBuffer base = TokenBuffer::with_prompt(std::vector<TokenId>{0}, n + 1);
  for (Position i = 1; i <= n; ++i) base.commit(i, 1, 0.9);
  Rng rng(1);
  for (auto _ : state) {
    TokenBuffer b = base;
    benchmark::DoNotOptimize(apply_remask(b, 1, n + 1, 1.0, rng));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(n * state.iterations()));
}
BENCHMARK(BM_Remask)->Arg(32)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();

#include <gtest/gtest.h>

#include <set>

#include "rdd/decoder.hpp"
#include "rdd/errors.hpp"
#include "rdd/scripted.hpp"
#include "trap_oracle.hpp"

namespace rdd {
namespace {

DecodeConfig trap_config(Method m, std::size_t budget, std::uint64_t seed = 0) {
  DecodeConfig cfg;
  cfg.method = m;
  cfg.schedule.rollback_budget = budget;
  cfg.total_len = 256;
  cfg.block_len = 32;
  cfg.seed = seed;
  return cfg;
}

std::span<const TokenId> prompt_of(const TrapSpec& spec) {
  return std::span<const TokenId>(spec.ground_truth).first(spec.prompt_len);
}

std::set<Position> remasked_positions(const Trace& trace) {
  std::set<Position> out;
  for (const auto& ev : trace) {
    if (ev.kind == EventKind::kRemask) out.insert(ev.positions.begin(), ev.positions.end());
  }
  return out;
}

// Hand-built window state for single-step checks.
DecodingState state_with(std::size_t budget, const DecodeConfig& cfg,
                         std::span<const TokenId> prompt) {
  DecodingState s = initial_state(prompt, cfg);
  s.budget = budget;
  return s;
}

DenoiserOutput uniform_output(const DecodingState& s, double confidence) {
  DenoiserOutput out;
  for (Position i = s.window.start; i < s.window.end; ++i) {
    if (s.buffer.is_masked(i)) out.predictions.push_back({i, 1, confidence, {}});
  }
  return out;
}

TEST(Step, DecodesEverythingAboveThreshold) {
  DecodeConfig cfg = trap_config(Method::kRdd, 1);
  cfg.total_len = 8;
  cfg.block_len = 4;
  const std::vector<TokenId> prompt{0, 0, 0, 0};
  DecodingState s = state_with(1, cfg, prompt);
  DenoiserOutput out = uniform_output(s, 0.5);
  out.predictions[1].confidence = 0.9;  // tau(4) = 1 - 0.9/5 = 0.82
  const auto events = step(s, out, cfg);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0].kind, EventKind::kDecode);
  EXPECT_EQ(events[0].positions, std::vector<Position>{5});
  EXPECT_NEAR(events[0].tau, 0.82, 1e-12);
  EXPECT_FALSE(s.buffer.is_masked(5));
}

TEST(Step, ForcesArgmaxWhenOutOfBudget) {
  DecodeConfig cfg = trap_config(Method::kRdd, 0);
  cfg.total_len = 8;
  cfg.block_len = 4;
  const std::vector<TokenId> prompt{0, 0, 0, 0};
  DecodingState s = state_with(0, cfg, prompt);
  DenoiserOutput out = uniform_output(s, 0.3);
  out.predictions[2].confidence = 0.6;
  out.predictions[3].confidence = 0.6;  // tie: lower position wins
  const auto events = step(s, out, cfg);
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(events[0].kind, EventKind::kStagnate);
  EXPECT_EQ(events[1].kind, EventKind::kForce);
  EXPECT_EQ(events[1].positions, std::vector<Position>{6});
  EXPECT_EQ(s.budget, 0u);
}

TEST(Step, NoRollbackFromTheFirstWindow) {
  DecodeConfig cfg = trap_config(Method::kRdd, 1);
  cfg.total_len = 8;
  cfg.block_len = 4;
  const std::vector<TokenId> prompt{0, 0, 0, 0};
  DecodingState s = state_with(1, cfg, prompt);
  const auto events = step(s, uniform_output(s, 0.1), cfg);
  EXPECT_EQ(events.back().kind, EventKind::kForce);
  EXPECT_EQ(s.budget, 1u);
}

TEST(Step, RollbackMergesRemasksAndInvalidates) {
  DecodeConfig cfg = trap_config(Method::kRdd, 1, 3);
  cfg.total_len = 12;
  cfg.block_len = 4;
  cfg.schedule.lambda = 50.0;  // 1 - 0.5^50: every revived token is re-masked
  const std::vector<TokenId> prompt{0, 0, 0, 0};
  DecodingState s = initial_state(prompt, cfg);
  for (Position i = 4; i < 8; ++i) s.buffer.commit(i, 2, 0.5);
  s.cache->put(1, {7});
  s.window = next_window(s.window, cfg.total_len);
  s.frontier = 8;
  const auto events = step(s, uniform_output(s, 0.1), cfg);
  ASSERT_EQ(events.size(), 3u);
  EXPECT_EQ(events[1].kind, EventKind::kRollback);
  EXPECT_EQ(events[2].kind, EventKind::kRemask);
  EXPECT_EQ(events[2].window, (BlockWindow{4, 12, 4}));
  EXPECT_EQ(events[2].positions, (std::vector<Position>{4, 5, 6, 7}));
  EXPECT_EQ(events[2].confidences, std::vector<double>(4, 0.5));
  EXPECT_EQ(s.window, (BlockWindow{4, 12, 4}));
  EXPECT_EQ(s.mode, Mode::kRecovery);
  EXPECT_EQ(s.budget, 0u);
  EXPECT_EQ(s.cache->size(), 0u);
}

TEST(Step, RejectsBadCoverage) {
  DecodeConfig cfg = trap_config(Method::kRdd, 1);
  cfg.total_len = 8;
  cfg.block_len = 4;
  const std::vector<TokenId> prompt{0, 0, 0, 0};
  DecodingState s = initial_state(prompt, cfg);
  DenoiserOutput out = uniform_output(s, 0.99);
  out.predictions.pop_back();
  EXPECT_THROW(step(s, out, cfg), UsageError);
}

TEST(BudgetPolicy, ResetsOnlyPastTheFrontier) {
  DecodeConfig cfg = trap_config(Method::kRdd, 2);
  cfg.total_len = 12;
  cfg.block_len = 4;
  const std::vector<TokenId> prompt{0, 0, 0, 0};
  DecodingState s = initial_state(prompt, cfg);
  s.window = {4, 12, 4};
  s.frontier = 12;
  s.budget = 0;
  s.mode = Mode::kRecovery;
  budget_policy(s, cfg);
  EXPECT_EQ(s.budget, 0u);
  EXPECT_EQ(s.mode, Mode::kRecovery);
  s.frontier = 8;
  budget_policy(s, cfg);
  EXPECT_EQ(s.budget, 2u);
  EXPECT_EQ(s.mode, Mode::kNormal);
  EXPECT_EQ(s.frontier, 12u);
}

TEST(Config, MethodConstraints) {
  DecodeConfig cfg = trap_config(Method::kBlock, 1);
  EXPECT_THROW(cfg.validate(32), UsageError);
  cfg.schedule.rollback_budget = 0;
  EXPECT_NO_THROW(cfg.validate(32));
  cfg.method = Method::kRdd;
  cfg.schedule.f_r = 0.5;
  EXPECT_THROW(cfg.validate(32), UsageError);
  cfg.method = Method::kRddStar;
  EXPECT_NO_THROW(cfg.validate(32));
  cfg.block_len = 30;
  EXPECT_THROW(cfg.validate(32), UsageError);
}

TEST(RemaskPolicy, ParseAndPrint) {
  EXPECT_EQ(RemaskPolicy::parse("confidence").kind, RemaskPolicy::Kind::kConfidence);
  const RemaskPolicy r = RemaskPolicy::parse("random:0.25");
  EXPECT_EQ(r.kind, RemaskPolicy::Kind::kRandom);
  EXPECT_DOUBLE_EQ(r.ratio, 0.25);
  EXPECT_EQ(r.to_string(), "random:0.25");
  EXPECT_THROW(RemaskPolicy::parse("random:2"), UsageError);
  EXPECT_THROW(RemaskPolicy::parse("sometimes"), UsageError);
}

// Closed-form outcome of the canonical trap at f = 0.9, L = 32, 7 blocks:
// block 1 decodes in one pass; block 2 commits 31 truths then the decoy
// (tau(1) = 0.55 < 0.62). Every later block sits at 0.6 < tau(m) for m >= 2,
// so monotonic decoding forces 31 tokens and decodes the last at m = 1.
TEST(Decode, BlockOnCanonicalTrapMatchesClosedForm) {
  const TrapSpec spec = canonical_trap();
  ScriptedDenoiser d(spec, 1);
  const DecodeResult r = decode(d, prompt_of(spec), trap_config(Method::kBlock, 0));
  EXPECT_EQ(r.metrics.nfe, 1u + 2u + 5u * 32u);
  EXPECT_EQ(r.metrics.nfe_forced, 5u * 31u);
  EXPECT_EQ(r.buffer.token(spec.traps[0].position), spec.traps[0].decoy);
}

TEST(Decode, RddAgreesWithOracleAcrossSeeds) {
  const TrapSpec spec = canonical_trap();
  std::size_t recovered = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    ScriptedDenoiser d(spec, seed);
    const DecodeResult r = decode(d, prompt_of(spec), trap_config(Method::kRdd, 1, seed));
    const auto remasked = remasked_positions(r.trace);
    oracle::OracleConfig oc;
    oc.reversible = true;
    oc.rollback_budget = 1;
    const auto o = oracle::simulate_trap(spec, oc, [&](std::size_t i, double) { return remasked.count(i) > 0; });
    const std::vector<TokenId> got(r.buffer.tokens().begin(), r.buffer.tokens().end());
    ASSERT_EQ(got, o.tokens) << "seed " << seed;
    ASSERT_EQ(r.metrics.nfe, o.nfe) << "seed " << seed;
    ASSERT_EQ(r.metrics.nfe_forced, o.nfe_forced) << "seed " << seed;
    ASSERT_EQ(r.metrics.rollbacks, o.rollbacks) << "seed " << seed;
    ASSERT_EQ(r.metrics.remasked_tokens, o.remasked) << "seed " << seed;
    if (o.exact) ++recovered;
  }
  EXPECT_GT(recovered, 0u);
  EXPECT_LT(recovered, 200u);
}

TEST(Decode, CacheOnAndOffProduceTheSameTrace) {
  const TrapSpec spec = canonical_trap();
  for (Method m : {Method::kBlock, Method::kRdd}) {
    DecodeConfig cfg = trap_config(m, m == Method::kBlock ? 0 : 1, 5);
    ScriptedDenoiser a(spec, 5), b(spec, 5);
    const auto with = decode(a, prompt_of(spec), cfg);
    cfg.use_cache = false;
    const auto without = decode(b, prompt_of(spec), cfg);
    EXPECT_EQ(with.trace, without.trace);
    EXPECT_EQ(with.buffer, without.buffer);
  }
}

// After every transition: committed tokens in fully finished windows left
// of the current one were never touched except through REMASK.
TEST(Decode, ObserverSeesConsistentState) {
  const TrapSpec spec = canonical_trap();
  DecodeConfig cfg = trap_config(Method::kRdd, 2, 11);
  ScriptedDenoiser d(spec, 11);
  std::size_t calls = 0;
  const auto r = decode(d, prompt_of(spec), cfg, [&](const DecodingState& s, const TraceEvent& ev) {
    ++calls;
    EXPECT_LE(s.budget, cfg.schedule.rollback_budget);
    EXPECT_GE(s.frontier, s.buffer.prompt_len());
    if (ev.kind == EventKind::kRemask) {
      EXPECT_EQ(s.mode, Mode::kRecovery);
      for (Position p : ev.positions) EXPECT_TRUE(s.buffer.is_masked(p));
    }
    for (Position i = s.buffer.prompt_len(); i < s.window.start; ++i) EXPECT_FALSE(s.buffer.is_masked(i));
  });
  EXPECT_EQ(calls, r.trace.size());
  EXPECT_TRUE(r.buffer.complete());
}

TEST(Decode, VanillaCommitsOneTokenPerEvaluation) {
  const TrapSpec spec = canonical_trap();
  ScriptedDenoiser d(spec, 0);
  DecodeConfig cfg = trap_config(Method::kVanilla, 1);
  const auto r = decode(d, prompt_of(spec), cfg);
  EXPECT_EQ(r.metrics.nfe, 224u);
  EXPECT_EQ(r.metrics.nfe_forced, 0u);
  // the whole-sequence window never arms the trap
  EXPECT_EQ(std::vector<TokenId>(r.buffer.tokens().begin(), r.buffer.tokens().end()), spec.ground_truth);
}

TEST(Decode, StepCapRaisesRunaway) {
  const TrapSpec spec = canonical_trap();
  ScriptedDenoiser d(spec, 0);
  DecodeConfig cfg = trap_config(Method::kBlock, 0);
  cfg.step_cap = 10;
  EXPECT_THROW(decode(d, prompt_of(spec), cfg), Runaway);
}

}  // namespace
}  // namespace rdd

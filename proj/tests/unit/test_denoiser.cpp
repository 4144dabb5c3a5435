#include <gtest/gtest.h>

#include "rdd/bigram.hpp"
#include "rdd/denoiser.hpp"
#include "rdd/errors.hpp"
#include "rdd/scripted.hpp"

namespace rdd {
namespace {

TokenBuffer clean_sequence(std::size_t prompt, std::size_t n) {
  std::vector<TokenId> t(prompt + n);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<TokenId>(i % 5);
  return TokenBuffer::from_sequence(t, prompt);
}

TEST(ForwardCorrupt, Extremes) {
  const auto clean = clean_sequence(4, 100);
  EXPECT_EQ(forward_corrupt(clean, 1.0, 3), clean);
  const auto all = forward_corrupt(clean, 0.0, 3);
  EXPECT_EQ(count_masks(all, {4, 104, 100}), 100u);
  for (Position i = 0; i < 4; ++i) EXPECT_FALSE(all.is_masked(i));
}

TEST(ForwardCorrupt, MaskedFraction) {
  const auto clean = clean_sequence(0, 10000);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto c = forward_corrupt(clean, 0.7, seed);
    EXPECT_NEAR(static_cast<double>(count_masks(c, {0, 10000, 100})) / 10000.0, 0.30, 0.02);
  }
  EXPECT_EQ(forward_corrupt(clean, 0.7, 9), forward_corrupt(clean, 0.7, 9));
}

TEST(ForwardCorrupt, Errors) {
  const auto clean = clean_sequence(2, 10);
  EXPECT_THROW(forward_corrupt(clean, 1.5, 0), UsageError);
  EXPECT_THROW(forward_corrupt(clean, -0.1, 0), UsageError);
  auto dirty = clean;
  dirty.mask(5);
  EXPECT_THROW(forward_corrupt(dirty, 0.5, 0), UsageError);
}

class DenoiserContract : public ::testing::Test {
 protected:
  TrapSpec spec = canonical_trap(32, 96, 32, 4);
  std::span<const TokenId> prompt() const { return std::span<const TokenId>(spec.ground_truth).first(32); }
};

TEST_F(DenoiserContract, EvalIdCountsEvaluations) {
  ScriptedDenoiser d(spec, 1);
  const auto buf = TokenBuffer::with_prompt(prompt(), 128);
  EXPECT_EQ(d.evaluate(buf, {32, 64, 32}, nullptr).eval_id, 1u);
  EXPECT_EQ(d.evaluate(buf, {32, 64, 32}, nullptr).eval_id, 2u);
  EXPECT_EQ(d.evaluations(), 2u);
}

TEST_F(DenoiserContract, CoversMaskedPositionsInOrder) {
  ScriptedDenoiser d(spec, 1);
  auto buf = TokenBuffer::with_prompt(prompt(), 128);
  buf.commit(40, spec.ground_truth[40], 0.99);
  const auto out = d.evaluate(buf, {32, 64, 32}, nullptr);
  ASSERT_EQ(out.predictions.size(), 31u);
  for (std::size_t k = 0; k + 1 < out.predictions.size(); ++k) {
    EXPECT_LT(out.predictions[k].position, out.predictions[k + 1].position);
    EXPECT_NE(out.predictions[k].position, 40u);
  }
  for (const auto& p : out.predictions) {
    ASSERT_FALSE(p.top_k.empty());
    EXPECT_EQ(p.top_k.front().first, p.token);
    EXPECT_EQ(p.top_k.front().second, p.confidence);
    double sum = 0.0;
    for (const auto& [tok, prob] : p.top_k) sum += prob;
    EXPECT_LE(sum, 1.0 + 1e-9);
  }
}

TEST_F(DenoiserContract, CacheWarmUpAndPurity) {
  ScriptedDenoiser d(spec, 1);
  auto buf = TokenBuffer::with_prompt(prompt(), 128);
  for (Position i = 32; i < 64; ++i) buf.commit(i, spec.ground_truth[i], 0.99);
  const auto snapshot = buf;
  CacheStore cache(32, 32, 128);
  const auto a = d.evaluate(buf, {64, 96, 32}, &cache);
  EXPECT_EQ(cache.blocks(), std::vector<std::size_t>{1});
  const auto b = d.evaluate(buf, {64, 96, 32}, &cache);
  const auto c = d.evaluate(buf, {64, 96, 32}, nullptr);
  EXPECT_EQ(a.predictions, b.predictions);
  EXPECT_EQ(a.predictions, c.predictions);
  EXPECT_EQ(buf, snapshot);
}

TEST_F(DenoiserContract, RejectsWindowsOutsideTheGeneratedRegion) {
  ScriptedDenoiser d(spec, 1);
  const auto buf = TokenBuffer::with_prompt(prompt(), 128);
  EXPECT_THROW(d.evaluate(buf, {0, 32, 32}, nullptr), UsageError);
  EXPECT_THROW(d.evaluate(buf, {96, 160, 32}, nullptr), UsageError);
}

TEST_F(DenoiserContract, InvalidateDropsRange) {
  ScriptedDenoiser d(spec, 1);
  CacheStore cache(32, 32, 128);
  cache.put(1, {0});
  cache.put(2, {0});
  d.invalidate(cache, 64, 128);
  EXPECT_EQ(cache.blocks(), std::vector<std::size_t>{1});
}

}  // namespace
}  // namespace rdd

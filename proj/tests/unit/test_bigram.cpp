#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "rdd/bigram.hpp"
#include "rdd/decoder.hpp"
#include "rdd/errors.hpp"
#include "rdd/rng.hpp"

namespace rdd {
namespace {

constexpr TokenId a = 0, b = 1;

std::vector<std::vector<TokenId>> abab(std::size_t n) {
  std::vector<TokenId> s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(i % 2 == 0 ? a : b);
  return {s};
}

DenoiserOutput predict_after(BigramDenoiser& d, std::vector<TokenId> prompt, std::size_t masks) {
  const auto buf = TokenBuffer::with_prompt(prompt, prompt.size() + masks);
  return d.evaluate(buf, {prompt.size(), prompt.size() + masks, masks}, nullptr);
}

TEST(BigramModel, CountOracle) {
  // 200 tokens: 100 "a->b" transitions and 99 "b->a" transitions
  const auto m = BigramModel::fit(abab(200), 0.1, 2);
  EXPECT_NEAR(m->transition(a, b), (100 + 0.1) / (100 + 0.2), 1e-12);
  EXPECT_NEAR(m->transition(b, a), (99 + 0.1) / (99 + 0.2), 1e-12);
  EXPECT_NEAR(m->unigram(a), (100 + 0.1) / (200 + 0.2), 1e-12);
  const auto two = m->propagate(a, 2);
  EXPECT_NEAR(two[a], m->transition(a, a) * m->transition(a, a) + m->transition(a, b) * m->transition(b, a), 1e-12);
}

TEST(BigramDenoiser, PredictsBAfterAWithVanishingSmoothing) {
  double last = 0.0;
  for (double s : {0.5, 0.1, 1e-3, 1e-6}) {
    BigramDenoiser d(BigramModel::fit(abab(1000), s, 2));
    const auto out = predict_after(d, {b, a}, 1);
    EXPECT_EQ(out.predictions[0].token, b);
    EXPECT_GT(out.predictions[0].confidence, last);
    last = out.predictions[0].confidence;
  }
  EXPECT_GT(last, 1.0 - 1e-6);
}

TEST(BigramDenoiser, UniformCorpusIsUnconfident) {
  Rng rng(5);
  std::vector<TokenId> s(20000);
  for (auto& t : s) t = static_cast<TokenId>(uniform_below(rng, 4));
  BigramDenoiser d(BigramModel::fit({s}, 0.1, 4));
  for (const auto& p : predict_after(d, {0, 1, 2}, 4).predictions) {
    EXPECT_NEAR(p.confidence, 0.25, 0.02);
    EXPECT_LT(p.confidence, 0.5);
  }
}

TEST(BigramDenoiser, UnigramFallbackWithoutLeftContext) {
  const auto m = BigramModel::fit({{0, 0, 0, 1}}, 0.1, 2);
  BigramDenoiser d(m);
  const auto out = predict_after(d, {}, 2);
  EXPECT_EQ(out.predictions[0].token, 0u);
  EXPECT_DOUBLE_EQ(out.predictions[0].confidence, m->unigram(0));
}

TEST(BigramDenoiser, DistancePropagation) {
  BigramDenoiser d(BigramModel::fit(abab(1000), 1e-3, 2));
  const auto out = predict_after(d, {a}, 4);
  EXPECT_EQ(out.predictions[0].token, b);
  EXPECT_EQ(out.predictions[1].token, a);
  EXPECT_EQ(out.predictions[2].token, b);
  EXPECT_GT(out.predictions[0].confidence, out.predictions[3].confidence);
}

TEST(BigramDenoiser, TopKSortedAndTiesByLowestId) {
  BigramDenoiser d(BigramModel::fit({{0, 1, 0, 2}}, 1.0, 3), 3);
  const auto out = predict_after(d, {2}, 1);
  const auto& tk = out.predictions[0].top_k;
  ASSERT_EQ(tk.size(), 3u);
  for (std::size_t k = 0; k + 1 < tk.size(); ++k) {
    EXPECT_TRUE(tk[k].second > tk[k + 1].second || (tk[k].second == tk[k + 1].second && tk[k].first < tk[k + 1].first));
  }
}

TEST(BigramDenoiser, DecodesAbabExactlyUnderEveryMethod) {
  const auto model = BigramModel::fit(abab(2000), 0.1, 2);
  std::vector<TokenId> prompt;
  for (int i = 0; i < 32; ++i) prompt.push_back(i % 2 == 0 ? a : b);
  for (Method m : {Method::kVanilla, Method::kBlock, Method::kRdd, Method::kRddStar}) {
    BigramDenoiser d(model);
    DecodeConfig cfg;
    cfg.method = m;
    cfg.schedule.rollback_budget = m == Method::kBlock ? 0 : 1;
    const auto r = decode(d, prompt, cfg);
    for (Position i = 32; i < 256; ++i) ASSERT_EQ(r.buffer.token(i), i % 2 == 0 ? a : b) << to_string(m);
    EXPECT_EQ(r.metrics.nfe_forced, 0u);
  }
}

TEST(BigramModel, Errors) {
  EXPECT_THROW(BigramModel::fit({}), UsageError);
  EXPECT_THROW(BigramModel::fit({{}}), UsageError);
  EXPECT_THROW(BigramModel::fit(abab(4), 0.0), UsageError);
  EXPECT_THROW(BigramModel::fit({{5}}, 0.1, 3), UsageError);
}

TEST(LoadCorpus, TextAndJson) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto txt = dir / "rdd_corpus_test.txt";
  const auto js = dir / "rdd_corpus_test.json";
  std::ofstream(txt) << "0 1 0 1\n2 3\n";
  std::ofstream(js) << R"({"sequences": [[0, 1, 0, 1], [2, 3]]})";
  const std::vector<std::vector<TokenId>> want{{0, 1, 0, 1}, {2, 3}};
  EXPECT_EQ(load_corpus(txt.string()), want);
  EXPECT_EQ(load_corpus(js.string()), want);
  std::ofstream(txt) << "0 x 1\n";
  EXPECT_THROW(load_corpus(txt.string()), IoError);
  EXPECT_THROW(load_corpus((dir / "rdd_missing_corpus.txt").string()), IoError);
  std::filesystem::remove(txt);
  std::filesystem::remove(js);
}

}  // namespace
}  // namespace rdd

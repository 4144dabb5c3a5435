#include <gtest/gtest.h>

#include <algorithm>

#include "rdd/errors.hpp"
#include "rdd/scheduler.hpp"

namespace rdd {
namespace {

DenoiserOutput with_confidences(std::initializer_list<double> cs) {
  DenoiserOutput out;
  Position i = 0;
  for (double c : cs) out.predictions.push_back({i++, 0, c, {}});
  return out;
}

TEST(Threshold, SpotValues) {
  EXPECT_NEAR(threshold(0.9, 32), 1.0 - 0.9 / 33.0, 1e-12);
  EXPECT_NEAR(threshold(0.9, 32), 0.97273, 1e-5);
  EXPECT_DOUBLE_EQ(threshold(1.0, 1), 0.5);
  EXPECT_DOUBLE_EQ(threshold(4.0, 1), -1.0);
  EXPECT_DOUBLE_EQ(threshold(0.9, 0), 1.0 - 0.9);
}

TEST(Threshold, StrictlyIncreasingAndBelowOne) {
  for (double f : {0.25, 0.9, 2.25, 4.0}) {
    for (std::size_t m = 0; m < 512; ++m) {
      EXPECT_LT(threshold(f, m), threshold(f, m + 1));
      EXPECT_LT(threshold(f, m), 1.0);
    }
  }
}

TEST(SelectDecodable, Examples) {
  EXPECT_EQ(select_decodable(with_confidences({0.99, 0.50}), 0.97), std::vector<std::size_t>{0});
  EXPECT_EQ(select_decodable(with_confidences({0.2, 0.1, 0.3}), -1.0), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_TRUE(select_decodable(with_confidences({0.6, 0.6}), threshold(0.9, 31)).empty());
  EXPECT_EQ(select_decodable(with_confidences({0.99, 0.98, 0.30}), 0.9), (std::vector<std::size_t>{0, 1}));
  // inclusive comparison
  EXPECT_EQ(select_decodable(with_confidences({0.5}), 0.5), std::vector<std::size_t>{0});
}

TEST(SelectDecodable, NestedInTau) {
  const auto out = with_confidences({0.1, 0.35, 0.5, 0.62, 0.9, 0.99});
  for (double lo = -0.5; lo <= 1.0; lo += 0.05) {
    for (double hi = lo; hi <= 1.0; hi += 0.05) {
      const auto a = select_decodable(out, lo);
      const auto b = select_decodable(out, hi);
      EXPECT_TRUE(std::includes(a.begin(), a.end(), b.begin(), b.end()));
    }
  }
}

TEST(CurrentFactor, Modes) {
  ScheduleConfig cfg;
  cfg.f = 2.25;
  cfg.f_r = 0.9;
  EXPECT_DOUBLE_EQ(current_factor(Mode::kNormal, cfg), 2.25);
  EXPECT_DOUBLE_EQ(current_factor(Mode::kRecovery, cfg), 0.9);
  cfg.f_r = cfg.f;
  EXPECT_EQ(current_factor(Mode::kNormal, cfg), current_factor(Mode::kRecovery, cfg));
}

TEST(ScheduleConfig, Validate) {
  ScheduleConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.f_r = 1.0;
  EXPECT_THROW(cfg.validate(), UsageError);
  cfg = {};
  cfg.lambda = 0.0;
  EXPECT_THROW(cfg.validate(), UsageError);
  cfg = {};
  cfg.f = -1.0;
  EXPECT_THROW(cfg.validate(), UsageError);
}

}  // namespace
}  // namespace rdd

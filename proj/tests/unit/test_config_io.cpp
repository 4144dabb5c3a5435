#include <gtest/gtest.h>

#include "rdd/config_io.hpp"
#include "rdd/errors.hpp"

namespace rdd {
namespace {

TEST(ConfigIo, EchoRoundTrips) {
  DecodeConfig cfg;
  cfg.method = Method::kRddStar;
  cfg.schedule = {2.25, 0.9, 0.5, 3};
  cfg.block_len = 16;
  cfg.total_len = 160;
  cfg.seed = 0xfeedbeefcafeULL;
  cfg.step_cap = 999;
  cfg.use_cache = false;
  cfg.trace_cache = true;
  cfg.remask = RemaskPolicy::parse("random:0.3");
  EXPECT_EQ(decode_config_from_json(decode_config_to_json(cfg)), cfg);
  cfg.schedule.f = 0.1 + 0.2;  // not representable exactly in short decimal
  EXPECT_EQ(decode_config_from_json(decode_config_to_json(cfg)), cfg);
}

TEST(ConfigIo, MissingKeysKeepBase) {
  DecodeConfig base;
  base.seed = 17;
  const DecodeConfig cfg = decode_config_from_json(R"({"f": 1.5})", base);
  EXPECT_EQ(cfg.seed, 17u);
  EXPECT_DOUBLE_EQ(cfg.schedule.f, 1.5);
}

TEST(ConfigIo, Malformed) {
  EXPECT_THROW(decode_config_from_json("[1,2]"), UsageError);
  EXPECT_THROW(decode_config_from_json("{\"f\": \"fast\"}"), UsageError);
  EXPECT_THROW(decode_config_from_json("{\"method\": \"beam\"}"), UsageError);
  EXPECT_THROW(decode_config_from_json("{"), UsageError);
}

}  // namespace
}  // namespace rdd

#include <gtest/gtest.h>

#include "rdd/cache.hpp"
#include "rdd/errors.hpp"

namespace rdd {
namespace {

// Blocks 0..3 of a 32-token prompt-free region with L = 32.
CacheStore filled(std::size_t n) {
  CacheStore c(32, 0, 128);
  for (std::size_t j = 0; j < n; ++j) c.put(j, {j});
  return c;
}

TEST(Cache, EmptyStoreAtPromptBoundary) {
  CacheStore c(32, 32, 256);
  const ContextView v = c.get_context({32, 64, 32});
  EXPECT_TRUE(v.blocks.empty());
  EXPECT_EQ(v.context_end, 32u);
}

TEST(Cache, ContextCoversCachedPrefix) {
  const CacheStore c = filled(2);
  const ContextView v = c.get_context({64, 96, 32});
  ASSERT_EQ(v.blocks.size(), 2u);
  EXPECT_EQ(v.blocks[0]->index, 0u);
  EXPECT_EQ(v.blocks[1]->index, 1u);
  EXPECT_EQ(v.context_end, 64u);
}

TEST(Cache, HoleIsACacheMiss) {
  CacheStore c = filled(1);
  EXPECT_THROW(c.get_context({64, 96, 32}), CacheMiss);
  EXPECT_THROW(c.put(2, {}), UsageError);  // would create a hole at block 1
}

TEST(Cache, DeleteRangeExamples) {
  CacheStore c = filled(3);
  c.delete_range(32, 96);
  EXPECT_EQ(c.blocks(), std::vector<std::size_t>{0});

  CacheStore d = filled(2);
  const auto g = d.generation();
  d.delete_range(64, 64);
  EXPECT_EQ(d.blocks(), (std::vector<std::size_t>{0, 1}));
  d.delete_range(96, 128);  // beyond every entry
  EXPECT_EQ(d.blocks(), (std::vector<std::size_t>{0, 1}));
  EXPECT_GT(d.generation(), g);
}

TEST(Cache, DeleteRejectsUnalignedAndOrphaningRanges) {
  CacheStore c = filled(3);
  EXPECT_THROW(c.delete_range(10, 64), UsageError);
  EXPECT_THROW(c.delete_range(0, 32), UsageError);  // blocks 1 and 2 would follow a hole
  EXPECT_THROW(c.delete_range(64, 32), UsageError);
}

TEST(Cache, DeleteRestoresEarlierStore) {
  CacheStore before = filled(2);
  CacheStore after = filled(2);
  after.put(2, {9});
  after.put(3, {9});
  after.delete_range(64, 128);
  EXPECT_TRUE(after.same_entries(before));
}

TEST(Cache, UnalignedPromptClipsFirstBlock) {
  CacheStore c(32, 40, 104);
  EXPECT_EQ(c.first_generated_block(), 1u);
  EXPECT_EQ(c.block_begin(1), 40u);
  EXPECT_EQ(c.block_end(1), 64u);
  EXPECT_EQ(c.blocks_before(64), 1u);
  EXPECT_EQ(c.blocks_before(40), 0u);
  c.put(1, {1});
  c.delete_range(40, 64);
  EXPECT_EQ(c.size(), 0u);
}

TEST(Cache, SnapshotListsBlocksAndGeneration) {
  const CacheStore c = filled(2);
  const CacheSnapshot s = c.snapshot();
  EXPECT_EQ(s.blocks, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(s.generation, 2u);
}

}  // namespace
}  // namespace rdd

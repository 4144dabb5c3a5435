#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "rdd/trace.hpp"
#include "rdd/types.hpp"

namespace rdd {

/// Per-block context summary. Produced and interpreted by the denoiser; the
/// cache never looks inside.
using BlockState = std::vector<std::uint64_t>;

struct CachedBlock {
  std::size_t index = 0;
  Position begin = 0;
  Position end = 0;
  BlockState state;

  friend bool operator==(const CachedBlock&, const CachedBlock&) = default;
};

/// Read-only prefix context: the generated blocks left of a window, in order.
/// The prompt itself is immutable and read straight from the token buffer.
struct ContextView {
  Position context_end = 0;
  std::vector<const CachedBlock*> blocks;
};

/// Block-granular memo of denoiser context, keyed by absolute block index
/// (block j spans [j*L, (j+1)*L) clipped to the generated region).
///
/// An entry for block j exists only if every generated block before j is
/// cached too. Every mutation bumps `generation()`.
class CacheStore {
 public:
  CacheStore(std::size_t block_len, std::size_t prompt_len, std::size_t total_len);

  std::size_t block_len() const noexcept { return block_len_; }
  std::size_t prompt_len() const noexcept { return prompt_len_; }
  std::size_t total_len() const noexcept { return total_len_; }

  std::size_t block_of(Position i) const noexcept { return i / block_len_; }
  std::size_t first_generated_block() const noexcept { return prompt_len_ / block_len_; }
  Position block_begin(std::size_t block) const noexcept;
  Position block_end(std::size_t block) const noexcept;

  /// Generated blocks lying entirely left of `boundary`.
  std::size_t blocks_before(Position boundary) const noexcept;

  void put(std::size_t block, BlockState state);
  bool contains(std::size_t block) const { return entries_.count(block) != 0; }
  const CachedBlock* find(std::size_t block) const;

  /// Throws CacheMiss if any generated block left of window.start is missing.
  ContextView get_context(const BlockWindow& window) const;

  /// Drops every entry intersecting [begin, end). Bounds must sit on the block
  /// grid (multiples of L, or the prompt/total boundaries).
  void delete_range(Position begin, Position end);

  std::uint64_t generation() const noexcept { return generation_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::vector<std::size_t> blocks() const;
  CacheSnapshot snapshot() const;

  /// Entry equality only; generation counters are ignored.
  bool same_entries(const CacheStore& other) const { return entries_ == other.entries_; }

 private:
  bool on_grid(Position p) const noexcept;

  std::size_t block_len_;
  std::size_t prompt_len_;
  std::size_t total_len_;
  std::map<std::size_t, CachedBlock> entries_;
  std::uint64_t generation_ = 0;
};

}  // namespace rdd

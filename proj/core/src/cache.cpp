#include "rdd/cache.hpp"

#include <algorithm>
#include <string>

#include "rdd/errors.hpp"

namespace rdd {

CacheStore::CacheStore(std::size_t block_len, std::size_t prompt_len, std::size_t total_len)
    : block_len_(block_len), prompt_len_(prompt_len), total_len_(total_len) {
  if (block_len == 0) throw UsageError("cache block length must be positive");
  if (prompt_len > total_len) throw UsageError("cache prompt length exceeds total length");
}

Position CacheStore::block_begin(std::size_t block) const noexcept {
  return std::max(block * block_len_, prompt_len_);
}

Position CacheStore::block_end(std::size_t block) const noexcept {
  return std::min((block + 1) * block_len_, total_len_);
}

std::size_t CacheStore::blocks_before(Position boundary) const noexcept {
  if (boundary <= prompt_len_) return 0;
  // the block containing `boundary - 1` counts only if it ends exactly at boundary
  const std::size_t last = block_of(boundary - 1);
  const std::size_t upto = block_end(last) <= boundary ? last + 1 : last;
  return upto - first_generated_block();
}

bool CacheStore::on_grid(Position p) const noexcept {
  return p % block_len_ == 0 || p == prompt_len_ || p == total_len_;
}

void CacheStore::put(std::size_t block, BlockState state) {
  if (block < first_generated_block() || block_begin(block) >= total_len_) {
    throw UsageError("block " + std::to_string(block) + " holds no generated positions");
  }
  for (std::size_t j = first_generated_block(); j < block; ++j) {
    if (!contains(j)) {
      throw UsageError("cannot cache block " + std::to_string(block) + ": block " + std::to_string(j) +
                       " is missing");
    }
  }
  entries_[block] = CachedBlock{block, block_begin(block), block_end(block), std::move(state)};
  ++generation_;
}

const CachedBlock* CacheStore::find(std::size_t block) const {
  auto it = entries_.find(block);
  return it == entries_.end() ? nullptr : &it->second;
}

ContextView CacheStore::get_context(const BlockWindow& window) const {
  ContextView view;
  view.context_end = window.start;
  const std::size_t first = first_generated_block();
  const std::size_t n = blocks_before(window.start);
  view.blocks.reserve(n);
  for (std::size_t j = first; j < first + n; ++j) {
    const CachedBlock* entry = find(j);
    if (entry == nullptr) {
      throw CacheMiss("no cache entry for block " + std::to_string(j) + " left of window start " +
                      std::to_string(window.start));
    }
    view.blocks.push_back(entry);
  }
  return view;
}

void CacheStore::delete_range(Position begin, Position end) {
  if (begin > end) throw UsageError("delete_range: begin after end");
  if (!on_grid(begin) || !on_grid(end)) {
    throw UsageError("delete_range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") is not block-aligned (L = " + std::to_string(block_len_) + ")");
  }
  if (begin < end) {
    const bool orphans = std::any_of(entries_.begin(), entries_.end(),
                                     [&](const auto& kv) { return kv.second.begin >= end; });
    const bool removes = std::any_of(entries_.begin(), entries_.end(), [&](const auto& kv) {
      return kv.second.begin < end && kv.second.end > begin;
    });
    if (orphans && removes) {
      throw UsageError("delete_range would leave cached blocks after a hole");
    }
    std::erase_if(entries_, [&](const auto& kv) { return kv.second.begin < end && kv.second.end > begin; });
  }
  ++generation_;
}

std::vector<std::size_t> CacheStore::blocks() const {
  std::vector<std::size_t> out;
  out.reserve(entries_.size());
  for (const auto& [j, _] : entries_) out.push_back(j);
  return out;
}

CacheSnapshot CacheStore::snapshot() const {
  return {generation_, blocks()};
}

}  // namespace rdd

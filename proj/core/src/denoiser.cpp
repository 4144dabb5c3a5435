#include "rdd/denoiser.hpp"

#include <string>

#include "rdd/errors.hpp"
#include "rdd/rng.hpp"

namespace rdd {

namespace {

// Recompute path: summaries rebuilt from the buffer, owned by the caller.
std::vector<CachedBlock> summarize_prefix(const Denoiser& model, const TokenBuffer& buffer, const CacheStore& grid,
                                          Position window_start) {
  std::vector<CachedBlock> out;
  const std::size_t first = grid.first_generated_block();
  const std::size_t n = grid.blocks_before(window_start);
  out.reserve(n);
  for (std::size_t j = first; j < first + n; ++j) {
    const Position b = grid.block_begin(j);
    const Position e = grid.block_end(j);
    out.push_back({j, b, e, model.summarize_block(buffer.tokens().subspan(b, e - b), b)});
  }
  return out;
}

}  // namespace

DenoiserOutput Denoiser::evaluate(const TokenBuffer& buffer, const BlockWindow& window, CacheStore* cache) {
  if (window.start < buffer.prompt_len() || window.end > buffer.size() || window.start >= window.end) {
    throw UsageError("evaluate: window [" + std::to_string(window.start) + ", " + std::to_string(window.end) +
                     ") is not inside the generated region");
  }

  DenoiserInput input;
  input.prompt = buffer.tokens().first(buffer.prompt_len());
  input.window = window;
  input.window_tokens = buffer.tokens().subspan(window.start, window.size());

  std::vector<CachedBlock> recomputed;
  if (cache != nullptr) {
    const std::size_t first = cache->first_generated_block();
    const std::size_t n = cache->blocks_before(window.start);
    for (std::size_t j = first; j < first + n; ++j) {
      if (!cache->contains(j)) {
        const Position b = cache->block_begin(j);
        const Position e = cache->block_end(j);
        cache->put(j, summarize_block(buffer.tokens().subspan(b, e - b), b));
      }
    }
    input.prefix = cache->get_context(window).blocks;
  } else {
    const CacheStore grid(window.block_len, buffer.prompt_len(), buffer.size());
    recomputed = summarize_prefix(*this, buffer, grid, window.start);
    input.prefix.reserve(recomputed.size());
    for (const auto& b : recomputed) input.prefix.push_back(&b);
  }

  DenoiserOutput out;
  out.predictions = predict(input);
  out.eval_id = ++evaluations_;
  return out;
}

TokenBuffer forward_corrupt(const TokenBuffer& clean, double alpha_bar, std::uint64_t seed) {
  if (!(alpha_bar >= 0.0 && alpha_bar <= 1.0)) {
    throw UsageError("alpha_bar must lie in [0, 1], got " + std::to_string(alpha_bar));
  }
  if (!clean.complete()) {
    throw UsageError("forward_corrupt expects a clean sequence without MASK");
  }
  TokenBuffer out = clean;
  Rng rng(seed);
  const double mask_prob = 1.0 - alpha_bar;
  for (Position i = clean.prompt_len(); i < clean.size(); ++i) {
    if (uniform01(rng) < mask_prob) out.mask(i);
  }
  return out;
}

}  // namespace rdd

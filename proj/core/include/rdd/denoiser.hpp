#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "rdd/cache.hpp"
#include "rdd/types.hpp"

namespace rdd {

/// Model output for one masked position.
struct Prediction {
  Position position = 0;
  TokenId token = 0;
  /// Max probability over the vocabulary.
  double confidence = 0.0;
  /// Optional (token, probability) pairs, descending; first entry matches
  /// `token` / `confidence` when present.
  std::vector<std::pair<TokenId, double>> top_k;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// One forward evaluation. Covers exactly the masked positions of the queried
/// window, in increasing position order.
struct DenoiserOutput {
  std::vector<Prediction> predictions;
  std::uint64_t eval_id = 0;
};

/// What a denoiser may look at when predicting a window.
struct DenoiserInput {
  std::span<const TokenId> prompt;
  /// Summaries of the generated blocks between the prompt and the window.
  std::vector<const CachedBlock*> prefix;
  BlockWindow window;
  /// Tokens of the window itself (MASK where undecided).
  std::span<const TokenId> window_tokens;
};

/// The reverse process: predicts masked positions of a window from the
/// prompt, a per-block prefix summary, and the window's own tokens.
///
/// Implementations condition on prefix + window only; nothing at or beyond
/// window.end is visible. `evaluate` counts as one function evaluation.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  /// With a cache: summarizes any uncached prefix block into it, then reads
  /// the prefix from the cache. Without one: summarizes every prefix block
  /// from `buffer`. Never mutates `buffer`.
  DenoiserOutput evaluate(const TokenBuffer& buffer, const BlockWindow& window, CacheStore* cache);

  /// Drops cached context for [begin, end).
  void invalidate(CacheStore& cache, Position begin, Position end) const { cache.delete_range(begin, end); }

  /// Summary of a fully committed block [begin, end) for the prefix cache.
  virtual BlockState summarize_block(std::span<const TokenId> tokens, Position begin) const = 0;

  virtual std::size_t vocab_size() const noexcept = 0;

  std::uint64_t evaluations() const noexcept { return evaluations_; }

 protected:
  virtual std::vector<Prediction> predict(const DenoiserInput& input) const = 0;

 private:
  std::uint64_t evaluations_ = 0;
};

/// Forward corruption: masks each generated position independently with
/// probability 1 - alpha_bar. Deterministic in `seed`.
TokenBuffer forward_corrupt(const TokenBuffer& clean, double alpha_bar, std::uint64_t seed);

}  // namespace rdd

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace rdd {

using TokenId = std::uint32_t;

/// Reserved id marking a masked position. Never a valid vocabulary entry.
inline constexpr TokenId kMaskToken = std::numeric_limits<TokenId>::max();

using Position = std::size_t;

/// Partially denoised sequence with per-position commit metadata.
///
/// Positions below `prompt_len()` hold the prompt and are never masked.
/// Every committed generated position carries the confidence it was
/// committed with; masked positions carry none.
class TokenBuffer {
 public:
  TokenBuffer() = default;

  /// Prompt followed by `total_len - prompt.size()` masks.
  static TokenBuffer with_prompt(std::span<const TokenId> prompt, std::size_t total_len);

  /// Fully committed sequence; generated positions get confidence 1.
  static TokenBuffer from_sequence(std::span<const TokenId> tokens, std::size_t prompt_len);

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t prompt_len() const noexcept { return prompt_len_; }

  TokenId token(Position i) const { return tokens_.at(i); }
  bool is_masked(Position i) const { return tokens_.at(i) == kMaskToken; }
  std::optional<double> commit_confidence(Position i) const { return confidence_.at(i); }

  std::span<const TokenId> tokens() const noexcept { return tokens_; }
  std::span<const std::optional<double>> confidences() const noexcept { return confidence_; }

  /// Commits `token` at a generated position. Confidence must lie in (0, 1].
  void commit(Position i, TokenId token, double confidence);

  /// Returns a generated position to MASK and drops its commit confidence.
  void mask(Position i);

  bool complete() const noexcept;

  friend bool operator==(const TokenBuffer&, const TokenBuffer&) = default;

 private:
  void require_generated(Position i) const;

  std::vector<TokenId> tokens_;
  std::vector<std::optional<double>> confidence_;
  std::size_t prompt_len_ = 0;
};

/// Half-open span [start, end) of positions under active decoding.
struct BlockWindow {
  Position start = 0;
  Position end = 0;
  std::size_t block_len = 0;

  std::size_t size() const noexcept { return end - start; }
  bool contains(Position i) const noexcept { return i >= start && i < end; }

  friend bool operator==(const BlockWindow&, const BlockWindow&) = default;
};

/// Number of MASK positions inside `window`.
std::size_t count_masks(const TokenBuffer& buffer, const BlockWindow& window);

/// Grows `window` leftwards by one block (clipped at the prompt boundary).
/// Throws RollbackAtOrigin when the window already starts at the prompt.
BlockWindow merge_window(const BlockWindow& window, std::size_t prompt_len);

/// First window of a decode: from the prompt end up to the next multiple of
/// block_len (or total_len), so that every later window is grid-aligned.
BlockWindow first_window(std::size_t prompt_len, std::size_t total_len, std::size_t block_len);

/// Window following `window` on the block grid, clipped at total_len.
BlockWindow next_window(const BlockWindow& window, std::size_t total_len);

enum class Method { kVanilla, kBlock, kRdd, kRddStar };

enum class Mode { kNormal, kRecovery };

std::string_view to_string(Method method);
Method method_from_string(std::string_view name);
std::string_view to_string(Mode mode);

}  // namespace rdd

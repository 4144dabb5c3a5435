#include "rdd/types.hpp"

#include <algorithm>
#include <string>

#include "rdd/errors.hpp"

namespace rdd {

TokenBuffer TokenBuffer::with_prompt(std::span<const TokenId> prompt, std::size_t total_len) {
  if (prompt.size() > total_len) {
    throw UsageError("prompt of length " + std::to_string(prompt.size()) +
                     " does not fit total length " + std::to_string(total_len));
  }
  if (std::find(prompt.begin(), prompt.end(), kMaskToken) != prompt.end()) {
    throw UsageError("prompt contains the MASK sentinel");
  }
  TokenBuffer buf;
  buf.tokens_.assign(total_len, kMaskToken);
  std::copy(prompt.begin(), prompt.end(), buf.tokens_.begin());
  buf.confidence_.assign(total_len, std::nullopt);
  buf.prompt_len_ = prompt.size();
  return buf;
}

TokenBuffer TokenBuffer::from_sequence(std::span<const TokenId> tokens, std::size_t prompt_len) {
  if (prompt_len > tokens.size()) {
    throw UsageError("prompt_len exceeds sequence length");
  }
  TokenBuffer buf = with_prompt(tokens.first(prompt_len), tokens.size());
  for (Position i = prompt_len; i < tokens.size(); ++i) {
    if (tokens[i] == kMaskToken) {
      throw UsageError("clean sequence contains MASK at position " + std::to_string(i));
    }
    buf.commit(i, tokens[i], 1.0);
  }
  return buf;
}

void TokenBuffer::require_generated(Position i) const {
  if (i >= tokens_.size()) {
    throw UsageError("position " + std::to_string(i) + " out of range");
  }
  if (i < prompt_len_) {
    throw UsageError("position " + std::to_string(i) + " is inside the prompt");
  }
}

void TokenBuffer::commit(Position i, TokenId token, double confidence) {
  require_generated(i);
  if (token == kMaskToken) {
    throw UsageError("cannot commit the MASK sentinel");
  }
  if (!(confidence > 0.0 && confidence <= 1.0)) {
    throw UsageError("commit confidence must lie in (0, 1], got " + std::to_string(confidence));
  }
  tokens_[i] = token;
  confidence_[i] = confidence;
}

void TokenBuffer::mask(Position i) {
  require_generated(i);
  tokens_[i] = kMaskToken;
  confidence_[i].reset();
}

bool TokenBuffer::complete() const noexcept {
  return std::find(tokens_.begin(), tokens_.end(), kMaskToken) == tokens_.end();
}

std::size_t count_masks(const TokenBuffer& buffer, const BlockWindow& window) {
  if (window.start > window.end || window.end > buffer.size()) {
    throw UsageError("window [" + std::to_string(window.start) + ", " + std::to_string(window.end) +
                     ") out of bounds for buffer of length " + std::to_string(buffer.size()));
  }
  auto toks = buffer.tokens().subspan(window.start, window.size());
  return static_cast<std::size_t>(std::count(toks.begin(), toks.end(), kMaskToken));
}

BlockWindow merge_window(const BlockWindow& window, std::size_t prompt_len) {
  if (window.start <= prompt_len) {
    throw RollbackAtOrigin("window starting at " + std::to_string(window.start) +
                           " cannot roll back past the prompt boundary " + std::to_string(prompt_len));
  }
  BlockWindow merged = window;
  merged.start = window.start >= prompt_len + window.block_len ? window.start - window.block_len : prompt_len;
  return merged;
}

BlockWindow first_window(std::size_t prompt_len, std::size_t total_len, std::size_t block_len) {
  if (block_len == 0) {
    throw UsageError("block length must be positive");
  }
  if (prompt_len >= total_len) {
    throw UsageError("prompt must be shorter than the total length");
  }
  const std::size_t aligned_end = (prompt_len / block_len + 1) * block_len;
  return {prompt_len, std::min(aligned_end, total_len), block_len};
}

BlockWindow next_window(const BlockWindow& window, std::size_t total_len) {
  return {window.end, std::min(window.end + window.block_len, total_len), window.block_len};
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kVanilla: return "vanilla";
    case Method::kBlock: return "block";
    case Method::kRdd: return "rdd";
    case Method::kRddStar: return "rdd-star";
  }
  return "unknown";
}

Method method_from_string(std::string_view name) {
  if (name == "vanilla") return Method::kVanilla;
  if (name == "block") return Method::kBlock;
  if (name == "rdd") return Method::kRdd;
  if (name == "rdd-star" || name == "rdd_star") return Method::kRddStar;
  throw UsageError("unknown method '" + std::string(name) + "' (expected vanilla, block, rdd, rdd-star)");
}

std::string_view to_string(Mode mode) {
  return mode == Mode::kNormal ? "normal" : "recovery";
}

}  // namespace rdd

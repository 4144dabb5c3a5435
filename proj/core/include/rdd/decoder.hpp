#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdd/cache.hpp"
#include "rdd/denoiser.hpp"
#include "rdd/rng.hpp"
#include "rdd/scheduler.hpp"
#include "rdd/trace.hpp"
#include "rdd/types.hpp"

namespace rdd {

/// How a revived block is re-masked after rollback.
struct RemaskPolicy {
  enum class Kind { kConfidence, kRandom };
  Kind kind = Kind::kConfidence;
  /// Fraction of committed positions re-masked under kRandom.
  double ratio = 0.0;

  static RemaskPolicy parse(std::string_view text);  // "confidence" | "random:<ratio>"
  std::string to_string() const;

  friend bool operator==(const RemaskPolicy&, const RemaskPolicy&) = default;
};

struct DecodeConfig {
  ScheduleConfig schedule;
  std::size_t block_len = 32;
  std::size_t total_len = 256;
  Method method = Method::kRdd;
  std::uint64_t seed = 0;
  /// Maximum number of evaluations; 0 derives a bound from the other fields.
  std::size_t step_cap = 0;
  bool use_cache = true;
  /// Attach cache metadata to every trace event.
  bool trace_cache = false;
  RemaskPolicy remask;

  /// BLOCK requires rollback_budget 0 and f_r == f; RDD requires f_r == f.
  void validate(std::size_t prompt_len) const;
  std::size_t effective_step_cap(std::size_t prompt_len) const;

  friend bool operator==(const DecodeConfig&, const DecodeConfig&) = default;
};

/// Everything the RDD state machine carries between steps.
struct DecodingState {
  TokenBuffer buffer;
  BlockWindow window;
  std::optional<CacheStore> cache;
  std::size_t budget = 0;
  Mode mode = Mode::kNormal;
  /// End of the furthest window ever completed; never decreases.
  Position frontier = 0;
  /// Dedicated stream for re-mask draws.
  Rng remask_rng;
  std::uint64_t next_event = 0;
};

DecodingState initial_state(std::span<const TokenId> prompt, const DecodeConfig& cfg);

struct DecodeMetrics {
  std::uint64_t nfe = 0;
  std::uint64_t nfe_forced = 0;
  std::uint64_t rollbacks = 0;
  std::uint64_t remasked_tokens = 0;
  double wall_seconds = 0.0;
};

struct DecodeResult {
  TokenBuffer buffer;
  Trace trace;
  DecodeMetrics metrics;
};

/// Applies one transition for a window with at least one mask:
/// DECODE when some prediction clears the threshold; otherwise STAGNATE
/// followed by ROLLBACK + REMASK (budget left and window past the prompt)
/// or FORCE of the single most confident position.
/// Throws UsageError when the window has no masks or `output` does not
/// cover exactly its masked positions.
std::vector<TraceEvent> step(DecodingState& state, const DenoiserOutput& output, const DecodeConfig& cfg);

/// Resets budget and mode once the current window has moved past the
/// frontier; identity otherwise.
void budget_policy(DecodingState& state, const DecodeConfig& cfg);

/// Called after each RDD transition with the post-transition state.
using StepObserver = std::function<void(const DecodingState&, const TraceEvent&)>;

/// Full decode. VANILLA commits one globally most-confident token per
/// evaluation; BLOCK is the monotonic block decoder; RDD / RDD_STAR run the
/// reversible state machine. Throws Runaway past the step cap.
DecodeResult decode(Denoiser& denoiser, std::span<const TokenId> prompt, const DecodeConfig& cfg,
                    const StepObserver& observer = {});

}  // namespace rdd

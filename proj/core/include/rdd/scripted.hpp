#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rdd/denoiser.hpp"

namespace rdd {

/// A locally plausible wrong token planted at one position.
struct Trap {
  Position position = 0;
  TokenId decoy = 0;
  /// Probability of the decoy while the trap is armed; slightly above truth.
  double decoy_confidence = 0.62;
  /// Probability left on the ground-truth token while armed.
  double truth_confidence = 0.38;
  /// The trap is armed while the queried window ends at or before this
  /// position; a committed decoy caps every masked position at or beyond it.
  Position horizon = 0;
};

/// Ground truth plus traps for the scripted denoiser.
struct TrapSpec {
  std::size_t vocab_size = 16;
  std::size_t prompt_len = 0;
  /// Full sequence: prompt followed by the intended continuation.
  std::vector<TokenId> ground_truth;
  double c_high = 0.99;
  double c_low = 0.6;
  std::vector<Trap> traps;

  /// Throws UsageError describing the first violated constraint.
  void validate() const;
};

/// Deterministic denoiser that reproduces the stagnation trap.
///
/// Without a committed decoy every masked position gets its ground-truth
/// token at c_high. An armed trap position predicts its decoy instead. Once a
/// decoy is committed, every masked position at or past that trap's horizon
/// is capped at c_low.
class ScriptedDenoiser final : public Denoiser {
 public:
  /// `seed` picks the runner-up tokens reported in top_k.
  ScriptedDenoiser(TrapSpec spec, std::uint64_t seed);

  BlockState summarize_block(std::span<const TokenId> tokens, Position begin) const override;
  std::size_t vocab_size() const noexcept override { return spec_.vocab_size; }

  const TrapSpec& spec() const noexcept { return spec_; }

 protected:
  std::vector<Prediction> predict(const DenoiserInput& input) const override;

 private:
  TrapSpec spec_;
  std::vector<TokenId> runner_up_;
};

/// Single-trap scenario used for smoke runs and the recovery test: the trap
/// sits 10 positions into the second generated block (c_high 0.99,
/// c_low 0.6, decoy 0.62 vs truth 0.38).
TrapSpec canonical_trap(std::size_t prompt_len = 32, std::size_t gen_len = 224, std::size_t block_len = 32,
                        std::uint64_t seed = 1);

TrapSpec trap_spec_from_json(const std::string& json_text);
std::string trap_spec_to_json(const TrapSpec& spec);
TrapSpec load_trap_spec(const std::string& path);

}  // namespace rdd

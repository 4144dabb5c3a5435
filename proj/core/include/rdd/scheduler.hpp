#pragma once

#include <cstddef>
#include <vector>

#include "rdd/denoiser.hpp"
#include "rdd/types.hpp"

namespace rdd {

struct ScheduleConfig {
  /// Scaling factor in normal mode.
  double f = 0.9;
  /// Scaling factor in recovery mode; f_r <= f.
  double f_r = 0.9;
  /// Re-mask sensitivity (consumed by the remask step).
  double lambda = 1.0;
  /// Rollbacks allowed per block chain.
  std::size_t rollback_budget = 1;

  void validate() const;

  friend bool operator==(const ScheduleConfig&, const ScheduleConfig&) = default;
};

/// Dynamic threshold 1 - f / (masked_count + 1). Not clamped: a negative
/// value accepts every masked position.
inline double threshold(double f_curr, std::size_t masked_count) {
  return 1.0 - f_curr / (static_cast<double>(masked_count) + 1.0);
}

/// Indices into `output.predictions` whose confidence is >= tau.
std::vector<std::size_t> select_decodable(const DenoiserOutput& output, double tau);

inline double current_factor(Mode mode, const ScheduleConfig& cfg) {
  return mode == Mode::kNormal ? cfg.f : cfg.f_r;
}

}  // namespace rdd

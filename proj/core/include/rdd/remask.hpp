#pragma once

#include <cstdint>
#include <vector>

#include "rdd/rng.hpp"
#include "rdd/types.hpp"

namespace rdd {

/// 1 - p_conf^lambda. Throws UsageError unless 0 < p_conf <= 1 and lambda > 0.
double remask_probability(double p_conf, double lambda);

/// Re-masks committed positions of [begin, end) independently with
/// probability remask_probability(commit_confidence, lambda), drawing one
/// uniform per committed position in order from `rng`. Already-masked
/// positions are skipped. Returns the re-masked positions in order.
std::vector<Position> apply_remask(TokenBuffer& buffer, Position begin, Position end, double lambda, Rng& rng);

/// Seeded convenience overload.
std::vector<Position> apply_remask(TokenBuffer& buffer, Position begin, Position end, double lambda,
                                   std::uint64_t seed);

/// Baseline: re-masks ceil(ratio * n) of the n committed positions in
/// [begin, end), chosen uniformly without replacement.
std::vector<Position> apply_random_remask(TokenBuffer& buffer, Position begin, Position end, double ratio, Rng& rng);

}  // namespace rdd

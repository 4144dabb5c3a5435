#include "rdd/remask.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rdd/errors.hpp"

namespace rdd {

double remask_probability(double p_conf, double lambda) {
  if (!(p_conf > 0.0 && p_conf <= 1.0)) {
    throw UsageError("remask_probability: confidence must lie in (0, 1], got " + std::to_string(p_conf));
  }
  if (!(lambda > 0.0)) throw UsageError("remask_probability: lambda must be positive");
  return 1.0 - std::pow(p_conf, lambda);
}

namespace {

void check_region(const TokenBuffer& buffer, Position begin, Position end) {
  if (begin > end || end > buffer.size()) throw UsageError("remask region out of bounds");
  if (begin < end && begin < buffer.prompt_len()) throw UsageError("remask region overlaps the prompt");
}

}  // namespace

std::vector<Position> apply_remask(TokenBuffer& buffer, Position begin, Position end, double lambda, Rng& rng) {
  check_region(buffer, begin, end);
  std::vector<Position> remasked;
  for (Position i = begin; i < end; ++i) {
    const auto conf = buffer.commit_confidence(i);
    if (!conf) continue;
    const double p = remask_probability(*conf, lambda);
    if (uniform01(rng) < p) {
      buffer.mask(i);
      remasked.push_back(i);
    }
  }
  return remasked;
}

std::vector<Position> apply_remask(TokenBuffer& buffer, Position begin, Position end, double lambda,
                                   std::uint64_t seed) {
  Rng rng(seed);
  return apply_remask(buffer, begin, end, lambda, rng);
}

std::vector<Position> apply_random_remask(TokenBuffer& buffer, Position begin, Position end, double ratio, Rng& rng) {
  check_region(buffer, begin, end);
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw UsageError("random remask ratio must lie in [0, 1]");
  std::vector<Position> committed;
  for (Position i = begin; i < end; ++i) {
    if (!buffer.is_masked(i)) committed.push_back(i);
  }
  const auto want = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(committed.size()) - 1e-9));
  const std::size_t k = std::min(want, committed.size());
  // partial Fisher-Yates
  for (std::size_t r = 0; r < k; ++r) {
    const auto j = r + uniform_below(rng, committed.size() - r);
    std::swap(committed[r], committed[j]);
  }
  committed.resize(k);
  std::sort(committed.begin(), committed.end());
  for (Position i : committed) buffer.mask(i);
  return committed;
}

}  // namespace rdd

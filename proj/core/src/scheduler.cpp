#include "rdd/scheduler.hpp"

#include <string>

#include "rdd/errors.hpp"

namespace rdd {

void ScheduleConfig::validate() const {
  if (!(f > 0.0)) throw UsageError("f must be positive");
  if (!(f_r > 0.0)) throw UsageError("f_r must be positive");
  if (f_r > f) throw UsageError("f_r (" + std::to_string(f_r) + ") must not exceed f (" + std::to_string(f) + ")");
  if (!(lambda > 0.0)) throw UsageError("lambda must be positive");
}

std::vector<std::size_t> select_decodable(const DenoiserOutput& output, double tau) {
  std::vector<std::size_t> picked;
  for (std::size_t k = 0; k < output.predictions.size(); ++k) {
    if (output.predictions[k].confidence >= tau) picked.push_back(k);
  }
  return picked;
}

}  // namespace rdd

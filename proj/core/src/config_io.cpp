#include "rdd/config_io.hpp"

#include <json.hpp>

#include "rdd/errors.hpp"

namespace rdd {

std::string decode_config_to_json(const DecodeConfig& cfg) {
  nlohmann::ordered_json j;
  j["method"] = std::string(to_string(cfg.method));
  j["f"] = cfg.schedule.f;
  j["f_r"] = cfg.schedule.f_r;
  j["lambda"] = cfg.schedule.lambda;
  j["rollback_budget"] = cfg.schedule.rollback_budget;
  j["block_len"] = cfg.block_len;
  j["total_len"] = cfg.total_len;
  j["seed"] = cfg.seed;
  j["step_cap"] = cfg.step_cap;
  j["use_cache"] = cfg.use_cache;
  j["trace_cache"] = cfg.trace_cache;
  j["remask"] = cfg.remask.to_string();
  return j.dump();
}

DecodeConfig decode_config_from_json(const std::string& text, DecodeConfig cfg) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw UsageError("decode config must be a JSON object");
    if (j.contains("method")) cfg.method = method_from_string(j["method"].get<std::string>());
    cfg.schedule.f = j.value("f", cfg.schedule.f);
    cfg.schedule.f_r = j.value("f_r", cfg.schedule.f_r);
    cfg.schedule.lambda = j.value("lambda", cfg.schedule.lambda);
    cfg.schedule.rollback_budget = j.value("rollback_budget", cfg.schedule.rollback_budget);
    cfg.block_len = j.value("block_len", cfg.block_len);
    cfg.total_len = j.value("total_len", cfg.total_len);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.step_cap = j.value("step_cap", cfg.step_cap);
    cfg.use_cache = j.value("use_cache", cfg.use_cache);
    cfg.trace_cache = j.value("trace_cache", cfg.trace_cache);
    if (j.contains("remask")) cfg.remask = RemaskPolicy::parse(j["remask"].get<std::string>());
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("malformed decode config: ") + e.what());
  }
}

}  // namespace rdd

#pragma once

#include <string>

#include "rdd/decoder.hpp"

namespace rdd {

/// Single-line JSON echo of a decode configuration. Feeding it back through
/// decode_config_from_json reproduces the configuration exactly.
std::string decode_config_to_json(const DecodeConfig& cfg);

/// Missing keys keep the values already in `base`. Recognized keys: method,
/// f, f_r, lambda, rollback_budget, block_len, total_len, seed, step_cap,
/// use_cache, trace_cache, remask.
DecodeConfig decode_config_from_json(const std::string& text, DecodeConfig base = {});

}  // namespace rdd

#include "rdd/scripted.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "rdd/errors.hpp"
#include "rdd/rng.hpp"

namespace rdd {

void TrapSpec::validate() const {
  auto fail = [](const std::string& msg) { throw UsageError("trap spec: " + msg); };
  if (vocab_size < 2) fail("vocab_size must be at least 2");
  if (ground_truth.size() <= prompt_len) fail("ground_truth must extend past the prompt");
  for (TokenId t : ground_truth) {
    if (t >= vocab_size) fail("ground_truth token " + std::to_string(t) + " outside the vocabulary");
  }
  if (!(c_high > 0.0 && c_high <= 1.0)) fail("c_high must lie in (0, 1]");
  if (!(c_low > 0.0)) fail("c_low must be positive");
  if (c_low >= c_high) fail("c_low must be below c_high");
  std::vector<Position> seen;
  for (const Trap& t : traps) {
    if (t.position < prompt_len || t.position >= ground_truth.size()) {
      fail("trap position " + std::to_string(t.position) + " outside the generated region");
    }
    if (std::find(seen.begin(), seen.end(), t.position) != seen.end()) fail("duplicate trap position");
    seen.push_back(t.position);
    if (t.decoy >= vocab_size) fail("decoy outside the vocabulary");
    if (t.decoy == ground_truth[t.position]) fail("decoy equals the ground-truth token");
    if (!(t.truth_confidence > 0.0 && t.truth_confidence < t.decoy_confidence && t.decoy_confidence <= 1.0)) {
      fail("trap confidences must satisfy 0 < truth < decoy <= 1");
    }
    if (t.truth_confidence + t.decoy_confidence > 1.0 + 1e-9) fail("trap confidences sum above 1");
    if (t.horizon <= t.position || t.horizon > ground_truth.size()) fail("trap horizon must follow the trap");
  }
}

ScriptedDenoiser::ScriptedDenoiser(TrapSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  Rng rng(seed);
  runner_up_.resize(spec_.ground_truth.size());
  for (std::size_t i = 0; i < runner_up_.size(); ++i) {
    const auto shift = 1 + uniform_below(rng, spec_.vocab_size - 1);
    runner_up_[i] = static_cast<TokenId>((spec_.ground_truth[i] + shift) % spec_.vocab_size);
  }
}

BlockState ScriptedDenoiser::summarize_block(std::span<const TokenId> tokens, Position begin) const {
  // one bit per trap: decoy committed inside this block
  BlockState bits((spec_.traps.size() + 63) / 64, 0);
  for (std::size_t k = 0; k < spec_.traps.size(); ++k) {
    const Trap& t = spec_.traps[k];
    if (t.position >= begin && t.position < begin + tokens.size() && tokens[t.position - begin] == t.decoy) {
      bits[k / 64] |= std::uint64_t{1} << (k % 64);
    }
  }
  return bits;
}

std::vector<Prediction> ScriptedDenoiser::predict(const DenoiserInput& input) const {
  const auto& traps = spec_.traps;
  const BlockWindow& w = input.window;

  // earliest horizon among traps whose decoy sits in the visible context
  Position poisoned_from = std::numeric_limits<Position>::max();
  for (const CachedBlock* block : input.prefix) {
    for (std::size_t k = 0; k < traps.size(); ++k) {
      if (k / 64 < block->state.size() && (block->state[k / 64] >> (k % 64)) & 1U) {
        poisoned_from = std::min(poisoned_from, traps[k].horizon);
      }
    }
  }
  std::unordered_map<Position, const Trap*> by_position;
  for (const Trap& t : traps) {
    if (w.contains(t.position)) {
      by_position.emplace(t.position, &t);
      if (input.window_tokens[t.position - w.start] == t.decoy) poisoned_from = std::min(poisoned_from, t.horizon);
    }
  }

  std::vector<Prediction> out;
  for (std::size_t k = 0; k < input.window_tokens.size(); ++k) {
    if (input.window_tokens[k] != kMaskToken) continue;
    const Position i = w.start + k;
    Prediction p;
    p.position = i;
    TokenId second = runner_up_[i];
    double second_prob = 1.0 - spec_.c_high;
    auto it = by_position.find(i);
    if (it != by_position.end() && w.end <= it->second->horizon) {
      p.token = it->second->decoy;
      p.confidence = it->second->decoy_confidence;
      second = spec_.ground_truth[i];
      second_prob = it->second->truth_confidence;
    } else {
      p.token = spec_.ground_truth[i];
      p.confidence = spec_.c_high;
    }
    if (i >= poisoned_from) {
      p.confidence = std::min(p.confidence, spec_.c_low);
    }
    second_prob = std::min({second_prob, 1.0 - p.confidence, p.confidence});
    p.top_k.emplace_back(p.token, p.confidence);
    if (second_prob > 0.0) p.top_k.emplace_back(second, second_prob);
    out.push_back(std::move(p));
  }
  return out;
}

TrapSpec canonical_trap(std::size_t prompt_len, std::size_t gen_len, std::size_t block_len, std::uint64_t seed) {
  if (block_len == 0) throw UsageError("block length must be positive");
  const std::size_t total = prompt_len + gen_len;
  const Position second_block = (prompt_len / block_len + 1) * block_len;
  const Position trap_pos = second_block + std::min<std::size_t>(10, block_len - 1);
  const Position horizon = std::min(second_block + block_len, total);
  if (horizon >= total) {
    throw UsageError("canonical trap needs at least three generated blocks (gen_len too short)");
  }
  TrapSpec spec;
  spec.vocab_size = 16;
  spec.prompt_len = prompt_len;
  Rng rng(seed);
  spec.ground_truth.resize(total);
  for (auto& t : spec.ground_truth) t = static_cast<TokenId>(uniform_below(rng, spec.vocab_size));
  Trap trap;
  trap.position = trap_pos;
  trap.decoy = static_cast<TokenId>((spec.ground_truth[trap_pos] + 1) % spec.vocab_size);
  trap.horizon = horizon;
  spec.traps.push_back(trap);
  spec.validate();
  return spec;
}

TrapSpec trap_spec_from_json(const std::string& json_text) {
  try {
    const auto j = nlohmann::json::parse(json_text);
    TrapSpec spec;
    spec.vocab_size = j.at("vocab_size").get<std::size_t>();
    spec.prompt_len = j.at("prompt_len").get<std::size_t>();
    spec.ground_truth = j.at("ground_truth").get<std::vector<TokenId>>();
    spec.c_high = j.value("c_high", spec.c_high);
    spec.c_low = j.value("c_low", spec.c_low);
    for (const auto& t : j.value("traps", nlohmann::json::array())) {
      Trap trap;
      trap.position = t.at("position").get<Position>();
      trap.decoy = t.at("decoy").get<TokenId>();
      trap.decoy_confidence = t.value("decoy_confidence", trap.decoy_confidence);
      trap.truth_confidence = t.value("truth_confidence", trap.truth_confidence);
      trap.horizon = t.at("horizon").get<Position>();
      spec.traps.push_back(trap);
    }
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("malformed trap spec: ") + e.what());
  }
}

std::string trap_spec_to_json(const TrapSpec& spec) {
  nlohmann::ordered_json j;
  j["vocab_size"] = spec.vocab_size;
  j["prompt_len"] = spec.prompt_len;
  j["ground_truth"] = spec.ground_truth;
  j["c_high"] = spec.c_high;
  j["c_low"] = spec.c_low;
  j["traps"] = nlohmann::ordered_json::array();
  for (const Trap& t : spec.traps) {
    j["traps"].push_back({{"position", t.position},
                          {"decoy", t.decoy},
                          {"decoy_confidence", t.decoy_confidence},
                          {"truth_confidence", t.truth_confidence},
                          {"horizon", t.horizon}});
  }
  return j.dump();
}

TrapSpec load_trap_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open trap spec");
  std::stringstream ss;
  ss << in.rdbuf();
  return trap_spec_from_json(ss.str());
}

}  // namespace rdd

#include "rdd/decoder.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <string>

#include "rdd/errors.hpp"
#include "rdd/remask.hpp"

namespace rdd {

namespace {

constexpr std::uint64_t kRemaskStream = 0x72656d61736bULL;  // "remask"

std::size_t window_count(std::size_t prompt_len, std::size_t total_len, std::size_t block_len) {
  std::size_t k = 0;
  for (BlockWindow w = first_window(prompt_len, total_len, block_len);; w = next_window(w, total_len)) {
    ++k;
    if (w.end >= total_len) break;
  }
  return k;
}

// Most confident prediction; lowest position wins ties.
std::size_t argmax_confidence(const DenoiserOutput& out) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < out.predictions.size(); ++k) {
    if (out.predictions[k].confidence > out.predictions[best].confidence) best = k;
  }
  return best;
}

void check_coverage(const TokenBuffer& buffer, const BlockWindow& window, const DenoiserOutput& out) {
  std::size_t k = 0;
  for (Position i = window.start; i < window.end; ++i) {
    if (!buffer.is_masked(i)) continue;
    if (k >= out.predictions.size() || out.predictions[k].position != i) {
      throw UsageError("denoiser output does not cover masked position " + std::to_string(i));
    }
    ++k;
  }
  if (k != out.predictions.size()) throw UsageError("denoiser output covers positions outside the masked set");
}

TraceEvent make_event(EventKind kind, const BlockWindow& window, std::size_t masked, double tau) {
  TraceEvent ev;
  ev.kind = kind;
  ev.window = window;
  ev.masked_count = masked;
  ev.tau = tau;
  return ev;
}

}  // namespace

RemaskPolicy RemaskPolicy::parse(std::string_view text) {
  if (text == "confidence") return {};
  constexpr std::string_view prefix = "random:";
  if (text.substr(0, prefix.size()) == prefix) {
    const std::string num(text.substr(prefix.size()));
    char* end = nullptr;
    const double ratio = std::strtod(num.c_str(), &end);
    if (num.empty() || end != num.c_str() + num.size() || !(ratio >= 0.0 && ratio <= 1.0)) {
      throw UsageError("random remask ratio must be a number in [0, 1], got '" + num + "'");
    }
    return {Kind::kRandom, ratio};
  }
  throw UsageError("unknown remask policy '" + std::string(text) + "' (expected confidence or random:<ratio>)");
}

std::string RemaskPolicy::to_string() const {
  if (kind == Kind::kConfidence) return "confidence";
  std::string r = std::to_string(ratio);
  r.erase(r.find_last_not_of('0') + 1);
  if (!r.empty() && r.back() == '.') r.pop_back();
  return "random:" + r;
}

void DecodeConfig::validate(std::size_t prompt_len) const {
  schedule.validate();
  if (block_len == 0) throw UsageError("block_len must be positive");
  if (prompt_len >= total_len) throw UsageError("prompt must be shorter than total_len");
  if ((total_len - prompt_len) % block_len != 0) {
    throw UsageError("block_len " + std::to_string(block_len) + " must divide the generation length " +
                     std::to_string(total_len - prompt_len));
  }
  if (method == Method::kBlock && (schedule.rollback_budget != 0 || schedule.f_r != schedule.f)) {
    throw UsageError("method block requires rollback_budget = 0 and f_r = f");
  }
  if (method == Method::kRdd && schedule.f_r != schedule.f) {
    throw UsageError("method rdd requires f_r = f (use rdd-star for dual-scale scheduling)");
  }
  if (remask.kind == RemaskPolicy::Kind::kRandom && !(remask.ratio >= 0.0 && remask.ratio <= 1.0)) {
    throw UsageError("random remask ratio must lie in [0, 1]");
  }
}

std::size_t DecodeConfig::effective_step_cap(std::size_t prompt_len) const {
  if (step_cap != 0) return step_cap;
  const std::size_t n = total_len - prompt_len;
  const std::size_t k = window_count(prompt_len, total_len, block_len);
  const std::size_t rollbacks = schedule.rollback_budget * k;
  // every evaluation commits a token or spends budget; each rollback can
  // revive at most the whole generated region
  return (rollbacks + 1) * n + rollbacks + k + 1;
}

DecodingState initial_state(std::span<const TokenId> prompt, const DecodeConfig& cfg) {
  cfg.validate(prompt.size());
  DecodingState s;
  s.buffer = TokenBuffer::with_prompt(prompt, cfg.total_len);
  s.window = first_window(prompt.size(), cfg.total_len, cfg.block_len);
  if (cfg.use_cache) s.cache.emplace(cfg.block_len, prompt.size(), cfg.total_len);
  s.budget = cfg.schedule.rollback_budget;
  s.mode = Mode::kNormal;
  s.frontier = prompt.size();
  s.remask_rng.seed(mix_seed(cfg.seed, kRemaskStream));
  return s;
}

std::vector<TraceEvent> step(DecodingState& state, const DenoiserOutput& output, const DecodeConfig& cfg) {
  TokenBuffer& buf = state.buffer;
  const std::size_t masked = count_masks(buf, state.window);
  if (masked == 0) throw UsageError("step called on a fully committed window");
  check_coverage(buf, state.window, output);

  const double tau = threshold(current_factor(state.mode, cfg.schedule), masked);
  const auto decodable = select_decodable(output, tau);
  std::vector<TraceEvent> events;

  if (!decodable.empty()) {
    TraceEvent ev = make_event(EventKind::kDecode, state.window, masked, tau);
    for (std::size_t k : decodable) {
      const Prediction& p = output.predictions[k];
      buf.commit(p.position, p.token, p.confidence);
      ev.positions.push_back(p.position);
      ev.confidences.push_back(p.confidence);
    }
    events.push_back(std::move(ev));
    return events;
  }

  TraceEvent stagnate = make_event(EventKind::kStagnate, state.window, masked, tau);
  for (const Prediction& p : output.predictions) {
    stagnate.positions.push_back(p.position);
    stagnate.confidences.push_back(p.confidence);
  }
  events.push_back(std::move(stagnate));

  const bool may_rollback = cfg.method == Method::kRdd || cfg.method == Method::kRddStar;
  if (may_rollback && state.budget > 0 && state.window.start > buf.prompt_len()) {
    events.push_back(make_event(EventKind::kRollback, state.window, masked, tau));

    const BlockWindow merged = merge_window(state.window, buf.prompt_len());
    // revived region: everything merged in ahead of the frontier block
    const Position revived_end = std::max(merged.start, std::min(state.frontier, state.window.end));
    const std::vector<std::optional<double>> before(
        buf.confidences().begin() + static_cast<std::ptrdiff_t>(merged.start),
        buf.confidences().begin() + static_cast<std::ptrdiff_t>(revived_end));
    std::vector<Position> remasked =
        cfg.remask.kind == RemaskPolicy::Kind::kConfidence
            ? apply_remask(buf, merged.start, revived_end, cfg.schedule.lambda, state.remask_rng)
            : apply_random_remask(buf, merged.start, revived_end, cfg.remask.ratio, state.remask_rng);
    std::vector<double> confs;
    for (Position i : remasked) confs.push_back(*before[i - merged.start]);
    if (state.cache) state.cache->delete_range(merged.start, state.window.end);
    --state.budget;
    state.mode = Mode::kRecovery;
    state.window = merged;

    const double merged_tau = threshold(current_factor(state.mode, cfg.schedule), count_masks(buf, merged));
    TraceEvent remask_ev = make_event(EventKind::kRemask, merged, count_masks(buf, merged), merged_tau);
    remask_ev.positions = std::move(remasked);
    remask_ev.confidences = std::move(confs);
    events.push_back(std::move(remask_ev));
    return events;
  }

  const Prediction& p = output.predictions[argmax_confidence(output)];
  buf.commit(p.position, p.token, p.confidence);
  TraceEvent force = make_event(EventKind::kForce, state.window, masked, tau);
  force.positions = {p.position};
  force.confidences = {p.confidence};
  events.push_back(std::move(force));
  return events;
}

void budget_policy(DecodingState& state, const DecodeConfig& cfg) {
  if (state.window.end <= state.frontier) return;
  state.frontier = state.window.end;
  state.budget = cfg.schedule.rollback_budget;
  state.mode = Mode::kNormal;
}

namespace {

using Clock = std::chrono::steady_clock;

class TraceSink {
 public:
  TraceSink(Trace& trace, const DecodeConfig& cfg) : trace_(trace), cfg_(cfg) {}

  TraceEvent& push(TraceEvent ev, const std::optional<CacheStore>& cache) {
    ev.step = trace_.size();
    if (cfg_.trace_cache && cache) ev.cache = cache->snapshot();
    trace_.push_back(std::move(ev));
    return trace_.back();
  }

 private:
  Trace& trace_;
  const DecodeConfig& cfg_;
};

void finish_metrics(DecodeResult& result, Clock::time_point t0) {
  const TraceCounts c = count_trace(result.trace);
  result.metrics.nfe = c.nfe;
  result.metrics.nfe_forced = c.nfe_forced;
  result.metrics.rollbacks = c.rollbacks;
  result.metrics.remasked_tokens = c.remasked_tokens;
  result.metrics.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_cap(std::uint64_t evaluations, std::size_t cap) {
  if (evaluations >= cap) {
    throw Runaway("decode exceeded its step cap of " + std::to_string(cap) + " evaluations");
  }
}

DecodeResult decode_rdd(Denoiser& denoiser, std::span<const TokenId> prompt, const DecodeConfig& cfg,
                        const StepObserver& observer) {
  const auto t0 = Clock::now();
  const std::size_t cap = cfg.effective_step_cap(prompt.size());
  DecodingState state = initial_state(prompt, cfg);
  DecodeResult result;
  TraceSink sink(result.trace, cfg);
  std::uint64_t evaluations = 0;

  for (;;) {
    const std::size_t masked = count_masks(state.buffer, state.window);
    if (masked == 0) {
      const double tau = threshold(current_factor(state.mode, cfg.schedule), 0);
      const TraceEvent& ev = sink.push(make_event(EventKind::kBlockDone, state.window, 0, tau), state.cache);
      budget_policy(state, cfg);
      if (observer) observer(state, ev);
      if (state.window.end >= cfg.total_len) break;
      state.window = next_window(state.window, cfg.total_len);
      continue;
    }
    check_cap(evaluations, cap);
    const DenoiserOutput out = denoiser.evaluate(state.buffer, state.window, state.cache ? &*state.cache : nullptr);
    ++evaluations;
    for (auto& ev : step(state, out, cfg)) {
      const TraceEvent& pushed = sink.push(std::move(ev), state.cache);
      if (observer) observer(state, pushed);
    }
  }
  result.buffer = std::move(state.buffer);
  finish_metrics(result, t0);
  return result;
}

// Monotonic block decoding: windows are never revisited and stagnation is
// always resolved by forcing one token.
DecodeResult decode_block(Denoiser& denoiser, std::span<const TokenId> prompt, const DecodeConfig& cfg) {
  const auto t0 = Clock::now();
  cfg.validate(prompt.size());
  const std::size_t cap = cfg.effective_step_cap(prompt.size());
  const double f = cfg.schedule.f;
  DecodeResult result;
  TokenBuffer buf = TokenBuffer::with_prompt(prompt, cfg.total_len);
  std::optional<CacheStore> cache;
  if (cfg.use_cache) cache.emplace(cfg.block_len, prompt.size(), cfg.total_len);
  TraceSink sink(result.trace, cfg);
  std::uint64_t evaluations = 0;

  BlockWindow w = first_window(prompt.size(), cfg.total_len, cfg.block_len);
  for (;;) {
    for (std::size_t m = count_masks(buf, w); m > 0; m = count_masks(buf, w)) {
      check_cap(evaluations, cap);
      const DenoiserOutput out = denoiser.evaluate(buf, w, cache ? &*cache : nullptr);
      ++evaluations;
      check_coverage(buf, w, out);
      const double tau = threshold(f, m);
      TraceEvent ev = make_event(EventKind::kDecode, w, m, tau);
      for (const Prediction& p : out.predictions) {
        if (p.confidence >= tau) {
          buf.commit(p.position, p.token, p.confidence);
          ev.positions.push_back(p.position);
          ev.confidences.push_back(p.confidence);
        }
      }
      if (!ev.positions.empty()) {
        sink.push(std::move(ev), cache);
        continue;
      }
      ev.kind = EventKind::kStagnate;
      for (const Prediction& p : out.predictions) {
        ev.positions.push_back(p.position);
        ev.confidences.push_back(p.confidence);
      }
      sink.push(std::move(ev), cache);
      const Prediction& best = out.predictions[argmax_confidence(out)];
      buf.commit(best.position, best.token, best.confidence);
      TraceEvent force = make_event(EventKind::kForce, w, m, tau);
      force.positions = {best.position};
      force.confidences = {best.confidence};
      sink.push(std::move(force), cache);
    }
    sink.push(make_event(EventKind::kBlockDone, w, 0, threshold(f, 0)), cache);
    if (w.end >= cfg.total_len) break;
    w = next_window(w, cfg.total_len);
  }
  result.buffer = std::move(buf);
  finish_metrics(result, t0);
  return result;
}

// One token per evaluation, chosen by global confidence over all masks.
DecodeResult decode_vanilla(Denoiser& denoiser, std::span<const TokenId> prompt, const DecodeConfig& cfg) {
  const auto t0 = Clock::now();
  cfg.validate(prompt.size());
  const std::size_t cap = cfg.effective_step_cap(prompt.size());
  DecodeResult result;
  TokenBuffer buf = TokenBuffer::with_prompt(prompt, cfg.total_len);
  std::optional<CacheStore> cache;
  if (cfg.use_cache) cache.emplace(cfg.block_len, prompt.size(), cfg.total_len);
  TraceSink sink(result.trace, cfg);
  const BlockWindow whole{prompt.size(), cfg.total_len, cfg.block_len};
  std::uint64_t evaluations = 0;

  for (std::size_t m = count_masks(buf, whole); m > 0; m = count_masks(buf, whole)) {
    check_cap(evaluations, cap);
    const DenoiserOutput out = denoiser.evaluate(buf, whole, cache ? &*cache : nullptr);
    ++evaluations;
    check_coverage(buf, whole, out);
    const Prediction& best = out.predictions[argmax_confidence(out)];
    buf.commit(best.position, best.token, best.confidence);
    TraceEvent ev = make_event(EventKind::kDecode, whole, m, 0.0);
    ev.positions = {best.position};
    ev.confidences = {best.confidence};
    sink.push(std::move(ev), cache);
  }
  sink.push(make_event(EventKind::kBlockDone, whole, 0, 0.0), cache);
  result.buffer = std::move(buf);
  finish_metrics(result, t0);
  return result;
}

}  // namespace

DecodeResult decode(Denoiser& denoiser, std::span<const TokenId> prompt, const DecodeConfig& cfg,
                    const StepObserver& observer) {
  switch (cfg.method) {
    case Method::kVanilla: return decode_vanilla(denoiser, prompt, cfg);
    case Method::kBlock: return decode_block(denoiser, prompt, cfg);
    case Method::kRdd:
    case Method::kRddStar: return decode_rdd(denoiser, prompt, cfg, observer);
  }
  throw UsageError("unknown decode method");
}

}  // namespace rdd

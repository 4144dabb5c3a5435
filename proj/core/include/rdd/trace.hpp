#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rdd/types.hpp"

namespace rdd {

enum class EventKind { kDecode, kStagnate, kRollback, kRemask, kForce, kBlockDone };

std::string_view to_string(EventKind kind);
EventKind event_kind_from_string(std::string_view name);

/// Cache metadata attached to events when cache tracing is enabled.
struct CacheSnapshot {
  std::uint64_t generation = 0;
  std::vector<std::size_t> blocks;

  friend bool operator==(const CacheSnapshot&, const CacheSnapshot&) = default;
};

/// One decoding action.
///
/// DECODE carries the committed positions (all at or above `tau`), FORCE the
/// single forced position, STAGNATE the masked positions that failed the
/// threshold, ROLLBACK the window before merging, REMASK the positions
/// re-masked in the revived block (with their commit confidences) and the
/// merged window, BLOCK_DONE the fully committed window.
struct TraceEvent {
  std::uint64_t step = 0;
  EventKind kind = EventKind::kDecode;
  BlockWindow window;
  std::size_t masked_count = 0;
  double tau = 0.0;
  std::vector<Position> positions;
  std::vector<double> confidences;
  std::optional<CacheSnapshot> cache;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

using Trace = std::vector<TraceEvent>;

/// One JSON object, no trailing newline.
std::string to_json_line(const TraceEvent& event);
TraceEvent trace_event_from_json(std::string_view line);

void write_jsonl(std::ostream& out, const Trace& trace);
Trace read_jsonl(std::istream& in);

void write_trace_file(const std::string& path, const Trace& trace);
Trace read_trace_file(const std::string& path);

/// Count-based quantities recoverable from a trace alone.
struct TraceCounts {
  std::uint64_t nfe = 0;
  std::uint64_t nfe_forced = 0;
  std::uint64_t rollbacks = 0;
  std::uint64_t remasked_tokens = 0;
  std::uint64_t committed_tokens = 0;
};

TraceCounts count_trace(const Trace& trace);

}  // namespace rdd

#include "rdd/trace.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "rdd/errors.hpp"

namespace rdd {

using nlohmann::json;

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kDecode: return "DECODE";
    case EventKind::kStagnate: return "STAGNATE";
    case EventKind::kRollback: return "ROLLBACK";
    case EventKind::kRemask: return "REMASK";
    case EventKind::kForce: return "FORCE";
    case EventKind::kBlockDone: return "BLOCK_DONE";
  }
  return "UNKNOWN";
}

EventKind event_kind_from_string(std::string_view name) {
  for (auto kind : {EventKind::kDecode, EventKind::kStagnate, EventKind::kRollback, EventKind::kRemask,
                    EventKind::kForce, EventKind::kBlockDone}) {
    if (to_string(kind) == name) return kind;
  }
  throw UsageError("unknown trace event kind '" + std::string(name) + "'");
}

std::string to_json_line(const TraceEvent& event) {
  // ordered_json keeps field order stable so trace files compare byte-for-byte
  nlohmann::ordered_json j;
  j["step"] = event.step;
  j["kind"] = to_string(event.kind);
  j["window"] = {{"start", event.window.start}, {"end", event.window.end}, {"block_len", event.window.block_len}};
  j["masked_count"] = event.masked_count;
  j["tau"] = event.tau;
  j["positions"] = event.positions;
  j["confidences"] = event.confidences;
  if (event.cache) {
    j["cache"] = {{"generation", event.cache->generation}, {"blocks", event.cache->blocks}};
  }
  return j.dump();
}

TraceEvent trace_event_from_json(std::string_view line) {
  try {
    const json j = json::parse(line);
    TraceEvent ev;
    ev.step = j.at("step").get<std::uint64_t>();
    ev.kind = event_kind_from_string(j.at("kind").get<std::string>());
    const auto& w = j.at("window");
    ev.window = {w.at("start").get<Position>(), w.at("end").get<Position>(), w.at("block_len").get<std::size_t>()};
    ev.masked_count = j.at("masked_count").get<std::size_t>();
    ev.tau = j.at("tau").get<double>();
    ev.positions = j.at("positions").get<std::vector<Position>>();
    ev.confidences = j.at("confidences").get<std::vector<double>>();
    if (j.contains("cache")) {
      ev.cache = CacheSnapshot{j["cache"].at("generation").get<std::uint64_t>(),
                               j["cache"].at("blocks").get<std::vector<std::size_t>>()};
    }
    return ev;
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed trace event: ") + e.what());
  }
}

void write_jsonl(std::ostream& out, const Trace& trace) {
  for (const auto& ev : trace) {
    out << to_json_line(ev) << '\n';
  }
}

Trace read_jsonl(std::istream& in) {
  Trace trace;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    trace.push_back(trace_event_from_json(line));
  }
  return trace;
}

void write_trace_file(const std::string& path, const Trace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open for writing");
  write_jsonl(out, trace);
  if (!out) throw IoError(path, "write failed");
}

Trace read_trace_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  try {
    return read_jsonl(in);
  } catch (const UsageError& e) {
    throw IoError(path, e.what());
  }
}

TraceCounts count_trace(const Trace& trace) {
  TraceCounts c;
  for (const auto& ev : trace) {
    switch (ev.kind) {
      case EventKind::kDecode:
        ++c.nfe;
        c.committed_tokens += ev.positions.size();
        break;
      case EventKind::kForce:
        ++c.nfe;
        ++c.nfe_forced;
        c.committed_tokens += ev.positions.size();
        break;
      case EventKind::kRollback:
        ++c.nfe;
        ++c.rollbacks;
        break;
      case EventKind::kRemask:
        c.remasked_tokens += ev.positions.size();
        break;
      case EventKind::kStagnate:
      case EventKind::kBlockDone:
        break;
    }
  }
  return c;
}

}  // namespace rdd

#include "rdd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "rdd/config_io.hpp"
#include "rdd/errors.hpp"
#include "rdd/rng.hpp"

namespace fs = std::filesystem;

namespace rdd {

using nlohmann::json;
using nlohmann::ordered_json;

double stagnation_rate(std::uint64_t nfe_forced, std::uint64_t nfe) {
  if (nfe == 0) throw UsageError("stagnation_rate: nfe must be positive");
  if (nfe_forced > nfe) throw UsageError("stagnation_rate: nfe_forced exceeds nfe");
  return static_cast<double>(nfe_forced) / static_cast<double>(nfe);
}

// ---------------------------------------------------------------------------
// Scenarios

std::unique_ptr<Denoiser> Scenario::make_denoiser(std::uint64_t seed) const {
  if (const auto* spec = std::get_if<TrapSpec>(&model)) {
    return std::make_unique<ScriptedDenoiser>(*spec, seed);
  }
  const auto& src = std::get<BigramSource>(model);
  return std::make_unique<BigramDenoiser>(src.model, src.top_k);
}

Scenario scenario_from_trap(std::string name, TrapSpec spec) {
  spec.validate();
  Scenario s;
  s.name = std::move(name);
  s.prompt.assign(spec.ground_truth.begin(), spec.ground_truth.begin() + static_cast<std::ptrdiff_t>(spec.prompt_len));
  s.ground_truth.assign(spec.ground_truth.begin() + static_cast<std::ptrdiff_t>(spec.prompt_len),
                        spec.ground_truth.end());
  s.model = std::move(spec);
  return s;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open for writing");
  out << text;
  if (!out) throw IoError(path, "write failed");
}

}  // namespace

Scenario load_scenario(const std::string& path) {
  const std::string text = read_file(path);
  try {
    const json j = json::parse(text);
    const json& d = j.at("denoiser");
    const std::string kind = d.at("kind").get<std::string>();
    const std::string name = j.value("name", fs::path(path).stem().string());
    if (kind == "scripted") {
      Scenario s = scenario_from_trap(name, trap_spec_from_json(d.at("spec").dump()));
      if (j.contains("prompt") && j["prompt"].get<std::vector<TokenId>>() != s.prompt) {
        throw IoError(path, "prompt disagrees with the trap spec");
      }
      if (j.contains("ground_truth") && j["ground_truth"].get<std::vector<TokenId>>() != s.ground_truth) {
        throw IoError(path, "ground_truth disagrees with the trap spec");
      }
      return s;
    }
    if (kind == "bigram") {
      Scenario s;
      s.name = name;
      s.prompt = j.at("prompt").get<std::vector<TokenId>>();
      s.ground_truth = j.at("ground_truth").get<std::vector<TokenId>>();
      BigramSource src;
      std::vector<std::vector<TokenId>> corpus;
      if (d.contains("corpus")) {
        src.corpus_path = d["corpus"].get<std::string>();
        const fs::path p = fs::path(src.corpus_path).is_absolute() ? fs::path(src.corpus_path)
                                                                  : fs::path(path).parent_path() / src.corpus_path;
        corpus = load_corpus(p.string());
      } else {
        corpus = d.at("sequences").get<std::vector<std::vector<TokenId>>>();
      }
      src.top_k = d.value("top_k", std::size_t{3});
      src.model = BigramModel::fit(corpus, d.value("smoothing", 0.1), d.value("vocab_size", std::size_t{0}));
      src.corpus = std::make_shared<const std::vector<std::vector<TokenId>>>(std::move(corpus));
      s.model = std::move(src);
      return s;
    }
    throw IoError(path, "unknown denoiser kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw IoError(path, std::string("malformed scenario: ") + e.what());
  } catch (const UsageError& e) {
    throw IoError(path, e.what());
  }
}

std::vector<Scenario> load_scenario_dir(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError(dir, "scenario directory does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError(dir, "no scenario files (*.json) found");
  std::vector<Scenario> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(load_scenario(f.string()));
  return out;
}

void save_scenario(const Scenario& scenario, const std::string& path) {
  ordered_json j;
  j["name"] = scenario.name;
  j["prompt"] = scenario.prompt;
  j["ground_truth"] = scenario.ground_truth;
  if (const auto* spec = std::get_if<TrapSpec>(&scenario.model)) {
    j["denoiser"] = {{"kind", "scripted"}, {"spec", ordered_json::parse(trap_spec_to_json(*spec))}};
  } else {
    const auto& src = std::get<BigramSource>(scenario.model);
    ordered_json d;
    d["kind"] = "bigram";
    if (!src.corpus_path.empty()) {
      d["corpus"] = src.corpus_path;
    } else if (src.corpus) {
      d["sequences"] = *src.corpus;
    } else {
      throw UsageError("bigram scenario has neither a corpus path nor sequences");
    }
    d["smoothing"] = src.model->smoothing();
    d["vocab_size"] = src.model->vocab_size();
    d["top_k"] = src.top_k;
    j["denoiser"] = d;
  }
  write_file(path, j.dump(1) + "\n");
}

std::vector<Scenario> generate_trap_corpus(std::size_t count, std::uint64_t seed, std::size_t prompt_len,
                                           std::size_t gen_len, std::size_t block_len) {
  if (block_len == 0 || gen_len % block_len != 0 || gen_len < 2 * block_len) {
    throw UsageError("trap corpus needs at least two whole generated blocks");
  }
  std::vector<Scenario> out;
  out.reserve(count);
  const std::size_t total = prompt_len + gen_len;
  for (std::size_t n = 0; n < count; ++n) {
    Rng rng(mix_seed(seed, n));
    TrapSpec spec;
    spec.vocab_size = 16;
    spec.prompt_len = prompt_len;
    spec.c_high = 0.99;
    spec.c_low = 0.6;
    spec.ground_truth.resize(total);
    for (auto& t : spec.ground_truth) t = static_cast<TokenId>(uniform_below(rng, spec.vocab_size));
    // any generated block except the last, so a later window can stagnate
    const std::size_t blocks = gen_len / block_len;
    const std::size_t block = uniform_below(rng, blocks - 1);
    Trap trap;
    trap.position = prompt_len + block * block_len + uniform_below(rng, block_len);
    trap.horizon = prompt_len + (block + 1) * block_len;
    trap.decoy = static_cast<TokenId>((spec.ground_truth[trap.position] + 1 + uniform_below(rng, spec.vocab_size - 1)) %
                                      spec.vocab_size);
    trap.decoy_confidence = 0.58 + 0.12 * uniform01(rng);
    trap.truth_confidence = 1.0 - trap.decoy_confidence;
    spec.traps.push_back(trap);
    char name[32];
    std::snprintf(name, sizeof name, "trap-%03zu", n);
    out.push_back(scenario_from_trap(name, std::move(spec)));
  }
  return out;
}

std::vector<Scenario> generate_bigram_scenarios(std::size_t count, std::uint64_t seed, bool deterministic,
                                                std::size_t vocab_size, std::size_t prompt_len, std::size_t gen_len) {
  if (vocab_size < 2) throw UsageError("bigram scenarios need vocab_size >= 2");
  Rng rng(mix_seed(seed, 0xb16a));
  const std::size_t v = vocab_size;

  // successor distribution per state: one dominant successor plus up to two others
  std::vector<std::vector<std::pair<TokenId, double>>> chain(v);
  std::vector<TokenId> cycle(v);
  for (std::size_t a = 0; a < v; ++a) cycle[a] = static_cast<TokenId>(a);
  for (std::size_t a = v - 1; a > 0; --a) std::swap(cycle[a], cycle[uniform_below(rng, a + 1)]);
  for (std::size_t a = 0; a < v; ++a) {
    const TokenId dominant = cycle[(std::find(cycle.begin(), cycle.end(), a) - cycle.begin() + 1) % v];
    if (deterministic) {
      chain[a] = {{dominant, 1.0}};
      continue;
    }
    const double p = 0.6 + 0.37 * uniform01(rng);
    const auto alt1 = static_cast<TokenId>(uniform_below(rng, v));
    const auto alt2 = static_cast<TokenId>(uniform_below(rng, v));
    chain[a] = {{dominant, p}, {alt1, (1.0 - p) * 0.7}, {alt2, (1.0 - p) * 0.3}};
  }
  auto next = [&](TokenId a) {
    double u = uniform01(rng);
    for (const auto& [b, p] : chain[a]) {
      if (u < p) return b;
      u -= p;
    }
    return chain[a].front().first;
  };

  auto corpus = std::make_shared<std::vector<std::vector<TokenId>>>();
  for (int s = 0; s < 4; ++s) {
    std::vector<TokenId> seq{static_cast<TokenId>(uniform_below(rng, v))};
    for (int i = 1; i < 1000; ++i) seq.push_back(next(seq.back()));
    corpus->push_back(std::move(seq));
  }
  BigramSource src;
  src.model = BigramModel::fit(*corpus, 0.1, v);
  src.corpus = corpus;

  std::vector<Scenario> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    Scenario s;
    char name[32];
    std::snprintf(name, sizeof name, "%s-%03zu", deterministic ? "cycle" : "markov", n);
    s.name = name;
    s.prompt.push_back(static_cast<TokenId>(uniform_below(rng, v)));
    while (s.prompt.size() < prompt_len) s.prompt.push_back(next(s.prompt.back()));
    // reference continuation: the most likely successor at every step
    TokenId cur = s.prompt.empty() ? cycle.front() : s.prompt.back();
    for (std::size_t i = 0; i < gen_len; ++i) {
      cur = chain[cur].front().first;
      s.ground_truth.push_back(cur);
    }
    s.model = src;
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grids

namespace {

std::string fmt_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

double parse_num(const std::string& key, const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw UsageError("grid axis '" + key + "': '" + text + "' is not a number");
  }
  return v;
}

const std::vector<std::string>& grid_keys() {
  static const std::vector<std::string> keys = {"f", "f_r", "lambda", "R", "rollback_budget", "remask"};
  return keys;
}

void apply_axis(DecodeConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "f") {
    cfg.schedule.f = parse_num(key, value);
  } else if (key == "f_r") {
    cfg.schedule.f_r = parse_num(key, value);
  } else if (key == "lambda") {
    cfg.schedule.lambda = parse_num(key, value);
  } else if (key == "R" || key == "rollback_budget") {
    const double r = parse_num(key, value);
    if (r < 0 || r != std::floor(r)) throw UsageError("rollback budget must be a non-negative integer");
    cfg.schedule.rollback_budget = static_cast<std::size_t>(r);
  } else if (key == "remask") {
    cfg.remask = RemaskPolicy::parse(value);
  } else {
    throw UsageError("unknown grid key '" + key + "'");
  }
}

}  // namespace

GridAxis GridAxis::parse(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("grid axis must look like key=values, got '" + text + "'");
  GridAxis axis;
  axis.key = text.substr(0, eq);
  if (std::find(grid_keys().begin(), grid_keys().end(), axis.key) == grid_keys().end()) {
    throw UsageError("unknown grid key '" + axis.key + "' (expected f, f_r, lambda, R, remask)");
  }
  const std::string rest = text.substr(eq + 1);
  if (axis.key != "remask" && std::count(rest.begin(), rest.end(), ':') == 2) {
    const auto c1 = rest.find(':');
    const auto c2 = rest.find(':', c1 + 1);
    const double lo = parse_num(axis.key, rest.substr(0, c1));
    const double hi = parse_num(axis.key, rest.substr(c1 + 1, c2 - c1 - 1));
    const double stepv = parse_num(axis.key, rest.substr(c2 + 1));
    if (!(stepv > 0.0) || hi < lo) throw UsageError("grid range needs lo <= hi and a positive step");
    for (std::size_t i = 0;; ++i) {
      const double v = lo + static_cast<double>(i) * stepv;
      if (v > hi + 1e-9) break;
      axis.values.push_back(fmt_num(v));
    }
  } else {
    std::stringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) axis.values.push_back(item);
    }
  }
  if (axis.values.empty()) throw UsageError("grid axis '" + axis.key + "' has no values");
  // validate every value up front
  DecodeConfig probe;
  for (const auto& v : axis.values) apply_axis(probe, axis.key, v);
  return axis;
}

std::vector<GridPoint> expand_grid(const DecodeConfig& base, const std::vector<GridAxis>& axes) {
  std::vector<GridPoint> points{{"", base}};
  for (const auto& axis : axes) {
    std::vector<GridPoint> next;
    for (const auto& p : points) {
      for (const auto& v : axis.values) {
        GridPoint q = p;
        apply_axis(q.config, axis.key, v);
        q.label += (q.label.empty() ? "" : ",") + axis.key + "=" + v;
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  for (auto& p : points) {
    if (p.label.empty()) p.label = "base";
  }
  return points;
}

DecodeConfig normalize_for_method(DecodeConfig cfg, Method method) {
  cfg.method = method;
  switch (method) {
    case Method::kBlock:
      cfg.schedule.rollback_budget = 0;
      cfg.schedule.f_r = cfg.schedule.f;
      break;
    case Method::kRdd:
      cfg.schedule.f_r = cfg.schedule.f;
      break;
    case Method::kRddStar:
      cfg.schedule.f_r = std::min(cfg.schedule.f_r, cfg.schedule.f);
      break;
    case Method::kVanilla:
      break;
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Suites

SuiteResult run_suite(const std::vector<Scenario>& scenarios, const SuiteOptions& options) {
  if (scenarios.empty()) throw UsageError("run_suite: no scenarios");
  if (options.methods.empty()) throw UsageError("run_suite: no methods");
  const std::vector<GridPoint> grid = options.grid.empty() ? std::vector<GridPoint>{{"base", DecodeConfig{}}}
                                                           : options.grid;

  struct Job {
    std::size_t scenario;
    Method method;
    const GridPoint* point;
  };
  std::vector<Job> jobs;
  for (const auto& point : grid) {
    for (Method m : options.methods) {
      for (std::size_t s = 0; s < scenarios.size(); ++s) jobs.push_back({s, m, &point});
    }
  }

  SuiteResult suite;
  suite.cells.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      try {
        const Job& job = jobs[k];
        const Scenario& sc = scenarios[job.scenario];
        DecodeConfig cfg = normalize_for_method(job.point->config, job.method);
        cfg.total_len = sc.total_len();
        cfg.seed = options.base_seed + job.scenario;
        auto denoiser = sc.make_denoiser(cfg.seed);
        CellResult& cell = suite.cells[k];
        cell.scenario = sc.name;
        cell.method = job.method;
        cell.label = job.point->label;
        cell.config = cfg;
        cell.ground_truth = sc.ground_truth;
        cell.result = decode(*denoiser, sc.prompt, cfg);
        const auto toks = cell.result.buffer.tokens().subspan(sc.prompt.size());
        cell.exact_match = std::equal(toks.begin(), toks.end(), sc.ground_truth.begin(), sc.ground_truth.end());
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, jobs.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  suite.rows = aggregate(suite.cells);
  return suite;
}

std::vector<ReportRow> aggregate(const std::vector<CellResult>& cells) {
  std::vector<ReportRow> rows;
  std::vector<std::size_t> matches;
  std::map<std::pair<Method, std::string>, std::size_t> index;
  for (const auto& c : cells) {
    auto [it, fresh] = index.try_emplace({c.method, c.label}, rows.size());
    if (fresh) {
      rows.push_back({});
      rows.back().method = c.method;
      rows.back().label = c.label;
      matches.push_back(0);
    }
    ReportRow& r = rows[it->second];
    ++r.samples;
    r.generated_tokens += c.ground_truth.size();
    r.wall_seconds += c.result.metrics.wall_seconds;
    r.nfe += c.result.metrics.nfe;
    r.nfe_forced += c.result.metrics.nfe_forced;
    r.rollbacks += c.result.metrics.rollbacks;
    r.remasked_tokens += c.result.metrics.remasked_tokens;
    if (c.exact_match) ++matches[it->second];
  }
  for (std::size_t k = 0; k < rows.size(); ++k) {
    ReportRow& r = rows[k];
    r.throughput = r.wall_seconds > 0.0 ? static_cast<double>(r.generated_tokens) / r.wall_seconds : 0.0;
    r.latency = r.samples > 0 ? r.wall_seconds / static_cast<double>(r.samples) : 0.0;
    r.stagnation_rate = r.nfe > 0 ? stagnation_rate(r.nfe_forced, r.nfe) : 0.0;
    r.score = r.samples > 0 ? 100.0 * static_cast<double>(matches[k]) / static_cast<double>(r.samples) : 0.0;
  }
  return rows;
}

void write_report_markdown(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << "| method | config | samples | throughput (tok/s) | latency (s) | NFE | NFE_f | r_s | score (%) | rollbacks "
         "| remasked |\n";
  out << "|---|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "| %s | %s | %zu | %.1f | %.6f | %llu | %llu | %.2f%% | %.1f | %llu | %llu |\n",
                  std::string(to_string(r.method)).c_str(), r.label.c_str(), r.samples, r.throughput, r.latency,
                  static_cast<unsigned long long>(r.nfe), static_cast<unsigned long long>(r.nfe_forced),
                  100.0 * r.stagnation_rate, r.score, static_cast<unsigned long long>(r.rollbacks),
                  static_cast<unsigned long long>(r.remasked_tokens));
    out << buf;
  }
}

std::string report_to_json(const std::vector<ReportRow>& rows) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : rows) {
    arr.push_back({{"method", std::string(to_string(r.method))},
                   {"config", r.label},
                   {"samples", r.samples},
                   {"generated_tokens", r.generated_tokens},
                   {"wall_seconds", r.wall_seconds},
                   {"throughput", r.throughput},
                   {"latency", r.latency},
                   {"nfe", r.nfe},
                   {"nfe_f", r.nfe_forced},
                   {"stagnation_rate", r.stagnation_rate},
                   {"score", r.score},
                   {"rollback_count", r.rollbacks},
                   {"remask_count", r.remasked_tokens}});
  }
  return arr.dump(1);
}

namespace {

std::string cell_stem(std::size_t index, const CellResult& c) {
  std::string stem = c.scenario + "__" + std::string(to_string(c.method)) + "__" + std::to_string(index);
  for (char& ch : stem) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.')) ch = '_';
  }
  return stem;
}

}  // namespace

void write_suite_archive(const SuiteResult& suite, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "traces", ec);
  if (ec) throw IoError(dir, "cannot create archive directory: " + ec.message());
  fs::create_directories(fs::path(dir) / "outputs", ec);
  if (ec) throw IoError(dir, "cannot create archive directory: " + ec.message());

  for (std::size_t k = 0; k < suite.cells.size(); ++k) {
    const CellResult& c = suite.cells[k];
    const std::string stem = cell_stem(k, c);
    write_trace_file((fs::path(dir) / "traces" / (stem + ".jsonl")).string(), c.result.trace);
    ordered_json o;
    o["cell_index"] = k;
    o["scenario"] = c.scenario;
    o["method"] = std::string(to_string(c.method));
    o["label"] = c.label;
    o["config"] = ordered_json::parse(decode_config_to_json(c.config));
    o["prompt_len"] = c.result.buffer.prompt_len();
    const auto toks = c.result.buffer.tokens().subspan(c.result.buffer.prompt_len());
    o["tokens"] = std::vector<TokenId>(toks.begin(), toks.end());
    o["ground_truth"] = c.ground_truth;
    o["wall_seconds"] = c.result.metrics.wall_seconds;
    o["trace"] = "traces/" + stem + ".jsonl";
    write_file((fs::path(dir) / "outputs" / (stem + ".json")).string(), o.dump() + "\n");
  }
  std::ostringstream md;
  write_report_markdown(md, suite.rows);
  write_file((fs::path(dir) / "report.md").string(), md.str());
  write_file((fs::path(dir) / "report.json").string(), report_to_json(suite.rows) + "\n");
}

std::vector<ReportRow> report_from_archive(const std::string& dir) {
  const fs::path outputs = fs::path(dir) / "outputs";
  std::error_code ec;
  if (!fs::is_directory(outputs, ec)) throw IoError(outputs.string(), "archive has no outputs directory");
  std::vector<std::pair<std::size_t, CellResult>> cells;
  for (const auto& entry : fs::directory_iterator(outputs)) {
    if (entry.path().extension() != ".json") continue;
    const std::string path = entry.path().string();
    try {
      const json o = json::parse(read_file(path));
      CellResult c;
      c.scenario = o.at("scenario").get<std::string>();
      c.method = method_from_string(o.at("method").get<std::string>());
      c.label = o.at("label").get<std::string>();
      c.ground_truth = o.at("ground_truth").get<std::vector<TokenId>>();
      const auto tokens = o.at("tokens").get<std::vector<TokenId>>();
      c.exact_match = tokens == c.ground_truth;
      const Trace trace = read_trace_file((fs::path(dir) / o.at("trace").get<std::string>()).string());
      const TraceCounts counts = count_trace(trace);
      c.result.metrics.nfe = counts.nfe;
      c.result.metrics.nfe_forced = counts.nfe_forced;
      c.result.metrics.rollbacks = counts.rollbacks;
      c.result.metrics.remasked_tokens = counts.remasked_tokens;
      c.result.metrics.wall_seconds = o.at("wall_seconds").get<double>();
      cells.emplace_back(o.at("cell_index").get<std::size_t>(), std::move(c));
    } catch (const json::exception& e) {
      throw IoError(path, std::string("malformed archive entry: ") + e.what());
    }
  }
  if (cells.empty()) throw IoError(outputs.string(), "archive is empty");
  std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<CellResult> ordered;
  ordered.reserve(cells.size());
  for (auto& [_, c] : cells) ordered.push_back(std::move(c));
  return aggregate(ordered);
}

// ---------------------------------------------------------------------------
// Heatmaps

Heatmap export_heatmap(const Trace& trace, double low_threshold) {
  if (trace.empty() || trace.back().kind != EventKind::kBlockDone) {
    throw UsageError("export_heatmap: trace is incomplete (must end with BLOCK_DONE)");
  }
  Position lo = trace.front().window.start;
  Position hi = trace.front().window.end;
  std::map<Position, double> committed;
  for (const auto& ev : trace) {
    lo = std::min(lo, ev.window.start);
    hi = std::max(hi, ev.window.end);
    if (ev.kind == EventKind::kDecode || ev.kind == EventKind::kForce) {
      for (std::size_t k = 0; k < ev.positions.size(); ++k) committed[ev.positions[k]] = ev.confidences.at(k);
    } else if (ev.kind == EventKind::kRemask) {
      for (Position p : ev.positions) committed.erase(p);
    }
  }
  for (Position p = lo; p < hi; ++p) {
    if (!committed.count(p)) {
      throw UsageError("export_heatmap: position " + std::to_string(p) + " is never committed");
    }
  }
  Heatmap h;
  h.low_threshold = low_threshold;
  double sum = 0.0;
  std::size_t below = 0;
  for (const auto& [p, c] : committed) {
    h.cells.push_back({p, c});
    sum += c;
    if (c < low_threshold) ++below;
  }
  h.mean_confidence = h.cells.empty() ? 0.0 : sum / static_cast<double>(h.cells.size());
  h.fraction_below = h.cells.empty() ? 0.0 : static_cast<double>(below) / static_cast<double>(h.cells.size());
  return h;
}

void write_heatmap_csv(std::ostream& out, const Heatmap& heatmap) {
  out << "position,confidence\n";
  char buf[64];
  for (const auto& c : heatmap.cells) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", c.position, c.confidence);
    out << buf;
  }
}

void write_heatmap_summary_csv(std::ostream& out, const Heatmap& heatmap) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "mean_confidence,fraction_below,low_threshold,positions\n%.17g,%.17g,%.17g,%zu\n",
                heatmap.mean_confidence, heatmap.fraction_below, heatmap.low_threshold, heatmap.cells.size());
  out << buf;
}

}  // namespace rdd

#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "rdd/bigram.hpp"
#include "rdd/config_io.hpp"
#include "rdd/decoder.hpp"
#include "rdd/errors.hpp"
#include "rdd/harness.hpp"
#include "rdd/scripted.hpp"

namespace fs = std::filesystem;

namespace rdd::cli {

namespace {

constexpr std::size_t kDefaultPromptLen = 32;
constexpr std::size_t kDefaultGenLen = 224;
constexpr std::uint64_t kTrapSeed = 1;

struct ScheduleFlags {
  double f = 0.9;
  double f_r = 0.9;
  double lambda = 1.0;
  std::size_t rollback_budget = 1;
  std::size_t block_len = 32;
  std::string remask = "confidence";
};

void add_schedule_flags(CLI::App* cmd, ScheduleFlags& s) {
  cmd->add_option("--f", s.f, "Scaling factor in normal mode");
  cmd->add_option("--f-r", s.f_r, "Scaling factor in recovery mode (rdd-star)");
  cmd->add_option("--lambda", s.lambda, "Re-mask sensitivity");
  cmd->add_option("--rollback-budget", s.rollback_budget, "Rollbacks allowed per block chain");
  cmd->add_option("--block-len", s.block_len, "Block length L");
  cmd->add_option("--remask", s.remask, "Re-mask policy: confidence | random:<ratio>");
}

// Applies only the flags the user actually passed, so a --config file keeps
// its values for everything else.
void apply_schedule_flags(const CLI::App* cmd, const ScheduleFlags& s, DecodeConfig& cfg) {
  if (cmd->count("--f")) cfg.schedule.f = s.f;
  if (cmd->count("--f-r")) cfg.schedule.f_r = s.f_r;
  if (cmd->count("--lambda")) cfg.schedule.lambda = s.lambda;
  if (cmd->count("--rollback-budget")) cfg.schedule.rollback_budget = s.rollback_budget;
  if (cmd->count("--block-len")) cfg.block_len = s.block_len;
  if (cmd->count("--remask")) cfg.remask = RemaskPolicy::parse(s.remask);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string(), "write failed");
}

fs::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir, "cannot create directory: " + ec.message());
  return fs::path(dir);
}

std::string default_out_dir(const std::string& sub) {
  const char* env = std::getenv("RDD_OUT_DIR");
  const fs::path base = env && *env ? fs::path(env) : fs::path("rdd-out");
  return (base / sub).string();
}

std::vector<TokenId> parse_tokens(const std::string& text) {
  std::string s = text;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  std::vector<TokenId> out;
  long long v = 0;
  while (in >> v) {
    if (v < 0 || v >= static_cast<long long>(kMaskToken)) throw UsageError("prompt token out of range");
    out.push_back(static_cast<TokenId>(v));
  }
  if (!in.eof()) throw UsageError("prompt must be a list of integer token ids");
  return out;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

// ---------------------------------------------------------------------------
// decode

struct DecodeFlags {
  ScheduleFlags schedule;
  std::string method = "rdd";
  std::string model;
  std::string prompt;
  std::string prompt_file;
  std::size_t gen_len = kDefaultGenLen;
  std::uint64_t seed = 0;
  std::string config;
  bool no_cache = false;
  bool trace_cache = false;
  std::size_t step_cap = 0;
  std::size_t top_k = 3;
  double smoothing = 0.1;
  std::string out;
};

struct LoadedModel {
  std::unique_ptr<Denoiser> denoiser;
  std::vector<TokenId> prompt;
  std::vector<TokenId> ground_truth;  // empty when unknown
};

LoadedModel load_model(const CLI::App* cmd, const DecodeFlags& f, const DecodeConfig& cfg) {
  const auto colon = f.model.find(':');
  if (colon == std::string::npos) {
    throw UsageError("--model must be scripted:trap1, scripted:<trap.json> or bigram:<corpus>");
  }
  const std::string kind = f.model.substr(0, colon);
  const std::string arg = f.model.substr(colon + 1);
  const bool has_prompt = cmd->count("--prompt") || cmd->count("--prompt-file");

  LoadedModel m;
  if (kind == "scripted") {
    if (has_prompt) throw UsageError("scripted models define their own prompt; drop --prompt");
    TrapSpec spec;
    if (arg == "trap1") {
      spec = canonical_trap(kDefaultPromptLen, f.gen_len, cfg.block_len, kTrapSeed);
    } else {
      spec = load_trap_spec(arg);
      if (cmd->count("--gen-len") && spec.ground_truth.size() - spec.prompt_len != f.gen_len) {
        throw UsageError("--gen-len disagrees with the trap spec in " + arg);
      }
    }
    m.prompt.assign(spec.ground_truth.begin(), spec.ground_truth.begin() + static_cast<std::ptrdiff_t>(spec.prompt_len));
    m.ground_truth.assign(spec.ground_truth.begin() + static_cast<std::ptrdiff_t>(spec.prompt_len),
                          spec.ground_truth.end());
    m.denoiser = std::make_unique<ScriptedDenoiser>(std::move(spec), cfg.seed);
    return m;
  }
  if (kind == "bigram") {
    if (!has_prompt) throw UsageError("bigram models need --prompt or --prompt-file");
    m.prompt = parse_tokens(cmd->count("--prompt") ? f.prompt : read_text(f.prompt_file));
    m.denoiser = std::make_unique<BigramDenoiser>(BigramModel::fit(load_corpus(arg), f.smoothing), f.top_k);
    return m;
  }
  throw UsageError("unknown model kind '" + kind + "'");
}

int cmd_decode(const CLI::App* cmd, const DecodeFlags& f, std::ostream& out) {
  DecodeConfig cfg;
  if (!f.config.empty()) cfg = decode_config_from_json(read_text(f.config), cfg);
  apply_schedule_flags(cmd, f.schedule, cfg);
  if (cmd->count("--method")) cfg.method = method_from_string(f.method);
  if (cmd->count("--seed")) cfg.seed = f.seed;
  if (cmd->count("--step-cap")) cfg.step_cap = f.step_cap;
  if (f.no_cache) cfg.use_cache = false;
  if (f.trace_cache) cfg.trace_cache = true;
  // RDD keeps a single scale unless the user asked for a recovery factor
  if (cfg.method != Method::kRddStar && !cmd->count("--f-r")) cfg.schedule.f_r = cfg.schedule.f;
  if (cfg.method == Method::kBlock && !cmd->count("--rollback-budget")) cfg.schedule.rollback_budget = 0;

  LoadedModel m = load_model(cmd, f, cfg);
  if (m.prompt.empty()) throw UsageError("prompt must not be empty");
  if (!m.ground_truth.empty()) {
    cfg.total_len = m.prompt.size() + m.ground_truth.size();
  } else if (cmd->count("--gen-len") || f.config.empty()) {
    cfg.total_len = m.prompt.size() + f.gen_len;
  }
  cfg.validate(m.prompt.size());

  const DecodeResult r = decode(*m.denoiser, m.prompt, cfg);

  const fs::path dir = ensure_dir(f.out.empty() ? default_out_dir("decode") : f.out);
  const std::string echo = decode_config_to_json(cfg);
  write_trace_file((dir / "trace.jsonl").string(), r.trace);
  write_text(dir / "config.json", echo + "\n");
  nlohmann::ordered_json seq;
  seq["prompt_len"] = r.buffer.prompt_len();
  seq["tokens"] = std::vector<TokenId>(r.buffer.tokens().begin(), r.buffer.tokens().end());
  const auto gen = r.buffer.tokens().subspan(r.buffer.prompt_len());
  std::optional<bool> exact;
  if (!m.ground_truth.empty()) {
    exact = std::equal(gen.begin(), gen.end(), m.ground_truth.begin(), m.ground_truth.end());
    seq["ground_truth"] = m.ground_truth;
    seq["exact_match"] = *exact;
  }
  write_text(dir / "sequence.json", seq.dump() + "\n");

  const double rs = r.metrics.nfe ? stagnation_rate(r.metrics.nfe_forced, r.metrics.nfe) : 0.0;
  out << "config: " << echo << "\n";
  out << "metrics: nfe=" << r.metrics.nfe << " nfe_f=" << r.metrics.nfe_forced << " r_s=" << fmt("%.4f", rs)
      << " rollbacks=" << r.metrics.rollbacks << " remasked=" << r.metrics.remasked_tokens
      << " wall_s=" << fmt("%.6f", r.metrics.wall_seconds)
      << " tokens_per_s=" << fmt("%.1f", r.metrics.wall_seconds > 0 ? gen.size() / r.metrics.wall_seconds : 0.0);
  if (exact) out << " exact_match=" << (*exact ? "true" : "false");
  out << "\n";
  out << "wrote: " << (dir / "trace.jsonl").string() << " " << (dir / "sequence.json").string() << " "
      << (dir / "config.json").string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// suite

struct SuiteFlags {
  ScheduleFlags schedule;
  std::string scenarios;
  std::string methods = "block,rdd";
  std::vector<std::string> grid;
  std::size_t workers = 0;
  std::uint64_t seed = 0;
  std::string out;
};

std::vector<Method> parse_methods(const std::string& text) {
  std::vector<Method> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(method_from_string(item));
  }
  if (out.empty()) throw UsageError("--methods lists no methods");
  return out;
}

int cmd_suite(const CLI::App* cmd, const SuiteFlags& f, std::ostream& out) {
  DecodeConfig base;
  apply_schedule_flags(cmd, f.schedule, base);
  std::vector<GridAxis> axes;
  for (const auto& g : f.grid) axes.push_back(GridAxis::parse(g));

  SuiteOptions opts;
  opts.methods = parse_methods(f.methods);
  opts.grid = expand_grid(base, axes);
  opts.base_seed = f.seed;
  opts.workers = f.workers ? f.workers : std::max(1u, std::thread::hardware_concurrency());

  const auto scenarios = load_scenario_dir(f.scenarios);
  const SuiteResult suite = run_suite(scenarios, opts);
  const std::string dir = f.out.empty() ? default_out_dir("suite") : f.out;
  write_suite_archive(suite, dir);
  write_report_markdown(out, suite.rows);
  out << "wrote: " << dir << " (" << suite.cells.size() << " cells)\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeFlags {
  std::string trace;
  std::string archive;
  std::string out;
  double low_threshold = 0.7;
};

int cmd_analyze(const AnalyzeFlags& f, std::ostream& out) {
  if (f.trace.empty() == f.archive.empty()) throw UsageError("analyze needs exactly one of --trace or --archive");
  if (!f.archive.empty()) {
    write_report_markdown(out, report_from_archive(f.archive));
    return kOk;
  }
  const Trace trace = read_trace_file(f.trace);
  const TraceCounts c = count_trace(trace);
  const Heatmap h = export_heatmap(trace, f.low_threshold);
  const double rs = c.nfe ? stagnation_rate(c.nfe_forced, c.nfe) : 0.0;
  out << "metrics: nfe=" << c.nfe << " nfe_f=" << c.nfe_forced << " r_s=" << fmt("%.4f", rs)
      << " rollbacks=" << c.rollbacks << " remasked=" << c.remasked_tokens << "\n";
  out << "heatmap: positions=" << h.cells.size() << " mean_confidence=" << fmt("%.6f", h.mean_confidence)
      << " fraction_below_" << fmt("%g", h.low_threshold) << "=" << fmt("%.6f", h.fraction_below) << "\n";
  if (!f.out.empty()) {
    const fs::path dir = ensure_dir(f.out);
    std::ostringstream cells, summary;
    write_heatmap_csv(cells, h);
    write_heatmap_summary_csv(summary, h);
    write_text(dir / "heatmap.csv", cells.str());
    write_text(dir / "heatmap_summary.csv", summary.str());
    out << "wrote: " << (dir / "heatmap.csv").string() << " " << (dir / "heatmap_summary.csv").string() << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// gen

struct GenFlags {
  std::string kind = "trap";
  std::size_t count = 100;
  std::uint64_t seed = 1;
  std::size_t vocab = 8;
  std::size_t block_len = 32;
  std::string out;
};

int cmd_gen(const GenFlags& f, std::ostream& out) {
  const fs::path dir = ensure_dir(f.out.empty() ? default_out_dir("scenarios") : f.out);
  std::vector<Scenario> scenarios;
  if (f.kind == "trap") {
    scenarios = generate_trap_corpus(f.count, f.seed, kDefaultPromptLen, kDefaultGenLen, f.block_len);
  } else if (f.kind == "markov" || f.kind == "cycle") {
    scenarios = generate_bigram_scenarios(f.count, f.seed, f.kind == "cycle", f.vocab);
    if (!scenarios.empty()) {
      auto& src = std::get<BigramSource>(scenarios.front().model);
      std::ostringstream corpus;
      for (const auto& seq : *src.corpus) {
        for (std::size_t i = 0; i < seq.size(); ++i) corpus << (i ? " " : "") << seq[i];
        corpus << "\n";
      }
      write_text(dir / "corpus.txt", corpus.str());
      for (auto& s : scenarios) std::get<BigramSource>(s.model).corpus_path = "corpus.txt";
    }
  } else {
    throw UsageError("--kind must be trap, markov or cycle");
  }
  for (const auto& s : scenarios) save_scenario(s, (dir / (s.name + ".json")).string());
  out << "wrote: " << scenarios.size() << " scenarios to " << dir.string() << "\n";
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reversible diffusion decoding: decode, sweep and analyze"};
  app.name("rdd");
  app.require_subcommand(1);

  DecodeFlags df;
  auto* decode_cmd = app.add_subcommand("decode", "Run one decode and write its trace");
  add_schedule_flags(decode_cmd, df.schedule);
  decode_cmd->add_option("--method", df.method, "vanilla | block | rdd | rdd-star");
  decode_cmd->add_option("--model", df.model, "scripted:trap1 | scripted:<trap.json> | bigram:<corpus>");
  decode_cmd->add_option("--prompt", df.prompt, "Prompt token ids (space or comma separated)");
  decode_cmd->add_option("--prompt-file", df.prompt_file, "File holding the prompt token ids");
  decode_cmd->add_option("--gen-len", df.gen_len, "Number of positions to generate");
  decode_cmd->add_option("--seed", df.seed, "Seed for re-masking and denoiser randomness");
  decode_cmd->add_option("--config", df.config, "JSON config (a printed config echo works); flags override it");
  decode_cmd->add_flag("--no-cache", df.no_cache, "Recompute the prefix context on every evaluation");
  decode_cmd->add_flag("--trace-cache", df.trace_cache, "Attach cache metadata to trace events");
  decode_cmd->add_option("--step-cap", df.step_cap, "Evaluation limit (0 derives one)");
  decode_cmd->add_option("--top-k", df.top_k, "Alternatives reported per bigram prediction");
  decode_cmd->add_option("--smoothing", df.smoothing, "Additive smoothing for bigram models");
  decode_cmd->add_option("--out", df.out, "Output directory (default $RDD_OUT_DIR/decode)");

  SuiteFlags sf;
  auto* suite_cmd = app.add_subcommand("suite", "Run scenarios x methods x grid and write a report");
  add_schedule_flags(suite_cmd, sf.schedule);
  suite_cmd->add_option("--scenarios", sf.scenarios, "Directory of scenario JSON files")->required();
  suite_cmd->add_option("--methods", sf.methods, "Comma-separated methods");
  suite_cmd->add_option("--grid", sf.grid, "Sweep axis, e.g. f=0.5:3.5:0.25 or R=0,1,2 (repeatable)");
  suite_cmd->add_option("--workers", sf.workers, "Parallel cells (0 = hardware threads)");
  suite_cmd->add_option("--seed", sf.seed, "Base seed; scenario i uses seed + i");
  suite_cmd->add_option("--out", sf.out, "Archive directory (default $RDD_OUT_DIR/suite)");

  AnalyzeFlags af;
  auto* analyze_cmd = app.add_subcommand("analyze", "Metrics and confidence heatmap from a trace, or a report from an archive");
  analyze_cmd->add_option("--trace", af.trace, "Trace JSONL file");
  analyze_cmd->add_option("--archive", af.archive, "Suite archive directory");
  analyze_cmd->add_option("--low-threshold", af.low_threshold, "Confidence counted as low");
  analyze_cmd->add_option("--out", af.out, "Directory for heatmap CSV files");

  GenFlags gf;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a scenario corpus");
  gen_cmd->add_option("--kind", gf.kind, "trap | markov | cycle");
  gen_cmd->add_option("--count", gf.count, "Number of scenarios");
  gen_cmd->add_option("--seed", gf.seed, "Generator seed");
  gen_cmd->add_option("--vocab", gf.vocab, "Vocabulary size for markov/cycle corpora");
  gen_cmd->add_option("--block-len", gf.block_len, "Block length the traps are laid out for");
  gen_cmd->add_option("--out", gf.out, "Output directory (default $RDD_OUT_DIR/scenarios)");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kOk : kUsage;
    }
    if (decode_cmd->parsed()) {
      if (df.model.empty()) throw UsageError("decode needs --model");
      return cmd_decode(decode_cmd, df, out);
    }
    if (suite_cmd->parsed()) return cmd_suite(suite_cmd, sf, out);
    if (analyze_cmd->parsed()) return cmd_analyze(af, out);
    if (gen_cmd->parsed()) return cmd_gen(gf, out);
    return kUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace rdd::cli

#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rdd/bigram.hpp"
#include "rdd/decoder.hpp"
#include "rdd/scripted.hpp"

namespace rdd {

/// r_s = nfe_forced / nfe. Throws UsageError when nfe is 0 or nfe_forced > nfe.
double stagnation_rate(std::uint64_t nfe_forced, std::uint64_t nfe);

struct BigramSource {
  std::shared_ptr<const BigramModel> model;
  std::shared_ptr<const std::vector<std::vector<TokenId>>> corpus;
  /// Corpus file referenced when the scenario is saved; empty saves the
  /// sequences inline.
  std::string corpus_path;
  std::size_t top_k = 3;
};

/// A prompt, the continuation it should produce, and the denoiser to use.
struct Scenario {
  std::string name;
  std::vector<TokenId> prompt;
  std::vector<TokenId> ground_truth;
  std::variant<TrapSpec, BigramSource> model;

  std::size_t total_len() const noexcept { return prompt.size() + ground_truth.size(); }
  std::unique_ptr<Denoiser> make_denoiser(std::uint64_t seed) const;
};

/// Scenario from the prompt/continuation split of a trap spec.
Scenario scenario_from_trap(std::string name, TrapSpec spec);

/// Reads one scenario JSON file; relative corpus paths resolve against the
/// file's directory. Throws IoError naming the file on failure.
Scenario load_scenario(const std::string& path);
/// All *.json files of a directory, sorted by file name. Throws IoError when
/// the directory is missing or holds no scenarios.
std::vector<Scenario> load_scenario_dir(const std::string& dir);
void save_scenario(const Scenario& scenario, const std::string& path);

/// `count` single-trap scenarios with traps placed in a random generated
/// block that has at least one block after it.
std::vector<Scenario> generate_trap_corpus(std::size_t count, std::uint64_t seed, std::size_t prompt_len = 32,
                                           std::size_t gen_len = 224, std::size_t block_len = 32);

/// Scenarios over a random sparse Markov chain (ambiguous when
/// `deterministic` is false; a single fixed cycle when true).
std::vector<Scenario> generate_bigram_scenarios(std::size_t count, std::uint64_t seed, bool deterministic,
                                                std::size_t vocab_size = 8, std::size_t prompt_len = 32,
                                                std::size_t gen_len = 224);

/// One axis of a parameter sweep: key in {f, f_r, lambda, R, remask}.
struct GridAxis {
  std::string key;
  std::vector<std::string> values;

  /// "f=0.5:3.5:0.25" (inclusive range) or "R=0,1,2".
  static GridAxis parse(const std::string& text);
};

/// Cartesian product of the axes applied to `base`; each point carries a
/// label like "f=0.9,R=1".
struct GridPoint {
  std::string label;
  DecodeConfig config;
};
std::vector<GridPoint> expand_grid(const DecodeConfig& base, const std::vector<GridAxis>& axes);

/// Forces the constraints a method places on its schedule (BLOCK: R = 0 and
/// f_r = f; RDD: f_r = f; RDD_STAR: f_r clipped to f).
DecodeConfig normalize_for_method(DecodeConfig cfg, Method method);

struct CellResult {
  std::string scenario;
  Method method = Method::kRdd;
  std::string label;
  DecodeConfig config;
  std::vector<TokenId> ground_truth;
  DecodeResult result;
  bool exact_match = false;
};

/// Aggregates for one (method, grid point) over every scenario.
struct ReportRow {
  Method method = Method::kRdd;
  std::string label;
  std::size_t samples = 0;
  std::uint64_t generated_tokens = 0;
  double wall_seconds = 0.0;
  double throughput = 0.0;  // tokens / second
  double latency = 0.0;     // seconds / sample
  std::uint64_t nfe = 0;
  std::uint64_t nfe_forced = 0;
  double stagnation_rate = 0.0;
  double score = 0.0;  // exact-match percentage
  std::uint64_t rollbacks = 0;
  std::uint64_t remasked_tokens = 0;
};

struct SuiteResult {
  std::vector<CellResult> cells;
  std::vector<ReportRow> rows;
};

struct SuiteOptions {
  std::vector<Method> methods;
  std::vector<GridPoint> grid;
  /// Seed for scenario i is base_seed + i.
  std::uint64_t base_seed = 0;
  std::size_t workers = 1;
};

SuiteResult run_suite(const std::vector<Scenario>& scenarios, const SuiteOptions& options);

/// Rows in first-appearance order of (method, label).
std::vector<ReportRow> aggregate(const std::vector<CellResult>& cells);

void write_report_markdown(std::ostream& out, const std::vector<ReportRow>& rows);
std::string report_to_json(const std::vector<ReportRow>& rows);

/// Writes report.md, report.json, traces/<cell>.jsonl and outputs/<cell>.json.
void write_suite_archive(const SuiteResult& suite, const std::string& dir);

/// Rebuilds report rows from an archive. Count-based fields and scores are
/// recomputed from the traces and outputs; wall-time fields come from the
/// outputs files.
std::vector<ReportRow> report_from_archive(const std::string& dir);

struct HeatmapCell {
  Position position = 0;
  double confidence = 0.0;
};

struct Heatmap {
  std::vector<HeatmapCell> cells;
  double mean_confidence = 0.0;
  double fraction_below = 0.0;
  double low_threshold = 0.7;
};

/// Final commit confidence of every generated position, replayed from the
/// trace. Throws UsageError if the trace does not end with every position
/// committed.
Heatmap export_heatmap(const Trace& trace, double low_threshold = 0.7);
void write_heatmap_csv(std::ostream& out, const Heatmap& heatmap);
void write_heatmap_summary_csv(std::ostream& out, const Heatmap& heatmap);

}  // namespace rdd

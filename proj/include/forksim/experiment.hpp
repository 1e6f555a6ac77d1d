#pragma once
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "forksim/dag.hpp"
#include "forksim/sim.hpp"

namespace forksim {

// One sweep over a fixed input: the cartesian grid of scheduler
// policies, processor counts, cache geometries and seeds, nested in
// that order. Rows come out in grid order, never completion order.
struct ExperimentSpec {
  std::string algo;
  uint32_t n = 0;
  uint32_t m2 = 0;  // transpose columns; 0 = square
  std::vector<StealPolicy> policies;
  std::vector<uint32_t> procs;
  std::vector<uint64_t> capacities;  // M, words
  std::vector<uint32_t> blocks;      // B, words
  std::vector<uint64_t> seeds;
  std::vector<ScriptedSteal> script;  // consumed by the scripted policy
  uint32_t miss_penalty = 0;
  uint32_t steal_latency = 0;
  bool allow_short_cache = false;  // waive the M >= B*B requirement
  bool want_trace = false;
  bool want_kernels = false;
  bool want_dispersal = false;
};

// Throws std::invalid_argument naming the offending field.
void validate_spec(const ExperimentSpec& spec);

struct ResultRow {
  std::string algo;
  uint32_t n = 0;
  uint32_t p = 1;
  uint64_t M = 0;
  uint32_t B = 1;
  std::string policy = "lru";     // cache replacement
  std::string scheduler = "seq";  // steal policy
  uint64_t seed = 0;
  uint64_t S = 0, Q = 0, C = 0;
  // Task-kernel census of the run; super counts the kernels the
  // super-finishing merge produces, kernels the pre-merge total.
  uint32_t starting = 0, finishing = 0, pseudo = 0;
  uint32_t super = 0;
  uint32_t kernels = 0;
  // Evaluated at unit constant with the row's own measured Q.
  double boundA = 0, boundB = 0, bound_min = 0, xsum_bound = 0;
  bool pass = false;
};

// Largest C / bound_min ratio the shipped sweeps reach stays under
// half of this; a row fails only past it.
inline constexpr double kPassEnvelope = 4.0;

// C within kPassEnvelope * bound_min, from row fields alone.
bool row_pass(const ResultRow& r);

inline constexpr int kSchemaVersion = 1;
extern const char* const kResultsHeader;

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows);
// Throws std::runtime_error when the header differs from the schema
// or a row fails to parse. An empty stream yields no rows.
std::vector<ResultRow> read_results_csv(std::istream& is);

// One event per line as a JSON object, ordered by time; field order
// per kind is fixed and documented in SCHEMA.md.
void write_trace_jsonl(std::ostream& os, const Trace& t);

struct ExperimentOutput {
  std::vector<ResultRow> rows;
  std::vector<std::string> files;  // paths written, results.csv first
};

// Runs the grid; out_dir (created if missing) receives results.csv
// plus any requested artifacts. Empty out_dir writes nothing.
ExperimentOutput run_experiment(const ExperimentSpec& spec, const std::string& out_dir);

// Per (algo, scheduler) rollup of a results file.
struct AlgoSummary {
  std::string algo, scheduler;
  size_t runs = 0, fails = 0;
  uint64_t max_S = 0;
  double max_ratio_a = 0;    // C / boundA
  double max_ratio_min = 0;  // C / bound_min
};

struct PlotPoint {
  uint64_t S = 0;
  size_t runs = 0;
  double overhead_median = 0;  // C - Q across the rows at this S
  double overhead_max = 0;
  double envelope_median = 0;  // bound_min - Q
};

struct PlotSeries {
  std::string algo, scheduler;
  std::vector<PlotPoint> points;  // ascending S
};

struct ReportResult {
  size_t rows = 0;
  std::vector<AlgoSummary> summaries;  // sorted by (algo, scheduler)
  std::vector<PlotSeries> series;      // same order
};

ReportResult summarize_results(const std::vector<ResultRow>& rows);
void write_summary(std::ostream& os, const ReportResult& r);
// One plot_<algo>_<scheduler>.csv per series; returns paths written.
std::vector<std::string> write_plot_data(const ReportResult& r, const std::string& out_dir);

// Scripted deep steal on scan: the thief takes the victim's deepest
// queue entry after k left descents, leaving k entries pseudo-stolen,
// with k = log2(n)/2 - 1. Requires n a power of 4, n >= 16.
struct Example51Result {
  uint32_t n = 0, k = 0;
  uint32_t pseudo = 0;  // entries the deep steal marked
  uint32_t victim_fragments = 0;
  uint32_t super_kernels = 0;
  bool merged_contiguous = false;
  bool pass = false;
};
Example51Result repro_example51(uint32_t n);

// Randomized work-stealing runs; every run must break the sequential
// order into at most 2S+1 fragments.
struct RwsFragmentsResult {
  size_t runs = 0, violations = 0;
  uint64_t max_fragments = 0;
  uint64_t budget_at_max = 0;  // 2S+1 of the worst run
  bool pass = false;
};
RwsFragmentsResult repro_rws_fragments(const std::string& algo, uint32_t n, uint32_t procs,
                                       const std::vector<uint64_t>& seeds);

// "a..b" inclusive range, or a comma list of values.
std::vector<uint64_t> parse_seed_list(const std::string& text);
// Lines `time thief victim position`; blank lines and text after '#'
// are ignored.
std::vector<ScriptedSteal> parse_script_file(const std::string& path);

}  // namespace forksim

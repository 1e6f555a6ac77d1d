#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "forksim/experiment.hpp"
#include "json.hpp"

using namespace forksim;

namespace {

// Exit codes: 0 ok, 1 usage, 2 bad spec or config, 3 I/O failure,
// 4 schema mismatch, 5 reproduction check failed.
constexpr int kExitSpec = 2;
constexpr int kExitIo = 3;
constexpr int kExitSchema = 4;
constexpr int kExitRepro = 5;

StealPolicy parse_sched(const std::string& s, std::vector<ScriptedSteal>& script) {
  if (s.rfind("script:", 0) == 0) {
    script = parse_script_file(s.substr(7));
    return StealPolicy::Scripted;
  }
  if (s == "script") throw std::runtime_error("script policy needs a file: script:FILE");
  return policy_from_name(s);
}

struct SimulateArgs {
  ExperimentSpec spec;
  std::string out_dir;
};

void load_config(const std::string& path, SimulateArgs& a) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read config file " + path);
  nlohmann::json j;
  f >> j;
  if (j.contains("algo")) a.spec.algo = j["algo"].get<std::string>();
  if (j.contains("n")) a.spec.n = j["n"].get<uint32_t>();
  if (j.contains("m")) a.spec.m2 = j["m"].get<uint32_t>();
  auto grid_u64 = [&](const char* key, std::vector<uint64_t>& out) {
    if (!j.contains(key)) return;
    out.clear();
    if (j[key].is_array())
      for (const auto& v : j[key]) out.push_back(v.get<uint64_t>());
    else
      out.push_back(j[key].get<uint64_t>());
  };
  if (j.contains("procs")) {
    a.spec.procs.clear();
    if (j["procs"].is_array())
      for (const auto& v : j["procs"]) a.spec.procs.push_back(v.get<uint32_t>());
    else
      a.spec.procs.push_back(j["procs"].get<uint32_t>());
  }
  grid_u64("cache", a.spec.capacities);
  if (j.contains("block")) {
    a.spec.blocks.clear();
    if (j["block"].is_array())
      for (const auto& v : j["block"]) a.spec.blocks.push_back(v.get<uint32_t>());
    else
      a.spec.blocks.push_back(j["block"].get<uint32_t>());
  }
  if (j.contains("sched")) {
    a.spec.policies.clear();
    if (j["sched"].is_array())
      for (const auto& v : j["sched"])
        a.spec.policies.push_back(parse_sched(v.get<std::string>(), a.spec.script));
    else
      a.spec.policies.push_back(parse_sched(j["sched"].get<std::string>(), a.spec.script));
  }
  if (j.contains("seeds")) {
    a.spec.seeds.clear();
    if (j["seeds"].is_array())
      for (const auto& v : j["seeds"]) a.spec.seeds.push_back(v.get<uint64_t>());
    else
      a.spec.seeds = parse_seed_list(j["seeds"].get<std::string>());
  }
  if (j.contains("miss_penalty")) a.spec.miss_penalty = j["miss_penalty"].get<uint32_t>();
  if (j.contains("steal_latency")) a.spec.steal_latency = j["steal_latency"].get<uint32_t>();
  if (j.contains("no_tall_cache")) a.spec.allow_short_cache = j["no_tall_cache"].get<bool>();
  if (j.contains("trace")) a.spec.want_trace = j["trace"].get<bool>();
  if (j.contains("kernels")) a.spec.want_kernels = j["kernels"].get<bool>();
  if (j.contains("dispersal")) a.spec.want_dispersal = j["dispersal"].get<bool>();
  if (j.contains("out")) a.out_dir = j["out"].get<std::string>();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic fork-join scheduler and cache-miss simulator"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "run a parameter sweep and write CSV results");
  std::string algo, sched_str, seeds_str, out_dir, config_path;
  uint32_t n = 0, m2 = 0, miss_penalty = 0, steal_latency = 0;
  std::vector<uint32_t> procs, blocks;
  std::vector<uint64_t> caches;
  bool no_tall = false, want_trace = false, want_kernels = false, want_dispersal = false;
  sim->add_option("--algo", algo,
                  "scan|sum|prefix-naive|prefix-local|transpose|mm-depthn|mm-log2n|"
                  "strassen-shape|fft");
  sim->add_option("--n", n, "input size");
  sim->add_option("--m", m2, "transpose columns (default: square)");
  sim->add_option("--procs", procs, "processor counts, comma list")->delimiter(',');
  sim->add_option("--cache", caches, "cache capacities M in words, comma list")->delimiter(',');
  sim->add_option("--block", blocks, "block sizes B in words, comma list")->delimiter(',');
  sim->add_option("--sched", sched_str, "seq|ws|gen-uniform|gen-deep|script:FILE");
  sim->add_option("--seeds", seeds_str, "a..b inclusive, or comma list");
  sim->add_option("--out", out_dir, "output directory for results.csv and artifacts");
  sim->add_option("--miss-penalty", miss_penalty, "extra steps a node stalls per miss");
  sim->add_option("--steal-latency", steal_latency, "extra steps before a stolen task starts");
  sim->add_option("--config", config_path, "JSON config supplying any of the above; flags win");
  sim->add_flag("--trace", want_trace, "write one JSONL trace per run");
  sim->add_flag("--kernels", want_kernels, "write one kernel report per run");
  sim->add_flag("--dispersal", want_dispersal, "write dispersal samples per block size");
  sim->add_flag("--no-tall-cache", no_tall, "waive the M >= B*B requirement");

  auto* rep = app.add_subcommand("report", "summarize a results CSV and emit plot data");
  std::string rep_csv, rep_out;
  rep->add_option("csv", rep_csv, "path to results.csv")->required();
  rep->add_option("--out", rep_out, "directory for plot files (default: next to the CSV)");

  auto* repro = app.add_subcommand("repro", "reproduce a published execution pattern");
  std::string which, repro_algo = "scan", repro_seeds = "1..100";
  uint32_t repro_n = 0, repro_procs = 4;
  repro->add_option("which", which, "example-5.1 | rws-fragments")->required();
  repro->add_option("--n", repro_n, "input size");
  repro->add_option("--algo", repro_algo, "algorithm for rws-fragments");
  repro->add_option("--procs", repro_procs, "processors for rws-fragments");
  repro->add_option("--seeds", repro_seeds, "seed list for rws-fragments");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      SimulateArgs a;
      if (!config_path.empty()) load_config(config_path, a);
      if (sim->count("--algo")) a.spec.algo = algo;
      if (sim->count("--n")) a.spec.n = n;
      if (sim->count("--m")) a.spec.m2 = m2;
      if (sim->count("--procs")) a.spec.procs = procs;
      if (sim->count("--cache")) a.spec.capacities = caches;
      if (sim->count("--block")) a.spec.blocks = blocks;
      if (sim->count("--sched")) {
        a.spec.script.clear();
        a.spec.policies = {parse_sched(sched_str, a.spec.script)};
      }
      if (sim->count("--seeds")) a.spec.seeds = parse_seed_list(seeds_str);
      if (sim->count("--out")) a.out_dir = out_dir;
      if (sim->count("--miss-penalty")) a.spec.miss_penalty = miss_penalty;
      if (sim->count("--steal-latency")) a.spec.steal_latency = steal_latency;
      if (no_tall) a.spec.allow_short_cache = true;
      if (want_trace) a.spec.want_trace = true;
      if (want_kernels) a.spec.want_kernels = true;
      if (want_dispersal) a.spec.want_dispersal = true;
      const std::pair<bool, const char*> missing[] = {
          {a.spec.algo.empty(), "--algo"},      {a.spec.n == 0, "--n"},
          {a.spec.procs.empty(), "--procs"},    {a.spec.capacities.empty(), "--cache"},
          {a.spec.blocks.empty(), "--block"},   {a.spec.policies.empty(), "--sched"},
          {a.spec.seeds.empty(), "--seeds"},    {a.out_dir.empty(), "--out"}};
      for (auto [flag, name] : missing)
        if (flag) {
          std::cerr << "simulate: missing " << name << "\n";
          return kExitSpec;
        }
      ExperimentOutput result = run_experiment(a.spec, a.out_dir);
      std::cout << "wrote " << a.out_dir << "/results.csv (" << result.rows.size() << " rows";
      if (result.files.size() > 1)
        std::cout << ", " << result.files.size() - 1 << " artifact files";
      std::cout << ")\n";
      size_t fails = 0;
      for (const ResultRow& r : result.rows)
        if (!r.pass) fails++;
      if (fails) std::cout << fails << " rows exceed the bound envelope\n";
      return 0;
    }

    if (rep->parsed()) {
      std::ifstream f(rep_csv, std::ios::binary);
      if (!f) {
        std::cerr << "report: cannot read " << rep_csv << "\n";
        return kExitIo;
      }
      std::vector<ResultRow> rows;
      try {
        rows = read_results_csv(f);
      } catch (const std::exception& e) {
        std::cerr << "report: " << e.what() << "\n";
        return kExitSchema;
      }
      ReportResult r = summarize_results(rows);
      write_summary(std::cout, r);
      if (!r.series.empty()) {
        std::string dir = rep_out;
        if (dir.empty()) {
          auto slash = rep_csv.find_last_of('/');
          dir = slash == std::string::npos ? "." : rep_csv.substr(0, slash);
        }
        for (const std::string& f2 : write_plot_data(r, dir))
          std::cout << "plot: " << dir << "/" << f2 << "\n";
      }
      return 0;
    }

    // repro
    if (which == "example-5.1") {
      Example51Result r = repro_example51(repro_n == 0 ? 1024 : repro_n);
      std::cout << "example-5.1: scan n=" << r.n << ", deep steal at queue position "
                << r.k + 1 << "\n"
                << "  expected pseudo-stolen k   " << r.k << "\n"
                << "  pseudo-stolen observed     " << r.pseudo << "\n"
                << "  victim fragments           " << r.victim_fragments << " (need >= " << r.k
                << ")\n"
                << "  super-finishing kernels    " << r.super_kernels
                << (r.merged_contiguous ? " (contiguous)" : " (NOT contiguous)") << "\n"
                << (r.pass ? "PASS" : "FAIL") << "\n";
      return r.pass ? 0 : kExitRepro;
    }
    if (which == "rws-fragments") {
      RwsFragmentsResult r = repro_rws_fragments(repro_algo, repro_n == 0 ? 256 : repro_n,
                                                 repro_procs, parse_seed_list(repro_seeds));
      std::cout << "rws-fragments: " << repro_algo << " n=" << (repro_n == 0 ? 256 : repro_n)
                << " p=" << repro_procs << ", " << r.runs << " runs\n"
                << "  max fragments              " << r.max_fragments << " (budget 2S+1 = "
                << r.budget_at_max << ")\n"
                << "  runs over budget           " << r.violations << "\n"
                << (r.pass ? "PASS" : "FAIL") << "\n";
      return r.pass ? 0 : kExitRepro;
    }
    std::cerr << "repro: unknown pattern " << which
              << " (want example-5.1 or rws-fragments)\n";
    return kExitSpec;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSpec;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

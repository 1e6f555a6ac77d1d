#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "forksim/experiment.hpp"
#include "forksim/sim.hpp"
#include "json.hpp"

using namespace forksim;
namespace fs = std::filesystem;

namespace {

ExperimentSpec small_spec() {
  ExperimentSpec s;
  s.algo = "scan";
  s.n = 64;
  s.policies = {StealPolicy::WsHead};
  s.procs = {4};
  s.capacities = {1 << 10};
  s.blocks = {8};
  s.seeds = {1, 2, 3};
  return s;
}

fs::path fresh_dir(const char* leaf) {
  fs::path p = fs::temp_directory_path() / leaf;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

// Scripted head steal on scan n=4, two processors, M=64 B=2.
const char* const kGoldenScan4 =
    R"({"time":0,"kind":"exec","proc":0,"node":0}
{"time":0,"kind":"access","proc":0,"node":0,"block":549755813888,"miss":true,"shared":false}
{"time":1,"kind":"steal","proc":1,"victim":0,"fork":0,"deep":false,"stack":1,"pseudo":[]}
{"time":1,"kind":"branch","proc":1,"fork":0,"stack":1,"parent_stack":0}
{"time":1,"kind":"exec","proc":0,"node":1}
{"time":1,"kind":"access","proc":0,"node":1,"block":549755813889,"miss":true,"shared":false}
{"time":2,"kind":"exec","proc":0,"node":2}
{"time":2,"kind":"exec","proc":1,"node":5}
{"time":2,"kind":"access","proc":0,"node":2,"block":0,"miss":true,"shared":true}
{"time":2,"kind":"access","proc":1,"node":5,"block":549756338176,"miss":true,"shared":false}
{"time":3,"kind":"exec","proc":0,"node":3}
{"time":3,"kind":"exec","proc":1,"node":6}
{"time":3,"kind":"access","proc":0,"node":3,"block":0,"miss":false,"shared":true}
{"time":3,"kind":"access","proc":1,"node":6,"block":1,"miss":true,"shared":true}
{"time":4,"kind":"exec","proc":0,"node":4}
{"time":4,"kind":"exec","proc":1,"node":7}
{"time":4,"kind":"access","proc":0,"node":4,"block":549755813889,"miss":false,"shared":false}
{"time":4,"kind":"access","proc":0,"node":4,"block":549755813889,"miss":false,"shared":false}
{"time":4,"kind":"access","proc":0,"node":4,"block":549755813889,"miss":false,"shared":false}
{"time":4,"kind":"access","proc":1,"node":7,"block":1,"miss":false,"shared":true}
{"time":5,"kind":"usurp","proc":1,"join":9}
{"time":5,"kind":"exec","proc":1,"node":8}
{"time":5,"kind":"access","proc":1,"node":8,"block":549756338176,"miss":false,"shared":false}
{"time":5,"kind":"access","proc":1,"node":8,"block":549756338176,"miss":false,"shared":false}
{"time":5,"kind":"access","proc":1,"node":8,"block":549756338176,"miss":false,"shared":false}
{"time":6,"kind":"exec","proc":1,"node":9}
{"time":6,"kind":"access","proc":1,"node":9,"block":549755813888,"miss":true,"shared":false}
{"time":6,"kind":"access","proc":1,"node":9,"block":549755813888,"miss":false,"shared":false}
{"time":6,"kind":"access","proc":1,"node":9,"block":549755813888,"miss":false,"shared":false}
)";

}  // namespace

TEST_CASE("one config with three seeds yields three rows") {
  ExperimentSpec s = small_spec();
  ExperimentOutput out = run_experiment(s, "");
  REQUIRE(out.rows.size() == 3);
  CHECK(out.files.empty());
  Dag d = build_dag("scan", 64, 0);
  CacheConfig cc;
  cc.capacity = 1 << 10;
  cc.block = 8;
  uint64_t q = seq_miss_count(d, cc);
  for (size_t i = 0; i < 3; i++) {
    const ResultRow& r = out.rows[i];
    CHECK(r.algo == "scan");
    CHECK(r.n == 64);
    CHECK(r.p == 4);
    CHECK(r.M == 1024);
    CHECK(r.B == 8);
    CHECK(r.policy == "lru");
    CHECK(r.scheduler == "ws");
    CHECK(r.seed == s.seeds[i]);
    CHECK(r.Q == q);
    CHECK(r.kernels == r.starting + r.finishing + r.pseudo);
    CHECK(r.bound_min == std::min(r.boundA, r.boundB));
    CHECK(r.pass == row_pass(r));
  }
}

TEST_CASE("rows follow the grid order, not completion order") {
  ExperimentSpec s = small_spec();
  s.policies = {StealPolicy::None, StealPolicy::WsHead};
  s.procs = {2, 4};
  s.blocks = {4, 8};
  s.seeds = {7, 9};
  ExperimentOutput out = run_experiment(s, "");
  REQUIRE(out.rows.size() == 16);
  size_t i = 0;
  for (const char* sched : {"seq", "ws"})
    for (uint32_t p : {2u, 4u})
      for (uint32_t b : {4u, 8u})
        for (uint64_t seed : {7u, 9u}) {
          CHECK(out.rows[i].scheduler == sched);
          CHECK(out.rows[i].p == p);
          CHECK(out.rows[i].B == b);
          CHECK(out.rows[i].seed == seed);
          i++;
        }
  // The sequential rows hit no steals and repeat the baseline count.
  for (size_t j = 0; j < 8; j++) {
    CHECK(out.rows[j].S == 0);
    CHECK(out.rows[j].C == out.rows[j].Q);
    CHECK(out.rows[j].starting == 1);
    CHECK(out.rows[j].kernels == 1);
  }
}

TEST_CASE("repeated sweeps write byte-identical files") {
  ExperimentSpec s = small_spec();
  s.want_trace = true;
  s.want_kernels = true;
  fs::path a = fresh_dir("forksim_exp_a");
  fs::path b = fresh_dir("forksim_exp_b");
  ExperimentOutput oa = run_experiment(s, a.string());
  ExperimentOutput ob = run_experiment(s, b.string());
  REQUIRE(oa.files == ob.files);
  REQUIRE(oa.files.front() == "results.csv");
  // 1 results + 3 traces + 3 kernel reports.
  REQUIRE(oa.files.size() == 7);
  for (const std::string& f : oa.files) CHECK(slurp(a / f) == slurp(b / f));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("results csv round-trips and rejects foreign schemas") {
  ExperimentSpec s = small_spec();
  ExperimentOutput out = run_experiment(s, "");
  std::ostringstream os;
  write_results_csv(os, out.rows);
  std::istringstream is(os.str());
  std::vector<ResultRow> back = read_results_csv(is);
  REQUIRE(back.size() == out.rows.size());
  for (size_t i = 0; i < back.size(); i++) {
    CHECK(back[i].algo == out.rows[i].algo);
    CHECK(back[i].seed == out.rows[i].seed);
    CHECK(back[i].S == out.rows[i].S);
    CHECK(back[i].Q == out.rows[i].Q);
    CHECK(back[i].C == out.rows[i].C);
    CHECK(back[i].boundA == doctest::Approx(out.rows[i].boundA));
    CHECK(back[i].pass == out.rows[i].pass);
    CHECK(row_pass(back[i]) == back[i].pass);
  }

  std::istringstream empty("");
  CHECK(read_results_csv(empty).empty());
  std::istringstream header_only(std::string(kResultsHeader) + "\n");
  CHECK(read_results_csv(header_only).empty());
  std::istringstream wrong("algo,n,misses\nscan,4,9\n");
  CHECK_THROWS_AS(read_results_csv(wrong), std::runtime_error);
  std::istringstream short_row(std::string(kResultsHeader) + "\nscan,64\n");
  CHECK_THROWS_AS(read_results_csv(short_row), std::runtime_error);
}

TEST_CASE("trace export lists every event once, time-ordered") {
  Dag d = build_scan_dag(8);
  SchedConfig sc;
  sc.procs = 2;
  sc.policy = StealPolicy::Scripted;
  sc.script.push_back({2, 1, 0, 2, kNoNode});
  CacheConfig cc;
  cc.capacity = 1 << 12;
  cc.block = 2;
  Trace t = run_sim(d, sc, cc);
  std::ostringstream os;
  write_trace_jsonl(os, t);
  std::istringstream is(os.str());
  std::string line;
  size_t lines = 0, steals = 0, usurps = 0;
  uint64_t last_time = 0;
  while (std::getline(is, line)) {
    lines++;
    auto j = nlohmann::json::parse(line);
    uint64_t time = j.at("time").get<uint64_t>();
    CHECK(time >= last_time);
    last_time = time;
    std::string kind = j.at("kind").get<std::string>();
    CHECK(j.contains("proc"));
    if (kind == "steal") {
      steals++;
      CHECK(j.at("deep").get<bool>());
      CHECK(j.at("pseudo").size() == 1);
      CHECK(j.at("pseudo")[0].get<uint64_t>() == 0);
    }
    if (kind == "usurp") usurps++;
    // Keys stay in the documented order.
    CHECK(line.rfind("{\"time\":", 0) == 0);
  }
  CHECK(lines == t.execs.size() + t.accesses.size() + t.steals.size() + t.branches.size() +
                     t.usurps.size());
  CHECK(steals == 1);
  CHECK(usurps == 1);
}

TEST_CASE("trace export golden fragment") {
  Dag d = build_scan_dag(4);
  SchedConfig sc;
  sc.procs = 2;
  sc.policy = StealPolicy::Scripted;
  sc.script.push_back({1, 1, 0, 1, kNoNode});
  CacheConfig cc;
  cc.capacity = 64;
  cc.block = 2;
  Trace t = run_sim(d, sc, cc);
  std::ostringstream os;
  write_trace_jsonl(os, t);
  CHECK(os.str() == kGoldenScan4);
}

TEST_CASE("tall cache is enforced unless waived") {
  ExperimentSpec s = small_spec();
  s.capacities = {16};
  s.blocks = {8};
  CHECK_THROWS_AS(run_experiment(s, ""), std::invalid_argument);
  s.allow_short_cache = true;
  ExperimentOutput out = run_experiment(s, "");
  CHECK(out.rows.size() == 3);

  ExperimentSpec bad = small_spec();
  bad.algo = "nonesuch";
  CHECK_THROWS_AS(validate_spec(bad), std::invalid_argument);
  bad = small_spec();
  bad.seeds.clear();
  CHECK_THROWS_AS(validate_spec(bad), std::invalid_argument);
  bad = small_spec();
  bad.m2 = 8;
  CHECK_THROWS_AS(validate_spec(bad), std::invalid_argument);
  bad = small_spec();
  bad.blocks = {0};
  CHECK_THROWS_AS(validate_spec(bad), std::invalid_argument);
  bad = small_spec();
  bad.procs = {0};
  CHECK_THROWS_AS(validate_spec(bad), std::invalid_argument);
  bad = small_spec();
  bad.n = 0;
  CHECK_THROWS_AS(validate_spec(bad), std::invalid_argument);
}

TEST_CASE("deep-steal reproduction matches the derived counts") {
  for (uint32_t n : {16u, 256u, 1024u}) {
    Example51Result r = repro_example51(n);
    uint32_t lg = 0;
    while ((1u << lg) < n) lg++;
    CHECK(r.k == lg / 2 - 1);
    CHECK(r.pseudo == r.k);
    CHECK(r.victim_fragments >= r.k);
    CHECK(r.super_kernels == 1);
    CHECK(r.merged_contiguous);
    CHECK(r.pass);
  }
  CHECK_THROWS_AS(repro_example51(4), std::invalid_argument);
  CHECK_THROWS_AS(repro_example51(32), std::invalid_argument);
  CHECK_THROWS_AS(repro_example51(100), std::invalid_argument);
}

TEST_CASE("work-stealing fragment budget holds across seeds") {
  std::vector<uint64_t> seeds;
  for (uint64_t s = 1; s <= 20; s++) seeds.push_back(s);
  RwsFragmentsResult r = repro_rws_fragments("scan", 128, 4, seeds);
  CHECK(r.runs == 20);
  CHECK(r.violations == 0);
  CHECK(r.max_fragments <= r.budget_at_max);
  CHECK(r.pass);
  CHECK_THROWS_AS(repro_rws_fragments("scan", 128, 4, {}), std::invalid_argument);
}

TEST_CASE("report rolls up ratios and keeps overhead medians monotone") {
  ExperimentSpec s = small_spec();
  s.n = 256;
  s.procs = {2, 4, 8};
  std::vector<uint64_t> seeds;
  for (uint64_t i = 1; i <= 15; i++) seeds.push_back(i);
  s.seeds = seeds;
  ExperimentOutput out = run_experiment(s, "");
  REQUIRE(out.rows.size() == 45);
  ReportResult rep = summarize_results(out.rows);
  CHECK(rep.rows == 45);
  REQUIRE(rep.summaries.size() == 1);
  const AlgoSummary& sum = rep.summaries[0];
  CHECK(sum.algo == "scan");
  CHECK(sum.scheduler == "ws");
  CHECK(sum.runs == 45);
  CHECK(sum.fails == 0);
  CHECK(sum.max_ratio_min > 0);
  CHECK(sum.max_ratio_min <= kPassEnvelope);
  REQUIRE(rep.series.size() == 1);
  const PlotSeries& ps = rep.series[0];
  REQUIRE(ps.points.size() >= 2);
  for (size_t i = 1; i < ps.points.size(); i++) {
    CHECK(ps.points[i].S > ps.points[i - 1].S);
    CHECK(ps.points[i].overhead_median >= ps.points[i - 1].overhead_median);
  }

  std::ostringstream os;
  write_summary(os, rep);
  CHECK(os.str().find("rows: 45") != std::string::npos);
  CHECK(os.str().find("scan") != std::string::npos);

  fs::path dir = fresh_dir("forksim_exp_plot");
  std::vector<std::string> files = write_plot_data(rep, dir.string());
  REQUIRE(files.size() == 1);
  CHECK(files[0] == "plot_scan_ws.csv");
  std::string text = slurp(dir / files[0]);
  CHECK(text.rfind("S,runs,overhead_median,overhead_max,envelope_median\n", 0) == 0);
  fs::remove_all(dir);

  ReportResult none = summarize_results({});
  CHECK(none.rows == 0);
  CHECK(none.summaries.empty());
  std::ostringstream os2;
  write_summary(os2, none);
  CHECK(os2.str() == "rows: 0\n");
}

TEST_CASE("seed lists and steal scripts parse") {
  CHECK(parse_seed_list("1..5") == std::vector<uint64_t>{1, 2, 3, 4, 5});
  CHECK(parse_seed_list("7") == std::vector<uint64_t>{7});
  CHECK(parse_seed_list("3,9,2") == std::vector<uint64_t>{3, 9, 2});
  CHECK_THROWS_AS(parse_seed_list("5..3"), std::runtime_error);
  CHECK_THROWS_AS(parse_seed_list("x"), std::runtime_error);
  CHECK_THROWS_AS(parse_seed_list(""), std::runtime_error);

  fs::path p = fs::temp_directory_path() / "forksim_script.txt";
  {
    std::ofstream f(p);
    f << "# one deep steal\n\n2 1 0 2\n4 0 1 1  # trailing note\n";
  }
  std::vector<ScriptedSteal> sc = parse_script_file(p.string());
  REQUIRE(sc.size() == 2);
  CHECK(sc[0].time == 2);
  CHECK(sc[0].thief == 1);
  CHECK(sc[0].victim == 0);
  CHECK(sc[0].position == 2);
  CHECK(sc[0].fork == kNoNode);
  CHECK(sc[1].time == 4);
  CHECK(sc[1].position == 1);
  {
    std::ofstream f(p);
    f << "2 1 0\n";
  }
  CHECK_THROWS_AS(parse_script_file(p.string()), std::runtime_error);
  {
    std::ofstream f(p);
    f << "2 1 0 2 9\n";
  }
  CHECK_THROWS_AS(parse_script_file(p.string()), std::runtime_error);
  fs::remove(p);
  CHECK_THROWS_AS(parse_script_file((fs::temp_directory_path() / "no_such_script").string()),
                  std::runtime_error);
}

TEST_CASE("artifact files land where asked") {
  ExperimentSpec s = small_spec();
  s.seeds = {1};
  s.want_trace = true;
  s.want_kernels = true;
  s.want_dispersal = true;
  fs::path dir = fresh_dir("forksim_exp_art");
  ExperimentOutput out = run_experiment(s, dir.string());
  REQUIRE(out.files.size() == 4);  // results, dispersal, trace, kernels
  CHECK(out.files[0] == "results.csv");
  for (const std::string& f : out.files) CHECK(fs::exists(dir / f));
  bool saw_dispersal = false;
  for (const std::string& f : out.files)
    if (f.rfind("dispersal_", 0) == 0) saw_dispersal = true;
  CHECK(saw_dispersal);
  fs::remove_all(dir);

  // The recursive multiply group is skipped; the flat addition phase
  // still gets swept.
  ExperimentSpec mm = small_spec();
  mm.algo = "mm-log2n";
  mm.n = 8;
  mm.seeds = {1};
  mm.want_dispersal = true;
  fs::path dir2 = fresh_dir("forksim_exp_art2");
  ExperimentOutput out2 = run_experiment(mm, dir2.string());
  REQUIRE(out2.files.size() == 2);
  CHECK(out2.files[0] == "results.csv");
  CHECK(out2.files[1].rfind("dispersal_mm-log2n-n8_B8_t", 0) == 0);
  fs::remove_all(dir2);
}

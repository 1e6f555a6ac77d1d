#include "forksim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "forksim/analysis.hpp"
#include "forksim/bounds.hpp"
#include "forksim/dispersal.hpp"
#include "forksim/kernels.hpp"
#include "json.hpp"

namespace forksim {

namespace {

const char* const kKnownAlgos[] = {"scan",      "sum",       "prefix-naive",
                                   "prefix-local", "transpose", "mm-depthn",
                                   "mm-log2n",  "strassen-shape", "fft"};

bool known_algo(const std::string& tag) {
  for (const char* a : kKnownAlgos)
    if (tag == a) return true;
  return false;
}

// Closed forms take the element count; the CLI's n is the side length
// for transpose.
double formula_size(const ExperimentSpec& spec) {
  if (spec.algo == "transpose") {
    uint64_t cols = spec.m2 == 0 ? spec.n : spec.m2;
    return double(spec.n) * double(cols);
  }
  return double(spec.n);
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

uint64_t to_u64(const std::string& s, const char* what) {
  size_t pos = 0;
  uint64_t v;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error(std::string("bad ") + what + ": " + s);
  }
  if (pos != s.size()) throw std::runtime_error(std::string("bad ") + what + ": " + s);
  return v;
}

double to_double(const std::string& s, const char* what) {
  size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error(std::string("bad ") + what + ": " + s);
  }
  if (pos != s.size()) throw std::runtime_error(std::string("bad ") + what + ": " + s);
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  size_t k = v.size();
  if (k == 0) return 0;
  return k % 2 ? v[k / 2] : (v[k / 2 - 1] + v[k / 2]) / 2;
}

ResultRow measure_row(const Dag& d, const ExperimentSpec& spec, const Trace& t, uint64_t q) {
  ResultRow r;
  r.algo = spec.algo;
  r.n = spec.n;
  r.p = t.procs;
  r.M = t.capacity;
  r.B = t.block;
  r.policy = t.belady ? "belady" : "lru";
  r.scheduler = policy_name(t.policy);
  r.seed = t.seed;
  r.S = t.steal_count();
  r.Q = q;
  r.C = t.misses;

  auto parts = partition_task_kernels(d, t);
  KernelCensus census = kernel_census(parts, t);
  r.starting = census.starting;
  r.finishing = census.finishing;
  r.pseudo = census.pseudo;
  r.kernels = census.total();
  auto merged = merge_super_finishing(d, t);
  for (const TaskKernel& k : merged)
    if (k.kind == KernelKind::SuperFinishing) r.super++;

  BoundRow row = bound_row_for(spec.algo);
  BoundParams bp;
  bp.n = formula_size(spec);
  bp.S = double(r.S);
  bp.M = double(r.M);
  bp.B = double(r.B);
  bp.Q = double(q);
  r.boundA = eval_bound(row, BoundFormula::BoundA, bp, 1.0);
  r.boundB = eval_bound(row, BoundFormula::BoundB, bp, 1.0);
  r.bound_min = std::min(r.boundA, r.boundB);
  bool recursive = row == BoundRow::MatMulGep || row == BoundRow::Strassen ||
                   row == BoundRow::FftSortRank;
  if (recursive) {
    bp.xsum = r.S == 0 ? 0.0
                       : worst_case_xsum(spec.algo, bp.n, double(r.S),
                                         xsum_calibration(spec.algo));
    r.xsum_bound = eval_bound(row, BoundFormula::Theorem2, bp, 1.0);
  } else {
    r.xsum_bound = eval_bound(row, BoundFormula::Theorem2K1, bp, 1.0);
  }
  r.pass = row_pass(r);
  return r;
}

DispersalModel dispersal_model_for(const std::string& algo) {
  if (algo == "scan" || algo == "sum" || algo == "prefix-local") return DispersalModel::Constant;
  if (algo == "prefix-naive") return DispersalModel::Log;
  return DispersalModel::Sqrt;
}

// The root when its body is a pure fork tree, else whichever top-level
// phases are.
std::vector<int32_t> sweepable_tasks(const Dag& d) {
  std::vector<int32_t> out;
  auto usable = [&](int32_t task) {
    try {
      return !fork_tree_inorder(d, task).empty();
    } catch (const std::exception&) {
      return false;
    }
  };
  if (usable(d.root_task)) {
    out.push_back(d.root_task);
    return out;
  }
  for (int32_t c : d.tasks[d.root_task].children)
    if (usable(c)) out.push_back(c);
  return out;
}

std::string run_stub(const ExperimentSpec& spec, StealPolicy pol, uint32_t p, uint64_t M,
                     uint32_t B, uint64_t seed) {
  std::ostringstream os;
  os << spec.algo << "-n" << spec.n;
  if (spec.m2 != 0) os << "x" << spec.m2;
  os << "_" << policy_name(pol) << "_p" << p << "_M" << M << "_B" << B << "_s" << seed;
  return os.str();
}

}  // namespace

void validate_spec(const ExperimentSpec& spec) {
  if (!known_algo(spec.algo)) throw std::invalid_argument("unknown algo: " + spec.algo);
  if (spec.n < 1) throw std::invalid_argument("n must be at least 1");
  if (spec.m2 != 0 && spec.algo != "transpose")
    throw std::invalid_argument("m applies to transpose only");
  if (spec.policies.empty()) throw std::invalid_argument("no scheduler policy given");
  if (spec.procs.empty()) throw std::invalid_argument("no processor count given");
  for (uint32_t p : spec.procs)
    if (p < 1) throw std::invalid_argument("processor count must be at least 1");
  if (spec.capacities.empty()) throw std::invalid_argument("no cache capacity given");
  if (spec.blocks.empty()) throw std::invalid_argument("no block size given");
  for (uint32_t b : spec.blocks)
    if (b < 1) throw std::invalid_argument("block size must be at least 1");
  for (uint64_t m : spec.capacities) {
    if (m < 1) throw std::invalid_argument("cache capacity must be at least 1");
    if (!spec.allow_short_cache)
      for (uint32_t b : spec.blocks)
        if (m < uint64_t(b) * b)
          throw std::invalid_argument("tall cache violated: M=" + std::to_string(m) +
                                      " < B*B with B=" + std::to_string(b) +
                                      " (pass --no-tall-cache to waive)");
  }
  if (spec.seeds.empty()) throw std::invalid_argument("no seeds given");
}

bool row_pass(const ResultRow& r) {
  return double(r.C) <= kPassEnvelope * r.bound_min;
}

const char* const kResultsHeader =
    "algo,n,p,M,B,policy,scheduler,seed,S,Q,C,"
    "starting,finishing,pseudo,super,kernels,"
    "boundA,boundB,bound_min,xsum_bound,pass";

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << kResultsHeader << "\n";
  for (const ResultRow& r : rows) {
    os << r.algo << "," << r.n << "," << r.p << "," << r.M << "," << r.B << "," << r.policy
       << "," << r.scheduler << "," << r.seed << "," << r.S << "," << r.Q << "," << r.C << ","
       << r.starting << "," << r.finishing << "," << r.pseudo << "," << r.super << ","
       << r.kernels << "," << fmt_double(r.boundA) << "," << fmt_double(r.boundB) << ","
       << fmt_double(r.bound_min) << "," << fmt_double(r.xsum_bound) << "," << (r.pass ? 1 : 0)
       << "\n";
  }
}

std::vector<ResultRow> read_results_csv(std::istream& is) {
  std::vector<ResultRow> rows;
  std::string line;
  if (!std::getline(is, line)) return rows;  // empty file, no rows
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsHeader)
    throw std::runtime_error("results schema mismatch: expected header \"" +
                             std::string(kResultsHeader) + "\", got \"" + line + "\"");
  size_t lineno = 1;
  while (std::getline(is, line)) {
    lineno++;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split(line, ',');
    if (f.size() != 21)
      throw std::runtime_error("results row " + std::to_string(lineno) + ": expected 21 fields, got " +
                               std::to_string(f.size()));
    ResultRow r;
    r.algo = f[0];
    r.n = uint32_t(to_u64(f[1], "n"));
    r.p = uint32_t(to_u64(f[2], "p"));
    r.M = to_u64(f[3], "M");
    r.B = uint32_t(to_u64(f[4], "B"));
    r.policy = f[5];
    r.scheduler = f[6];
    r.seed = to_u64(f[7], "seed");
    r.S = to_u64(f[8], "S");
    r.Q = to_u64(f[9], "Q");
    r.C = to_u64(f[10], "C");
    r.starting = uint32_t(to_u64(f[11], "starting"));
    r.finishing = uint32_t(to_u64(f[12], "finishing"));
    r.pseudo = uint32_t(to_u64(f[13], "pseudo"));
    r.super = uint32_t(to_u64(f[14], "super"));
    r.kernels = uint32_t(to_u64(f[15], "kernels"));
    r.boundA = to_double(f[16], "boundA");
    r.boundB = to_double(f[17], "boundB");
    r.bound_min = to_double(f[18], "bound_min");
    r.xsum_bound = to_double(f[19], "xsum_bound");
    r.pass = to_u64(f[20], "pass") != 0;
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_trace_jsonl(std::ostream& os, const Trace& t) {
  using json = nlohmann::ordered_json;
  // (time, kind rank, index within kind): steals and stack events come
  // before the executions of the same step.
  struct Key {
    uint64_t time;
    int rank;
    size_t idx;
  };
  std::vector<Key> keys;
  keys.reserve(t.steals.size() + t.branches.size() + t.usurps.size() + t.execs.size() +
               t.accesses.size());
  for (size_t i = 0; i < t.steals.size(); i++) keys.push_back({t.steals[i].time, 0, i});
  for (size_t i = 0; i < t.branches.size(); i++) keys.push_back({t.branches[i].time, 1, i});
  for (size_t i = 0; i < t.usurps.size(); i++) keys.push_back({t.usurps[i].time, 2, i});
  for (size_t i = 0; i < t.execs.size(); i++) keys.push_back({t.execs[i].time, 3, i});
  for (size_t i = 0; i < t.accesses.size(); i++) keys.push_back({t.accesses[i].time, 4, i});
  std::stable_sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
    if (a.time != b.time) return a.time < b.time;
    if (a.rank != b.rank) return a.rank < b.rank;
    return a.idx < b.idx;
  });
  for (const Key& k : keys) {
    json j;
    j["time"] = k.time;
    switch (k.rank) {
      case 0: {
        const StealRec& s = t.steals[k.idx];
        j["kind"] = "steal";
        j["proc"] = s.thief;
        j["victim"] = s.victim;
        j["fork"] = s.fork;
        j["deep"] = s.deep;
        j["stack"] = s.stack;
        j["pseudo"] = s.pseudo;
        break;
      }
      case 1: {
        const BranchRec& b = t.branches[k.idx];
        j["kind"] = "branch";
        j["proc"] = b.proc;
        j["fork"] = b.fork;
        j["stack"] = b.stack;
        j["parent_stack"] = b.parent_stack;
        break;
      }
      case 2: {
        const UsurpRec& u = t.usurps[k.idx];
        j["kind"] = "usurp";
        j["proc"] = u.proc;
        j["join"] = u.join;
        break;
      }
      case 3: {
        const ExecRec& e = t.execs[k.idx];
        j["kind"] = "exec";
        j["proc"] = e.proc;
        j["node"] = e.node;
        break;
      }
      default: {
        const AccessRec& a = t.accesses[k.idx];
        j["kind"] = "access";
        j["proc"] = a.proc;
        j["node"] = a.node;
        j["block"] = a.block;
        j["miss"] = a.miss;
        j["shared"] = a.shared;
        break;
      }
    }
    os << j.dump() << "\n";
  }
}

ExperimentOutput run_experiment(const ExperimentSpec& spec, const std::string& out_dir) {
  validate_spec(spec);
  Dag d = build_dag(spec.algo, spec.n, spec.m2);
  namespace fs = std::filesystem;
  bool emit = !out_dir.empty();
  if (emit) fs::create_directories(out_dir);
  auto open_artifact = [&](const std::string& name) {
    std::ofstream f(fs::path(out_dir) / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (fs::path(out_dir) / name).string());
    return f;
  };

  ExperimentOutput out;
  std::vector<std::string> artifacts;
  std::map<std::pair<uint64_t, uint32_t>, uint64_t> q_cache;
  std::set<uint32_t> dispersal_done;
  for (StealPolicy pol : spec.policies) {
    for (uint32_t p : spec.procs) {
      for (uint64_t M : spec.capacities) {
        for (uint32_t B : spec.blocks) {
          CacheConfig cc;
          cc.capacity = M;
          cc.block = B;
          cc.require_tall = !spec.allow_short_cache;
          auto qk = std::make_pair(M, B);
          auto it = q_cache.find(qk);
          uint64_t q = it != q_cache.end() ? it->second
                                           : (q_cache[qk] = seq_miss_count(d, cc));
          if (emit && spec.want_dispersal && dispersal_done.insert(B).second) {
            DispersalModel dm = dispersal_model_for(spec.algo);
            for (int32_t task : sweepable_tasks(d)) {
              auto samples = dispersal_sweep(d, task, B);
              DispersalFit fit = fit_dispersal(samples, dm, B);
              std::ostringstream name;
              name << "dispersal_" << spec.algo << "-n" << spec.n;
              if (spec.m2 != 0) name << "x" << spec.m2;
              name << "_B" << B << "_t" << task << ".csv";
              auto f = open_artifact(name.str());
              write_dispersal_csv(f, spec.algo, spec.n, B, samples, dm, fit.c);
              artifacts.push_back(name.str());
            }
          }
          for (uint64_t seed : spec.seeds) {
            SchedConfig sc;
            sc.procs = p;
            sc.policy = pol;
            sc.seed = seed;
            sc.miss_penalty = spec.miss_penalty;
            sc.steal_latency = spec.steal_latency;
            sc.script = spec.script;
            Trace t = run_sim(d, sc, cc);
            out.rows.push_back(measure_row(d, spec, t, q));
            if (emit && spec.want_trace) {
              std::string name = "trace_" + run_stub(spec, pol, p, M, B, seed) + ".jsonl";
              auto f = open_artifact(name);
              write_trace_jsonl(f, t);
              artifacts.push_back(name);
            }
            if (emit && spec.want_kernels) {
              std::string name = "kernels_" + run_stub(spec, pol, p, M, B, seed) + ".csv";
              auto f = open_artifact(name);
              write_kernel_report(d, t, partition_task_kernels(d, t), f);
              artifacts.push_back(name);
            }
          }
        }
      }
    }
  }
  if (emit) {
    auto f = open_artifact("results.csv");
    write_results_csv(f, out.rows);
    out.files.push_back("results.csv");
  }
  out.files.insert(out.files.end(), artifacts.begin(), artifacts.end());
  return out;
}

ReportResult summarize_results(const std::vector<ResultRow>& rows) {
  ReportResult res;
  res.rows = rows.size();
  std::map<std::pair<std::string, std::string>, std::vector<const ResultRow*>> groups;
  for (const ResultRow& r : rows) groups[{r.algo, r.scheduler}].push_back(&r);
  for (const auto& [key, members] : groups) {
    AlgoSummary s;
    s.algo = key.first;
    s.scheduler = key.second;
    s.runs = members.size();
    std::map<uint64_t, std::vector<std::pair<double, double>>> by_s;
    for (const ResultRow* r : members) {
      if (!r->pass) s.fails++;
      s.max_S = std::max(s.max_S, r->S);
      if (r->boundA > 0) s.max_ratio_a = std::max(s.max_ratio_a, double(r->C) / r->boundA);
      if (r->bound_min > 0)
        s.max_ratio_min = std::max(s.max_ratio_min, double(r->C) / r->bound_min);
      by_s[r->S].push_back({double(r->C) - double(r->Q), r->bound_min - double(r->Q)});
    }
    PlotSeries ps;
    ps.algo = s.algo;
    ps.scheduler = s.scheduler;
    for (const auto& [sv, cells] : by_s) {
      PlotPoint pt;
      pt.S = sv;
      pt.runs = cells.size();
      std::vector<double> over, env;
      for (const auto& [o, e] : cells) {
        over.push_back(o);
        env.push_back(e);
        pt.overhead_max = std::max(pt.overhead_max, o);
      }
      pt.overhead_median = median(over);
      pt.envelope_median = median(env);
      ps.points.push_back(pt);
    }
    res.summaries.push_back(std::move(s));
    res.series.push_back(std::move(ps));
  }
  return res;
}

void write_summary(std::ostream& os, const ReportResult& r) {
  os << "rows: " << r.rows << "\n";
  if (r.summaries.empty()) return;
  os << std::left << std::setw(16) << "algo" << std::setw(14) << "scheduler" << std::right
     << std::setw(6) << "runs" << std::setw(7) << "fails" << std::setw(7) << "maxS"
     << std::setw(14) << "C/boundA" << std::setw(14) << "C/minbound" << "\n";
  for (const AlgoSummary& s : r.summaries) {
    os << std::left << std::setw(16) << s.algo << std::setw(14) << s.scheduler << std::right
       << std::setw(6) << s.runs << std::setw(7) << s.fails << std::setw(7) << s.max_S
       << std::setw(14) << std::fixed << std::setprecision(4) << s.max_ratio_a << std::setw(14)
       << s.max_ratio_min << "\n";
    os.unsetf(std::ios::fixed);
  }
}

std::vector<std::string> write_plot_data(const ReportResult& r, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir.empty() ? "." : out_dir);
  std::vector<std::string> files;
  for (const PlotSeries& ps : r.series) {
    std::string name = "plot_" + ps.algo + "_" + ps.scheduler + ".csv";
    std::ofstream f(fs::path(out_dir.empty() ? "." : out_dir) / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write plot file " + name);
    f << "S,runs,overhead_median,overhead_max,envelope_median\n";
    for (const PlotPoint& pt : ps.points)
      f << pt.S << "," << pt.runs << "," << fmt_double(pt.overhead_median) << ","
        << fmt_double(pt.overhead_max) << "," << fmt_double(pt.envelope_median) << "\n";
    files.push_back(name);
  }
  return files;
}

Example51Result repro_example51(uint32_t n) {
  uint32_t lg = 0;
  while ((1u << lg) < n) lg++;
  if (n < 16 || (1u << lg) != n || lg % 2 != 0)
    throw std::invalid_argument("n must be a power of 4, at least 16");
  Example51Result r;
  r.n = n;
  r.k = lg / 2 - 1;
  Dag d = build_scan_dag(n);
  SchedConfig sc;
  sc.procs = 2;
  sc.policy = StealPolicy::Scripted;
  // k left descents leave k+1 queue entries; taking the deepest marks
  // the k ahead of it.
  sc.script.push_back({r.k, 1, 0, r.k + 1, kNoNode});
  CacheConfig cc;
  cc.capacity = 1 << 12;
  cc.block = 8;
  Trace t = run_sim(d, sc, cc);
  bool one_deep = t.steals.size() == 1 && t.steals[0].deep;
  if (one_deep) r.pseudo = uint32_t(t.steals[0].pseudo.size());
  r.victim_fragments = count_fragments(d, t, 0);
  r.merged_contiguous = true;
  for (const TaskKernel& k : merge_super_finishing(d, t)) {
    if (k.kind != KernelKind::SuperFinishing) continue;
    r.super_kernels++;
    if (!contiguity_check(k).pass) r.merged_contiguous = false;
  }
  r.pass = one_deep && r.pseudo == r.k && r.victim_fragments >= r.k && r.super_kernels >= 1 &&
           r.merged_contiguous;
  return r;
}

RwsFragmentsResult repro_rws_fragments(const std::string& algo, uint32_t n, uint32_t procs,
                                       const std::vector<uint64_t>& seeds) {
  if (seeds.empty()) throw std::invalid_argument("no seeds given");
  Dag d = build_dag(algo, n, 0);
  CacheConfig cc;
  cc.capacity = 1 << 12;
  cc.block = 8;
  RwsFragmentsResult r;
  for (uint64_t seed : seeds) {
    SchedConfig sc;
    sc.procs = procs;
    sc.policy = StealPolicy::WsHead;
    sc.seed = seed;
    Trace t = run_sim(d, sc, cc);
    uint64_t frags = total_fragments(d, t);
    uint64_t budget = 2 * t.steal_count() + 1;
    if (frags > r.max_fragments) {
      r.max_fragments = frags;
      r.budget_at_max = budget;
    }
    if (frags > budget) r.violations++;
    r.runs++;
  }
  r.pass = r.violations == 0;
  return r;
}

std::vector<uint64_t> parse_seed_list(const std::string& text) {
  std::vector<uint64_t> out;
  auto range = text.find("..");
  if (range != std::string::npos) {
    uint64_t a = to_u64(text.substr(0, range), "seed");
    uint64_t b = to_u64(text.substr(range + 2), "seed");
    if (b < a) throw std::runtime_error("seed range is backwards: " + text);
    if (b - a >= 1000000) throw std::runtime_error("seed range too wide: " + text);
    for (uint64_t s = a; s <= b; s++) out.push_back(s);
    return out;
  }
  for (const std::string& piece : split(text, ','))
    out.push_back(to_u64(piece, "seed"));
  return out;
}

std::vector<ScriptedSteal> parse_script_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read script file " + path);
  std::vector<ScriptedSteal> script;
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    lineno++;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream is(line);
    ScriptedSteal s;
    if (!(is >> s.time)) {
      std::string rest;
      if (is.clear(), is >> rest)
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad steal line");
      continue;  // blank
    }
    if (!(is >> s.thief >> s.victim >> s.position))
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected `time thief victim position`");
    std::string extra;
    if (is >> extra)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": trailing text");
    script.push_back(s);
  }
  return script;
}

}  // namespace forksim

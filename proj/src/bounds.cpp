#include "forksim/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace forksim {

namespace {

const double kLambda = std::log2(7.0);

// Log arguments are clamped to 2 so every logarithm is >= 1 and the
// formulas stay finite and monotone at extreme parameter ratios.
double log2c(double v) { return std::log2(std::max(v, 2.0)); }

void require_params(const BoundParams& p, double c) {
  if (p.n < 0 || p.m < 0 || p.S < 0 || p.M < 0 || p.Q < 0 || p.xsum < 0 || c < 0)
    throw std::invalid_argument("bound evaluation: negative parameter");
  if (p.B < 1) throw std::invalid_argument("bound evaluation: block size must be at least 1");
}

void require_cache(const BoundParams& p) {
  if (p.M < 1) throw std::invalid_argument("bound evaluation: cache size must be at least 1");
}

double seq_cache(BoundRow row, const BoundParams& p) {
  switch (row) {
    case BoundRow::ScanPrefix:
    case BoundRow::Transpose:
      return p.n / p.B;
    case BoundRow::MatMulGep:
      require_cache(p);
      return p.n * p.n * p.n / (p.B * std::sqrt(p.M));
    case BoundRow::Strassen:
      require_cache(p);
      return std::pow(p.n, kLambda) / (p.B * std::pow(p.M, kLambda / 2 - 1));
    case BoundRow::FftSortRank:
      require_cache(p);
      return p.n / p.B * log2c(p.n) / log2c(p.M);
    case BoundRow::Connectivity:
      require_cache(p);
      return (p.n + p.m) / p.B * log2c(p.n) / log2c(p.M);
    case BoundRow::Lcs:
      require_cache(p);
      return p.n * p.n / (p.B * p.M);
  }
  throw std::invalid_argument("bound evaluation: unknown row");
}

double bound_b(BoundRow row, const BoundParams& p) {
  if (p.S == 0) return p.Q;
  double sb = p.S * p.B;
  switch (row) {
    case BoundRow::ScanPrefix:
      return p.Q + p.S;
    case BoundRow::Transpose:
      return p.Q + sb;
    case BoundRow::MatMulGep:
      return p.Q + p.n * p.n / p.B * std::cbrt(p.S) + sb;
    case BoundRow::Strassen:
      return p.Q + p.n * p.n / p.B * std::pow(p.S, 1 - 2 / kLambda) + sb;
    case BoundRow::FftSortRank: {
      double ln = log2c(p.n);
      return p.Q + p.n / p.B * ln / log2c(p.n * ln / p.S) + sb;
    }
    case BoundRow::Connectivity: {
      double ln = log2c(p.n);
      return p.Q + (p.n + p.m) / p.B * ln * ln / log2c((p.n + p.m) * ln / p.S) + sb;
    }
    case BoundRow::Lcs:
      return p.Q + p.n / p.B * std::sqrt(p.S) + sb;
  }
  throw std::invalid_argument("bound evaluation: unknown row");
}

double bound_a(const BoundParams& p) {
  require_cache(p);
  return p.Q + p.M / p.B * p.S;
}

}  // namespace

BoundRow bound_row_for(const std::string& tag) {
  if (tag == "scan" || tag == "sum" || tag == "prefix-naive" || tag == "prefix-local")
    return BoundRow::ScanPrefix;
  if (tag == "transpose") return BoundRow::Transpose;
  if (tag == "mm-depthn" || tag == "mm-log2n" || tag == "gep") return BoundRow::MatMulGep;
  if (tag == "strassen" || tag == "strassen-shape") return BoundRow::Strassen;
  if (tag == "fft" || tag == "spms" || tag == "lr") return BoundRow::FftSortRank;
  if (tag == "connectivity") return BoundRow::Connectivity;
  if (tag == "lcs") return BoundRow::Lcs;
  throw std::invalid_argument("unknown algorithm tag: " + tag);
}

const char* bound_row_name(BoundRow row) {
  switch (row) {
    case BoundRow::ScanPrefix: return "scan-prefix";
    case BoundRow::Transpose: return "transpose";
    case BoundRow::MatMulGep: return "mm-gep";
    case BoundRow::Strassen: return "strassen";
    case BoundRow::FftSortRank: return "fft-sort-lr";
    case BoundRow::Connectivity: return "connectivity";
    case BoundRow::Lcs: return "lcs";
  }
  return "?";
}

double eval_bound(BoundRow row, BoundFormula f, const BoundParams& p, double c) {
  require_params(p, c);
  double expr = 0;
  switch (f) {
    case BoundFormula::SeqCache:
      expr = seq_cache(row, p);
      break;
    case BoundFormula::BoundA:
      expr = bound_a(p);
      break;
    case BoundFormula::BoundB:
      expr = bound_b(row, p);
      break;
    case BoundFormula::BoundMin:
      expr = std::min(bound_a(p), bound_b(row, p));
      break;
    case BoundFormula::Theorem1:
      require_cache(p);
      expr = 2 * p.Q + p.S * p.M / p.B;
      break;
    case BoundFormula::Theorem2K1:
      expr = p.Q + p.S * p.B;
      break;
    case BoundFormula::Theorem2:
      expr = p.Q + p.xsum / p.B + p.S * p.B;
      break;
    case BoundFormula::BpConstant:
      expr = p.n / p.B + p.S;
      break;
    case BoundFormula::BpSqrt:
      expr = p.n / p.B + p.S * p.B;
      break;
  }
  return c * expr;
}

double worst_case_xsum(const std::string& tag, double n, double l, double c) {
  if (l < 1) throw std::invalid_argument("worst_case_xsum: need at least one task");
  if (n < 0 || c < 0) throw std::invalid_argument("worst_case_xsum: negative parameter");
  switch (bound_row_for(tag)) {
    case BoundRow::MatMulGep:
      return c * n * n * std::cbrt(l);
    case BoundRow::Strassen:
      return c * n * n * std::pow(l, 1 - 2 / kLambda);
    case BoundRow::FftSortRank: {
      double ln = log2c(n);
      return c * n * ln / log2c(n * ln / l);
    }
    case BoundRow::Lcs:
      return c * n * std::sqrt(l);
    default:
      throw std::invalid_argument("worst_case_xsum: no recursive-task form for " + tag);
  }
}

double xsum_calibration(const std::string& tag) {
  switch (bound_row_for(tag)) {
    case BoundRow::MatMulGep: return 24.0;
    case BoundRow::Strassen: return 40.0;
    case BoundRow::FftSortRank: return 24.0;
    default:
      throw std::invalid_argument("xsum_calibration: no constant for " + tag);
  }
}

std::vector<uint64_t> recursive_xsizes(const Dag& d) {
  SizeTable t = compute_sizes(d);
  std::vector<uint64_t> xs;
  for (size_t i = 0; i < d.tasks.size(); i++)
    if (d.tasks[i].rec_instance || static_cast<int32_t>(i) == d.root_task)
      xs.push_back(t.xsize[i]);
  std::sort(xs.begin(), xs.end(), std::greater<uint64_t>());
  return xs;
}

uint64_t top_xsum(const Dag& d, uint64_t l) {
  std::vector<uint64_t> xs = recursive_xsizes(d);
  if (l > xs.size()) l = xs.size();
  uint64_t s = 0;
  for (uint64_t i = 0; i < l; i++) s += xs[i];
  return s;
}

double time_model(double t1, double tinf, double c_misses, double steals, double idle,
                  double miss_penalty, double steal_latency, double p) {
  if (p < 1) throw std::invalid_argument("time_model: need at least one processor");
  if (t1 < 0 || tinf < 0 || c_misses < 0 || steals < 0 || idle < 0 || miss_penalty < 0 ||
      steal_latency < 0)
    throw std::invalid_argument("time_model: negative parameter");
  return (t1 + miss_penalty * c_misses + steal_latency * steals + idle) / p +
         miss_penalty * tinf;
}

double bp_overhead_bound(DispersalModel model, double n, double steals, double block_words,
                         double c) {
  if (n < 0 || steals < 0 || c < 0)
    throw std::invalid_argument("bp_overhead_bound: negative parameter");
  if (block_words < 1)
    throw std::invalid_argument("bp_overhead_bound: block size must be at least 1");
  double base = n / block_words;
  if (model == DispersalModel::Constant) return c * (base + steals);
  return c * (base + steals * block_words);
}

bool bp_bound_check(double measured_c, double q, double n, double steals, DispersalModel model,
                    uint32_t block_words, double c) {
  return measured_c - q <= bp_overhead_bound(model, n, steals, block_words, c);
}

ComplianceReport check_compliance(const Dag& d, double kappa_calls) {
  SizeTable t = compute_sizes(d);
  ComplianceReport rep;
  const double inf = std::numeric_limits<double>::infinity();
  auto ratio = [&](uint64_t child, uint64_t parent) {
    if (parent > 0) return double(child) / double(parent);
    return child > 0 ? inf : 0.0;
  };
  for (size_t i = 0; i < d.tasks.size(); i++) {
    if (t.xsize[i] < t.size[i]) throw std::runtime_error("extended size below size");
    if (!(d.tasks[i].rec_instance || static_cast<int32_t>(i) == d.root_task)) continue;
    uint64_t calls = 0;
    for (int32_t g : d.tasks[i].children) {
      if (d.tasks[g].kind != TaskKind::RecGroup) continue;
      for (int32_t inst : d.tasks[g].children) {
        calls++;
        CompliancePair pr;
        pr.parent = static_cast<int32_t>(i);
        pr.child = inst;
        pr.size_ratio = ratio(t.size[inst], t.size[i]);
        pr.x_ratio = ratio(t.xsize[inst], t.xsize[i]);
        double worst = std::max(pr.size_ratio, pr.x_ratio);
        if (worst > rep.alpha) {
          rep.alpha = worst;
          rep.witness_parent = pr.parent;
          rep.witness_child = pr.child;
        }
        rep.pairs.push_back(pr);
      }
    }
    if (calls > 0) rep.max_call_ratio = std::max(rep.max_call_ratio, ratio(calls, t.size[i]));
  }
  rep.compliant = rep.alpha < 1.0 && rep.max_call_ratio <= kappa_calls;
  return rep;
}

double max_x_over_size(const Dag& d) {
  SizeTable t = compute_sizes(d);
  double worst = 0;
  for (size_t i = 0; i < d.tasks.size(); i++)
    if (t.size[i] > 0) worst = std::max(worst, double(t.xsize[i]) / double(t.size[i]));
  return worst;
}

}  // namespace forksim

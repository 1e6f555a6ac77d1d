#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "forksim/dag.hpp"
#include "forksim/dispersal.hpp"

namespace forksim {

// Formula families. One row serves every algorithm sharing its closed
// forms; formula-only tags (gep, spms, lr, connectivity, lcs) map here
// too even though no generator ships for them.
enum class BoundRow : uint8_t {
  ScanPrefix,
  Transpose,
  MatMulGep,
  Strassen,
  FftSortRank,
  Connectivity,
  Lcs,
};

BoundRow bound_row_for(const std::string& tag);
const char* bound_row_name(BoundRow row);

// SeqCache is the closed-form sequential column, reporting only; bound
// comparisons always use the measured sequential miss count as Q.
enum class BoundFormula : uint8_t {
  SeqCache,
  BoundA,      // Q + (M/B)*S, every row
  BoundB,      // per-row refined form
  BoundMin,    // min(BoundA, BoundB)
  Theorem1,    // 2Q + S*M/B
  Theorem2K1,  // Q + S*B
  Theorem2,    // Q + xsum/B + S*B
  BpConstant,  // n/B + S
  BpSqrt,      // n/B + S*B
};

struct BoundParams {
  double n = 0;
  double m = 0;     // edge count, Connectivity row only
  double S = 0;
  double M = 0;
  double B = 1;
  double Q = 0;
  double xsum = 0;  // Theorem2 only
};

// Returns c times the selected expression. Rows whose refined form has
// S in a log denominator return c*Q at S = 0 (the steal-free limit);
// negative parameters and B < 1 are rejected.
double eval_bound(BoundRow row, BoundFormula f, const BoundParams& p, double c);

struct BoundExpr {
  BoundRow row = BoundRow::ScanPrefix;
  BoundFormula formula = BoundFormula::BoundMin;
  double c = 1.0;
  double eval(const BoundParams& p) const { return eval_bound(row, formula, p, c); }
};

// Closed-form cap on the sum of extended sizes over l distinct
// recursive tasks of the algorithm at input size n. Only the
// recursively structured families have a form; l >= 1 required.
double worst_case_xsum(const std::string& tag, double n, double l, double c);

// Frozen constant making worst_case_xsum(tag, n, l, c) dominate every
// exhaustive maximum measured on generated instances.
double xsum_calibration(const std::string& tag);

// Extended sizes of the root task and every recursive instance, sorted
// descending: the candidate pool for a task collection.
std::vector<uint64_t> recursive_xsizes(const Dag& d);

// Sum of the l largest candidates, the exhaustive counterpart of
// worst_case_xsum. l is clamped to the pool size.
uint64_t top_xsum(const Dag& d, uint64_t l);

// T_p = (T1 + b*C + s*S + I)/p + b*Tinf
double time_model(double t1, double tinf, double c_misses, double steals, double idle,
                  double miss_penalty, double steal_latency, double p);

// Per-steal overhead cap for a BP computation: c*(n/B + S) when block
// dispersal is constant, c*(n/B + S*B) otherwise (logarithmic growth
// sits inside the square-root envelope).
double bp_overhead_bound(DispersalModel model, double n, double steals, double block_words,
                         double c);
// True when measured_c - q fits under bp_overhead_bound.
bool bp_bound_check(double measured_c, double q, double n, double steals, DispersalModel model,
                    uint32_t block_words, double c);

// Recursion audit: every recursive call must shrink both the size and
// the extended size by a ratio bounded away from 1, and a task of size
// |tau| may make at most kappa_calls*|tau| recursive calls.
struct CompliancePair {
  int32_t parent = -1;
  int32_t child = -1;
  double size_ratio = 0;
  double x_ratio = 0;
};

struct ComplianceReport {
  std::vector<CompliancePair> pairs;   // one per recursive call
  double alpha = 0;                    // worst ratio of either kind
  int32_t witness_parent = -1;
  int32_t witness_child = -1;
  double max_call_ratio = 0;           // recursive calls per unit of caller size
  bool compliant = false;
};

ComplianceReport check_compliance(const Dag& d, double kappa_calls);

// Largest x(tau)/|tau| over tasks with positive size.
double max_x_over_size(const Dag& d);

}  // namespace forksim

#pragma once
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "forksim/dag.hpp"

namespace forksim {

// A window of the inorder traversal of one task's fork tree: `len`
// consecutive fork-tree nodes from inorder index `start`, implicitly
// joined by the mates of the window's forks.
struct ExtendedTask {
  int32_t tree = -1;  // task whose body is the fork tree
  uint32_t start = 0;
  uint32_t len = 0;   // >= 2
};

struct DispersalSample {
  uint64_t r = 0;       // distinct shared words touched
  uint64_t blocks = 0;  // distinct shared blocks touched
};

// The task body's fork tree in inorder: leaves at even positions,
// forks at odd ones. The body must be a pure fork-join tree over
// single compute leaves, none of it inside a child task.
std::vector<NodeId> fork_tree_inorder(const Dag& d, int32_t tree);

// Window covered by the subtree rooted at `root`, a node of the
// task's fork tree.
ExtendedTask subtree_window(const Dag& d, int32_t tree, NodeId root);

// Distinct shared words and blocks the window's nodes plus their
// matching joins touch. Stack accesses do not count.
DispersalSample measure_dispersal(const Dag& d, uint32_t block_words, const ExtendedTask& et);

// One sample per window with len >= 2, ordered by (start, len). The
// parallel and serial variants return identical vectors.
std::vector<DispersalSample> dispersal_sweep(const Dag& d, int32_t tree, uint32_t block_words);
std::vector<DispersalSample> dispersal_sweep_serial(const Dag& d, int32_t tree,
                                                    uint32_t block_words);

// Union sample over the consecutive recursive instances [i..j] of a
// recursive-group task.
DispersalSample recursive_range_sample(const Dag& d, int32_t group, uint32_t i, uint32_t j,
                                       uint32_t block_words);

// Allowance shapes for block counts beyond the compulsory r/B words.
enum class DispersalModel : uint8_t { Constant, Sqrt, Log };

const char* model_name(DispersalModel m);
DispersalModel model_from_name(const std::string& s);

// g(r) evaluated per model: 1, sqrt(r), or log2(max(r/B, 2)).
double dispersal_gain(DispersalModel m, uint64_t r, uint32_t block_words);

// Least c with blocks <= r/B + c * g(r) across all samples.
// max_excess is the largest blocks - r/B seen.
struct DispersalFit {
  double c = 0;
  double max_excess = 0;
};
DispersalFit fit_dispersal(const std::vector<DispersalSample>& samples, DispersalModel m,
                           uint32_t block_words);

// Rows `algo,n,B,r,blocks,model,c`, header included.
void write_dispersal_csv(std::ostream& os, const std::string& algo, uint32_t n,
                         uint32_t block_words, const std::vector<DispersalSample>& samples,
                         DispersalModel m, double c);

}  // namespace forksim

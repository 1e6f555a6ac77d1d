#pragma once
#include <cstdint>
#include <vector>

#include "forksim/dag.hpp"
#include "forksim/sim.hpp"

namespace forksim {

// Maximal runs of nodes with consecutive sequential positions executed
// by one processor, in execution order.
struct Fragment {
  uint32_t proc;
  uint32_t lo, hi;  // sequential positions, inclusive
};

std::vector<Fragment> fragments_of(const Dag& d, const Trace& t);
uint32_t count_fragments(const Dag& d, const Trace& t, uint32_t proc);
uint32_t total_fragments(const Dag& d, const Trace& t);

// Steal-path audit. Every stolen or pseudo-stolen subtask is charged
// to the innermost enclosing stolen / pseudo-stolen / whole-computation
// scope; within each scope there must be a root-to-final path holding
// the parent forks of all charged subtasks.
struct PathResult {
  bool ok = true;
  NodeId scope = kNoNode;      // kNoNode = whole computation
  NodeId fail_fork = kNoNode;  // fork with charged forks on both sides
  std::vector<NodeId> path;
};

PathResult steal_path(const Dag& d, const Trace& t, NodeId scope_fork);

struct PathAudit {
  size_t scopes_checked = 0;
  std::vector<PathResult> failures;
};
PathAudit audit_steal_paths(const Dag& d, const Trace& t);

// The following run over a window [lo, hi] of sequential positions in
// a single-processor trace.

// Distinct blocks the window touches that may carry data from outside
// it. A block is discounted only when every access to it in the window
// lands on a stack segment pushed inside the window and the block
// holds no words of segments pushed outside it.
uint64_t reload_cost(const Dag& d, const Trace& seq, uint32_t lo, uint32_t hi);

// Misses charged to the window inside the full run.
uint64_t embedded_window_misses(const Dag& d, const Trace& seq, uint32_t lo, uint32_t hi);

// Misses when the window's access stream replays alone into a cold
// cache of the same geometry.
uint64_t isolated_window_misses(const Dag& d, const Trace& seq, uint32_t lo, uint32_t hi,
                                bool optimal_replacement);

}  // namespace forksim

#pragma once
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "forksim/dag.hpp"
#include "forksim/sim.hpp"

namespace forksim {

// Inclusive interval of sequential positions.
struct PosSpan {
  uint32_t lo, hi;
};

enum class KernelKind : uint8_t { Starting, Finishing, Pseudo, SuperFinishing };
const char* kernel_kind_name(KernelKind k);

struct TaskKernel {
  KernelKind kind = KernelKind::Starting;
  // 0 for the initial whole-computation kernel, else the 1-based index
  // of the creating steal; steals are numbered by the sequential
  // position of their parent fork, not by wall-clock time.
  uint32_t steal = 0;
  // Sorted, disjoint, non-adjacent; one entry means contiguous.
  std::vector<PosSpan> spans;
  // Pseudo and super-finishing: forks of the member pseudo-stolen
  // tasks in the order the members run sequentially (deepest first).
  // Only the last member may contain later steals.
  std::vector<NodeId> members;
  // A member was hit by two or more later steals; the grouping then
  // keys off the earliest of them.
  bool member_restolen = false;

  uint32_t node_count() const;
  uint32_t first_pos() const { return spans.front().lo; }
  uint32_t last_pos() const { return spans.back().hi; }
};

struct KernelCensus {
  uint32_t starting = 0, finishing = 0, pseudo = 0, super_finishing = 0;
  uint32_t steals = 0;
  uint32_t deep_steals = 0;
  uint32_t total() const { return starting + finishing + pseudo + super_finishing; }
};

// Iteratively splits kernels at each steal, ordered by the sequential
// position of the stolen task's parent fork: the stolen subtask becomes
// a new starting kernel, the portion before it keeps its kernel's kind,
// the portion from the following join on becomes a finishing kernel,
// and on a deep steal the still-enqueued tasks ahead of the stolen one
// group into pseudo kernels, one per maximal run ending in a member a
// later steal hits. Kernels come back sorted by first position.
std::vector<TaskKernel> partition_task_kernels(const Dag& d, const Trace& t);

// Same split, but each pseudo group immediately absorbs the portion of
// its sibling finishing kernel up to the group's last node, forming a
// super-finishing kernel; later steals then split that kernel like any
// other. Every kernel in the result is one contiguous position range.
std::vector<TaskKernel> merge_super_finishing(const Dag& d, const Trace& t);

KernelCensus kernel_census(const std::vector<TaskKernel>& ks, const Trace& t);

struct ContiguityResult {
  bool pass = true;
  // First gap when failing: last position before it, first one after.
  uint32_t gap_lo = 0, gap_hi = 0;
};
ContiguityResult contiguity_check(const TaskKernel& k);

// Distinct processors that executed at least one node of each kernel,
// index-aligned with `ks`.
std::vector<std::vector<uint32_t>> processors_per_kernel(const Dag& d, const Trace& t,
                                                         const std::vector<TaskKernel>& ks);

struct StealHome {
  uint32_t steal = 0;  // 1-based, same numbering as TaskKernel::steal
  NodeId fork = kNoNode;
  int32_t owner = -1;  // innermost recursive instance (or root) owning the fork
};

// Task ids, each list sorted ascending, the three lists disjoint.
struct SpecialTaskSet {
  std::vector<StealHome> steal_owners;
  std::vector<int32_t> type1;  // tasks owning a steal, plus the root
  std::vector<int32_t> type2;  // steals in two called recursions, none owned
  std::vector<int32_t> type3;  // children of type 1/2 with a type 1/2 descendant
  size_t total() const { return type1.size() + type2.size() + type3.size(); }
};
SpecialTaskSet classify_special_tasks(const Dag& d, const Trace& t);

// CSV, one line per kernel: kind,steal_index,node_count,processors,contiguous
void write_kernel_report(const Dag& d, const Trace& t, const std::vector<TaskKernel>& ks,
                         std::ostream& os);

}  // namespace forksim

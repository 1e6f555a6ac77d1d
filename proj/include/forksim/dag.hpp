#pragma once
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "forksim/base.hpp"

namespace forksim {

enum class NodeKind : uint8_t { Compute, Fork, Join };

// One memory reference issued by a node, in issue order.
// Shared refs name (array id, flat element index).
// Stack refs name slot 0 or 1 of the two-word segment pushed by fork
// `owner`; the concrete address is resolved at run time through the
// live segment table, so a usurped join naturally reads another
// processor's stack.
struct MemRef {
  enum Kind : uint8_t { SharedRead, SharedWrite, StackRead, StackWrite };
  Kind kind;
  uint32_t array;  // shared refs only
  uint32_t index;  // shared: element index; stack: owner fork NodeId
  uint8_t slot;    // stack refs only, 0 or 1

  static MemRef shared_read(uint32_t arr, uint32_t idx) { return {SharedRead, arr, idx, 0}; }
  static MemRef shared_write(uint32_t arr, uint32_t idx) { return {SharedWrite, arr, idx, 0}; }
  static MemRef stack_read(NodeId owner, uint8_t slot) { return {StackRead, 0, owner, slot}; }
  static MemRef stack_write(NodeId owner, uint8_t slot) { return {StackWrite, 0, owner, slot}; }
  bool is_stack() const { return kind == StackRead || kind == StackWrite; }
  bool is_write() const { return kind == SharedWrite || kind == StackWrite; }
};

inline constexpr int kMaxRefs = 6;

struct DagNode {
  NodeKind kind = NodeKind::Compute;
  // Compute/Join: `a` is the unique successor (kNoNode at the dag sink).
  // Fork: `a` is the left child (the continuing strand), `b` the right
  // child (the forked task placed on the owner's queue).
  NodeId a = kNoNode;
  NodeId b = kNoNode;
  // Fork: matching join. Join: matching fork.
  NodeId mate = kNoNode;
  uint8_t nref = 0;
  MemRef ref[kMaxRefs];
};

struct ArrayDecl {
  std::string name;
  Addr base = 0;
  uint32_t size = 0;        // words
  int32_t declared_by = -1; // task id, -1 = input/output external to the dag
};

enum class TaskKind : uint8_t {
  Bp,        // balanced binary fork-join tree, O(1) work per node
  Hbp,       // sequence of constituent tasks (hbp_type = its Type)
  RecGroup,  // recursive constituent: fork tree over recursive instances
};

struct TaskDesc {
  TaskKind kind = TaskKind::Bp;
  uint8_t hbp_type = 0;        // Hbp only
  bool rec_instance = false;   // true when this task is one recursive call
  int32_t parent = -1;
  std::vector<int32_t> children;
  NodeId entry = kNoNode;      // first node executed by the task
  NodeId exit = kNoNode;       // last node executed by the task
  NodeId id_lo = 0, id_hi = 0; // node ids form the interval [id_lo, id_hi)
};

class Dag {
 public:
  std::string algo;          // generator tag
  std::string params;        // printable parameter summary
  std::vector<DagNode> nodes;
  std::vector<ArrayDecl> arrays;
  std::vector<TaskDesc> tasks;
  int32_t root_task = -1;
  NodeId entry = kNoNode;
  NodeId exit = kNoNode;

  // Derived tables, filled by finalize().
  std::vector<uint32_t> pos;      // node id -> sequential execution position
  std::vector<NodeId> node_at;    // position -> node id
  std::vector<int32_t> fork_task; // node id -> owning task for forks, -1 otherwise

  size_t size() const { return nodes.size(); }
  const DagNode& at(NodeId v) const { return nodes[v]; }

  // Position interval [lo, hi] covered by the task forked at `f`
  // (f's right subtree up to but excluding f's join).
  std::pair<uint32_t, uint32_t> stolen_span(NodeId f) const {
    return {pos[nodes[f].b], pos[nodes[f].mate] - 1};
  }

  uint64_t shared_words() const;
  void finalize();   // computes pos/node_at/fork_task, checks structure
};

// Thrown (as std::runtime_error) by finalize() on malformed structure.
void validate_dag(const Dag& d);

// Text form: header lines starting with '#', then one line per node:
//   <id> F <left> <right> <join> | <refs>
//   <id> C <succ> | <refs>
//   <id> J <succ> <fork> | <refs>
// Refs: rA[i] / wA[i] for shared, rs<owner>.<slot> / ws<owner>.<slot> for stack.
void dump_dag(const Dag& d, std::ostream& os);
Dag parse_dag(std::istream& is);

// Generators. All splits put ceil(n/2) leaves in the left subtree.
Dag build_scan_dag(uint32_t n);
Dag build_sum_dag(uint32_t n);

enum class PrefixVariant : uint8_t { Naive, Local };
Dag build_prefix_dag(uint32_t n, PrefixVariant v);

Dag build_transpose_dag(uint32_t rows, uint32_t cols);

enum class MmVariant : uint8_t { DepthN, Log2N };
Dag build_mm_dag(uint32_t n, MmVariant v);

Dag build_strassen_shape_dag(uint32_t n);
Dag build_fft_dag(uint32_t n);

// Dispatch by tag: scan sum prefix-naive prefix-local transpose
// mm-depthn mm-log2n strassen-shape fft. cols only affects transpose.
Dag build_dag(const std::string& tag, uint32_t n, uint32_t cols);

// Number of distinct shared words accessed by nodes of `task`,
// excluding arrays declared by the task or a descendant.
uint64_t task_size(const Dag& d, int32_t task);

// task_size plus the sizes of the tasks it directly calls: for each BP
// or Hbp child, its size; for each RecGroup child, the sizes of the
// group's instances.
uint64_t extended_size(const Dag& d, int32_t task);

struct SizeTable {
  std::vector<uint64_t> size;   // per task id
  std::vector<uint64_t> xsize;
};
SizeTable compute_sizes(const Dag& d);

// Checks |tau'| <= alpha|tau| and x(tau') <= alpha x(tau) for every
// recursive instance tau' inside recursive instance tau, plus
// x(tau) >= |tau|. Returns the largest ratio seen (0 if no pairs).
double compliance_ratio(const Dag& d);

}  // namespace forksim

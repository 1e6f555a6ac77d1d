#include <functional>
#include <stdexcept>
#include <string>

#include "forksim/dag.hpp"

namespace forksim {
namespace {

struct Builder {
  Dag d;
  Addr next_base = 0;

  uint32_t add_array(const std::string& name, uint32_t size, int32_t declared_by) {
    ArrayDecl a;
    a.name = name;
    a.base = next_base;
    a.size = size;
    a.declared_by = declared_by;
    next_base += Addr(size + kArrayAlign - 1) / kArrayAlign * kArrayAlign;
    d.arrays.push_back(a);
    return static_cast<uint32_t>(d.arrays.size() - 1);
  }

  int32_t add_task(TaskKind k, int32_t parent, uint8_t type = 0, bool rec = false) {
    TaskDesc t;
    t.kind = k;
    t.parent = parent;
    t.hbp_type = type;
    t.rec_instance = rec;
    t.id_lo = static_cast<NodeId>(d.nodes.size());
    d.tasks.push_back(t);
    int32_t id = static_cast<int32_t>(d.tasks.size() - 1);
    if (parent >= 0) d.tasks[parent].children.push_back(id);
    return id;
  }

  void close_task(int32_t t, NodeId entry, NodeId exit) {
    d.tasks[t].id_hi = static_cast<NodeId>(d.nodes.size());
    d.tasks[t].entry = entry;
    d.tasks[t].exit = exit;
  }

  NodeId node(NodeKind k, std::initializer_list<MemRef> refs) {
    DagNode n;
    n.kind = k;
    for (const MemRef& r : refs) n.ref[n.nref++] = r;
    d.nodes.push_back(n);
    return static_cast<NodeId>(d.nodes.size() - 1);
  }
};

struct Sub {
  NodeId entry, exit;
};

// Context a tree node sees about its parent fork: id, which side this
// node is on, and the parent's leaf interval [plo, phi) with split pm.
struct BpCtx {
  NodeId parent = kNoNode;
  int side = 0;
  uint32_t plo = 0, pm = 0, phi = 0;
};

using LeafFn = std::function<Sub(uint32_t, const BpCtx&)>;
// Ref callbacks run after the subtree is fully built and must not
// create nodes (they receive a live reference into the node vector).
using RefFn = std::function<void(DagNode&, NodeId, uint32_t, uint32_t, const BpCtx&)>;

uint32_t split_at(uint32_t lo, uint32_t hi) { return lo + (hi - lo + 1) / 2; }

void scaffold_fork_refs(DagNode& n, NodeId self) {
  n.ref[n.nref++] = MemRef::stack_write(self, 0);
}

void scaffold_join_refs(DagNode& n, NodeId fork) {
  n.ref[n.nref++] = MemRef::stack_read(fork, 0);
  n.ref[n.nref++] = MemRef::stack_read(fork, 1);
  n.ref[n.nref++] = MemRef::stack_write(fork, 0);
}

// Balanced binary fork-join tree over leaves [lo, hi); ceil(n/2) of
// them go left. frefs/jrefs default to the plain one-write fork and
// two-read one-write join on the fork's own segment.
Sub bp(Builder& b, uint32_t lo, uint32_t hi, const BpCtx& ctx, const LeafFn& leaf,
       const RefFn& frefs = nullptr, const RefFn& jrefs = nullptr) {
  if (hi - lo == 1) return leaf(lo, ctx);
  uint32_t m = split_at(lo, hi);
  NodeId f = b.node(NodeKind::Fork, {});
  BpCtx down{f, 0, lo, m, hi};
  Sub L = bp(b, lo, m, down, leaf, frefs, jrefs);
  down.side = 1;
  Sub R = bp(b, m, hi, down, leaf, frefs, jrefs);
  NodeId j = b.node(NodeKind::Join, {});
  DagNode& fn = b.d.nodes[f];
  fn.a = L.entry;
  fn.b = R.entry;
  fn.mate = j;
  if (frefs) frefs(fn, f, lo, hi, ctx);
  else scaffold_fork_refs(fn, f);
  DagNode& jn = b.d.nodes[j];
  jn.mate = f;
  if (jrefs) jrefs(jn, f, lo, hi, ctx);
  else scaffold_join_refs(jn, f);
  b.d.nodes[L.exit].a = j;
  b.d.nodes[R.exit].a = j;
  return {f, j};
}

void chain(Builder& b, const Sub& from, const Sub& to) { b.d.nodes[from.exit].a = to.entry; }

Dag take(Builder& b, Sub whole) {
  b.d.entry = whole.entry;
  b.d.exit = whole.exit;
  b.d.finalize();
  return std::move(b.d);
}

void require(bool ok, const char* msg) {
  if (!ok) throw std::runtime_error(msg);
}

// Inorder position of the subtree root covering [lo, hi) in a sum
// tree: leaves sit at even slots 2i, the internal node splitting at m
// sits at slot 2m-1.
uint32_t sum_slot(uint32_t lo, uint32_t hi) {
  return hi - lo == 1 ? 2 * lo : 2 * split_at(lo, hi) - 1;
}

}  // namespace

Dag build_scan_dag(uint32_t n) {
  require(n >= 1, "scan: n must be positive");
  Builder b;
  b.d.algo = "scan";
  b.d.params = "n=" + std::to_string(n);
  uint32_t A = b.add_array("A", n, -1);
  int32_t root = b.add_task(TaskKind::Bp, -1);
  b.d.root_task = root;
  Sub s = bp(b, 0, n, {}, [&](uint32_t i, const BpCtx&) {
    NodeId c = b.node(NodeKind::Compute, {MemRef::shared_read(A, i)});
    return Sub{c, c};
  });
  b.close_task(root, s.entry, s.exit);
  return take(b, s);
}

Dag build_sum_dag(uint32_t n) {
  require(n >= 1, "sum: n must be positive");
  Builder b;
  b.d.algo = "sum";
  b.d.params = "n=" + std::to_string(n);
  uint32_t A = b.add_array("A", n, -1);
  uint32_t S = b.add_array("S", 2 * n - 1, -1);
  int32_t root = b.add_task(TaskKind::Bp, -1);
  b.d.root_task = root;
  LeafFn leaf = [&](uint32_t i, const BpCtx& c) {
    NodeId v;
    if (c.parent == kNoNode) {
      v = b.node(NodeKind::Compute, {MemRef::shared_read(A, i), MemRef::shared_write(S, 2 * i)});
    } else {
      v = b.node(NodeKind::Compute,
                 {MemRef::shared_read(A, i),
                  MemRef::stack_write(c.parent, static_cast<uint8_t>(c.side)),
                  MemRef::shared_write(S, 2 * i)});
    }
    return Sub{v, v};
  };
  RefFn jrefs = [&](DagNode& jn, NodeId f, uint32_t lo, uint32_t hi, const BpCtx& c) {
    jn.ref[jn.nref++] = MemRef::stack_read(f, 0);
    jn.ref[jn.nref++] = MemRef::stack_read(f, 1);
    if (c.parent == kNoNode) jn.ref[jn.nref++] = MemRef::stack_write(f, 0);
    else jn.ref[jn.nref++] = MemRef::stack_write(c.parent, static_cast<uint8_t>(c.side));
    jn.ref[jn.nref++] = MemRef::shared_write(S, sum_slot(lo, hi));
  };
  Sub s = bp(b, 0, n, {}, leaf, nullptr, jrefs);
  b.close_task(root, s.entry, s.exit);
  return take(b, s);
}

Dag build_prefix_dag(uint32_t n, PrefixVariant variant) {
  require(n >= 1, "prefix: n must be positive");
  bool local = variant == PrefixVariant::Local;
  Builder b;
  b.d.algo = local ? "prefix-local" : "prefix-naive";
  b.d.params = "n=" + std::to_string(n);
  uint32_t A = b.add_array("A", n, -1);
  uint32_t PS = b.add_array("PS", n, -1);
  int32_t root = b.add_task(TaskKind::Hbp, -1, 1);
  b.d.root_task = root;
  uint32_t S = b.add_array("S", 2 * n - 1, root);
  uint32_t LS = b.add_array("LS", 2 * n - 1, root);
  uint32_t SC = local && n >= 2 ? b.add_array("SC", n - 1, root) : 0;

  // Phase 1: bottom-up sums. Leaves record S[2i], the join splitting
  // at m records S[2m-1]; the local variant also records the left
  // subtree's contribution at SC[m-1] for phase 2.
  int32_t p1 = b.add_task(TaskKind::Bp, root);
  LeafFn leaf1 = [&](uint32_t i, const BpCtx& c) {
    NodeId v;
    if (c.parent == kNoNode) {
      v = b.node(NodeKind::Compute, {MemRef::shared_read(A, i), MemRef::shared_write(S, 2 * i)});
    } else {
      v = b.node(NodeKind::Compute,
                 {MemRef::shared_read(A, i),
                  MemRef::stack_write(c.parent, static_cast<uint8_t>(c.side)),
                  MemRef::shared_write(S, 2 * i)});
    }
    return Sub{v, v};
  };
  RefFn jrefs1 = [&](DagNode& jn, NodeId f, uint32_t lo, uint32_t hi, const BpCtx& c) {
    jn.ref[jn.nref++] = MemRef::stack_read(f, 0);
    jn.ref[jn.nref++] = MemRef::stack_read(f, 1);
    if (c.parent == kNoNode) jn.ref[jn.nref++] = MemRef::stack_write(f, 0);
    else jn.ref[jn.nref++] = MemRef::stack_write(c.parent, static_cast<uint8_t>(c.side));
    jn.ref[jn.nref++] = MemRef::shared_write(S, sum_slot(lo, hi));
    if (local) jn.ref[jn.nref++] = MemRef::shared_write(SC, split_at(lo, hi) - 1);
  };
  Sub s1 = bp(b, 0, n, {}, leaf1, nullptr, jrefs1);
  b.close_task(p1, s1.entry, s1.exit);

  // Phase 2: top-down left sums into LS. A node's LS value arrives
  // through its parent's segment. The naive variant has each right
  // child read its sibling's S entry; the local variant instead has
  // the parent read its own SC entry and push finished values down.
  int32_t p2 = b.add_task(TaskKind::Bp, root);
  LeafFn leaf2 = [&](uint32_t i, const BpCtx& c) {
    DagNode n2;
    n2.kind = NodeKind::Compute;
    if (c.parent != kNoNode)
      n2.ref[n2.nref++] = MemRef::stack_read(c.parent, static_cast<uint8_t>(c.side));
    if (!local && c.side == 1) n2.ref[n2.nref++] = MemRef::shared_read(S, sum_slot(c.plo, c.pm));
    n2.ref[n2.nref++] = MemRef::shared_write(LS, 2 * i);
    b.d.nodes.push_back(n2);
    NodeId v = static_cast<NodeId>(b.d.nodes.size() - 1);
    return Sub{v, v};
  };
  RefFn frefs2 = [&](DagNode& fn, NodeId self, uint32_t lo, uint32_t hi, const BpCtx& c) {
    if (c.parent != kNoNode)
      fn.ref[fn.nref++] = MemRef::stack_read(c.parent, static_cast<uint8_t>(c.side));
    if (!local && c.side == 1 && c.parent != kNoNode)
      fn.ref[fn.nref++] = MemRef::shared_read(S, sum_slot(c.plo, c.pm));
    if (local) fn.ref[fn.nref++] = MemRef::shared_read(SC, split_at(lo, hi) - 1);
    fn.ref[fn.nref++] = MemRef::shared_write(LS, sum_slot(lo, hi));
    fn.ref[fn.nref++] = MemRef::stack_write(self, 0);
    fn.ref[fn.nref++] = MemRef::stack_write(self, 1);
  };
  Sub s2 = bp(b, 0, n, {}, leaf2, frefs2, nullptr);
  b.close_task(p2, s2.entry, s2.exit);

  // Phase 3: PS[i] = prefix at leaf i plus A[i]. The prefix travels
  // down the tree on fork segments, never through the shared LS
  // array; the right arm's correction comes from the same source as
  // in phase 2 (sibling S entry, or the parent's SC copy).
  int32_t p3 = b.add_task(TaskKind::Bp, root);
  LeafFn leaf3 = [&](uint32_t i, const BpCtx& c) {
    DagNode n3;
    n3.kind = NodeKind::Compute;
    if (c.parent != kNoNode)
      n3.ref[n3.nref++] = MemRef::stack_read(c.parent, static_cast<uint8_t>(c.side));
    if (!local && c.side == 1) n3.ref[n3.nref++] = MemRef::shared_read(S, sum_slot(c.plo, c.pm));
    n3.ref[n3.nref++] = MemRef::shared_read(A, i);
    n3.ref[n3.nref++] = MemRef::shared_write(PS, i);
    b.d.nodes.push_back(n3);
    NodeId v = static_cast<NodeId>(b.d.nodes.size() - 1);
    return Sub{v, v};
  };
  RefFn frefs3 = [&](DagNode& fn, NodeId self, uint32_t lo, uint32_t hi, const BpCtx& c) {
    if (c.parent != kNoNode)
      fn.ref[fn.nref++] = MemRef::stack_read(c.parent, static_cast<uint8_t>(c.side));
    if (!local && c.side == 1 && c.parent != kNoNode)
      fn.ref[fn.nref++] = MemRef::shared_read(S, sum_slot(c.plo, c.pm));
    if (local) fn.ref[fn.nref++] = MemRef::shared_read(SC, split_at(lo, hi) - 1);
    fn.ref[fn.nref++] = MemRef::stack_write(self, 0);
    fn.ref[fn.nref++] = MemRef::stack_write(self, 1);
  };
  Sub s3 = bp(b, 0, n, {}, leaf3, frefs3, nullptr);
  b.close_task(p3, s3.entry, s3.exit);

  chain(b, s1, s2);
  chain(b, s2, s3);
  b.close_task(root, s1.entry, s3.exit);
  return take(b, {s1.entry, s3.exit});
}

namespace {

Sub build_transpose_rec(Builder& b, uint32_t r0, uint32_t r1, uint32_t c0, uint32_t c1,
                        uint32_t in, uint32_t out, uint32_t rows, uint32_t cols) {
  if (r1 - r0 == 1 && c1 - c0 == 1) {
    NodeId v = b.node(NodeKind::Compute,
                      {MemRef::shared_read(in, r0 * cols + c0),
                       MemRef::shared_write(out, c0 * rows + r0)});
    return {v, v};
  }
  NodeId f = b.node(NodeKind::Fork, {});
  Sub L, R;
  if (r1 - r0 >= c1 - c0) {
    uint32_t rm = split_at(r0, r1);
    L = build_transpose_rec(b, r0, rm, c0, c1, in, out, rows, cols);
    R = build_transpose_rec(b, rm, r1, c0, c1, in, out, rows, cols);
  } else {
    uint32_t cm = split_at(c0, c1);
    L = build_transpose_rec(b, r0, r1, c0, cm, in, out, rows, cols);
    R = build_transpose_rec(b, r0, r1, cm, c1, in, out, rows, cols);
  }
  NodeId j = b.node(NodeKind::Join, {});
  DagNode& fn = b.d.nodes[f];
  fn.a = L.entry;
  fn.b = R.entry;
  fn.mate = j;
  scaffold_fork_refs(fn, f);
  DagNode& jn = b.d.nodes[j];
  jn.mate = f;
  scaffold_join_refs(jn, f);
  b.d.nodes[L.exit].a = j;
  b.d.nodes[R.exit].a = j;
  return {f, j};
}

}  // namespace

Dag build_transpose_dag(uint32_t rows, uint32_t cols) {
  require(rows >= 1 && cols >= 1, "transpose: dims must be positive");
  Builder b;
  b.d.algo = "transpose";
  b.d.params = "n=" + std::to_string(rows) + " m=" + std::to_string(cols);
  uint32_t in = b.add_array("IN", rows * cols, -1);
  uint32_t out = b.add_array("OUT", rows * cols, -1);
  int32_t root = b.add_task(TaskKind::Bp, -1);
  b.d.root_task = root;
  Sub s = build_transpose_rec(b, 0, rows, 0, cols, in, out, rows, cols);
  b.close_task(root, s.entry, s.exit);
  return take(b, s);
}

namespace {

// A square region of a shared array laid out row-major with leading
// dimension `ld`.
struct View {
  uint32_t arr;
  uint32_t row0, col0, ld;
  uint32_t idx(uint32_t i, uint32_t j) const { return (row0 + i) * ld + col0 + j; }
  View quad(int qi, int qj, uint32_t h) const { return {arr, row0 + qi * h, col0 + qj * h, ld}; }
};

Sub rec_group_over(Builder& b, int32_t grp, uint32_t count,
                   const std::function<Sub(uint32_t, int32_t)>& inst) {
  return bp(b, 0, count, {}, [&](uint32_t k, const BpCtx&) { return inst(k, grp); });
}

Sub build_mm_log_rec(Builder& b, uint32_t n, View va, View vb, View vc, int32_t parent) {
  int32_t inst = b.add_task(TaskKind::Hbp, parent, 2, true);
  if (n == 1) {
    NodeId v = b.node(NodeKind::Compute,
                      {MemRef::shared_read(va.arr, va.idx(0, 0)),
                       MemRef::shared_read(vb.arr, vb.idx(0, 0)),
                       MemRef::shared_write(vc.arr, vc.idx(0, 0))});
    b.close_task(inst, v, v);
    return {v, v};
  }
  uint32_t h = n / 2;
  uint32_t T[8];
  for (int k = 0; k < 8; k++)
    T[k] = b.add_array("T" + std::to_string(k), h * h, inst);
  // Call k computes one half-product: C quadrant k/2 needs T[2q]+T[2q+1].
  static const int qa[8][2] = {{0,0},{0,1},{0,0},{0,1},{1,0},{1,1},{1,0},{1,1}};
  static const int qb[8][2] = {{0,0},{1,0},{0,1},{1,1},{0,0},{1,0},{0,1},{1,1}};
  int32_t grp = b.add_task(TaskKind::RecGroup, inst);
  Sub g = rec_group_over(b, grp, 8, [&](uint32_t k, int32_t p) {
    View ta = va.quad(qa[k][0], qa[k][1], h);
    View tb = vb.quad(qb[k][0], qb[k][1], h);
    View tc{T[k], 0, 0, h};
    return build_mm_log_rec(b, h, ta, tb, tc, p);
  });
  b.close_task(grp, g.entry, g.exit);
  int32_t comb = b.add_task(TaskKind::Bp, inst);
  Sub c = bp(b, 0, n * n, {}, [&](uint32_t t, const BpCtx&) {
    uint32_t q = t / (h * h), w = t % (h * h);
    uint32_t i = w / h, j = w % h;
    View out = vc.quad(static_cast<int>(q / 2), static_cast<int>(q % 2), h);
    NodeId v = b.node(NodeKind::Compute,
                      {MemRef::shared_read(T[2 * q], w), MemRef::shared_read(T[2 * q + 1], w),
                       MemRef::shared_write(out.arr, out.idx(i, j))});
    return Sub{v, v};
  });
  b.close_task(comb, c.entry, c.exit);
  chain(b, g, c);
  b.close_task(inst, g.entry, c.exit);
  return {g.entry, c.exit};
}

Sub build_mm_depth_rec(Builder& b, uint32_t n, View va, View vb, View vc, int32_t parent) {
  int32_t inst = b.add_task(TaskKind::Hbp, parent, 2, true);
  if (n == 1) {
    NodeId v = b.node(NodeKind::Compute,
                      {MemRef::shared_read(va.arr, va.idx(0, 0)),
                       MemRef::shared_read(vb.arr, vb.idx(0, 0)),
                       MemRef::shared_read(vc.arr, vc.idx(0, 0)),
                       MemRef::shared_write(vc.arr, vc.idx(0, 0))});
    b.close_task(inst, v, v);
    return {v, v};
  }
  uint32_t h = n / 2;
  // Round 0 uses A's left column of quadrants, round 1 the right; the
  // four calls of a round touch disjoint C quadrants.
  Sub rounds[2];
  for (int r = 0; r < 2; r++) {
    int32_t grp = b.add_task(TaskKind::RecGroup, inst);
    Sub g = rec_group_over(b, grp, 4, [&](uint32_t k, int32_t p) {
      int ci = static_cast<int>(k / 2), cj = static_cast<int>(k % 2);
      View ta = va.quad(ci, r, h);
      View tb = vb.quad(r, cj, h);
      View tc = vc.quad(ci, cj, h);
      return build_mm_depth_rec(b, h, ta, tb, tc, p);
    });
    b.close_task(grp, g.entry, g.exit);
    rounds[r] = g;
  }
  chain(b, rounds[0], rounds[1]);
  b.close_task(inst, rounds[0].entry, rounds[1].exit);
  return {rounds[0].entry, rounds[1].exit};
}

}  // namespace

Dag build_mm_dag(uint32_t n, MmVariant v) {
  require(n >= 1 && (n & (n - 1)) == 0, "mm: n must be a power of two");
  Builder b;
  b.d.algo = v == MmVariant::Log2N ? "mm-log2n" : "mm-depthn";
  b.d.params = "n=" + std::to_string(n);
  uint32_t A = b.add_array("A", n * n, -1);
  uint32_t B = b.add_array("B", n * n, -1);
  uint32_t C = b.add_array("C", n * n, -1);
  View va{A, 0, 0, n}, vb{B, 0, 0, n}, vc{C, 0, 0, n};
  Sub s = v == MmVariant::Log2N ? build_mm_log_rec(b, n, va, vb, vc, -1)
                                : build_mm_depth_rec(b, n, va, vb, vc, -1);
  b.d.root_task = 0;
  return take(b, s);
}

namespace {

Sub build_strassen_rec(Builder& b, uint32_t n, View va, View vb, View vc, int32_t parent) {
  int32_t inst = b.add_task(TaskKind::Hbp, parent, 2, true);
  if (n == 1) {
    NodeId v = b.node(NodeKind::Compute,
                      {MemRef::shared_read(va.arr, va.idx(0, 0)),
                       MemRef::shared_read(vb.arr, vb.idx(0, 0)),
                       MemRef::shared_write(vc.arr, vc.idx(0, 0))});
    b.close_task(inst, v, v);
    return {v, v};
  }
  uint32_t h = n / 2;
  uint32_t L[7], R[7], T[7];
  for (int k = 0; k < 7; k++) {
    L[k] = b.add_array("L" + std::to_string(k), h * h, inst);
    R[k] = b.add_array("R" + std::to_string(k), h * h, inst);
    T[k] = b.add_array("T" + std::to_string(k), h * h, inst);
  }
  // Operand schedule for the seven half-size products; -1 means the
  // second summand is absent.
  static const int la[7][4] = {{0,0,1,1},{1,0,1,1},{0,0,-1,-1},{1,1,-1,-1},{0,0,0,1},{1,0,0,0},{0,1,1,1}};
  static const int lb[7][4] = {{0,0,1,1},{0,0,-1,-1},{0,1,1,1},{1,0,0,0},{1,1,-1,-1},{0,0,0,1},{1,0,1,1}};
  int32_t prep = b.add_task(TaskKind::Bp, inst);
  Sub pr = bp(b, 0, 7 * h * h, {}, [&](uint32_t t, const BpCtx&) {
    uint32_t k = t / (h * h), w = t % (h * h);
    uint32_t i = w / h, j = w % h;
    DagNode nd;
    nd.kind = NodeKind::Compute;
    View a1 = va.quad(la[k][0], la[k][1], h);
    nd.ref[nd.nref++] = MemRef::shared_read(a1.arr, a1.idx(i, j));
    if (la[k][2] >= 0) {
      View a2 = va.quad(la[k][2], la[k][3], h);
      nd.ref[nd.nref++] = MemRef::shared_read(a2.arr, a2.idx(i, j));
    }
    View b1 = vb.quad(lb[k][0], lb[k][1], h);
    nd.ref[nd.nref++] = MemRef::shared_read(b1.arr, b1.idx(i, j));
    if (lb[k][2] >= 0) {
      View b2 = vb.quad(lb[k][2], lb[k][3], h);
      nd.ref[nd.nref++] = MemRef::shared_read(b2.arr, b2.idx(i, j));
    }
    nd.ref[nd.nref++] = MemRef::shared_write(L[k], w);
    nd.ref[nd.nref++] = MemRef::shared_write(R[k], w);
    b.d.nodes.push_back(nd);
    NodeId v = static_cast<NodeId>(b.d.nodes.size() - 1);
    return Sub{v, v};
  });
  b.close_task(prep, pr.entry, pr.exit);
  int32_t grp = b.add_task(TaskKind::RecGroup, inst);
  Sub g = rec_group_over(b, grp, 7, [&](uint32_t k, int32_t p) {
    return build_strassen_rec(b, n / 2, View{L[k], 0, 0, h}, View{R[k], 0, 0, h},
                              View{T[k], 0, 0, h}, p);
  });
  b.close_task(grp, g.entry, g.exit);
  // Combine: C11 = T0+T3-T4+T6, C12 = T2+T4, C21 = T1+T3, C22 = T0-T1+T2+T5.
  static const int ct[4][4] = {{0,3,4,6},{2,4,-1,-1},{1,3,-1,-1},{0,1,2,5}};
  int32_t comb = b.add_task(TaskKind::Bp, inst);
  Sub c = bp(b, 0, n * n, {}, [&](uint32_t t, const BpCtx&) {
    uint32_t q = t / (h * h), w = t % (h * h);
    uint32_t i = w / h, j = w % h;
    DagNode nd;
    nd.kind = NodeKind::Compute;
    for (int z = 0; z < 4 && ct[q][z] >= 0; z++)
      nd.ref[nd.nref++] = MemRef::shared_read(T[ct[q][z]], w);
    View out = vc.quad(static_cast<int>(q / 2), static_cast<int>(q % 2), h);
    nd.ref[nd.nref++] = MemRef::shared_write(out.arr, out.idx(i, j));
    b.d.nodes.push_back(nd);
    NodeId v = static_cast<NodeId>(b.d.nodes.size() - 1);
    return Sub{v, v};
  });
  b.close_task(comb, c.entry, c.exit);
  chain(b, pr, g);
  chain(b, g, c);
  b.close_task(inst, pr.entry, c.exit);
  return {pr.entry, c.exit};
}

}  // namespace

Dag build_strassen_shape_dag(uint32_t n) {
  require(n >= 1 && (n & (n - 1)) == 0, "strassen: n must be a power of two");
  Builder b;
  b.d.algo = "strassen-shape";
  b.d.params = "n=" + std::to_string(n);
  uint32_t A = b.add_array("A", n * n, -1);
  uint32_t B = b.add_array("B", n * n, -1);
  uint32_t C = b.add_array("C", n * n, -1);
  Sub s = build_strassen_rec(b, n, View{A, 0, 0, n}, View{B, 0, 0, n}, View{C, 0, 0, n}, -1);
  b.d.root_task = 0;
  return take(b, s);
}

namespace {

// A contiguous chunk of a shared array.
struct Chunk {
  uint32_t arr;
  uint32_t off;
};

Sub build_fft_rec(Builder& b, uint32_t n, Chunk in, Chunk out, int32_t parent) {
  int32_t inst = b.add_task(TaskKind::Hbp, parent, 2, true);
  if (n <= 4) {
    Sub s = bp(b, 0, n, {}, [&](uint32_t i, const BpCtx&) {
      NodeId v = b.node(NodeKind::Compute,
                        {MemRef::shared_read(in.arr, in.off + i),
                         MemRef::shared_write(out.arr, out.off + i)});
      return Sub{v, v};
    });
    b.close_task(inst, s.entry, s.exit);
    return s;
  }
  uint32_t s = 1;
  while (s * s < n) s++;
  require(s * s == n, "fft: n must be 4 or a square of a supported size");
  uint32_t T = b.add_array("T", n, inst);
  uint32_t U = b.add_array("U", n, inst);
  int32_t grp1 = b.add_task(TaskKind::RecGroup, inst);
  Sub g1 = rec_group_over(b, grp1, s, [&](uint32_t k, int32_t p) {
    return build_fft_rec(b, s, Chunk{in.arr, in.off + k * s}, Chunk{T, k * s}, p);
  });
  b.close_task(grp1, g1.entry, g1.exit);
  int32_t tr = b.add_task(TaskKind::Bp, inst);
  Sub t = bp(b, 0, n, {}, [&](uint32_t w, const BpCtx&) {
    uint32_t i = w / s, j = w % s;
    NodeId v = b.node(NodeKind::Compute,
                      {MemRef::shared_read(T, i * s + j), MemRef::shared_write(U, j * s + i)});
    return Sub{v, v};
  });
  b.close_task(tr, t.entry, t.exit);
  int32_t grp2 = b.add_task(TaskKind::RecGroup, inst);
  Sub g2 = rec_group_over(b, grp2, s, [&](uint32_t k, int32_t p) {
    return build_fft_rec(b, s, Chunk{U, k * s}, Chunk{out.arr, out.off + k * s}, p);
  });
  b.close_task(grp2, g2.entry, g2.exit);
  chain(b, g1, t);
  chain(b, t, g2);
  b.close_task(inst, g1.entry, g2.exit);
  return {g1.entry, g2.exit};
}

}  // namespace

Dag build_fft_dag(uint32_t n) {
  bool pow4 = n >= 1 && (n & (n - 1)) == 0 && (__builtin_ctz(n) % 2 == 0);
  require(n <= 4 ? n >= 1 : pow4, "fft: n must be <= 4 or a power of 4");
  Builder b;
  b.d.algo = "fft";
  b.d.params = "n=" + std::to_string(n);
  uint32_t X = b.add_array("X", n, -1);
  uint32_t Y = b.add_array("Y", n, -1);
  Sub s = build_fft_rec(b, n, Chunk{X, 0}, Chunk{Y, 0}, -1);
  b.d.root_task = 0;
  return take(b, s);
}

Dag build_dag(const std::string& tag, uint32_t n, uint32_t cols) {
  if (tag == "scan") return build_scan_dag(n);
  if (tag == "sum") return build_sum_dag(n);
  if (tag == "prefix-naive") return build_prefix_dag(n, PrefixVariant::Naive);
  if (tag == "prefix-local") return build_prefix_dag(n, PrefixVariant::Local);
  if (tag == "transpose") return build_transpose_dag(n, cols == 0 ? n : cols);
  if (tag == "mm-depthn") return build_mm_dag(n, MmVariant::DepthN);
  if (tag == "mm-log2n") return build_mm_dag(n, MmVariant::Log2N);
  if (tag == "strassen-shape") return build_strassen_shape_dag(n);
  if (tag == "fft") return build_fft_dag(n);
  throw std::runtime_error("unknown algo tag: " + tag);
}

}  // namespace forksim

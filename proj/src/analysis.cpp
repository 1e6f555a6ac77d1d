#include "forksim/analysis.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "forksim/cache.hpp"

namespace forksim {

std::vector<Fragment> fragments_of(const Dag& d, const Trace& t) {
  std::vector<std::vector<uint32_t>> runs(t.procs);
  for (const ExecRec& e : t.execs) runs[e.proc].push_back(d.pos[e.node]);
  std::vector<Fragment> out;
  for (uint32_t p = 0; p < t.procs; ++p) {
    const auto& seq = runs[p];
    for (size_t i = 0; i < seq.size();) {
      size_t j = i + 1;
      while (j < seq.size() && seq[j] == seq[j - 1] + 1) ++j;
      out.push_back({p, seq[i], seq[j - 1]});
      i = j;
    }
  }
  return out;
}

uint32_t count_fragments(const Dag& d, const Trace& t, uint32_t proc) {
  uint32_t n = 0;
  for (const Fragment& f : fragments_of(d, t))
    if (f.proc == proc) ++n;
  return n;
}

uint32_t total_fragments(const Dag& d, const Trace& t) {
  return static_cast<uint32_t>(fragments_of(d, t).size());
}

namespace {

struct Scope {
  NodeId fork;  // kNoNode = whole computation
  uint32_t lo, hi;
};

// Stolen and pseudo-stolen subtasks behave like independently started
// tasks (each runs on a branched stack), so each opens its own scope.
std::vector<Scope> collect_scopes(const Dag& d, const Trace& t) {
  std::vector<Scope> s;
  s.push_back({kNoNode, 0, static_cast<uint32_t>(d.nodes.size() - 1)});
  std::set<NodeId> seen;
  auto add = [&](NodeId f) {
    if (!seen.insert(f).second) return;
    const DagNode& nd = d.nodes[f];
    s.push_back({f, d.pos[nd.b], d.pos[nd.mate] - 1});
  };
  for (const StealRec& r : t.steals) {
    add(r.fork);
    for (NodeId p : r.pseudo) add(p);
  }
  return s;
}

bool any_in(const std::vector<uint32_t>& sorted, uint32_t lo, uint32_t hi) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), lo);
  return it != sorted.end() && *it <= hi;
}

PathResult walk_scope(const Dag& d, const Scope& sc, const std::vector<uint32_t>& marks) {
  PathResult res;
  res.scope = sc.fork;
  NodeId u = sc.fork == kNoNode ? d.entry : d.nodes[sc.fork].b;
  NodeId fin = d.node_at[sc.hi];
  res.path.push_back(u);
  while (u != fin) {
    const DagNode& nd = d.nodes[u];
    if (nd.kind == NodeKind::Fork) {
      uint32_t p = d.pos[u];
      uint32_t rlo = d.pos[nd.b], rhi = d.pos[nd.mate] - 1;
      bool ml = any_in(marks, p + 1, rlo - 1);
      bool mr = any_in(marks, rlo, rhi);
      if (ml && mr) {
        res.ok = false;
        res.fail_fork = u;
        return res;
      }
      u = mr ? nd.b : nd.a;
    } else {
      u = nd.a;
    }
    res.path.push_back(u);
  }
  return res;
}

}  // namespace

PathResult steal_path(const Dag& d, const Trace& t, NodeId scope_fork) {
  std::vector<Scope> scopes = collect_scopes(d, t);
  const Scope* target = nullptr;
  for (const Scope& s : scopes)
    if (s.fork == scope_fork) target = &s;
  if (!target) throw std::runtime_error("steal_path: not a stolen or pseudo-stolen task");

  // Charge every marked fork to the innermost scope containing it.
  std::vector<uint32_t> marks;
  std::set<NodeId> marked;
  for (const StealRec& r : t.steals) {
    marked.insert(r.fork);
    for (NodeId p : r.pseudo) marked.insert(p);
  }
  for (NodeId m : marked) {
    uint32_t mp = d.pos[m];
    const Scope* best = nullptr;
    for (const Scope& s : scopes)
      if (s.lo <= mp && mp <= s.hi && (!best || s.hi - s.lo < best->hi - best->lo)) best = &s;
    if (best == target) marks.push_back(mp);
  }
  std::sort(marks.begin(), marks.end());
  return walk_scope(d, *target, marks);
}

PathAudit audit_steal_paths(const Dag& d, const Trace& t) {
  PathAudit audit;
  for (const Scope& s : collect_scopes(d, t)) {
    PathResult r = steal_path(d, t, s.fork);
    ++audit.scopes_checked;
    if (!r.ok) audit.failures.push_back(std::move(r));
  }
  return audit;
}

namespace {

struct WordRef {
  Addr word;
  bool stack;
  uint32_t owner_pos;  // stack refs: position of the owning fork
};

// Word-level replay of the window against the single-run segment table.
std::vector<WordRef> window_words(const Dag& d, const Trace& t, uint32_t lo, uint32_t hi) {
  if (t.procs != 1) throw std::runtime_error("window analysis needs a single-processor trace");
  if (hi >= d.nodes.size() || lo > hi) throw std::runtime_error("window out of range");
  std::unordered_map<NodeId, const SegRec*> seg;
  for (const SegRec& s : t.segments) seg[s.fork] = &s;
  std::vector<WordRef> out;
  for (uint32_t p = lo; p <= hi; ++p) {
    const DagNode& nd = d.nodes[d.node_at[p]];
    for (uint8_t i = 0; i < nd.nref; ++i) {
      const MemRef& r = nd.ref[i];
      if (r.is_stack()) {
        const SegRec* s = seg.at(r.index);
        out.push_back({Trace::stack_region(s->stack) + s->offset + r.slot, true, d.pos[r.index]});
      } else {
        out.push_back({d.arrays[r.array].base + r.index, false, 0});
      }
    }
  }
  return out;
}

}  // namespace

// A block is discounted only when every window access to it lands on a
// segment pushed inside the window AND its first access in the whole
// run falls inside the window. The second clause keeps blocks whose
// frames reuse stack offsets popped earlier: those can sit warm in the
// embedded cache, and discounting them would break the guarantee
// misses(alone) <= misses(embedded) + reload under LRU.
uint64_t reload_cost(const Dag& d, const Trace& t, uint32_t lo, uint32_t hi) {
  uint32_t B = t.block;
  std::vector<WordRef> all = window_words(d, t, 0, static_cast<uint32_t>(d.nodes.size() - 1));
  std::unordered_map<uint64_t, uint32_t> first_pos;
  {
    size_t i = 0;
    for (uint32_t p = 0; p < d.nodes.size(); ++p)
      for (uint8_t r = 0; r < d.nodes[d.node_at[p]].nref; ++r, ++i)
        first_pos.emplace(all[i].word / B, p);
  }

  std::set<uint64_t> blocks;
  std::set<uint64_t> outside;  // touched data not created inside the window
  for (const WordRef& r : window_words(d, t, lo, hi)) {
    uint64_t blk = r.word / B;
    blocks.insert(blk);
    if (!r.stack || r.owner_pos < lo || r.owner_pos > hi) outside.insert(blk);
  }
  uint64_t cost = 0;
  for (uint64_t blk : blocks)
    if (outside.count(blk) || first_pos.at(blk) < lo) ++cost;
  return cost;
}

uint64_t embedded_window_misses(const Dag& d, const Trace& t, uint32_t lo, uint32_t hi) {
  uint64_t n = 0;
  for (const AccessRec& a : t.accesses) {
    uint32_t p = d.pos[a.node];
    if (a.miss && lo <= p && p <= hi) ++n;
  }
  return n;
}

uint64_t isolated_window_misses(const Dag& d, const Trace& t, uint32_t lo, uint32_t hi,
                                bool optimal_replacement) {
  std::vector<uint64_t> stream;
  for (const WordRef& r : window_words(d, t, lo, hi)) stream.push_back(r.word / t.block);
  uint64_t lines = t.capacity / t.block;
  if (!optimal_replacement) return lru_miss_count(stream, lines);
  uint64_t n = 0;
  for (bool m : belady_misses(stream, lines)) n += m;
  return n;
}

}  // namespace forksim

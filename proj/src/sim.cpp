#include "forksim/sim.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>
#include <unordered_set>

#include "forksim/cache.hpp"

namespace forksim {

const char* policy_name(StealPolicy p) {
  switch (p) {
    case StealPolicy::None: return "seq";
    case StealPolicy::WsHead: return "ws";
    case StealPolicy::GenUniform: return "gen-uniform";
    case StealPolicy::DeepBottom: return "gen-deep";
    case StealPolicy::Scripted: return "script";
  }
  return "?";
}

StealPolicy policy_from_name(const std::string& s) {
  if (s == "seq" || s == "none") return StealPolicy::None;
  if (s == "ws") return StealPolicy::WsHead;
  if (s == "gen-uniform") return StealPolicy::GenUniform;
  if (s == "gen-deep") return StealPolicy::DeepBottom;
  if (s == "script") return StealPolicy::Scripted;
  throw std::runtime_error("unknown scheduler policy: " + s);
}

namespace {

constexpr uint64_t kNever = ~uint64_t(0);
constexpr uint32_t kSegWords = 2;

struct Entry {
  NodeId fork;
  uint64_t place;  // per-processor placement counter
  bool pseudo = false;
};

struct JoinState {
  uint8_t arrived = 0;
  uint32_t first_proc = 0;
  // Processor that arrived from the forking strand's side (the left
  // subtree exit); the join's continuation belongs to its task.
  uint32_t left_proc = ~uint32_t(0);
};

enum class PState : uint8_t { Idle, Exec };

// How a fork's queued child left the queue: popped by its owner on the
// owner's own stack, popped onto a branched stack, or stolen.
enum class BMode : uint8_t { Plain, Pseudo, Stolen };

struct Proc {
  PState state = PState::Idle;
  NodeId cur = kNoNode;
  uint32_t stack = 0;    // context stack for cur
  uint64_t start = 0;    // when cur issues its accesses
  uint64_t finish = 0;
  bool started = false;  // accesses already issued
  bool waiting = false;  // committed to resume a join; issues no steals
  std::deque<Entry> q;
  uint64_t place_counter = 0;
};

struct Sim {
  const Dag& d;
  const SchedConfig& sc;
  const CacheConfig& cc;
  Trace tr;
  std::vector<Proc> procs;
  std::vector<JoinState> joins;
  std::vector<LruCache> caches;
  std::vector<uint32_t> seg_of;     // fork -> index into tr.segments
  std::vector<uint32_t> stack_top;  // per stack
  std::vector<std::vector<uint32_t>> seg_stack;  // per stack, push order
  std::vector<bool> executed;
  std::vector<BMode> bmode;  // per fork, set when its child leaves a queue
  std::vector<ScriptedSteal> script;
  std::vector<bool> script_used;
  Rng rng;
  uint64_t exit_finish = 0;
  uint64_t done_nodes = 0;

  Sim(const Dag& dag, const SchedConfig& s, const CacheConfig& c)
      : d(dag), sc(s), cc(c), rng(s.seed) {
    if (sc.procs == 0) throw std::runtime_error("sim: need at least one processor");
    if (cc.block == 0 || cc.capacity % cc.block != 0 || cc.capacity < cc.block)
      throw std::runtime_error("sim: capacity must be a positive multiple of the block size");
    if (cc.require_tall && cc.capacity < uint64_t(cc.block) * cc.block)
      throw std::runtime_error("sim: short cache (M < B*B); pass the override to allow");
    if (cc.belady && (sc.procs != 1 || sc.miss_penalty != 0))
      throw std::runtime_error("sim: optimal replacement needs one processor and no miss penalty");
    if (cc.block > kArrayAlign)
      throw std::runtime_error("sim: block size above array alignment");
    procs.resize(sc.procs);
    joins.assign(d.nodes.size(), {});
    caches.assign(sc.procs, LruCache(cc.capacity / cc.block));
    seg_of.assign(d.nodes.size(), ~uint32_t(0));
    stack_top.push_back(0);
    seg_stack.emplace_back();
    executed.assign(d.nodes.size(), false);
    bmode.assign(d.nodes.size(), BMode::Plain);
    script = sc.script;
    std::stable_sort(script.begin(), script.end(),
                     [](const ScriptedSteal& a, const ScriptedSteal& b) { return a.time < b.time; });
    script_used.assign(script.size(), false);
    tr.procs = sc.procs;
    tr.policy = sc.policy;
    tr.seed = sc.seed;
    tr.capacity = cc.capacity;
    tr.block = cc.block;
    tr.belady = cc.belady;
    tr.proc_misses.assign(sc.procs, 0);
  }

  uint32_t new_stack(uint32_t parent, NodeId fork, uint32_t proc, uint64_t t) {
    stack_top.push_back(0);
    seg_stack.emplace_back();
    uint32_t id = static_cast<uint32_t>(stack_top.size() - 1);
    tr.branches.push_back({t, proc, fork, id, parent});
    return id;
  }

  Addr resolve(const MemRef& r) {
    if (!r.is_stack()) return d.arrays[r.array].base + r.index;
    uint32_t si = seg_of[r.index];
    if (si == ~uint32_t(0) || tr.segments[si].pop_time != kNever)
      throw std::runtime_error("sim: stack ref to a segment that is not live");
    const SegRec& s = tr.segments[si];
    return Trace::stack_region(s.stack) + s.offset + r.slot;
  }

  void push_segment(NodeId fork, uint32_t stack, uint64_t t) {
    if (stack_top[stack] + kSegWords > kStackRegionWords)
      throw std::runtime_error("sim: stack overflow");
    seg_of[fork] = static_cast<uint32_t>(tr.segments.size());
    seg_stack[stack].push_back(static_cast<uint32_t>(tr.segments.size()));
    tr.segments.push_back({fork, stack, stack_top[stack], t, kNever});
    stack_top[stack] += kSegWords;
  }

  // A join retires its fork's segment. Space is reclaimed lazily: a
  // retired segment buried under live ones (two strands can grow one
  // stack, e.g. after a usurped join) frees only once uncovered.
  void pop_segment(NodeId fork, uint64_t t) {
    SegRec& s = tr.segments[seg_of[fork]];
    if (s.pop_time != kNever) throw std::runtime_error("sim: segment retired twice");
    s.pop_time = t;
    auto& st = seg_stack[s.stack];
    while (!st.empty() && tr.segments[st.back()].pop_time != kNever) {
      stack_top[s.stack] -= kSegWords;
      if (stack_top[s.stack] != tr.segments[st.back()].offset)
        throw std::runtime_error("sim: stack reclamation out of order");
      st.pop_back();
    }
  }

  void begin(uint32_t p, NodeId v, uint32_t stack, uint64_t at) {
    Proc& pr = procs[p];
    pr.state = PState::Exec;
    pr.cur = v;
    pr.stack = stack;
    pr.start = at;
    pr.started = false;
    pr.waiting = false;
  }

  // First half of a node's execution: stack effects, accesses, and for
  // forks the queue placement of the forked task.
  void start_node(uint32_t p, uint64_t t) {
    Proc& pr = procs[p];
    const DagNode& n = d.nodes[pr.cur];
    if (n.kind == NodeKind::Fork) push_segment(pr.cur, pr.stack, t);
    uint64_t m = 0;
    for (int i = 0; i < n.nref; i++) {
      Addr a = resolve(n.ref[i]);
      uint64_t b = block_of(a, cc.block);
      bool miss = caches[p].access(b);
      tr.accesses.push_back({t, p, pr.cur, b, miss, is_shared_addr(a)});
      m += miss;
    }
    tr.proc_misses[p] += m;
    tr.misses += m;
    tr.execs.push_back({t, p, pr.cur});
    if (executed[pr.cur]) throw std::runtime_error("sim: node executed twice");
    executed[pr.cur] = true;
    done_nodes++;
    if (n.kind == NodeKind::Fork) pr.q.push_back({pr.cur, pr.place_counter++, false});
    pr.started = true;
    pr.finish = t + sc.miss_penalty * m;
  }

  // A processor with nothing to continue takes its most recent queue
  // entry, or parks. A pseudo-marked entry branches a fresh stack off
  // the stack holding its fork's segment.
  void idle_continue(uint32_t p, uint64_t t) {
    Proc& pr = procs[p];
    if (pr.q.empty()) {
      pr.state = PState::Idle;
      pr.cur = kNoNode;
      return;
    }
    Entry e = pr.q.back();
    pr.q.pop_back();
    bmode[e.fork] = e.pseudo ? BMode::Pseudo : BMode::Plain;
    uint32_t home = tr.segments[seg_of[e.fork]].stack;
    uint32_t stack = e.pseudo ? new_stack(home, e.fork, p, t) : home;
    begin(p, d.nodes[e.fork].b, stack, t + 1);
  }

  bool parked(uint32_t p) const { return procs[p].state == PState::Idle; }

  // At a join whose forked child ran as a pseudo-stolen task, the
  // strand resuming past the join is the one arriving from the fork's
  // side, not the child's. Under non-FIFO policies that strand's
  // processor can arrive first and run dry; it then holds for the
  // join instead of stealing, and the child's completion hands the
  // join back to it. Joins over stolen or plainly popped children
  // keep the plain rule: the second arriver continues.
  bool hand_joins_to_parked() const {
    return sc.policy != StealPolicy::None && sc.policy != StealPolicy::WsHead;
  }

  void arrive_join(uint32_t p, NodeId j, uint64_t t, bool from_left) {
    JoinState& js = joins[j];
    bool pseudo_arm = bmode[d.nodes[j].mate] == BMode::Pseudo;
    if (from_left) js.left_proc = p;
    if (js.arrived == 0) {
      js.arrived = 1;
      js.first_proc = p;
      if (hand_joins_to_parked() && pseudo_arm && from_left && procs[p].q.empty()) {
        procs[p].state = PState::Idle;
        procs[p].cur = kNoNode;
        procs[p].waiting = true;
      } else {
        idle_continue(p, t);
      }
      return;
    }
    js.arrived = 2;
    uint32_t fstack = tr.segments[seg_of[d.nodes[j].mate]].stack;
    uint32_t runner = p;
    if (hand_joins_to_parked() && pseudo_arm && js.first_proc == js.left_proc &&
        js.first_proc != p && parked(js.first_proc))
      runner = js.first_proc;
    if (runner != js.left_proc) tr.usurps.push_back({t, runner, j});
    begin(runner, j, fstack, t + 1);
    if (runner != p) idle_continue(p, t);
  }

  // Second half: the node completes and control moves on.
  void complete_node(uint32_t p, uint64_t t) {
    Proc& pr = procs[p];
    NodeId v = pr.cur;
    const DagNode& n = d.nodes[v];
    if (v == d.exit) exit_finish = t;
    if (n.kind == NodeKind::Fork) {
      begin(p, n.a, pr.stack, t + 1);
      return;
    }
    if (n.kind == NodeKind::Join) pop_segment(n.mate, t);
    NodeId succ = n.a;
    if (succ == kNoNode) {
      pr.state = PState::Idle;
      pr.cur = kNoNode;
      idle_continue(p, t);
      return;
    }
    if (d.nodes[succ].kind == NodeKind::Join)
      arrive_join(p, succ, t, d.pos[v] + 1 != d.pos[succ]);
    else
      begin(p, succ, pr.stack, t + 1);
  }

  struct Claim {
    uint32_t victim;
    size_t index;
  };

  bool pick_scripted(uint32_t p, uint64_t t, Claim& out) {
    for (size_t i = 0; i < script.size(); i++) {
      if (script_used[i] || script[i].time != t || script[i].thief != p) continue;
      const ScriptedSteal& s = script[i];
      script_used[i] = true;
      bool ok = s.victim < sc.procs && s.victim != p && !procs[s.victim].q.empty();
      if (ok) {
        const auto& q = procs[s.victim].q;
        if (s.fork != kNoNode) {
          ok = false;
          for (size_t k = 0; k < q.size(); k++)
            if (q[k].fork == s.fork) {
              out = {s.victim, k};
              ok = true;
              break;
            }
        } else if (s.position >= 1 && s.position <= q.size()) {
          out = {s.victim, s.position - 1};
        } else {
          ok = false;
        }
      }
      if (!ok) tr.skipped.push_back({t, p});
      return ok;
    }
    return false;
  }

  bool pick_victim(uint32_t p, Claim& out) {
    std::vector<uint32_t> cand;
    for (uint32_t v = 0; v < sc.procs; v++)
      if (v != p && !procs[v].q.empty()) cand.push_back(v);
    if (cand.empty()) return false;
    uint32_t victim = cand[rng.below(cand.size())];
    const auto& q = procs[victim].q;
    size_t idx = 0;
    if (sc.policy == StealPolicy::GenUniform) idx = rng.below(q.size());
    else if (sc.policy == StealPolicy::DeepBottom) idx = q.size() - 1;
    out = {victim, idx};
    return true;
  }

  void steal_phase(uint64_t t) {
    // Script lines whose moment passed while the thief was busy (or
    // that were unusable) burn off as no-ops.
    for (size_t i = 0; i < script.size(); i++) {
      if (script_used[i] || script[i].time >= t) continue;
      script_used[i] = true;
      tr.skipped.push_back({script[i].time, script[i].thief});
    }
    if (sc.policy == StealPolicy::None) return;
    for (uint32_t p = 0; p < sc.procs; p++) {
      if (!parked(p) || procs[p].waiting) continue;
      Claim c;
      bool got = sc.policy == StealPolicy::Scripted ? pick_scripted(p, t, c) : pick_victim(p, c);
      if (!got) continue;
      auto& q = procs[c.victim].q;
      Entry e = q[c.index];
      bmode[e.fork] = BMode::Stolen;
      bool deep = c.index > 0 && q[c.index - 1].place == e.place - 1;
      StealRec rec{t, p, c.victim, e.fork, deep, 0, {}};
      if (deep) {
        for (size_t k = 0; k < c.index; k++) {
          rec.pseudo.push_back(q[k].fork);
          q[k].pseudo = true;
        }
      }
      q.erase(q.begin() + static_cast<long>(c.index));
      uint32_t home = tr.segments[seg_of[e.fork]].stack;
      uint32_t stack = new_stack(home, e.fork, p, t);
      rec.stack = stack;
      tr.steals.push_back(std::move(rec));
      begin(p, d.nodes[e.fork].b, stack, t + 1 + sc.steal_latency);
    }
  }

  void run() {
    begin(0, d.entry, 0, 0);
    uint64_t t = 0;
    while (true) {
      for (uint32_t p = 0; p < sc.procs; p++)
        if (procs[p].state == PState::Exec && !procs[p].started && procs[p].start == t)
          start_node(p, t);
      for (uint32_t p = 0; p < sc.procs; p++)
        if (procs[p].state == PState::Exec && procs[p].started && procs[p].finish == t)
          complete_node(p, t);
      steal_phase(t);
      bool busy = false;
      for (const Proc& pr : procs) busy = busy || pr.state == PState::Exec;
      if (!busy) {
        if (done_nodes != d.nodes.size())
          throw std::runtime_error("sim: all processors idle before the dag finished");
        break;
      }
      t++;
      if (t > (uint64_t(1) << 40)) throw std::runtime_error("sim: step limit exceeded");
    }
    tr.steps = exit_finish + 1;
    tr.stacks = static_cast<uint32_t>(stack_top.size());
    for (const SegRec& s : tr.segments)
      if (s.pop_time == kNever) throw std::runtime_error("sim: segment never retired");
    for (uint32_t top : stack_top)
      if (top != 0) throw std::runtime_error("sim: stack not fully reclaimed");
    finalize_pseudo();
    if (cc.belady) rewrite_belady();
  }

  // An entry counted pseudo-stolen at claim time stops being one if a
  // later steal takes it after all.
  void finalize_pseudo() {
    std::unordered_set<NodeId> stolen;
    for (const StealRec& s : tr.steals) stolen.insert(s.fork);
    for (StealRec& s : tr.steals) {
      std::vector<NodeId> kept;
      for (NodeId f : s.pseudo)
        if (!stolen.count(f)) kept.push_back(f);
      s.pseudo = std::move(kept);
    }
  }

  // With one processor and no penalty the access stream is fixed, so
  // optimal replacement is a straight replay with future knowledge.
  void rewrite_belady() {
    std::vector<uint64_t> stream;
    stream.reserve(tr.accesses.size());
    for (const AccessRec& a : tr.accesses) stream.push_back(a.block);
    std::vector<bool> miss = belady_misses(stream, cc.capacity / cc.block);
    tr.misses = 0;
    for (size_t i = 0; i < miss.size(); i++) {
      tr.accesses[i].miss = miss[i];
      tr.misses += miss[i];
    }
    tr.proc_misses.assign(1, tr.misses);
  }
};

}  // namespace

Trace run_sim(const Dag& d, const SchedConfig& s, const CacheConfig& c) {
  Sim sim(d, s, c);
  sim.run();
  return std::move(sim.tr);
}

Trace run_seq(const Dag& d, const CacheConfig& c) {
  SchedConfig s;
  s.procs = 1;
  s.policy = StealPolicy::None;
  return run_sim(d, s, c);
}

uint64_t seq_miss_count(const Dag& d, const CacheConfig& c) {
  return run_seq(d, c).misses;
}

}  // namespace forksim

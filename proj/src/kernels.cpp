#include "forksim/kernels.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>

namespace forksim {

namespace {

using SpanSet = std::vector<PosSpan>;

// s ∩ [lo, hi], preserving order.
SpanSet clip(const SpanSet& s, uint32_t lo, uint32_t hi) {
  SpanSet out;
  if (lo > hi) return out;
  for (const PosSpan& p : s) {
    uint32_t a = std::max(p.lo, lo), b = std::min(p.hi, hi);
    if (a <= b) out.push_back({a, b});
  }
  return out;
}

bool contains(const SpanSet& s, uint32_t pos) {
  for (const PosSpan& p : s)
    if (p.lo <= pos && pos <= p.hi) return true;
  return false;
}

// Every position of [lo, hi] lies in s.
bool covers(const SpanSet& s, uint32_t lo, uint32_t hi) {
  uint32_t need = lo;
  for (const PosSpan& p : s) {
    if (p.hi < need) continue;
    if (p.lo > need) return false;
    need = p.hi + 1;
    if (need > hi) return true;
  }
  return need > hi;
}

SpanSet subtract(const SpanSet& s, uint32_t lo, uint32_t hi) {
  SpanSet out;
  for (const PosSpan& p : s) {
    if (p.hi < lo || p.lo > hi) {
      out.push_back(p);
      continue;
    }
    if (p.lo < lo) out.push_back({p.lo, lo - 1});
    if (p.hi > hi) out.push_back({hi + 1, p.hi});
  }
  return out;
}

// Union of two disjoint sets, coalescing touching intervals.
SpanSet unite(SpanSet a, const SpanSet& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end(), [](const PosSpan& x, const PosSpan& y) { return x.lo < y.lo; });
  SpanSet out;
  for (const PosSpan& p : a) {
    if (!out.empty() && out.back().hi + 1 >= p.lo)
      out.back().hi = std::max(out.back().hi, p.hi);
    else
      out.push_back(p);
  }
  return out;
}

size_t kernel_at(const std::vector<TaskKernel>& ks, uint32_t pos) {
  for (size_t i = 0; i < ks.size(); i++)
    if (contains(ks[i].spans, pos)) return i;
  throw std::runtime_error("kernel partition: position outside every kernel");
}

std::vector<size_t> steal_order(const Dag& d, const Trace& t) {
  std::vector<size_t> order(t.steals.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return d.pos[t.steals[a].fork] < d.pos[t.steals[b].fork];
  });
  return order;
}

std::vector<TaskKernel> partition_impl(const Dag& d, const Trace& t, bool merge) {
  const uint32_t N = static_cast<uint32_t>(d.size());
  std::vector<TaskKernel> ks;
  {
    TaskKernel whole;
    whole.kind = KernelKind::Starting;
    whole.steal = 0;
    whole.spans = {{0, N - 1}};
    ks.push_back(std::move(whole));
  }

  std::vector<uint32_t> fork_pos;
  for (const StealRec& sr : t.steals) {
    if (sr.fork >= N || d.nodes[sr.fork].kind != NodeKind::Fork)
      throw std::runtime_error("kernel partition: steal of a never-enqueued task");
    fork_pos.push_back(d.pos[sr.fork]);
  }
  std::sort(fork_pos.begin(), fork_pos.end());
  auto hits = [&](uint32_t lo, uint32_t hi) {
    auto a = std::lower_bound(fork_pos.begin(), fork_pos.end(), lo);
    auto b = std::upper_bound(fork_pos.begin(), fork_pos.end(), hi);
    return static_cast<int>(b - a);
  };

  std::vector<size_t> order = steal_order(d, t);
  for (uint32_t r = 0; r < order.size(); r++) {
    const StealRec& sr = t.steals[order[r]];
    auto [slo, shi] = d.stolen_span(sr.fork);
    size_t ti = kernel_at(ks, slo);
    TaskKernel tau = std::move(ks[ti]);
    ks.erase(ks.begin() + ti);
    if (!covers(tau.spans, slo, shi))
      throw std::runtime_error("kernel partition: steal of a never-enqueued task");

    // Pseudo-stolen tasks still inside tau, head of the queue first.
    struct Member {
      NodeId fork;
      uint32_t lo, hi;
      int nhits;
    };
    std::vector<Member> mem;
    for (NodeId mf : sr.pseudo) {
      auto [mlo, mhi] = d.stolen_span(mf);
      if (!contains(tau.spans, mlo)) continue;  // carved off by an earlier steal
      if (mlo <= shi || !covers(tau.spans, mlo, mhi))
        throw std::runtime_error("kernel partition: pseudo-stolen task straddles kernels");
      mem.push_back({mf, mlo, mhi, hits(mlo, mhi)});
    }

    TaskKernel pre;  // before the stolen subtask, keeps tau's identity
    pre.kind = tau.kind;
    pre.steal = tau.steal;
    pre.member_restolen = tau.member_restolen;
    pre.spans = clip(tau.spans, 0, slo - 1);
    for (NodeId mf : tau.members)
      if (d.pos[d.nodes[mf].b] < slo) pre.members.push_back(mf);

    TaskKernel stolen;
    stolen.kind = KernelKind::Starting;
    stolen.steal = r + 1;
    stolen.spans = {{slo, shi}};

    TaskKernel fin;  // from the join after the stolen subtask on
    fin.kind = KernelKind::Finishing;
    fin.steal = r + 1;
    fin.spans = clip(tau.spans, shi + 1, N - 1);
    for (const Member& m : mem) fin.spans = subtract(fin.spans, m.lo, m.hi);

    // Group members into maximal runs; a run closes just before each
    // member a later steal hits, so that member ends its run in
    // sequential execution order (members run deepest first).
    std::vector<TaskKernel> groups;
    size_t g0 = 0;
    for (size_t i = 0; i < mem.size(); i++) {
      // A hit member heads a fresh run; queue runs reverse into
      // execution order, so the hit member runs last in its group.
      if (mem[i].nhits > 0 && i > g0) {
        groups.emplace_back();
        TaskKernel& grp = groups.back();
        grp.kind = KernelKind::Pseudo;
        grp.steal = r + 1;
        for (size_t k = i; k-- > g0;) {
          grp.members.push_back(mem[k].fork);
          grp.spans.push_back({mem[k].lo, mem[k].hi});
          if (mem[k].nhits > 1) grp.member_restolen = true;
        }
        g0 = i;
      }
    }
    if (g0 < mem.size()) {
      groups.emplace_back();
      TaskKernel& grp = groups.back();
      grp.kind = KernelKind::Pseudo;
      grp.steal = r + 1;
      for (size_t k = mem.size(); k-- > g0;) {
        grp.members.push_back(mem[k].fork);
        grp.spans.push_back({mem[k].lo, mem[k].hi});
        if (mem[k].nhits > 1) grp.member_restolen = true;
      }
    }

    if (!pre.spans.empty()) ks.push_back(std::move(pre));
    ks.push_back(std::move(stolen));
    if (merge) {
      // Deepest group first: absorb the finishing positions up to the
      // group's last node, so members and the joins between them fuse
      // into one contiguous super-finishing kernel.
      std::sort(groups.begin(), groups.end(),
                [](const TaskKernel& a, const TaskKernel& b) { return a.first_pos() < b.first_pos(); });
      for (TaskKernel& grp : groups) {
        uint32_t vt = grp.last_pos();
        SpanSet nu1 = clip(fin.spans, 0, vt);
        fin.spans = clip(fin.spans, vt + 1, N - 1);
        if (!nu1.empty() || grp.members.size() > 1) {
          grp.spans = unite(std::move(grp.spans), nu1);
          grp.kind = KernelKind::SuperFinishing;
        }
        ks.push_back(std::move(grp));
      }
    } else {
      for (TaskKernel& grp : groups) ks.push_back(std::move(grp));
    }
    if (!fin.spans.empty()) ks.push_back(std::move(fin));
  }

  std::sort(ks.begin(), ks.end(),
            [](const TaskKernel& a, const TaskKernel& b) { return a.first_pos() < b.first_pos(); });
  return ks;
}

}  // namespace

const char* kernel_kind_name(KernelKind k) {
  switch (k) {
    case KernelKind::Starting: return "starting";
    case KernelKind::Finishing: return "finishing";
    case KernelKind::Pseudo: return "pseudo";
    case KernelKind::SuperFinishing: return "super_finishing";
  }
  return "?";
}

uint32_t TaskKernel::node_count() const {
  uint32_t n = 0;
  for (const PosSpan& p : spans) n += p.hi - p.lo + 1;
  return n;
}

std::vector<TaskKernel> partition_task_kernels(const Dag& d, const Trace& t) {
  return partition_impl(d, t, false);
}

std::vector<TaskKernel> merge_super_finishing(const Dag& d, const Trace& t) {
  return partition_impl(d, t, true);
}

KernelCensus kernel_census(const std::vector<TaskKernel>& ks, const Trace& t) {
  KernelCensus c;
  for (const TaskKernel& k : ks) {
    switch (k.kind) {
      case KernelKind::Starting: c.starting++; break;
      case KernelKind::Finishing: c.finishing++; break;
      case KernelKind::Pseudo: c.pseudo++; break;
      case KernelKind::SuperFinishing: c.super_finishing++; break;
    }
  }
  c.steals = static_cast<uint32_t>(t.steals.size());
  for (const StealRec& sr : t.steals)
    if (sr.deep) c.deep_steals++;
  return c;
}

ContiguityResult contiguity_check(const TaskKernel& k) {
  ContiguityResult r;
  for (size_t i = 1; i < k.spans.size(); i++) {
    if (k.spans[i].lo > k.spans[i - 1].hi + 1) {
      r.pass = false;
      r.gap_lo = k.spans[i - 1].hi;
      r.gap_hi = k.spans[i].lo;
      return r;
    }
  }
  return r;
}

std::vector<std::vector<uint32_t>> processors_per_kernel(const Dag& d, const Trace& t,
                                                         const std::vector<TaskKernel>& ks) {
  std::vector<int32_t> owner(d.size(), -1);
  for (size_t i = 0; i < ks.size(); i++)
    for (const PosSpan& p : ks[i].spans)
      for (uint32_t q = p.lo; q <= p.hi; q++) owner[q] = static_cast<int32_t>(i);
  std::vector<std::set<uint32_t>> procs(ks.size());
  for (const ExecRec& e : t.execs) {
    int32_t k = owner[d.pos[e.node]];
    if (k >= 0) procs[k].insert(e.proc);
  }
  std::vector<std::vector<uint32_t>> out(ks.size());
  for (size_t i = 0; i < ks.size(); i++) out[i].assign(procs[i].begin(), procs[i].end());
  return out;
}

SpecialTaskSet classify_special_tasks(const Dag& d, const Trace& t) {
  SpecialTaskSet out;
  std::set<int32_t> owners;
  std::vector<size_t> order = steal_order(d, t);
  for (uint32_t r = 0; r < order.size(); r++) {
    NodeId f = t.steals[order[r]].fork;
    if (f >= d.size() || d.nodes[f].kind != NodeKind::Fork)
      throw std::runtime_error("special tasks: steal of a never-enqueued task");
    int32_t own = d.fork_task[f];
    out.steal_owners.push_back({r + 1, f, own});
    if (own >= 0) owners.insert(own);
  }

  std::set<int32_t> t1 = owners;
  t1.insert(d.root_task);

  // A steal lies in a task's subtree iff its fork id does; task node-id
  // intervals nest along the task tree.
  std::vector<NodeId> forks;
  for (const StealRec& sr : t.steals) forks.push_back(sr.fork);
  std::sort(forks.begin(), forks.end());
  auto steals_in = [&](int32_t task) {
    const TaskDesc& td = d.tasks[task];
    auto a = std::lower_bound(forks.begin(), forks.end(), td.id_lo);
    auto b = std::lower_bound(forks.begin(), forks.end(), td.id_hi);
    return static_cast<int>(b - a);
  };

  std::set<int32_t> t2;
  for (size_t i = 0; i < d.tasks.size(); i++) {
    int32_t task = static_cast<int32_t>(i);
    if (t1.count(task) || d.tasks[i].kind == TaskKind::RecGroup) continue;
    // Recursions this task calls: instances inside its rec groups.
    int with_steals = 0;
    for (int32_t c : d.tasks[i].children) {
      if (d.tasks[c].kind != TaskKind::RecGroup) continue;
      for (int32_t inst : d.tasks[c].children)
        if (steals_in(inst) > 0) with_steals++;
    }
    if (with_steals >= 2) t2.insert(task);
  }

  std::set<int32_t> t12 = t1;
  t12.insert(t2.begin(), t2.end());
  std::set<int32_t> t3;
  for (int32_t m : t12) {
    for (int32_t c : d.tasks[m].children) {
      if (t12.count(c)) continue;
      const TaskDesc& cd = d.tasks[c];
      bool has = false;
      for (int32_t s : t12)
        if (s != c && cd.id_lo <= d.tasks[s].id_lo && d.tasks[s].id_hi <= cd.id_hi) has = true;
      if (has) t3.insert(c);
    }
  }

  out.type1.assign(t1.begin(), t1.end());
  out.type2.assign(t2.begin(), t2.end());
  out.type3.assign(t3.begin(), t3.end());
  return out;
}

void write_kernel_report(const Dag& d, const Trace& t, const std::vector<TaskKernel>& ks,
                         std::ostream& os) {
  bool restolen = false;
  for (const TaskKernel& k : ks) restolen |= k.member_restolen;
  if (restolen) os << "# member hit by multiple later steals\n";
  os << "kind,steal_index,node_count,processors,contiguous\n";
  std::vector<std::vector<uint32_t>> procs = processors_per_kernel(d, t, ks);
  for (size_t i = 0; i < ks.size(); i++) {
    os << kernel_kind_name(ks[i].kind) << ',' << ks[i].steal << ',' << ks[i].node_count() << ','
       << procs[i].size() << ',' << (contiguity_check(ks[i]).pass ? 1 : 0) << '\n';
  }
}

}  // namespace forksim

#include "forksim/dispersal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

namespace forksim {
namespace {

// A node sits in the task's own body when it is inside the task's id
// interval but not inside any child task's.
bool in_task_body(const Dag& d, const TaskDesc& t, NodeId v) {
  if (v < t.id_lo || v >= t.id_hi) return false;
  for (int32_t c : t.children)
    if (v >= d.tasks[c].id_lo && v < d.tasks[c].id_hi) return false;
  return true;
}

const TaskDesc& task_checked(const Dag& d, int32_t task, const char* who) {
  if (task < 0 || task >= static_cast<int32_t>(d.tasks.size()))
    throw std::runtime_error(std::string(who) + ": no such task");
  return d.tasks[task];
}

// Shared refs of one window node, plus its mate join's for forks.
template <class Fn>
void window_node_refs(const Dag& d, NodeId v, Fn&& fn) {
  auto take = [&](const DagNode& n) {
    for (int i = 0; i < n.nref; i++) {
      const MemRef& r = n.ref[i];
      if (!r.is_stack()) fn(d.arrays[r.array].base + r.index);
    }
  };
  const DagNode& n = d.nodes[v];
  take(n);
  if (n.kind == NodeKind::Fork) take(d.nodes[n.mate]);
}

Addr shared_span(const Dag& d) {
  Addr s = 0;
  for (const ArrayDecl& a : d.arrays) s = std::max(s, a.base + a.size);
  return s;
}

// Dense stamp sets over the packed shared address range; one epoch
// per window start makes resets O(1).
struct SweepScratch {
  std::vector<uint32_t> word_epoch, block_epoch;
  uint32_t epoch = 0;
  uint64_t words = 0, blocks = 0;
  uint32_t bw;

  SweepScratch(Addr span, uint32_t block_words)
      : word_epoch(span, 0), block_epoch(span / block_words + 1, 0), bw(block_words) {}

  void restart(uint32_t e) {
    epoch = e;
    words = 0;
    blocks = 0;
  }

  void add(Addr a) {
    if (word_epoch[a] != epoch) {
      word_epoch[a] = epoch;
      words++;
    }
    Addr b = a / bw;
    if (block_epoch[b] != epoch) {
      block_epoch[b] = epoch;
      blocks++;
    }
  }
};

std::vector<DispersalSample> run_sweep(const Dag& d, int32_t tree, uint32_t block_words,
                                       bool parallel) {
  if (block_words == 0) throw std::runtime_error("dispersal_sweep: block size must be positive");
  std::vector<NodeId> in = fork_tree_inorder(d, tree);
  size_t k = in.size();
  if (k < 2) return {};
  // Windows starting at s occupy off[s] .. off[s] + (k - s - 2).
  std::vector<size_t> off(k - 1, 0);
  for (size_t s = 1; s + 1 < k; s++) off[s] = off[s - 1] + (k - s);
  std::vector<DispersalSample> out(k * (k - 1) / 2);
  Addr span = shared_span(d);

  auto fill_start = [&](SweepScratch& sc, size_t s) {
    sc.restart(static_cast<uint32_t>(s + 1));
    window_node_refs(d, in[s], [&](Addr a) { sc.add(a); });
    size_t base = off[s];
    for (size_t e = s + 1; e < k; e++) {
      window_node_refs(d, in[e], [&](Addr a) { sc.add(a); });
      out[base + (e - s - 1)] = {sc.words, sc.blocks};
    }
  };

#ifdef _OPENMP
  if (parallel) {
#pragma omp parallel
    {
      SweepScratch sc(span, block_words);
#pragma omp for schedule(dynamic, 16)
      for (int64_t s = 0; s < static_cast<int64_t>(k) - 1; s++)
        fill_start(sc, static_cast<size_t>(s));
    }
    return out;
  }
#else
  (void)parallel;
#endif
  SweepScratch sc(span, block_words);
  for (size_t s = 0; s + 1 < k; s++) fill_start(sc, s);
  return out;
}

}  // namespace

std::vector<NodeId> fork_tree_inorder(const Dag& d, int32_t tree) {
  const TaskDesc& t = task_checked(d, tree, "fork_tree_inorder");
  std::vector<NodeId> out;
  struct Frame {
    NodeId v;
    int stage;
  };
  std::vector<Frame> st;
  st.push_back({t.entry, 0});
  while (!st.empty()) {
    NodeId v = st.back().v;
    int stage = st.back().stage;
    const DagNode& n = d.nodes[v];
    bool own_fork = n.kind == NodeKind::Fork && in_task_body(d, t, v);
    if (!own_fork) {
      if (n.kind != NodeKind::Compute || !in_task_body(d, t, v))
        throw std::runtime_error("fork_tree_inorder: task body is not a fork tree");
      out.push_back(v);
      st.pop_back();
      continue;
    }
    if (stage == 0) {
      st.back().stage = 1;
      st.push_back({n.a, 0});
    } else if (stage == 1) {
      st.back().stage = 2;
      out.push_back(v);
      st.push_back({n.b, 0});
    } else {
      st.pop_back();
    }
  }
  return out;
}

ExtendedTask subtree_window(const Dag& d, int32_t tree, NodeId root) {
  const TaskDesc& t = task_checked(d, tree, "subtree_window");
  std::vector<NodeId> in = fork_tree_inorder(d, tree);
  std::vector<uint32_t> idx(d.nodes.size(), ~uint32_t(0));
  for (size_t i = 0; i < in.size(); i++) idx[in[i]] = static_cast<uint32_t>(i);
  if (root >= d.nodes.size() || idx[root] == ~uint32_t(0))
    throw std::runtime_error("subtree_window: root is not a fork-tree node");
  uint32_t lo = ~uint32_t(0), hi = 0, count = 0;
  std::vector<NodeId> st{root};
  while (!st.empty()) {
    NodeId v = st.back();
    st.pop_back();
    uint32_t q = idx[v];
    lo = std::min(lo, q);
    hi = std::max(hi, q);
    count++;
    const DagNode& n = d.nodes[v];
    if (n.kind == NodeKind::Fork && in_task_body(d, t, v)) {
      st.push_back(n.a);
      st.push_back(n.b);
    }
  }
  if (hi - lo + 1 != count)
    throw std::runtime_error("subtree_window: subtree is not contiguous in inorder");
  return {tree, lo, count};
}

DispersalSample measure_dispersal(const Dag& d, uint32_t block_words, const ExtendedTask& et) {
  if (block_words == 0) throw std::runtime_error("measure_dispersal: block size must be positive");
  std::vector<NodeId> in = fork_tree_inorder(d, et.tree);
  if (et.len < 2 || uint64_t(et.start) + et.len > in.size())
    throw std::runtime_error("measure_dispersal: window out of range");
  std::unordered_set<Addr> words, blocks;
  for (uint32_t i = et.start; i < et.start + et.len; i++)
    window_node_refs(d, in[i], [&](Addr a) {
      words.insert(a);
      blocks.insert(a / block_words);
    });
  return {words.size(), blocks.size()};
}

std::vector<DispersalSample> dispersal_sweep(const Dag& d, int32_t tree, uint32_t block_words) {
  return run_sweep(d, tree, block_words, true);
}

std::vector<DispersalSample> dispersal_sweep_serial(const Dag& d, int32_t tree,
                                                    uint32_t block_words) {
  return run_sweep(d, tree, block_words, false);
}

DispersalSample recursive_range_sample(const Dag& d, int32_t group, uint32_t i, uint32_t j,
                                       uint32_t block_words) {
  if (block_words == 0)
    throw std::runtime_error("recursive_range_sample: block size must be positive");
  const TaskDesc& g = task_checked(d, group, "recursive_range_sample");
  if (g.kind != TaskKind::RecGroup)
    throw std::runtime_error("recursive_range_sample: task is not a recursive group");
  if (i > j || j >= g.children.size())
    throw std::runtime_error("recursive_range_sample: bad instance range");
  std::unordered_set<Addr> words, blocks;
  for (uint32_t k = i; k <= j; k++) {
    const TaskDesc& c = d.tasks[g.children[k]];
    for (NodeId v = c.id_lo; v < c.id_hi; v++) {
      const DagNode& n = d.nodes[v];
      for (int x = 0; x < n.nref; x++) {
        const MemRef& r = n.ref[x];
        if (r.is_stack()) continue;
        Addr a = d.arrays[r.array].base + r.index;
        words.insert(a);
        blocks.insert(a / block_words);
      }
    }
  }
  return {words.size(), blocks.size()};
}

const char* model_name(DispersalModel m) {
  switch (m) {
    case DispersalModel::Constant: return "constant";
    case DispersalModel::Sqrt: return "sqrt";
    case DispersalModel::Log: return "log";
  }
  return "?";
}

DispersalModel model_from_name(const std::string& s) {
  if (s == "constant") return DispersalModel::Constant;
  if (s == "sqrt") return DispersalModel::Sqrt;
  if (s == "log") return DispersalModel::Log;
  throw std::runtime_error("unknown dispersal model: " + s);
}

double dispersal_gain(DispersalModel m, uint64_t r, uint32_t block_words) {
  switch (m) {
    case DispersalModel::Constant: return 1.0;
    case DispersalModel::Sqrt: return std::sqrt(static_cast<double>(r));
    case DispersalModel::Log:
      return std::log2(std::max(static_cast<double>(r) / block_words, 2.0));
  }
  return 1.0;
}

DispersalFit fit_dispersal(const std::vector<DispersalSample>& samples, DispersalModel m,
                           uint32_t block_words) {
  if (samples.empty()) throw std::runtime_error("fit_dispersal: no samples");
  if (block_words == 0) throw std::runtime_error("fit_dispersal: block size must be positive");
  DispersalFit f;
  f.max_excess = -std::numeric_limits<double>::infinity();
  for (const DispersalSample& s : samples) {
    double excess = static_cast<double>(s.blocks) - static_cast<double>(s.r) / block_words;
    f.max_excess = std::max(f.max_excess, excess);
    if (excess <= 0) continue;
    double g = dispersal_gain(m, s.r, block_words);
    if (g <= 0) throw std::runtime_error("fit_dispersal: zero gain with positive excess");
    f.c = std::max(f.c, excess / g);
  }
  return f;
}

void write_dispersal_csv(std::ostream& os, const std::string& algo, uint32_t n,
                         uint32_t block_words, const std::vector<DispersalSample>& samples,
                         DispersalModel m, double c) {
  os << "algo,n,B,r,blocks,model,c\n";
  char cbuf[32];
  std::snprintf(cbuf, sizeof cbuf, "%.6g", c);
  for (const DispersalSample& s : samples)
    os << algo << ',' << n << ',' << block_words << ',' << s.r << ',' << s.blocks << ','
       << model_name(m) << ',' << cbuf << '\n';
}

}  // namespace forksim

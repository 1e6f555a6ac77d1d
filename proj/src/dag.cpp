#include "forksim/dag.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace forksim {

uint64_t Dag::shared_words() const {
  uint64_t s = 0;
  for (const auto& a : arrays) s += a.size;
  return s;
}

namespace {

void seq_walk(const Dag& d, NodeId u, NodeId stop, std::vector<uint32_t>& pos,
              std::vector<NodeId>& order) {
  while (u != stop) {
    if (u == kNoNode) throw std::runtime_error("seq walk fell off the dag");
    if (pos[u] != kNoNode) throw std::runtime_error("node visited twice in seq walk");
    pos[u] = static_cast<uint32_t>(order.size());
    order.push_back(u);
    const DagNode& n = d.nodes[u];
    if (n.kind == NodeKind::Fork) {
      seq_walk(d, n.a, n.mate, pos, order);
      seq_walk(d, n.b, n.mate, pos, order);
      u = n.mate;
    } else {
      u = n.a;
    }
  }
}

bool task_in_subtree(const Dag& d, int32_t t, int32_t ancestor) {
  while (t >= 0) {
    if (t == ancestor) return true;
    t = d.tasks[t].parent;
  }
  return false;
}

}  // namespace

void validate_dag(const Dag& d) {
  auto fail = [](const std::string& m) { throw std::runtime_error("dag validation: " + m); };
  const size_t n = d.nodes.size();
  if (n == 0 || d.entry == kNoNode || d.exit == kNoNode) fail("empty dag or unset entry/exit");
  std::vector<uint32_t> indeg(n, 0);
  for (NodeId v = 0; v < n; v++) {
    const DagNode& nd = d.nodes[v];
    auto chk = [&](NodeId t) { if (t != kNoNode && t >= n) fail("edge target out of range"); };
    chk(nd.a); chk(nd.b); chk(nd.mate);
    if (nd.kind == NodeKind::Fork) {
      if (nd.a == kNoNode || nd.b == kNoNode || nd.mate == kNoNode) fail("fork missing child or join");
      if (d.nodes[nd.mate].kind != NodeKind::Join || d.nodes[nd.mate].mate != v) fail("fork/join mates disagree");
      indeg[nd.a]++; indeg[nd.b]++;
    } else {
      if (nd.kind == NodeKind::Join && (nd.mate == kNoNode || d.nodes[nd.mate].kind != NodeKind::Fork))
        fail("join without fork");
      if (nd.a != kNoNode) indeg[nd.a]++;
      if (v != d.exit && nd.a == kNoNode) fail("non-exit node without successor");
    }
    if (nd.nref > kMaxRefs) fail("too many refs");
    for (int i = 0; i < nd.nref; i++) {
      const MemRef& r = nd.ref[i];
      if (r.is_stack()) {
        if (r.index >= n || d.nodes[r.index].kind != NodeKind::Fork) fail("stack ref owner is not a fork");
        if (r.slot > 1) fail("stack slot out of range");
      } else {
        if (r.array >= d.arrays.size()) fail("ref names unknown array");
        if (r.index >= d.arrays[r.array].size) fail("ref index exceeds array size");
      }
    }
  }
  for (NodeId v = 0; v < n; v++) {
    uint32_t want = d.nodes[v].kind == NodeKind::Join ? 2 : (v == d.entry ? 0 : 1);
    if (indeg[v] != want) fail("unexpected in-degree");
  }
  if (d.pos.size() == n) {
    for (NodeId v = 0; v < n; v++)
      if (d.pos[v] == kNoNode) fail("node unreachable in seq order");
  }
  for (size_t t = 0; t < d.tasks.size(); t++) {
    const TaskDesc& td = d.tasks[t];
    if (td.id_lo > td.id_hi || td.id_hi > n) fail("task id interval out of range");
    if (td.parent >= 0) {
      const TaskDesc& p = d.tasks[td.parent];
      if (td.id_lo < p.id_lo || td.id_hi > p.id_hi) fail("child task escapes parent interval");
    }
    for (int32_t c : td.children)
      if (c < 0 || static_cast<size_t>(c) >= d.tasks.size() || d.tasks[c].parent != static_cast<int32_t>(t))
        fail("task child link broken");
  }
  // Arrays must not overlap and must respect alignment.
  std::vector<std::pair<Addr, Addr>> spans;
  for (const auto& a : d.arrays) {
    if (a.base % kArrayAlign != 0) fail("array base unaligned");
    if (a.base + a.size > kStackBase) fail("array overlaps stack region");
    spans.push_back({a.base, a.base + a.size});
  }
  std::sort(spans.begin(), spans.end());
  for (size_t i = 1; i < spans.size(); i++)
    if (spans[i].first < spans[i - 1].second) fail("arrays overlap");
}

void Dag::finalize() {
  pos.assign(nodes.size(), kNoNode);
  node_at.clear();
  node_at.reserve(nodes.size());
  seq_walk(*this, entry, kNoNode, pos, node_at);
  if (node_at.size() != nodes.size())
    throw std::runtime_error("dag validation: seq walk missed nodes");
  if (node_at.back() != exit)
    throw std::runtime_error("dag validation: exit is not last in seq order");
  // A fork belongs to the innermost enclosing recursive instance (the
  // root task counts as one); constituent fork trees are charged to it.
  fork_task.assign(nodes.size(), -1);
  for (size_t t = 0; t < tasks.size(); t++) {
    const TaskDesc& td = tasks[t];
    if (!(td.rec_instance || static_cast<int32_t>(t) == root_task)) continue;
    for (NodeId v = td.id_lo; v < td.id_hi; v++)
      if (nodes[v].kind == NodeKind::Fork) fork_task[v] = static_cast<int32_t>(t);
  }
  validate_dag(*this);
}

uint64_t task_size(const Dag& d, int32_t task) {
  const TaskDesc& td = d.tasks[task];
  std::unordered_set<uint64_t> words;
  for (NodeId v = td.id_lo; v < td.id_hi; v++) {
    const DagNode& n = d.nodes[v];
    for (int i = 0; i < n.nref; i++) {
      const MemRef& r = n.ref[i];
      if (r.is_stack()) continue;
      if (task_in_subtree(d, d.arrays[r.array].declared_by, task)) continue;
      words.insert((uint64_t(r.array) << 32) | r.index);
    }
  }
  return words.size();
}

uint64_t extended_size(const Dag& d, int32_t task) {
  uint64_t x = task_size(d, task);
  for (int32_t c : d.tasks[task].children) {
    const TaskDesc& cd = d.tasks[c];
    if (cd.kind == TaskKind::RecGroup) {
      for (int32_t inst : cd.children) x += task_size(d, inst);
    } else {
      x += task_size(d, c);
    }
  }
  return x;
}

SizeTable compute_sizes(const Dag& d) {
  SizeTable t;
  t.size.resize(d.tasks.size());
  t.xsize.resize(d.tasks.size());
  for (size_t i = 0; i < d.tasks.size(); i++) t.size[i] = task_size(d, static_cast<int32_t>(i));
  for (size_t i = 0; i < d.tasks.size(); i++) {
    uint64_t x = t.size[i];
    for (int32_t c : d.tasks[i].children) {
      if (d.tasks[c].kind == TaskKind::RecGroup) {
        for (int32_t inst : d.tasks[c].children) x += t.size[inst];
      } else {
        x += t.size[c];
      }
    }
    t.xsize[i] = x;
  }
  return t;
}

double compliance_ratio(const Dag& d) {
  SizeTable t = compute_sizes(d);
  double worst = 0.0;
  for (size_t i = 0; i < d.tasks.size(); i++) {
    if (!d.tasks[i].rec_instance) continue;
    if (t.xsize[i] < t.size[i]) throw std::runtime_error("extended size below size");
    for (int32_t g : d.tasks[i].children) {
      if (d.tasks[g].kind != TaskKind::RecGroup) continue;
      for (int32_t inst : d.tasks[g].children) {
        if (t.size[i] > 0) worst = std::max(worst, double(t.size[inst]) / double(t.size[i]));
        if (t.xsize[i] > 0) worst = std::max(worst, double(t.xsize[inst]) / double(t.xsize[i]));
      }
    }
  }
  return worst;
}

namespace {

void print_id(std::ostream& os, NodeId v) {
  if (v == kNoNode) os << '-';
  else os << v;
}

NodeId read_id(const std::string& tok) {
  if (tok == "-") return kNoNode;
  return static_cast<NodeId>(std::stoul(tok));
}

}  // namespace

void dump_dag(const Dag& d, std::ostream& os) {
  os << "# forksim dag v1\n";
  os << "# algo " << d.algo << "\n";
  if (!d.params.empty()) os << "# params " << d.params << "\n";
  os << "# entry " << d.entry << " exit " << d.exit << " root_task " << d.root_task << "\n";
  for (size_t i = 0; i < d.arrays.size(); i++) {
    const ArrayDecl& a = d.arrays[i];
    os << "# array " << i << " " << a.name << " base " << a.base << " size " << a.size
       << " declared_by " << a.declared_by << "\n";
  }
  for (size_t i = 0; i < d.tasks.size(); i++) {
    const TaskDesc& t = d.tasks[i];
    char k = t.kind == TaskKind::Bp ? 'B' : (t.kind == TaskKind::Hbp ? 'H' : 'R');
    os << "# task " << i << " kind " << k << " type " << int(t.hbp_type)
       << " rec " << int(t.rec_instance) << " parent " << t.parent
       << " entry " << t.entry << " exit " << t.exit
       << " ids " << t.id_lo << " " << t.id_hi << " children";
    for (int32_t c : t.children) os << " " << c;
    os << "\n";
  }
  for (NodeId v = 0; v < d.nodes.size(); v++) {
    const DagNode& n = d.nodes[v];
    os << v << ' ';
    if (n.kind == NodeKind::Fork) {
      os << "F "; print_id(os, n.a); os << ' '; print_id(os, n.b); os << ' '; print_id(os, n.mate);
    } else if (n.kind == NodeKind::Join) {
      os << "J "; print_id(os, n.a); os << ' '; print_id(os, n.mate);
    } else {
      os << "C "; print_id(os, n.a);
    }
    os << " |";
    for (int i = 0; i < n.nref; i++) {
      const MemRef& r = n.ref[i];
      os << ' ';
      switch (r.kind) {
        case MemRef::SharedRead:  os << 'r' << r.array << '[' << r.index << ']'; break;
        case MemRef::SharedWrite: os << 'w' << r.array << '[' << r.index << ']'; break;
        case MemRef::StackRead:   os << "rs" << r.index << '.' << int(r.slot); break;
        case MemRef::StackWrite:  os << "ws" << r.index << '.' << int(r.slot); break;
      }
    }
    os << "\n";
  }
}

Dag parse_dag(std::istream& is) {
  Dag d;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      std::string hash, key;
      ls >> hash >> key;
      if (key == "algo") {
        ls >> d.algo;
      } else if (key == "params") {
        std::getline(ls, d.params);
        if (!d.params.empty() && d.params[0] == ' ') d.params.erase(0, 1);
      } else if (key == "entry") {
        std::string w;
        ls >> d.entry >> w >> d.exit >> w >> d.root_task;
      } else if (key == "array") {
        size_t idx; ArrayDecl a; std::string w;
        ls >> idx >> a.name >> w >> a.base >> w >> a.size >> w >> a.declared_by;
        if (d.arrays.size() != idx) throw std::runtime_error("dag parse: array index gap");
        d.arrays.push_back(a);
      } else if (key == "task") {
        size_t idx; TaskDesc t; std::string w; char k; int type, rec;
        ls >> idx >> w >> k >> w >> type >> w >> rec >> w >> t.parent >> w >> t.entry
           >> w >> t.exit >> w >> t.id_lo >> t.id_hi >> w;
        t.kind = k == 'B' ? TaskKind::Bp : (k == 'H' ? TaskKind::Hbp : TaskKind::RecGroup);
        t.hbp_type = static_cast<uint8_t>(type);
        t.rec_instance = rec != 0;
        int32_t c;
        while (ls >> c) t.children.push_back(c);
        if (d.tasks.size() != idx) throw std::runtime_error("dag parse: task index gap");
        d.tasks.push_back(t);
      }
      continue;
    }
    NodeId id;
    char kind;
    std::string tok;
    ls >> id >> kind;
    if (d.nodes.size() != id) throw std::runtime_error("dag parse: node index gap");
    DagNode n;
    if (kind == 'F') {
      n.kind = NodeKind::Fork;
      ls >> tok; n.a = read_id(tok);
      ls >> tok; n.b = read_id(tok);
      ls >> tok; n.mate = read_id(tok);
    } else if (kind == 'J') {
      n.kind = NodeKind::Join;
      ls >> tok; n.a = read_id(tok);
      ls >> tok; n.mate = read_id(tok);
    } else {
      n.kind = NodeKind::Compute;
      ls >> tok; n.a = read_id(tok);
    }
    ls >> tok;  // the '|' separator
    while (ls >> tok) {
      if (n.nref >= kMaxRefs) throw std::runtime_error("dag parse: too many refs");
      MemRef r{};
      if (tok.rfind("rs", 0) == 0 || tok.rfind("ws", 0) == 0) {
        r.kind = tok[0] == 'r' ? MemRef::StackRead : MemRef::StackWrite;
        size_t dot = tok.find('.');
        r.index = static_cast<uint32_t>(std::stoul(tok.substr(2, dot - 2)));
        r.slot = static_cast<uint8_t>(std::stoul(tok.substr(dot + 1)));
      } else {
        r.kind = tok[0] == 'r' ? MemRef::SharedRead : MemRef::SharedWrite;
        size_t br = tok.find('[');
        r.array = static_cast<uint32_t>(std::stoul(tok.substr(1, br - 1)));
        r.index = static_cast<uint32_t>(std::stoul(tok.substr(br + 1, tok.size() - br - 2)));
      }
      n.ref[n.nref++] = r;
    }
    d.nodes.push_back(n);
  }
  d.finalize();
  return d;
}

}  // namespace forksim

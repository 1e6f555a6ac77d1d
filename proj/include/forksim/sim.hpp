#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "forksim/base.hpp"
#include "forksim/dag.hpp"

namespace forksim {

enum class StealPolicy : uint8_t { None, WsHead, GenUniform, DeepBottom, Scripted };

const char* policy_name(StealPolicy p);
StealPolicy policy_from_name(const std::string& s);

struct ScriptedSteal {
  uint64_t time = 0;
  uint32_t thief = 0;
  uint32_t victim = 0;
  uint32_t position = 1;  // 1-based from the head (oldest queue entry)
  NodeId fork = kNoNode;  // when set, names the entry directly and wins over position
};

struct SchedConfig {
  uint32_t procs = 1;
  StealPolicy policy = StealPolicy::None;
  uint64_t seed = 1;
  uint32_t miss_penalty = 0;   // extra steps a node stalls per miss
  uint32_t steal_latency = 0;  // extra steps before a stolen task starts
  std::vector<ScriptedSteal> script;
};

struct CacheConfig {
  uint64_t capacity = 64;    // M, words
  uint32_t block = 8;        // B, words
  bool belady = false;       // offline optimal replacement; needs procs==1, miss_penalty==0
  bool require_tall = true;  // insist on M >= B*B
};

struct ExecRec {
  uint64_t time;
  uint32_t proc;
  NodeId node;
};

struct AccessRec {
  uint64_t time;
  uint32_t proc;
  NodeId node;
  uint64_t block;
  bool miss;
  bool shared;
};

struct StealRec {
  uint64_t time;
  uint32_t thief, victim;
  NodeId fork;   // parent fork of the stolen task
  bool deep;     // the entry placed immediately before was still enqueued
  uint32_t stack;  // stack branched for the thief
  // Deep steals: forks of the entries that sat closer to the head at
  // steal time and were never stolen afterwards (finalized post-run).
  std::vector<NodeId> pseudo;
};

struct BranchRec {
  uint64_t time;
  uint32_t proc;
  NodeId fork;     // task root whose execution branched a fresh stack
  uint32_t stack, parent_stack;
};

struct UsurpRec {
  uint64_t time;
  uint32_t proc;   // processor continuing past the join
  NodeId join;
};

struct SkippedSteal {
  uint64_t time;
  uint32_t thief;
};

struct SegRec {
  NodeId fork;
  uint32_t stack;
  uint32_t offset;
  uint64_t push_time;
  uint64_t pop_time;
};

struct Trace {
  uint32_t procs = 1;
  StealPolicy policy = StealPolicy::None;
  uint64_t seed = 0;
  uint64_t capacity = 0;
  uint32_t block = 1;
  bool belady = false;
  uint64_t steps = 0;   // completion time of the dag's exit node, plus one
  uint64_t misses = 0;
  uint32_t stacks = 1;
  std::vector<ExecRec> execs;
  std::vector<AccessRec> accesses;
  std::vector<StealRec> steals;
  std::vector<BranchRec> branches;
  std::vector<UsurpRec> usurps;
  std::vector<SkippedSteal> skipped;
  std::vector<SegRec> segments;  // one per fork, with push/pop times
  std::vector<uint64_t> proc_misses;

  static Addr stack_region(uint32_t stack) {
    return kStackBase + Addr(stack) * kStackRegionWords;
  }
  uint64_t steal_count() const { return steals.size(); }
};

Trace run_sim(const Dag& d, const SchedConfig& s, const CacheConfig& c);

// Single processor, no steals: the sequential execution.
Trace run_seq(const Dag& d, const CacheConfig& c);

uint64_t seq_miss_count(const Dag& d, const CacheConfig& c);

}  // namespace forksim

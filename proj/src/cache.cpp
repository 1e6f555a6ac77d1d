#include "forksim/cache.hpp"

#include <limits>
#include <set>
#include <unordered_map>

namespace forksim {

std::vector<bool> belady_misses(const std::vector<uint64_t>& stream, uint64_t lines) {
  const size_t n = stream.size();
  const size_t inf = std::numeric_limits<size_t>::max();
  // next[i] = next position of stream[i] after i, or inf.
  std::vector<size_t> next(n);
  std::unordered_map<uint64_t, size_t> seen;
  for (size_t i = n; i-- > 0;) {
    auto it = seen.find(stream[i]);
    next[i] = it == seen.end() ? inf : it->second;
    seen[stream[i]] = i;
  }
  std::vector<bool> miss(n, false);
  // Resident blocks keyed by next use; inf keys are disambiguated by
  // block number so the set stays consistent.
  std::set<std::pair<size_t, uint64_t>> resident;
  std::unordered_map<uint64_t, size_t> cur_next;
  for (size_t i = 0; i < n; i++) {
    uint64_t b = stream[i];
    auto it = cur_next.find(b);
    if (it != cur_next.end()) {
      resident.erase({it->second, b});
    } else {
      miss[i] = true;
      if (cur_next.size() == lines) {
        auto victim = std::prev(resident.end());
        cur_next.erase(victim->second);
        resident.erase(victim);
      }
    }
    resident.insert({next[i], b});
    cur_next[b] = next[i];
  }
  return miss;
}

uint64_t lru_miss_count(const std::vector<uint64_t>& stream, uint64_t lines) {
  LruCache c(lines);
  uint64_t m = 0;
  for (uint64_t b : stream) m += c.access(b);
  return m;
}

}  // namespace forksim

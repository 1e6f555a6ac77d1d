#pragma once
#include <cstdint>
#include <list>
#include <unordered_map>
#include <vector>

namespace forksim {

// Fully associative LRU cache over block numbers. Starts cold.
class LruCache {
 public:
  explicit LruCache(uint64_t lines) : lines_(lines) {}

  // Touches `block`; returns true on a miss.
  bool access(uint64_t block) {
    auto it = map_.find(block);
    if (it != map_.end()) {
      order_.splice(order_.begin(), order_, it->second);
      return false;
    }
    if (map_.size() == lines_) {
      map_.erase(order_.back());
      order_.pop_back();
    }
    order_.push_front(block);
    map_[block] = order_.begin();
    return true;
  }

  uint64_t lines() const { return lines_; }

 private:
  uint64_t lines_;
  std::list<uint64_t> order_;  // front = most recent
  std::unordered_map<uint64_t, std::list<uint64_t>::iterator> map_;
};

// Offline optimal replacement (furthest next use) over a fixed block
// stream; the classic second pass once the stream is known.
// Returns one miss flag per access.
std::vector<bool> belady_misses(const std::vector<uint64_t>& stream, uint64_t lines);

uint64_t lru_miss_count(const std::vector<uint64_t>& stream, uint64_t lines);

}  // namespace forksim

#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

namespace nearcrit {

class UnionFind {
 public:
  explicit UnionFind(int32_t n = 0) { Reset(n); }

  void Reset(int32_t n) {
    parent_.resize(n);
    std::iota(parent_.begin(), parent_.end(), 0);
    rank_.assign(n, 0);
  }

  int32_t Find(int32_t x) {
    int32_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      int32_t next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }

  bool Unite(int32_t a, int32_t b) {
    a = Find(a);
    b = Find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }

  bool Same(int32_t a, int32_t b) { return Find(a) == Find(b); }

 private:
  std::vector<int32_t> parent_;
  std::vector<uint8_t> rank_;
};

// Generation-stamped membership marks over a fixed index range; Clear() is O(1).
class StampSet {
 public:
  explicit StampSet(size_t n = 0) : stamp_(n, 0) {}

  void Resize(size_t n) {
    if (stamp_.size() < n) stamp_.resize(n, 0);
  }
  void Clear() {
    if (++gen_ == 0) {
      std::fill(stamp_.begin(), stamp_.end(), 0);
      gen_ = 1;
    }
  }
  bool Contains(size_t i) const { return stamp_[i] == gen_; }
  // Returns true when i was not yet marked.
  bool Insert(size_t i) {
    if (stamp_[i] == gen_) return false;
    stamp_[i] = gen_;
    return true;
  }

 private:
  std::vector<uint32_t> stamp_;
  uint32_t gen_ = 1;
};

}  // namespace nearcrit

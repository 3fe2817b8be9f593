#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

namespace nearcrit {

// Dinic's algorithm on real capacities.
class MaxFlow {
 public:
  explicit MaxFlow(int n) : head_(n, -1), level_(n), it_(n) {}

  int add_node() {
    head_.push_back(-1);
    level_.push_back(0);
    it_.push_back(0);
    return static_cast<int>(head_.size()) - 1;
  }

  void add_edge(int u, int v, double cap) {
    to_.push_back(v);
    cap_.push_back(cap);
    next_.push_back(head_[u]);
    head_[u] = static_cast<int>(to_.size()) - 1;
    to_.push_back(u);
    cap_.push_back(0);
    next_.push_back(head_[v]);
    head_[v] = static_cast<int>(to_.size()) - 1;
  }

  // Flow from s to t, stopping once `limit` is reached.
  double run(int s, int t, double limit = std::numeric_limits<double>::infinity(), double eps = 1e-15) {
    double flow = 0;
    eps_ = eps;
    while (flow < limit && bfs(s, t)) {
      it_ = head_;
      while (flow < limit) {
        double f = dfs(s, t, limit - flow);
        if (f <= eps_) break;
        flow += f;
      }
    }
    return flow;
  }

 private:
  bool bfs(int s, int t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::vector<int> q = {s};
    level_[s] = 0;
    for (size_t h = 0; h < q.size(); ++h) {
      int u = q[h];
      for (int e = head_[u]; e >= 0; e = next_[e]) {
        if (cap_[e] > eps_ && level_[to_[e]] < 0) {
          level_[to_[e]] = level_[u] + 1;
          q.push_back(to_[e]);
        }
      }
    }
    return level_[t] >= 0;
  }

  // Iterative blocking-flow search along the level graph.
  double dfs(int s, int t, double pushed) {
    std::vector<int> stack_edges;
    int u = s;
    while (true) {
      if (u == t) {
        double f = pushed;
        for (int e : stack_edges) f = std::min(f, cap_[e]);
        for (int e : stack_edges) {
          cap_[e] -= f;
          cap_[e ^ 1] += f;
        }
        return f;
      }
      int& e = it_[u];
      while (e >= 0 && !(cap_[e] > eps_ && level_[to_[e]] == level_[u] + 1)) e = next_[e];
      if (e >= 0) {
        stack_edges.push_back(e);
        u = to_[e];
      } else {
        level_[u] = -1;
        if (stack_edges.empty()) return 0;
        int back = stack_edges.back();
        stack_edges.pop_back();
        u = to_[back ^ 1];
        it_[u] = next_[it_[u]];
      }
    }
  }

  std::vector<int> head_, to_, next_, level_, it_;
  std::vector<double> cap_;
  double eps_ = 1e-15;
};

}  // namespace nearcrit

#pragma once

#include <algorithm>
#include <limits>
#include <queue>
#include <vector>

namespace mkt::detail {

// Dinic max-flow on real capacities. Edges with residual below `eps` are
// treated as saturated.
class MaxFlow {
 public:
  explicit MaxFlow(int nodes, double eps = 1e-14) : adj_(nodes), level_(nodes), it_(nodes), eps_(eps) {}

  int add_edge(int from, int to, double cap) {
    adj_[from].push_back({to, static_cast<int>(adj_[to].size()), cap, cap});
    adj_[to].push_back({from, static_cast<int>(adj_[from].size()) - 1, 0.0, 0.0});
    return static_cast<int>(adj_[from].size()) - 1;
  }

  double run(int s, int t) {
    double total = 0.0;
    while (bfs(s, t)) {
      std::fill(it_.begin(), it_.end(), 0);
      while (true) {
        const double f = dfs(s, t, std::numeric_limits<double>::infinity());
        if (f <= eps_) break;
        total += f;
      }
    }
    return total;
  }

  /// Flow pushed along edge `index` of `from`.
  double flow(int from, int index) const {
    const Edge& e = adj_[from][index];
    return e.initial - e.cap;
  }

 private:
  struct Edge {
    int to;
    int rev;
    double cap;
    double initial;
  };

  bool bfs(int s, int t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<int> q;
    level_[s] = 0;
    q.push(s);
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (const Edge& e : adj_[u]) {
        if (e.cap > eps_ && level_[e.to] < 0) {
          level_[e.to] = level_[u] + 1;
          q.push(e.to);
        }
      }
    }
    return level_[t] >= 0;
  }

  double dfs(int u, int t, double pushed) {
    if (u == t) return pushed;
    for (int& i = it_[u]; i < static_cast<int>(adj_[u].size()); ++i) {
      Edge& e = adj_[u][i];
      if (e.cap <= eps_ || level_[e.to] != level_[u] + 1) continue;
      const double got = dfs(e.to, t, std::min(pushed, e.cap));
      if (got > eps_) {
        e.cap -= got;
        adj_[e.to][e.rev].cap += got;
        return got;
      }
    }
    return 0.0;
  }

  std::vector<std::vector<Edge>> adj_;
  std::vector<int> level_;
  std::vector<int> it_;
  double eps_;
};

}  // namespace mkt::detail

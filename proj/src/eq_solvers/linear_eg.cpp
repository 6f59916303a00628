#include "mkt/eq_solvers.hpp"

#include "max_flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>

namespace mkt {

namespace {

constexpr std::size_t kMaxEdgeDrops = 256;
// Edge-drop retries start once plain proportional response has had this long.
constexpr int kEdgeDropAfter = 4096;

struct ActiveGoods {
  std::vector<Index> kept;
  std::vector<Index> dropped;
};

ActiveGoods split_goods(const Matrix& v) {
  ActiveGoods g;
  for (Index j = 0; j < v.cols(); ++j) {
    (v.col(j).maxCoeff() > 0.0 ? g.kept : g.dropped).push_back(j);
  }
  return g;
}

Matrix keep_columns(const Matrix& m, const std::vector<Index>& cols) {
  Matrix out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Index>(c)) = m.col(cols[c]);
  return out;
}

struct Candidate {
  Allocation x;
  PriceVector p;
};

Candidate expand(const Matrix& bids, const Vector& prices, const ActiveGoods& goods, Index m) {
  Candidate c{Allocation::Zero(bids.rows(), m), PriceVector::Zero(m)};
  for (std::size_t k = 0; k < goods.kept.size(); ++k) {
    const Index j = goods.kept[k];
    const auto kk = static_cast<Index>(k);
    c.p(j) = prices(kk);
    if (prices(kk) > 0.0) c.x.col(j) = bids.col(kk) / prices(kk);
  }
  return c;
}

using EdgeSet = std::vector<std::pair<Index, Index>>;

// Edges whose bang-per-buck is within a factor (1 - eta) of the agent's
// best at the approximate prices, each agent's best edge first.
EdgeSet near_best_edges(const Matrix& v, const Vector& approx, double eta) {
  EdgeSet edges;
  for (Index i = 0; i < v.rows(); ++i) {
    double best = 0.0;
    Index arg = -1;
    for (Index j = 0; j < v.cols(); ++j) {
      if (v(i, j) > 0.0 && approx(j) > 0.0 && v(i, j) / approx(j) > best) {
        best = v(i, j) / approx(j);
        arg = j;
      }
    }
    if (arg < 0) continue;
    edges.emplace_back(i, arg);
    for (Index j = 0; j < v.cols(); ++j) {
      if (j == arg || v(i, j) <= 0.0 || approx(j) <= 0.0) continue;
      if (v(i, j) / approx(j) >= best * (1.0 - eta)) edges.emplace_back(i, j);
    }
  }
  return edges;
}

bool has_cycle(const EdgeSet& edges, Index agents, Index goods) {
  std::vector<Index> parent(static_cast<std::size_t>(agents + goods));
  for (std::size_t t = 0; t < parent.size(); ++t) parent[t] = static_cast<Index>(t);
  auto root = [&](Index x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
    return x;
  };
  for (const auto& [i, j] : edges) {
    const Index a = root(i);
    const Index b = root(agents + j);
    if (a == b) return true;
    parent[static_cast<std::size_t>(a)] = b;
  }
  return false;
}

// Exact equilibrium supported on `edges`. Prices on each connected component
// of the edge graph follow from v_ij / p_j being constant per agent and the
// component's money balancing; spending is then routed by max-flow. Returns
// bids over kept goods, or nothing when the support admits no feasible
// routing.
std::optional<Matrix> snap_to_support(const Matrix& v, const Vector& budgets, const EdgeSet& edges,
                                      Vector& prices_out) {
  const Index n = v.rows();
  const Index k = v.cols();
  std::vector<std::vector<Index>> agent_edges(static_cast<std::size_t>(n));
  std::vector<std::vector<Index>> good_edges(static_cast<std::size_t>(k));
  for (const auto& [i, j] : edges) {
    agent_edges[static_cast<std::size_t>(i)].push_back(j);
    good_edges[static_cast<std::size_t>(j)].push_back(i);
  }

  Vector a = Vector::Constant(n, -1.0);  // per-agent bang-per-buck level
  Vector p = Vector::Constant(k, -1.0);
  for (Index root = 0; root < n; ++root) {
    if (a(root) >= 0.0) continue;
    std::vector<Index> comp_agents{root};
    std::vector<Index> comp_goods;
    a(root) = 1.0;
    std::queue<std::pair<bool, Index>> q;  // (is_agent, index)
    q.push({true, root});
    while (!q.empty()) {
      const auto [is_agent, idx] = q.front();
      q.pop();
      if (is_agent) {
        for (Index j : agent_edges[static_cast<std::size_t>(idx)]) {
          if (p(j) >= 0.0) continue;
          p(j) = v(idx, j) / a(idx);
          comp_goods.push_back(j);
          q.push({false, j});
        }
      } else {
        for (Index i : good_edges[static_cast<std::size_t>(idx)]) {
          if (a(i) >= 0.0) continue;
          a(i) = v(i, idx) / p(idx);
          comp_agents.push_back(i);
          q.push({true, i});
        }
      }
    }
    if (comp_goods.empty()) return std::nullopt;
    double money = 0.0;
    double value = 0.0;
    for (Index i : comp_agents) money += budgets(i);
    for (Index j : comp_goods) value += p(j);
    const double scale = money / value;
    for (Index j : comp_goods) p(j) *= scale;
  }
  if ((p.array() <= 0.0).any()) return std::nullopt;

  // source -> agents -> goods -> sink
  const int source = static_cast<int>(n + k);
  const int sink = source + 1;
  detail::MaxFlow flow(sink + 1, 1e-15 * budgets.sum());
  std::vector<std::vector<std::pair<Index, int>>> handles(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    flow.add_edge(source, static_cast<int>(i), budgets(i));
    for (Index j : agent_edges[static_cast<std::size_t>(i)]) {
      const int h = flow.add_edge(static_cast<int>(i), static_cast<int>(n + j), budgets.sum());
      handles[static_cast<std::size_t>(i)].push_back({j, h});
    }
  }
  for (Index j = 0; j < k; ++j) flow.add_edge(static_cast<int>(n + j), sink, p(j));
  const double routed = flow.run(source, sink);
  if (std::abs(routed - budgets.sum()) > 1e-12 * budgets.sum()) return std::nullopt;

  Matrix bids = Matrix::Zero(n, k);
  for (Index i = 0; i < n; ++i) {
    for (const auto& [j, h] : handles[static_cast<std::size_t>(i)]) {
      bids(i, j) = flow.flow(static_cast<int>(i), h);
    }
  }
  prices_out = p;
  return bids;
}

double kkt_size(const EquilibriumResiduals& r) {
  return r.stationarity + r.clearing + r.budget;
}

}  // namespace

MarketEquilibrium solve_linear_eg(const Instance& instance, const SolverOptions& options) {
  if (instance.kind() == ValuationKind::Leontief) {
    throw std::invalid_argument("solve_linear_eg needs linear valuations");
  }
  if (instance.kind() == ValuationKind::CES && instance.valuations().rho() != 1.0) {
    throw std::invalid_argument("solve_linear_eg needs linear valuations");
  }
  const Index n = instance.n();
  const Index m = instance.m();
  const ActiveGoods goods = split_goods(instance.valuations().matrix());
  const Matrix v = keep_columns(instance.valuations().matrix(), goods.kept);
  const Vector& budgets = instance.budgets();
  const Index k = v.cols();

  Matrix bids(n, k);
  if (options.initial.size() > 0) {
    if (options.initial.rows() != n || options.initial.cols() != m) {
      throw std::invalid_argument("initial bid matrix shape mismatch");
    }
    bids = keep_columns(options.initial, goods.kept);
    for (Index i = 0; i < n; ++i) {
      // only valued goods carry spending
      for (Index j = 0; j < k; ++j) bids(i, j) = v(i, j) > 0.0 ? std::max(bids(i, j), 0.0) : 0.0;
      const double s = bids.row(i).sum();
      if (s <= 0.0) throw std::invalid_argument("initial bids leave an agent with nothing");
      bids.row(i) *= budgets(i) / s;
    }
  } else {
    for (Index i = 0; i < n; ++i) bids.row(i) = budgets(i) * v.row(i) / v.row(i).sum();
  }

  MarketEquilibrium out;
  out.method = "linear_proportional_response";
  out.dropped_goods = goods.dropped;

  const double tol = options.tol;
  const double etas[] = {1e-12, 1e-9, 1e-7, 1e-5, 1e-4, 1e-3, 1e-2};
  Vector u_prev = Vector::Constant(n, -1.0);
  Vector prices(k);
  Matrix x(n, k);
  Vector u(n);
  int next_snap = 16;
  double best_size = std::numeric_limits<double>::infinity();
  Candidate best;

  auto finish = [&](const Candidate& c, int it, bool converged, const KktReport& rep) {
    out.allocation = c.x;
    out.prices = c.p;
    out.utilities = utilities(instance.valuations(), c.x);
    out.residuals = rep.residuals;
    out.iterations = it;
    out.converged = converged;
    return out;
  };

  for (int it = 1; it <= options.max_iter; ++it) {
    prices = bids.colwise().sum().transpose();
    for (Index j = 0; j < k; ++j) {
      x.col(j) = prices(j) > 0.0 ? Vector(bids.col(j) / prices(j)) : Vector::Zero(n);
    }
    u = (v.cwiseProduct(x)).rowwise().sum();
    double change = 0.0;
    for (Index i = 0; i < n; ++i) {
      change = std::max(change, std::abs(u(i) - u_prev(i)) / std::max(u(i), 1e-300));
    }
    u_prev = u;

    const bool settled = change < tol;
    if (settled || it == next_snap || it == options.max_iter) {
      if (it == next_snap) next_snap *= 2;
      const Candidate plain = expand(bids, prices, goods, m);
      const KktReport plain_rep = verify_kkt_linear(instance, plain.x, plain.p, tol);
      if (plain_rep.pass) return finish(plain, it, true, plain_rep);
      if (kkt_size(plain_rep.residuals) < best_size) {
        best_size = kkt_size(plain_rep.residuals);
        best = plain;
      }
      auto attempt = [&](const EdgeSet& edges) -> std::optional<MarketEquilibrium> {
        Vector snapped_p;
        const auto snapped = snap_to_support(v, budgets, edges, snapped_p);
        if (!snapped) return std::nullopt;
        const Candidate c = expand(*snapped, snapped_p, goods, m);
        const KktReport rep = verify_kkt_linear(instance, c.x, c.p, tol);
        if (!rep.pass) return std::nullopt;
        return finish(c, it, true, rep);
      };
      EdgeSet previous;
      for (double eta : etas) {
        const EdgeSet edges = near_best_edges(v, prices, eta);
        if (edges == previous) continue;
        previous = edges;
        if (auto eq = attempt(edges)) return *eq;
        // A cycle in the support is non-generic; near ties make the threshold
        // keep an edge the equilibrium does not use, so drop one secondary
        // edge at a time.
        if (it < kEdgeDropAfter || !has_cycle(edges, n, k)) continue;
        const std::size_t tries = std::min<std::size_t>(edges.size(), kMaxEdgeDrops);
        for (std::size_t e = 0, done = 0; e < edges.size() && done < tries; ++e) {
          if (e == 0 || edges[e].first != edges[e - 1].first) continue;  // agent's best edge
          ++done;
          EdgeSet fewer = edges;
          fewer.erase(fewer.begin() + static_cast<std::ptrdiff_t>(e));
          if (auto eq = attempt(fewer)) return *eq;
        }
      }
    }

    for (Index i = 0; i < n; ++i) {
      if (u(i) <= 0.0) continue;
      bids.row(i) = budgets(i) * v.row(i).cwiseProduct(x.row(i)) / u(i);
    }
  }
  return finish(best, options.max_iter, false, verify_kkt_linear(instance, best.x, best.p, tol));
}

}  // namespace mkt

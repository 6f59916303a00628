#pragma once

// Reference computations written against the model definitions only. None
// of them calls into the solvers, best-response oracles or verifiers under
// test.

#include "mkt/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

using mkt::Index;
using mkt::Matrix;
using mkt::Vector;

inline double utility(mkt::ValuationKind kind, double rho, const Vector& v, const Vector& x) {
  switch (kind) {
    case mkt::ValuationKind::Linear:
      return v.dot(x);
    case mkt::ValuationKind::Leontief: {
      double u = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < v.size(); ++j) {
        if (v(j) > 0.0) u = std::min(u, x(j) / v(j));
      }
      return u;
    }
    case mkt::ValuationKind::CES: {
      double s = 0.0;
      for (Index j = 0; j < v.size(); ++j) {
        if (v(j) <= 0.0) continue;
        if (x(j) <= 0.0) {
          if (rho < 0.0) return 0.0;
          continue;
        }
        s += v(j) * std::pow(x(j), rho);
      }
      return s > 0.0 ? std::pow(s, 1.0 / rho) : 0.0;
    }
  }
  return 0.0;
}

/// Share of each good won by `bids` against opponents' totals `opp`; bids
/// under `delta` are void.
inline Vector tp_share(const Vector& bids, const Vector& opp, double delta) {
  Vector x = Vector::Zero(bids.size());
  for (Index j = 0; j < bids.size(); ++j) {
    const double b = bids(j) >= delta ? bids(j) : 0.0;
    if (b > 0.0) x(j) = b / (b + opp(j));
  }
  return x;
}

inline double tp_payoff(mkt::ValuationKind kind, double rho, const Vector& v, const Vector& bids,
                        const Vector& opp, double delta) {
  return utility(kind, rho, v, tp_share(bids, opp, delta));
}

struct GridBest {
  Vector bids;
  double payoff = -1.0;
};

/// Exhaustive search over all bid vectors on the full m-good budget simplex
/// with spacing step * budget (m <= 3).
inline GridBest tp_grid(mkt::ValuationKind kind, double rho, const Vector& v, double budget, const Vector& opp,
                        double delta, double step) {
  const Index m = v.size();
  const int cells = static_cast<int>(std::lround(1.0 / step));
  GridBest best;
  Vector b(m);
  auto consider = [&]() {
    const double u = tp_payoff(kind, rho, v, b, opp, delta);
    if (u > best.payoff) {
      best.payoff = u;
      best.bids = b;
    }
  };
  if (m == 1) {
    b(0) = budget;
    consider();
  } else if (m == 2) {
    for (int a = 0; a <= cells; ++a) {
      b(0) = budget * a / cells;
      b(1) = budget - b(0);
      consider();
    }
  } else if (m == 3) {
    for (int a = 0; a <= cells; ++a) {
      for (int c = 0; a + c <= cells; ++c) {
        b(0) = budget * a / cells;
        b(1) = budget * c / cells;
        b(2) = budget - b(0) - b(1);
        consider();
      }
    }
  }
  return best;
}

/// Linear Fisher equilibrium conditions checked from first principles:
/// clearing of priced goods, budgets spent, spending only at the best
/// value-per-price ratio. Returns the largest violation.
inline double linear_equilibrium_violation(const Matrix& v, const Vector& budgets, const Matrix& x,
                                           const Vector& p) {
  double worst = 0.0;
  for (Index j = 0; j < x.cols(); ++j) {
    if (p(j) > 0.0) worst = std::max(worst, std::abs(x.col(j).sum() - 1.0));
  }
  for (Index i = 0; i < x.rows(); ++i) {
    worst = std::max(worst, std::abs(x.row(i).dot(p) - budgets(i)));
    double top = 0.0;
    for (Index j = 0; j < x.cols(); ++j) {
      if (p(j) > 0.0) top = std::max(top, v(i, j) / p(j));
    }
    // money spent below the best ratio, weighted by the ratio shortfall
    for (Index j = 0; j < x.cols(); ++j) {
      if (p(j) > 0.0) worst = std::max(worst, x(i, j) * p(j) * (top - v(i, j) / p(j)) / top);
    }
  }
  return worst;
}

/// Leontief equilibrium conditions: bundles proportional to requirements at
/// level B_i / (v_i . p), clearing of priced goods, supply respected.
inline double leontief_equilibrium_violation(const Matrix& v, const Vector& budgets, const Matrix& x,
                                             const Vector& p) {
  double worst = 0.0;
  for (Index i = 0; i < v.rows(); ++i) {
    const double level = budgets(i) / v.row(i).dot(p);
    for (Index j = 0; j < v.cols(); ++j) worst = std::max(worst, std::abs(x(i, j) - level * v(i, j)));
  }
  for (Index j = 0; j < v.cols(); ++j) {
    const double sold = x.col(j).sum();
    worst = std::max(worst, sold - 1.0);
    if (p(j) > 0.0) worst = std::max(worst, std::abs(sold - 1.0));
  }
  return worst;
}

/// CES Marshallian demand of one agent at prices p (all demanded goods
/// priced): x_j proportional to (v_j / p_j)^sigma with sigma = 1 / (1 - rho).
inline Vector ces_demand(const Vector& v, double rho, double budget, const Vector& p) {
  const double sigma = 1.0 / (1.0 - rho);
  Vector x = Vector::Zero(v.size());
  double spend = 0.0;
  for (Index j = 0; j < v.size(); ++j) {
    if (v(j) <= 0.0) continue;
    x(j) = std::pow(v(j) / p(j), sigma);
    spend += x(j) * p(j);
  }
  return x * (budget / spend);
}

inline double eg_objective(mkt::ValuationKind kind, double rho, const Matrix& v, const Vector& budgets,
                           const Matrix& x) {
  double s = 0.0;
  for (Index i = 0; i < v.rows(); ++i) {
    s += budgets(i) * std::log(utility(kind, rho, v.row(i).transpose(), x.row(i).transpose()));
  }
  return s;
}

/// Best EG objective over allocations where every good is split on a grid of
/// `cells` parts among agents (n = 2 or 3 agents, any m <= 3).
inline double eg_grid_best(mkt::ValuationKind kind, double rho, const Matrix& v, const Vector& budgets,
                           int cells) {
  const Index n = v.rows();
  const Index m = v.cols();
  std::vector<std::vector<double>> splits;  // shares of one good per agent
  if (n == 2) {
    for (int a = 0; a <= cells; ++a) splits.push_back({double(a) / cells, 1.0 - double(a) / cells});
  } else {
    for (int a = 0; a <= cells; ++a) {
      for (int b = 0; a + b <= cells; ++b) {
        splits.push_back({double(a) / cells, double(b) / cells, double(cells - a - b) / cells});
      }
    }
  }
  double best = -std::numeric_limits<double>::infinity();
  Matrix x(n, m);
  std::function<void(Index)> rec = [&](Index j) {
    if (j == m) {
      best = std::max(best, eg_objective(kind, rho, v, budgets, x));
      return;
    }
    for (const auto& s : splits) {
      for (Index i = 0; i < n; ++i) x(i, j) = s[static_cast<std::size_t>(i)];
      rec(j + 1);
    }
  };
  rec(0);
  return best;
}

/// Weighted geometric mean straight from the product form.
inline double nsw_direct(const Vector& u, const Vector& budgets) {
  double prod = 1.0;
  for (Index i = 0; i < u.size(); ++i) prod *= std::pow(u(i), budgets(i));
  return std::pow(prod, 1.0 / budgets.sum());
}

/// Utilities at the lower-bound profile recomputed from its prices: the
/// first k goods cost 1 + (n - k)(1 - delta) / k, a first-k agent buys its
/// good with its whole budget, a middle agent holds its own good alone and
/// buys (1 - delta) / k of spending on each first-k good at value eps.
struct LowerBoundReference {
  double u_first;
  double u_middle;
  double ratio;
};

inline LowerBoundReference lower_bound_reference(Index n, Index k) {
  const double nn = static_cast<double>(n);
  const double kk = static_cast<double>(k);
  const double eps = 1.0 / (nn * nn * nn * nn);
  const double delta = 2.0 / nn;
  const double price = 1.0 + (nn - kk) * (1.0 - delta) / kk;
  LowerBoundReference r{};
  r.u_first = 1.0 / price;
  r.u_middle = 1.0 + kk * eps * ((1.0 - delta) / kk) / price;
  // agents n+1 and n+2 each take half of the shared good, worth 1
  Vector u(n + 2);
  Vector b = Vector::Ones(n + 2);
  for (Index i = 0; i < n + 2; ++i) u(i) = i < k ? r.u_first : (i < n ? r.u_middle : 1.0);
  r.ratio = 1.0 / nsw_direct(u, b);
  return r;
}

}  // namespace oracle

#include "mkt/eq_solvers.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mkt {

namespace {

struct Pair {
  Index agent;
  Index good;  // column in the full instance
};

// -sum_i B_i log u_i over the (agent, good) pairs with positive value.
class CesObjective {
 public:
  CesObjective(const Instance& instance, std::vector<Pair> pairs)
      : v_(instance.valuations().matrix()),
        budgets_(instance.budgets()),
        rho_(instance.valuations().rho()),
        pairs_(std::move(pairs)),
        by_agent_(static_cast<std::size_t>(instance.n())) {
    for (std::size_t p = 0; p < pairs_.size(); ++p) {
      by_agent_[static_cast<std::size_t>(pairs_[p].agent)].push_back(static_cast<Index>(p));
    }
  }

  Index size() const { return static_cast<Index>(pairs_.size()); }
  const std::vector<Pair>& pairs() const { return pairs_; }

  /// log S_i for every agent; -inf never occurs for strictly positive x.
  Vector log_sums(const Vector& x) const {
    Vector out(static_cast<Index>(by_agent_.size()));
    for (std::size_t i = 0; i < by_agent_.size(); ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (Index p : by_agent_[i]) mx = std::max(mx, term(x, p));
      double acc = 0.0;
      for (Index p : by_agent_[i]) acc += std::exp(term(x, p) - mx);
      out(static_cast<Index>(i)) = mx + std::log(acc);
    }
    return out;
  }

  double value(const Vector& x) const {
    const Vector ls = log_sums(x);
    double f = 0.0;
    for (Index i = 0; i < ls.size(); ++i) f -= budgets_(i) * ls(i) / rho_;
    return f;
  }

  /// d log u_i / d x_p for the pair's own agent.
  Vector marginal(const Vector& x, const Vector& ls) const {
    Vector g(size());
    for (Index p = 0; p < size(); ++p) {
      const Pair& pr = pairs_[static_cast<std::size_t>(p)];
      g(p) = std::exp(std::log(v_(pr.agent, pr.good)) + (rho_ - 1.0) * std::log(x(p)) - ls(pr.agent));
    }
    return g;
  }

  void derivatives(const Vector& x, Vector& grad, Matrix& hess) const {
    const Vector ls = log_sums(x);
    const Vector g = marginal(x, ls);
    grad.resize(size());
    hess.setZero(size(), size());
    for (std::size_t i = 0; i < by_agent_.size(); ++i) {
      const double b = budgets_(static_cast<Index>(i));
      for (Index a : by_agent_[i]) {
        grad(a) = -b * g(a);
        hess(a, a) += b * (1.0 - rho_) * g(a) / x(a);
        for (Index c : by_agent_[i]) hess(a, c) += b * rho_ * g(a) * g(c);
      }
    }
  }

 private:
  double term(const Vector& x, Index p) const {
    const Pair& pr = pairs_[static_cast<std::size_t>(p)];
    return std::log(v_(pr.agent, pr.good)) + rho_ * std::log(x(p));
  }

  const Matrix& v_;
  const Vector& budgets_;
  double rho_;
  std::vector<Pair> pairs_;
  std::vector<std::vector<Index>> by_agent_;
};

}  // namespace

MarketEquilibrium solve_ces_eg(const Instance& instance, const SolverOptions& options) {
  if (instance.kind() != ValuationKind::CES) {
    throw std::invalid_argument("solve_ces_eg needs CES valuations");
  }
  if (instance.valuations().rho() == 1.0) {
    MarketEquilibrium eq = solve_linear_eg(instance, options);
    eq.method = "ces_linear_limit";
    return eq;
  }
  const Index n = instance.n();
  const Index m = instance.m();
  const Matrix& v = instance.valuations().matrix();

  MarketEquilibrium out;
  out.method = "ces_newton";
  std::vector<Pair> pairs;
  std::vector<Index> kept;
  for (Index j = 0; j < m; ++j) {
    if (v.col(j).maxCoeff() <= 0.0) {
      out.dropped_goods.push_back(j);
      continue;
    }
    kept.push_back(j);
    for (Index i = 0; i < n; ++i) {
      if (v(i, j) > 0.0) pairs.push_back({i, j});
    }
  }
  const CesObjective objective(instance, pairs);
  const Index size = objective.size();
  const auto k = static_cast<Index>(kept.size());

  // Column constraints sum_i x_ij = 1 over kept goods.
  Matrix a = Matrix::Zero(k, size);
  {
    std::vector<Index> row_of(static_cast<std::size_t>(m), -1);
    for (Index c = 0; c < k; ++c) row_of[static_cast<std::size_t>(kept[static_cast<std::size_t>(c)])] = c;
    for (Index p = 0; p < size; ++p) a(row_of[static_cast<std::size_t>(pairs[static_cast<std::size_t>(p)].good)], p) = 1.0;
  }

  Vector x(size);
  for (Index p = 0; p < size; ++p) {
    const Pair& pr = pairs[static_cast<std::size_t>(p)];
    if (options.initial.size() > 0) {
      if (options.initial.rows() != n || options.initial.cols() != m) {
        throw std::invalid_argument("initial allocation shape mismatch");
      }
      x(p) = options.initial(pr.agent, pr.good);
      if (!(x(p) > 0.0)) throw std::invalid_argument("initial allocation must be strictly positive");
    } else {
      x(p) = 1.0 / static_cast<double>((v.col(pr.good).array() > 0.0).count());
    }
  }
  // Project the starting point onto the column constraints by rescaling.
  for (Index c = 0; c < k; ++c) {
    double s = 0.0;
    for (Index p = 0; p < size; ++p) s += a(c, p) * x(p);
    for (Index p = 0; p < size; ++p) {
      if (a(c, p) > 0.0) x(p) /= s;
    }
  }

  Vector grad;
  Matrix hess;
  int it = 0;
  int local_steps = 0;
  for (; it < options.max_iter; ++it) {
    objective.derivatives(x, grad, hess);
    hess.diagonal().array() += 1e-13 * std::max(hess.diagonal().maxCoeff(), 1e-300);
    Matrix kkt = Matrix::Zero(size + k, size + k);
    kkt.topLeftCorner(size, size) = hess;
    kkt.topRightCorner(size, k) = a.transpose();
    kkt.bottomLeftCorner(k, size) = a;
    Vector rhs(size + k);
    rhs.head(size) = -grad;
    rhs.tail(k) = Vector::Ones(k) - a * x;
    const Vector sol = kkt.partialPivLu().solve(rhs);
    const Vector dx = sol.head(size);
    const double decrement = dx.dot(hess * dx);
    if (!(decrement >= 0.0) || decrement < 1e-22 * instance.total_budget()) break;

    double step = 1.0;
    for (Index p = 0; p < size; ++p) {
      if (dx(p) < 0.0) step = std::min(step, -0.99 * x(p) / dx(p));
    }
    // Near the optimum the decrement sinks below the objective's rounding
    // and the column drift, so Armijo stops seeing progress; full steps
    // converge quadratically there.
    if (decrement < 1e-12 * instance.total_budget()) {
      x += step * dx;
      if (++local_steps >= 6) break;
      continue;
    }
    const double f0 = objective.value(x);
    const double slope = grad.dot(dx);
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Vector trial = x + step * dx;
      const double f1 = objective.value(trial);
      if (std::isfinite(f1) && f1 <= f0 + 1e-4 * step * slope) {
        x = trial;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }

  out.allocation = Allocation::Zero(n, m);
  for (Index p = 0; p < size; ++p) {
    out.allocation(pairs[static_cast<std::size_t>(p)].agent, pairs[static_cast<std::size_t>(p)].good) = x(p);
  }

  // Prices from the multipliers: p_j = max over demanders of B_i du_i/dx_ij / u_i.
  const Vector g = objective.marginal(x, objective.log_sums(x));
  out.prices = PriceVector::Zero(m);
  for (Index p = 0; p < size; ++p) {
    const Pair& pr = pairs[static_cast<std::size_t>(p)];
    out.prices(pr.good) = std::max(out.prices(pr.good), instance.budget(pr.agent) * g(p));
  }
  double stationarity = 0.0;
  for (Index p = 0; p < size; ++p) {
    const Pair& pr = pairs[static_cast<std::size_t>(p)];
    const double price = out.prices(pr.good);
    stationarity = std::max(stationarity, std::abs(instance.budget(pr.agent) * g(p) - price) / price);
  }

  out.utilities = utilities(instance.valuations(), out.allocation);
  out.iterations = it;
  const Vector spend = out.allocation * out.prices;
  out.residuals.stationarity = stationarity;
  out.residuals.budget = (spend - instance.budgets()).cwiseAbs().maxCoeff();
  out.residuals.money = std::abs(out.prices.sum() - instance.total_budget());
  for (Index j : kept) {
    out.residuals.clearing = std::max(out.residuals.clearing, std::abs(1.0 - out.allocation.col(j).sum()));
  }
  out.converged = stationarity <= options.tol && out.residuals.clearing <= options.tol &&
                  out.residuals.budget <= options.tol * std::max(1.0, instance.budgets().maxCoeff());
  return out;
}

MarketEquilibrium solve_eg(const Instance& instance, const SolverOptions& options) {
  switch (instance.kind()) {
    case ValuationKind::Linear:
      return solve_linear_eg(instance, options);
    case ValuationKind::Leontief:
      return solve_leontief_dual(instance, options);
    case ValuationKind::CES:
      return solve_ces_eg(instance, options);
  }
  throw std::logic_error("unhandled valuation kind");
}

}  // namespace mkt

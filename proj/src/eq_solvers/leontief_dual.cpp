#include "mkt/eq_solvers.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mkt {

namespace {

constexpr double kPriceFloor = 1e-12;

struct DualProblem {
  const Matrix& v;  // n x k over demanded goods
  const Vector& budgets;

  double value(const Vector& p) const {
    const Vector phi = v * p;
    double f = p.sum();
    for (Index i = 0; i < phi.size(); ++i) f -= budgets(i) * std::log(phi(i));
    return f;
  }

  Vector gradient(const Vector& p) const {
    const Vector phi = v * p;
    const Vector w = budgets.cwiseQuotient(phi);
    return Vector::Ones(p.size()) - v.transpose() * w;
  }

  Matrix hessian(const Vector& p) const {
    const Vector phi = v * p;
    const Vector w = budgets.cwiseQuotient(phi.cwiseProduct(phi));
    return v.transpose() * w.asDiagonal() * v;
  }
};

// Natural residual of the complementarity system p >= 0, g >= 0, p.g = 0,
// with prices measured relative to total money.
double natural_residual(const Vector& p, const Vector& g, double money) {
  double r = 0.0;
  for (Index j = 0; j < p.size(); ++j) {
    r = std::max(r, std::abs(std::min((p(j) - kPriceFloor) / money, g(j))));
  }
  return r;
}

}  // namespace

MarketEquilibrium solve_leontief_dual(const Instance& instance, const SolverOptions& options) {
  if (instance.kind() != ValuationKind::Leontief) {
    throw std::invalid_argument("solve_leontief_dual needs Leontief valuations");
  }
  const Index n = instance.n();
  const Index m = instance.m();
  const Matrix& full = instance.valuations().matrix();
  std::vector<Index> kept;
  MarketEquilibrium out;
  out.method = "leontief_dual";
  for (Index j = 0; j < m; ++j) {
    (full.col(j).maxCoeff() > 0.0 ? kept : out.dropped_goods).push_back(j);
  }
  const auto k = static_cast<Index>(kept.size());
  Matrix v(n, k);
  for (Index c = 0; c < k; ++c) v.col(c) = full.col(kept[static_cast<std::size_t>(c)]);

  const Vector& budgets = instance.budgets();
  const double money = instance.total_budget();
  const DualProblem problem{v, budgets};

  Vector p = Vector::Constant(k, money / static_cast<double>(k));
  if (options.initial.size() > 0) {
    if (options.initial.size() != m) throw std::invalid_argument("initial price vector length mismatch");
    const Eigen::Map<const Vector> init(options.initial.data(), m);
    for (Index c = 0; c < k; ++c) p(c) = std::max(init(kept[static_cast<std::size_t>(c)]), kPriceFloor);
  }

  const double target = std::min(options.tol * 1e-3, 1e-10);
  int it = 0;
  for (; it < options.max_iter; ++it) {
    const Vector g = problem.gradient(p);
    const double res = natural_residual(p, g, money);
    if (res <= target) break;

    // Bertsekas-style projected Newton: coordinates pinned at the floor with
    // positive gradient move by scaled gradient, the rest by a Newton step.
    const double eps_bind = std::min(1e-8 * money, res * money);
    std::vector<Index> free_set;
    std::vector<Index> bound_set;
    for (Index j = 0; j < k; ++j) {
      (p(j) <= kPriceFloor + eps_bind && g(j) > 0.0 ? bound_set : free_set).push_back(j);
    }
    const Matrix h = problem.hessian(p);
    Vector d = Vector::Zero(k);
    if (!free_set.empty()) {
      const auto f = static_cast<Index>(free_set.size());
      Matrix hf(f, f);
      Vector gf(f);
      for (Index a = 0; a < f; ++a) {
        gf(a) = g(free_set[static_cast<std::size_t>(a)]);
        for (Index b = 0; b < f; ++b) {
          hf(a, b) = h(free_set[static_cast<std::size_t>(a)], free_set[static_cast<std::size_t>(b)]);
        }
      }
      const double mu = 1e-12 * std::max(hf.diagonal().maxCoeff(), 1e-300);
      hf.diagonal().array() += mu;
      const Vector df = -hf.ldlt().solve(gf);
      for (Index a = 0; a < f; ++a) d(free_set[static_cast<std::size_t>(a)]) = df(a);
    }
    for (Index j : bound_set) d(j) = -g(j) / std::max(h(j, j), 1e-12);

    const double f0 = problem.value(p);
    // Near the optimum the decrease drops below the resolution of f; a
    // shrinking residual then decides.
    auto accept = [&](double f1, const Vector& trial) {
      if (!std::isfinite(f1)) return false;
      if (f1 <= f0 + 1e-4 * g.dot(trial - p)) return true;
      return f1 <= f0 + 1e-13 * std::abs(f0) &&
             natural_residual(trial, problem.gradient(trial), money) < res;
    };
    double step = 1.0;
    Vector next = p;
    bool moved = false;
    for (int ls = 0; ls < 80; ++ls) {
      next = (p + step * d).cwiseMax(kPriceFloor);
      const double f1 = problem.value(next);
      if (accept(f1, next)) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) {
      // Newton direction failed; fall back to a projected gradient step.
      step = 1.0;
      for (int ls = 0; ls < 80; ++ls) {
        next = (p - step * money * g).cwiseMax(kPriceFloor);
        const double f1 = problem.value(next);
        if (accept(f1, next)) {
          moved = true;
          break;
        }
        step *= 0.5;
      }
    }
    if (!moved || (next - p).cwiseAbs().maxCoeff() <= 1e-16 * money) {
      p = next;
      break;
    }
    p = next;
  }

  // Prices negligible relative to total money are reported as zero; those
  // goods stay partly unsold (Sum_i x_ij < 1 is allowed at zero price).
  for (Index j = 0; j < k; ++j) {
    if (p(j) <= 1e-9 * money) p(j) = 0.0;
  }
  const Vector phi = v * p;

  out.prices = PriceVector::Zero(m);
  for (Index c = 0; c < k; ++c) out.prices(kept[static_cast<std::size_t>(c)]) = p(c);
  out.allocation = Allocation::Zero(n, m);
  for (Index i = 0; i < n; ++i) {
    const double ui = phi(i) > 0.0 ? budgets(i) / phi(i) : 0.0;
    for (Index c = 0; c < k; ++c) out.allocation(i, kept[static_cast<std::size_t>(c)]) = ui * v(i, c);
  }
  out.utilities = utilities(instance.valuations(), out.allocation);
  out.iterations = it;
  const KktReport rep = verify_kkt_leontief(instance, out.allocation, out.prices, options.tol);
  out.residuals = rep.residuals;
  out.duality_gap = duality_gap_leontief(instance, out.allocation, out.prices);
  out.converged = rep.pass && out.duality_gap <= options.tol;
  return out;
}

}  // namespace mkt

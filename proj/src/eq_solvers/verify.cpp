#include "mkt/eq_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mkt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_shapes(const Instance& instance, const Allocation& x, const PriceVector& p) {
  if (x.rows() != instance.n() || x.cols() != instance.m()) {
    throw std::invalid_argument("allocation shape does not match instance");
  }
  if (p.size() != instance.m()) throw std::invalid_argument("price vector length mismatch");
}

// Budget, clearing and money residuals shared by every family.
void market_residuals(const Instance& instance, const Allocation& x, const PriceVector& p,
                      double tol, EquilibriumResiduals& r) {
  const Vector spend = x * p;
  r.budget = (spend - instance.budgets()).cwiseAbs().maxCoeff();
  r.money = std::abs(p.sum() - instance.total_budget());
  r.clearing = 0.0;
  for (Index j = 0; j < instance.m(); ++j) {
    const double sold = x.col(j).sum();
    const double miss = p(j) > tol ? std::abs(1.0 - sold) : std::max(0.0, sold - 1.0);
    r.clearing = std::max(r.clearing, miss);
  }
}

bool residuals_pass(const Instance& instance, const EquilibriumResiduals& r, double tol) {
  const double money_scale = std::max(1.0, instance.budgets().maxCoeff());
  return r.stationarity <= tol && r.clearing <= tol && r.budget <= tol * money_scale;
}

}  // namespace

KktReport verify_kkt_linear(const Instance& instance, const Allocation& x, const PriceVector& p,
                            double tol) {
  check_shapes(instance, x, p);
  const Matrix& v = instance.valuations().matrix();
  KktReport report;
  auto& r = report.residuals;
  market_residuals(instance, x, p, tol, r);

  for (Index i = 0; i < instance.n(); ++i) {
    double best = 0.0;
    for (Index j = 0; j < instance.m(); ++j) {
      if (v(i, j) <= 0.0) continue;
      best = std::max(best, p(j) > 0.0 ? v(i, j) / p(j) : kInf);
    }
    for (Index j = 0; j < instance.m(); ++j) {
      if (x(i, j) <= tol) continue;
      double shortfall = 1.0;
      if (std::isfinite(best) && p(j) > 0.0) shortfall = (best - v(i, j) / p(j)) / best;
      r.stationarity = std::max(r.stationarity, shortfall);
    }
    // A valued free good can never be part of a linear equilibrium.
    if (!std::isfinite(best)) r.stationarity = std::max(r.stationarity, 1.0);
  }
  report.pass = residuals_pass(instance, r, tol);
  return report;
}

KktReport verify_kkt_leontief(const Instance& instance, const Allocation& x, const PriceVector& p,
                              double tol) {
  check_shapes(instance, x, p);
  const Matrix& v = instance.valuations().matrix();
  KktReport report;
  auto& r = report.residuals;
  market_residuals(instance, x, p, tol, r);

  const Vector phi = v * p;
  for (Index i = 0; i < instance.n(); ++i) {
    if (phi(i) <= 0.0) {
      r.stationarity = kInf;
      continue;
    }
    const double target = instance.budget(i) / phi(i);
    for (Index j = 0; j < instance.m(); ++j) {
      if (v(i, j) <= 0.0) continue;
      r.stationarity = std::max(r.stationarity, std::abs(x(i, j) / v(i, j) - target) / target);
    }
  }
  report.pass = residuals_pass(instance, r, tol);
  return report;
}

double optimal_bundle_utility(const ValuationProfile& profile, Index agent, double budget,
                              const PriceVector& prices, double /*tol*/) {
  if (prices.size() != profile.goods()) throw std::invalid_argument("price vector length mismatch");
  const auto v = profile.matrix().row(agent);
  const double rho = profile.kind() == ValuationKind::CES ? profile.rho() : 1.0;

  if (profile.kind() == ValuationKind::Leontief) {
    const double phi = v.dot(prices);
    return phi > 0.0 ? budget / phi : kInf;
  }
  if (profile.kind() == ValuationKind::Linear || rho == 1.0) {
    double best = 0.0;
    for (Index j = 0; j < v.size(); ++j) {
      if (v(j) <= 0.0) continue;
      if (prices(j) <= 0.0) return kInf;
      best = std::max(best, v(j) / prices(j));
    }
    return budget * best;
  }

  // CES indirect utility: budget / e(p) with the price index
  // e(p) = (sum_j v_j^s p_j^(1-s))^(1/(1-s)), s = 1 / (1 - rho).
  const double s = 1.0 / (1.0 - rho);
  double max_term = -kInf;
  std::vector<double> terms;
  for (Index j = 0; j < v.size(); ++j) {
    if (v(j) <= 0.0) continue;
    if (prices(j) <= 0.0) {
      if (rho > 0.0) return kInf;  // p^(1-s) blows up for s > 1
      continue;                    // zero contribution for s < 1
    }
    const double t = s * std::log(v(j)) + (1.0 - s) * std::log(prices(j));
    terms.push_back(t);
    max_term = std::max(max_term, t);
  }
  if (terms.empty()) return kInf;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - max_term);
  const double log_index = (max_term + std::log(acc)) / (1.0 - s);
  return budget * std::exp(-log_index);
}

EpsEquilibriumReport verify_eps_market_eq(const Instance& instance, const Allocation& x,
                                          const PriceVector& p, double eps, double tol) {
  check_shapes(instance, x, p);
  EpsEquilibriumReport report;
  report.eps = eps;
  EquilibriumResiduals r;
  market_residuals(instance, x, p, tol, r);
  report.clearing_residual = r.clearing;
  report.budget_residual = r.budget;
  report.goods_sold = r.clearing <= tol;
  report.budgets_spent = r.budget <= tol * std::max(1.0, instance.budgets().maxCoeff());

  const auto& profile = instance.valuations();
  report.actual_utilities = utilities(profile, x);
  report.optimal_utilities.resize(instance.n());
  report.ratios.resize(instance.n());
  double worst = 0.0;
  for (Index i = 0; i < instance.n(); ++i) {
    const double opt = optimal_bundle_utility(profile, i, instance.budget(i), p, tol);
    const double have = report.actual_utilities(i);
    report.optimal_utilities(i) = opt;
    report.ratios(i) = have > 0.0 ? opt / have : (opt > 0.0 ? kInf : 1.0);
    worst = std::max(worst, report.ratios(i));
  }
  report.eps_required = std::max(0.0, worst - 1.0);
  report.pass = report.goods_sold && report.budgets_spent && worst <= 1.0 + eps + tol;
  return report;
}

double duality_gap_leontief(const Instance& instance, const Allocation& x, const PriceVector& p) {
  check_shapes(instance, x, p);
  const auto& profile = instance.valuations();
  const Vector phi = profile.matrix() * p;
  const UtilityVector u = utilities(profile, x);
  double dual = p.sum();
  double primal = 0.0;
  for (Index i = 0; i < instance.n(); ++i) {
    if (phi(i) <= 0.0 || u(i) <= 0.0) return kInf;
    const double b = instance.budget(i);
    dual += -b * std::log(phi(i)) + b * std::log(b) - b;
    primal += b * std::log(u(i));
  }
  return dual - primal;
}

Report to_report(const MarketEquilibrium& eq) {
  Report r;
  r.add("method", eq.method)
      .add("converged", eq.converged)
      .add("iterations", eq.iterations)
      .add("utilities", eq.utilities)
      .add("prices", eq.prices)
      .add("allocation", eq.allocation)
      .add("residual_stationarity", eq.residuals.stationarity)
      .add("residual_clearing", eq.residuals.clearing)
      .add("residual_budget", eq.residuals.budget)
      .add("residual_money", eq.residuals.money)
      .add("dropped_goods", eq.dropped_goods);
  if (eq.method == "leontief_dual") r.add("duality_gap", eq.duality_gap);
  return r;
}

}  // namespace mkt

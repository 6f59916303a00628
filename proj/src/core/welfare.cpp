#include "mkt/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mkt {

double nsw(const UtilityVector& utilities, const Vector& budgets) {
  if (utilities.size() != budgets.size()) {
    throw std::invalid_argument("utility and budget vectors differ in length");
  }
  if (utilities.size() == 0) throw std::invalid_argument("nsw of an empty market");
  if ((utilities.array() < 0.0).any() || !utilities.allFinite()) {
    throw std::invalid_argument("utilities must be finite and non-negative");
  }
  double weighted_log = 0.0;
  double total = 0.0;
  for (Index i = 0; i < utilities.size(); ++i) {
    if (budgets(i) <= 0.0) continue;
    if (utilities(i) == 0.0) return 0.0;
    weighted_log += budgets(i) * std::log(utilities(i));
    total += budgets(i);
  }
  return std::exp(weighted_log / total);
}

double poa_ratio(double opt_nsw, double eq_nsw, double tol) {
  if (!(opt_nsw > 0.0)) throw std::invalid_argument("optimal NSW must be positive");
  if (eq_nsw <= 0.0) return std::numeric_limits<double>::infinity();
  const double r = opt_nsw / eq_nsw;
  if (r < 1.0 && r >= 1.0 - tol) return 1.0;
  return r;
}

ProportionalityReport proportionality_check(const Instance& instance, const Allocation& allocation,
                                            const Vector& slack, double tol) {
  if (slack.size() != instance.n()) {
    throw std::invalid_argument("slack vector length does not match agent count");
  }
  const auto& profile = instance.valuations();
  const Vector full = Vector::Ones(instance.m());
  const double total = instance.total_budget();

  ProportionalityReport report;
  report.min_margin = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < instance.n(); ++i) {
    AgentProportionality a;
    a.utility = eval_valuation(profile, i, allocation.row(i).transpose());
    a.guarantee = instance.budget(i) / total * (1.0 - slack(i)) * eval_valuation(profile, i, full);
    a.margin = a.utility - a.guarantee;
    a.pass = a.margin >= -tol;
    report.all_pass = report.all_pass && a.pass;
    report.min_margin = std::min(report.min_margin, a.margin);
    report.agents.push_back(a);
  }
  return report;
}

Vector entrance_fee_slack(const Instance& instance, double delta) {
  const double m_minus_1 = static_cast<double>(instance.m() - 1);
  return (delta * m_minus_1) / instance.budgets().array();
}

}  // namespace mkt

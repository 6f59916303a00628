#include "mkt/fisher_game.hpp"

#include <cmath>

namespace mkt {

GameOutcome fisher_outcome(const Instance& instance, const ReportProfile& reports,
                           const SolverOptions& options) {
  if (reports.rows() != instance.n() || reports.cols() != instance.m()) {
    throw std::invalid_argument("report profile shape does not match instance");
  }
  if (!reports.allFinite() || (reports.array() < 0.0).any()) {
    throw std::invalid_argument("reports must be finite and non-negative");
  }
  GameOutcome out;
  std::vector<Index> active;
  for (Index i = 0; i < instance.n(); ++i) {
    (reports.row(i).maxCoeff() > 0.0 ? active : out.empty_reports).push_back(i);
  }
  if (active.empty()) throw std::invalid_argument("every report is empty");

  const auto na = static_cast<Index>(active.size());
  Matrix declared(na, instance.m());
  Vector budgets(na);
  for (Index a = 0; a < na; ++a) {
    declared.row(a) = reports.row(active[static_cast<std::size_t>(a)]);
    budgets(a) = instance.budget(active[static_cast<std::size_t>(a)]);
  }
  const Instance market(budgets, instance.valuations().with_matrix(declared));
  MarketEquilibrium eq = solve_eg(market, options);

  out.equilibrium = eq;
  out.equilibrium.allocation = Allocation::Zero(instance.n(), instance.m());
  out.equilibrium.utilities = UtilityVector::Zero(instance.n());
  for (Index a = 0; a < na; ++a) {
    const Index i = active[static_cast<std::size_t>(a)];
    out.equilibrium.allocation.row(i) = eq.allocation.row(a);
    out.equilibrium.utilities(i) = eq.utilities(a);
  }
  out.true_utilities = utilities(instance.valuations(), out.equilibrium.allocation);
  out.nsw = nsw(out.true_utilities, instance.budgets());
  return out;
}

std::pair<ReportProfile, GameOutcome> uniform_leontief_ne(const Instance& instance,
                                                          const SolverOptions& options) {
  if (instance.kind() != ValuationKind::Leontief) {
    throw std::invalid_argument("uniform report equilibrium is defined for Leontief instances");
  }
  const ReportProfile reports =
      ReportProfile::Constant(instance.n(), instance.m(), 1.0 / static_cast<double>(instance.m()));
  return {reports, fisher_outcome(instance, reports, options)};
}

Report to_report(const GameOutcome& outcome) {
  Report r;
  r.add("true_utilities", outcome.true_utilities)
      .add("nsw", outcome.nsw)
      .add("empty_reports", outcome.empty_reports);
  r.merge("equilibrium", to_report(outcome.equilibrium));
  return r;
}

}  // namespace mkt

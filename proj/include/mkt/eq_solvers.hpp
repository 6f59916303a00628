#pragma once

#include "mkt/core.hpp"
#include "mkt/io.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mkt {

struct EquilibriumResiduals {
  /// Linear: worst relative bang-per-buck shortfall on a purchased good.
  /// Leontief: worst |x_ij / v_ij - B_i / phi_i(p)|. CES: worst relative
  /// gap between an agent's weighted marginal utility and the price.
  double stationarity = 0.0;
  /// Positively priced goods that are not fully sold, or over-allocation.
  double clearing = 0.0;
  /// max_i |sum_j x_ij p_j - B_i|
  double budget = 0.0;
  /// |sum_j p_j - total budget|
  double money = 0.0;
};

struct MarketEquilibrium {
  Allocation allocation;
  PriceVector prices;
  UtilityVector utilities;
  EquilibriumResiduals residuals;
  int iterations = 0;
  bool converged = false;
  /// Goods nobody values; removed before solving, zero price, unallocated.
  std::vector<Index> dropped_goods;
  /// Leontief only: dual minus primal objective.
  double duality_gap = 0.0;
  std::string method;
};

struct SolverOptions {
  double tol = kDefaultTol;
  int max_iter = 200000;
  /// Starting bids (linear), prices (Leontief, stored as a 1 x m matrix or
  /// m x 1) or allocation (CES). Empty means the solver's default start.
  Matrix initial;
};

/// Linear Fisher market equilibrium. Runs proportional response
/// (b_ij <- B_i v_ij x_ij / u_i) and periodically snaps the iterate to the
/// exact equilibrium supported on its near-tight bang-per-buck edges.
MarketEquilibrium solve_linear_eg(const Instance& instance, const SolverOptions& options = {});

/// Leontief equilibrium from the price-space dual
///   min sum_j p_j - sum_i B_i log(sum_j v_ij p_j),  p >= 0,
/// solved by projected Newton with backtracking. u_i = B_i / phi_i(p) and
/// x_ij = u_i v_ij.
MarketEquilibrium solve_leontief_dual(const Instance& instance, const SolverOptions& options = {});

/// CES Eisenberg-Gale program max sum_i B_i log u_i(x) over the per-good
/// simplices. rho = 1 is delegated to solve_linear_eg.
MarketEquilibrium solve_ces_eg(const Instance& instance, const SolverOptions& options = {});

/// Dispatch on the instance's valuation kind.
MarketEquilibrium solve_eg(const Instance& instance, const SolverOptions& options = {});

struct KktReport {
  EquilibriumResiduals residuals;
  bool pass = false;
};

KktReport verify_kkt_linear(const Instance& instance, const Allocation& allocation,
                            const PriceVector& prices, double tol = kDefaultTol);
KktReport verify_kkt_leontief(const Instance& instance, const Allocation& allocation,
                              const PriceVector& prices, double tol = kDefaultTol);

/// Demand value max { u_i(y) : y >= 0, p . y <= budget } with unlimited
/// supply. +infinity when a demanded good is free and the family makes that
/// unbounded.
double optimal_bundle_utility(const ValuationProfile& profile, Index agent, double budget,
                              const PriceVector& prices, double tol = kDefaultTol);

struct EpsEquilibriumReport {
  double eps = 0.0;
  /// Smallest eps at which condition (iii) holds.
  double eps_required = 0.0;
  UtilityVector optimal_utilities;
  UtilityVector actual_utilities;
  Vector ratios;
  double clearing_residual = 0.0;
  double budget_residual = 0.0;
  bool goods_sold = false;
  bool budgets_spent = false;
  bool pass = false;
};

EpsEquilibriumReport verify_eps_market_eq(const Instance& instance, const Allocation& allocation,
                                          const PriceVector& prices, double eps,
                                          double tol = kDefaultTol);

/// Leontief dual objective (with the constant sum B_i log B_i - sum B_i)
/// minus the primal objective sum_i B_i log u_i(x). +infinity when some
/// agent has zero utility or phi_i(p) = 0.
double duality_gap_leontief(const Instance& instance, const Allocation& allocation,
                            const PriceVector& prices);

Report to_report(const MarketEquilibrium& eq);

}  // namespace mkt

#pragma once

#include "mkt/core.hpp"
#include "mkt/io.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mkt {

/// n x m monetary bids; row i sums to B_i.
using BidProfile = Matrix;

/// Bids below `delta` are voided; the rest stand as placed.
BidProfile effective_bids(const BidProfile& bids, double delta);

/// Proportional sharing on effective bids. Columns with no effective bid are
/// left unallocated.
Allocation tp_allocate(const BidProfile& bids, double delta);

/// Sum over k != agent of effective bids, per good.
Vector opponent_spend(const BidProfile& bids, Index agent, double delta);

/// Fraction of each good the agent receives with `bids` against opponents'
/// effective totals `opp`.
Vector tp_fractions(const Vector& bids, const Vector& opp, double delta);

/// Agent's utility for its bids against opponents' effective totals.
double tp_utility(const ValuationProfile& profile, Index agent, const Vector& bids,
                  const Vector& opp, double delta);

/// The supremum of the agent's payoff is not attained: with delta = 0 a
/// demanded good nobody else bids on is won by any positive bid, however
/// small.
class UnattainedBestResponse : public std::domain_error {
 public:
  explicit UnattainedBestResponse(Index good);
  Index good() const { return good_; }

 private:
  Index good_;
};

struct BRResult {
  Vector bids;
  double utility = 0.0;
  int iterations = 0;
  /// waterfill, bisect, gradient, newton or grid
  std::string method;
  bool converged = true;
};

/// Linear payoff sum_j v_j b_j / (b_j + D_j). delta = 0: water-filling
/// b_j = max(0, sqrt(v_j D_j / lambda) - D_j). delta > 0: the same with
/// floors on every support of at most 16 demanded goods, best support kept;
/// local search over supports beyond that.
BRResult br_linear(const Vector& values, double budget, const Vector& opp, double delta);

/// Leontief payoff min_j f_j / v_j. Largest t with
/// sum_j max(delta, t v_j D_j / (1 - t v_j)) <= budget, found by bisection.
BRResult br_leontief(const Vector& values, double budget, const Vector& opp, double delta);

/// Projected gradient ascent over the budget simplex (linear and CES) or a
/// Newton solve of the equal-ratio system (Leontief). `init` is an optional
/// starting bid vector.
BRResult br_concave_numeric(const ValuationProfile& profile, Index agent, double budget,
                            const Vector& opp, double delta, double tol = 1e-12,
                            const Vector& init = Vector());

/// Exhaustive search over the demanded-goods simplex at resolution
/// `grid_step`. Needs at most 4 goods and at most 5e7 grid points.
BRResult br_grid_oracle(const ValuationProfile& profile, Index agent, double budget,
                        const Vector& opp, double delta, double grid_step);

/// Analytic oracle when one exists, numeric otherwise.
BRResult best_response(const ValuationProfile& profile, Index agent, double budget,
                       const Vector& opp, double delta);

struct NEReport {
  BidProfile bids;
  /// u_BR - u_current per agent against the other agents' bids.
  Vector gains;
  double max_gain = 0.0;
  bool converged = false;
  int rounds = 0;
  double last_change = 0.0;
  PriceVector prices;
  Allocation allocation;
  UtilityVector utilities;
  /// Agents whose best response was not attained; their gain is measured
  /// against a tiny stand-in opponent bid.
  std::vector<Index> unattained;
  /// converged, certified, uncertified, max_rounds, stalled or
  /// unattained_best_response
  std::string status;
};

struct DynamicsOptions {
  int max_rounds = 10000;
  /// Stop when max |b_new - b_old| / max(b_new, b_old, delta) <= tol over a round.
  double tol = 1e-10;
  /// A stopped run counts as converged only when every agent's gain is below this.
  double gain_tol = 1e-6;
  /// Give up after this many rounds without a new smallest max |b_new - b_old|;
  /// 0 disables the check.
  int stall_rounds = 50;
  /// One line per round: round index, max relative bid change, utilities.
  std::ostream* trajectory = nullptr;
};

/// Round-robin best responses from `init` (empty: bids proportional to values).
NEReport br_dynamics(const Instance& instance, double delta, const BidProfile& init = BidProfile(),
                     const DynamicsOptions& options = {});

/// Per-agent best-response gains at `bids`; converged = max_gain <= tol.
NEReport verify_tp_ne(const Instance& instance, const BidProfile& bids, double delta,
                      double tol = 1e-6);

/// Prices are column sums of effective bids; allocation is tp_allocate.
std::pair<PriceVector, Allocation> ne_to_market(const BidProfile& bids, double delta);

/// b_ij = p_j x_ij.
BidProfile market_to_bids(const Allocation& allocation, const PriceVector& prices);

/// Bid guaranteeing the fraction B / (B + sum D) of every good (delta = 0),
/// or at least (B - delta |S|) / (B + sum D) with floors on the goods S where
/// the proportional bid falls below delta.
Vector safe_strategy(double budget, const Vector& opp, double delta);

/// Largest delta satisfying every form of the delta-eps condition in use:
/// min(eps / m^2, eps^2 / m, 1 / m), strict bound shaded down by one ulp.
double delta_for_eps(double eps, Index goods);

Report to_report(const BRResult& br);
Report to_report(const NEReport& ne);

}  // namespace mkt

#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mkt {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// n x m matrix of good fractions; row i is agent i's bundle.
using Allocation = Matrix;
/// Per-good prices, equivalently total spending per good.
using PriceVector = Vector;
using UtilityVector = Vector;

inline constexpr double kDefaultTol = 1e-8;

enum class ValuationKind { Linear, Leontief, CES };

std::string to_string(ValuationKind kind);
ValuationKind parse_valuation_kind(const std::string& name);

/// Valuation matrix plus the family it is interpreted in.
///
/// Linear: u_i(x) = sum_j v_ij x_ij.
/// Leontief: u_i(x) = min over goods with v_ij > 0 of x_ij / v_ij; zero
/// entries mark goods the agent does not need.
/// CES: u_i(x) = (sum_j v_ij x_ij^rho)^(1/rho), rho in (-inf, 1] \ {0}.
class ValuationProfile {
 public:
  static ValuationProfile linear(Matrix values);
  static ValuationProfile leontief(Matrix values);
  static ValuationProfile ces(Matrix values, double rho);

  ValuationKind kind() const { return kind_; }
  const Matrix& matrix() const { return values_; }
  /// CES exponent; 1 for linear profiles, 0 for Leontief (unused).
  double rho() const { return rho_; }
  Index agents() const { return values_.rows(); }
  Index goods() const { return values_.cols(); }
  double value(Index agent, Index good) const { return values_(agent, good); }
  bool demands(Index agent, Index good) const { return values_(agent, good) > 0.0; }

  /// Same kind and exponent, different coefficients (used for reports).
  ValuationProfile with_matrix(Matrix values) const;

 private:
  ValuationProfile(ValuationKind kind, Matrix values, double rho);

  ValuationKind kind_;
  Matrix values_;
  double rho_;
};

class Instance {
 public:
  Instance(Vector budgets, ValuationProfile valuations);

  Index n() const { return budgets_.size(); }
  Index m() const { return valuations_.goods(); }
  const Vector& budgets() const { return budgets_; }
  double budget(Index agent) const { return budgets_(agent); }
  double total_budget() const { return budgets_.sum(); }
  const ValuationProfile& valuations() const { return valuations_; }
  ValuationKind kind() const { return valuations_.kind(); }

  /// Every good is positively valued by at least two agents.
  bool perfect_competition() const;
  /// Goods nobody values.
  std::vector<Index> undemanded_goods() const;

 private:
  Vector budgets_;
  ValuationProfile valuations_;
};

/// Utility of `agent` for `bundle` under the profile's valuation family.
double eval_valuation(const ValuationProfile& profile, Index agent, const Vector& bundle);

/// Per-agent utilities of a full allocation.
UtilityVector utilities(const ValuationProfile& profile, const Allocation& allocation);

/// Budget-weighted geometric mean of utilities, computed in the log domain.
/// Returns 0 when some agent with positive weight has zero utility.
double nsw(const UtilityVector& utilities, const Vector& budgets);

/// opt / eq. Ratios within `tol` below 1 are reported as exactly 1; a zero
/// equilibrium welfare yields +infinity.
double poa_ratio(double opt_nsw, double eq_nsw, double tol = kDefaultTol);

struct AgentProportionality {
  double utility = 0.0;
  /// (B_i / total budget) * (1 - slack_i) * u_i(full bundle)
  double guarantee = 0.0;
  double margin = 0.0;
  bool pass = false;
};

struct ProportionalityReport {
  std::vector<AgentProportionality> agents;
  bool all_pass = true;
  double min_margin = 0.0;
};

ProportionalityReport proportionality_check(const Instance& instance, const Allocation& allocation,
                                            const Vector& slack, double tol = kDefaultTol);

/// Entrance-fee slack Delta * (m - 1) / B_i for every agent.
Vector entrance_fee_slack(const Instance& instance, double delta);

}  // namespace mkt

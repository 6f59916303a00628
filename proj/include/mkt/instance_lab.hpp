#pragma once

#include "mkt/core.hpp"
#include "mkt/eq_solvers.hpp"
#include "mkt/trading_post.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mkt {

/// Agent i needs only good i; unit budgets.
Instance gen_identity_leontief(Index n);

/// v_1 = (1, 0), v_2 = (0.5, 0.5), unit budgets, linear.
Instance gen_example_3_1();

/// Leontief v_1 = (0.5, 0.5), v_2 = (0.9, 0.1), unit budgets.
Instance gen_tp_nonexistence();

struct InstanceWithBids {
  Instance instance;
  BidProfile bids;
};

/// Four linear agents on two goods: agents 1 and 2 want one good each,
/// agents 3 and 4 value both at 0.5. Bids (1,0), (0,1), (1-eps, eps),
/// (eps, 1-eps).
InstanceWithBids gen_example_lin_family(double eps);

/// Two Leontief agents with all values 1, both bidding (a, 1-a).
InstanceWithBids gen_example_leo_family(double a);

/// Independent uniform(0,1) values, each zeroed with probability
/// `sparsity`. Rows without a positive entry and goods with fewer than two
/// interested agents are redrawn. Leontief rows are scaled to max entry 1.
/// Unit budgets.
Instance gen_random(Index n, Index m, ValuationKind kind, double rho, std::uint64_t seed,
                    double sparsity = 0.0);

/// Market-clearing allocation at prices p' = p * exp(sigma z) (renormalized
/// to total money) whose spending matrix is the equilibrium spending rescaled
/// by iterative proportional fitting to row sums B and column sums p'.
std::pair<Allocation, PriceVector> perturb_equilibrium(const Instance& instance,
                                                       const MarketEquilibrium& eq, double sigma,
                                                       std::uint64_t seed);

struct ExperimentConfig {
  /// identity, example-3.1, tp-nonexistence, lb, file or random
  std::string source = "random";
  Index n = 3;
  Index m = 3;
  ValuationKind kind = ValuationKind::Linear;
  double rho = 1.0;
  std::uint64_t seed = 1;
  /// Number of random instances (seeds seed, seed + 1, ...).
  int count = 1;
  double sparsity = 0.0;
  std::string path;
  /// Overrides unit budgets when non-empty.
  Vector budgets;
  /// fisher or trading_post
  std::string mechanism = "trading_post";
  double delta = 0.0;
  double tol = kDefaultTol;
  int max_iter = 200000;
  int max_rounds = 10000;
  /// Deviations sampled per agent when certifying Fisher equilibria.
  int trials = 50;
  int threads = 1;
};

struct PoARecord {
  std::string instance_id;
  std::string mechanism;
  double delta = 0.0;
  double nsw_opt = 0.0;
  double nsw_eq = 0.0;
  double ratio = 0.0;
  /// Largest best-response (or sampled deviation) gain at the equilibrium.
  double eps_br = 0.0;
  /// Smallest eps for which the induced prices and allocation form an
  /// eps-market equilibrium under the true valuations.
  double eps_market = 0.0;
  bool proportional = false;
  double seconds = 0.0;
  bool converged = false;
  /// Empty on success.
  std::string failure;
};

/// Instances named by the config, in order, with their ids.
std::vector<std::pair<std::string, Instance>> experiment_instances(const ExperimentConfig& config);

/// One record per instance; per-instance failures are recorded and the run
/// continues. Records come back in instance order for any thread count.
std::vector<PoARecord> run_experiment(const ExperimentConfig& config);

void write_poa_csv(std::ostream& os, const std::vector<PoARecord>& records);

}  // namespace mkt

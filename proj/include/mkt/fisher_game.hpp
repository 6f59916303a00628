#pragma once

#include "mkt/core.hpp"
#include "mkt/eq_solvers.hpp"
#include "mkt/io.hpp"
#include "mkt/trading_post.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace mkt {

/// Declared valuations, one row per agent, read in the instance's family.
using ReportProfile = Matrix;

struct GameOutcome {
  /// Equilibrium of the market built from the reports.
  MarketEquilibrium equilibrium;
  /// Utilities under the true valuations at the equilibrium allocation.
  UtilityVector true_utilities;
  double nsw = 0.0;
  /// Agents whose report is all zero; they are left out and receive nothing.
  std::vector<Index> empty_reports;
};

/// Market equilibrium on the reports, evaluated with the true valuations.
GameOutcome fisher_outcome(const Instance& instance, const ReportProfile& reports,
                           const SolverOptions& options = {});

/// Every agent reports (1/m, ..., 1/m); each then receives the fraction
/// B_i / total budget of every good.
std::pair<ReportProfile, GameOutcome> uniform_leontief_ne(const Instance& instance,
                                                          const SolverOptions& options = {});

struct LowerBoundConstruction {
  Index n = 0;
  Index k = 0;
  double eps = 0.0;        // 1 / n^4
  double eps_prime = 0.0;  // 1 / n
  double delta = 0.0;      // 2 eps_prime
  /// n + 2 agents, n + 1 goods, unit budgets, linear values.
  Instance instance;
  /// Truthful for agents 1..k, n+1 and n+2; middle agents report the
  /// prices of the goods they buy, which makes them spend delta on their own
  /// good and (1 - delta) / k on each of the first k goods.
  ReportProfile reports;
  /// The same spending as a Trading Post profile.
  BidProfile bids;
};

/// Requires n >= 8; k = round(n / e).
LowerBoundConstruction lb_construction(Index n);

struct LowerBoundValues {
  Index k = 0;
  double u_first = 0.0;   // agents 1..k
  double u_middle = 0.0;  // agents k+1..n
  double nsw = 0.0;       // over all n + 2 agents; agents n+1, n+2 get 1
  double ratio = 0.0;     // optimum NSW (1) over nsw
};

/// Closed-form utilities of the construction's profile.
LowerBoundValues lb_closed_form(Index n);

/// Deviation reports aimed at the construction: middle agents trading own-good
/// report weight against the first-k block, agent n+1 raising interest in the
/// middle goods.
std::vector<std::pair<Index, Vector>> lb_structured_deviations(const LowerBoundConstruction& lb);

struct FalsifyOptions {
  /// Random deviations per agent.
  int trials = 200;
  std::uint64_t seed = 1;
  /// Log-uniform coordinate scales are drawn from [1/scale_range, scale_range].
  double scale_range = 1e3;
  /// Extra (agent, report) deviations evaluated in addition to the samples.
  std::vector<std::pair<Index, Vector>> extra;
  /// Agents to probe; empty means all.
  std::vector<Index> agents;
  /// Skip random sampling; only truthful, single-coordinate and extra deviations.
  bool structured_only = false;
  int threads = 1;
  SolverOptions solver;
};

struct FalsifyReport {
  /// Best true-utility gain found per agent (0 when none improves).
  Vector gains;
  /// Report achieving each agent's best gain (empty row when none).
  Matrix best_reports;
  double max_gain = 0.0;
  int trials = 0;
  /// Deviations whose market solve did not converge.
  int skipped = 0;
};

/// Samples unilateral report deviations and returns the best improvement in
/// true utility each agent can find. Small gains are evidence, not proof,
/// of equilibrium.
FalsifyReport fisher_ne_falsify(const Instance& instance, const ReportProfile& reports,
                                const FalsifyOptions& options = {});

struct ImprovementRun {
  ReportProfile reports;
  GameOutcome outcome;
  int rounds = 0;
  /// The final profile survived a full falsification pass at `gain_tol`.
  bool certified = false;
};

/// Sampled better-response dynamics over reports, starting from truthful:
/// each round every agent adopts the best sampled deviation if it gains more
/// than gain_tol.
ImprovementRun fisher_improvement_dynamics(const Instance& instance, int max_rounds,
                                           double gain_tol, const FalsifyOptions& options = {});

Report to_report(const GameOutcome& outcome);
Report to_report(const FalsifyReport& report);

}  // namespace mkt

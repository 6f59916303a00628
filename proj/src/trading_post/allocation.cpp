#include "mkt/trading_post.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mkt {

BidProfile effective_bids(const BidProfile& bids, double delta) {
  if ((bids.array() < 0.0).any()) throw std::invalid_argument("bids must be non-negative");
  return bids.unaryExpr([delta](double b) { return b >= delta ? b : 0.0; });
}

Allocation tp_allocate(const BidProfile& bids, double delta) {
  const BidProfile eff = effective_bids(bids, delta);
  Allocation x = Allocation::Zero(eff.rows(), eff.cols());
  for (Index j = 0; j < eff.cols(); ++j) {
    const double total = eff.col(j).sum();
    if (total > 0.0) x.col(j) = eff.col(j) / total;
  }
  return x;
}

Vector opponent_spend(const BidProfile& bids, Index agent, double delta) {
  const BidProfile eff = effective_bids(bids, delta);
  return (eff.colwise().sum() - eff.row(agent)).transpose().cwiseMax(0.0);
}

Vector tp_fractions(const Vector& bids, const Vector& opp, double delta) {
  if (bids.size() != opp.size()) throw std::invalid_argument("bid and opponent vectors differ in length");
  Vector f(bids.size());
  for (Index j = 0; j < bids.size(); ++j) {
    const double b = bids(j) >= delta && bids(j) > 0.0 ? bids(j) : 0.0;
    f(j) = b > 0.0 ? b / (b + opp(j)) : 0.0;
  }
  return f;
}

double tp_utility(const ValuationProfile& profile, Index agent, const Vector& bids, const Vector& opp,
                  double delta) {
  if (bids.size() != profile.goods()) throw std::invalid_argument("bid vector length mismatch");
  return eval_valuation(profile, agent, tp_fractions(bids, opp, delta));
}

UnattainedBestResponse::UnattainedBestResponse(Index good)
    : std::domain_error("best response not attained: good " + std::to_string(good) +
                        " is demanded but carries no other bid"),
      good_(good) {}

std::pair<PriceVector, Allocation> ne_to_market(const BidProfile& bids, double delta) {
  const BidProfile eff = effective_bids(bids, delta);
  return {eff.colwise().sum().transpose(), tp_allocate(bids, delta)};
}

BidProfile market_to_bids(const Allocation& allocation, const PriceVector& prices) {
  if (allocation.cols() != prices.size()) throw std::invalid_argument("price vector length mismatch");
  return allocation * prices.asDiagonal();
}

Vector safe_strategy(double budget, const Vector& opp, double delta) {
  const double others = opp.sum();
  if (!(others > 0.0)) throw std::invalid_argument("safe strategy needs some opponent spending");
  const Vector y = budget * opp / others;
  if (delta <= 0.0) return y;

  std::vector<bool> floored(static_cast<std::size_t>(opp.size()));
  Index count = 0;
  for (Index j = 0; j < opp.size(); ++j) {
    floored[static_cast<std::size_t>(j)] = y(j) < delta;
    count += floored[static_cast<std::size_t>(j)] ? 1 : 0;
  }
  const double reduced = budget - delta * static_cast<double>(count);
  if (reduced < 0.0) throw std::invalid_argument("budget cannot cover the entrance fee on the floored goods");
  // z_j / (z_j + D_j) = reduced / (budget + others) off the floored set.
  const double total = budget + others;
  Vector z(opp.size());
  for (Index j = 0; j < opp.size(); ++j) {
    z(j) = floored[static_cast<std::size_t>(j)] ? delta : reduced * opp(j) / (total - reduced);
  }
  return z;
}

double delta_for_eps(double eps, Index goods) {
  if (!(eps > 0.0) || goods < 1) throw std::invalid_argument("delta_for_eps needs eps > 0 and m >= 1");
  const double m = static_cast<double>(goods);
  const double bound = std::min({eps / (m * m), eps * eps / m, 1.0 / m});
  return std::nextafter(bound, 0.0);
}

Report to_report(const BRResult& br) {
  Report r;
  r.add("method", br.method)
      .add("bids", br.bids)
      .add("utility", br.utility)
      .add("iterations", br.iterations)
      .add("converged", br.converged);
  return r;
}

Report to_report(const NEReport& ne) {
  Report r;
  r.add("status", ne.status)
      .add("converged", ne.converged)
      .add("rounds", ne.rounds)
      .add("last_change", ne.last_change)
      .add("max_gain", ne.max_gain)
      .add("gains", ne.gains)
      .add("utilities", ne.utilities)
      .add("prices", ne.prices)
      .add("allocation", ne.allocation)
      .add("bids", ne.bids)
      .add("unattained_agents", ne.unattained);
  return r;
}

}  // namespace mkt

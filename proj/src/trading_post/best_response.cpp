#include "mkt/trading_post.hpp"

#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mkt {

namespace {

void check_inputs(const Vector& values, double budget, const Vector& opp, double delta) {
  if (values.size() != opp.size()) throw std::invalid_argument("value and opponent vectors differ in length");
  if (!(budget > 0.0)) throw std::invalid_argument("budget must be positive");
  if (!(delta >= 0.0)) throw std::invalid_argument("entrance fee must be non-negative");
  if ((opp.array() < 0.0).any()) throw std::invalid_argument("opponent spending must be non-negative");
  if (!(values.maxCoeff() > 0.0)) throw std::invalid_argument("agent values no good");
}

double linear_payoff(const Vector& values, const Vector& bids, const Vector& opp, double delta) {
  return values.dot(tp_fractions(bids, opp, delta));
}

// Water-filling on `support` with every bid at least `floor`. Goods nobody
// else bids on sit at the floor (any effective bid wins them outright).
std::optional<BRResult> waterfill(const Vector& values, double budget, const Vector& opp,
                                  double floor, const std::vector<Index>& support) {
  const Index m = values.size();
  BRResult out;
  out.method = "waterfill";
  out.bids = Vector::Zero(m);
  std::vector<Index> live;
  double rest = budget;
  for (Index j : support) {
    if (opp(j) > 0.0) {
      live.push_back(j);
    } else {
      out.bids(j) = floor;
      rest -= floor;
    }
  }
  if (rest < floor * static_cast<double>(live.size()) - 1e-15 * budget) return std::nullopt;
  if (live.empty()) {
    out.bids(support.front()) += rest;
    out.utility = linear_payoff(values, out.bids, opp, floor);
    return out;
  }

  // A good is above its floor iff lambda < v D / (D + floor)^2.
  std::vector<double> tau(live.size());
  for (std::size_t k = 0; k < live.size(); ++k) {
    const Index j = live[k];
    tau[k] = values(j) * opp(j) / ((opp(j) + floor) * (opp(j) + floor));
  }
  std::vector<std::size_t> order(live.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return tau[a] > tau[b]; });

  double root_sum = 0.0;
  double opp_sum = 0.0;
  double sqrt_lambda = 0.0;
  std::size_t active = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Index j = live[order[k]];
    root_sum += std::sqrt(values(j) * opp(j));
    opp_sum += opp(j);
    const double pinned = floor * static_cast<double>(order.size() - k - 1);
    sqrt_lambda = root_sum / (rest - pinned + opp_sum);
    active = k + 1;
    const double lambda = sqrt_lambda * sqrt_lambda;
    if (k + 1 == order.size() || lambda >= tau[order[k + 1]]) break;
  }
  double placed = 0.0;
  Index largest = live[order.front()];
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Index j = live[order[k]];
    const double b = k < active ? std::sqrt(values(j) * opp(j)) / sqrt_lambda - opp(j) : floor;
    out.bids(j) = std::max(b, floor);
    placed += out.bids(j);
    if (out.bids(j) > out.bids(largest)) largest = j;
  }
  out.bids(largest) += rest - placed;
  out.utility = linear_payoff(values, out.bids, opp, floor);
  return out;
}

}  // namespace

BRResult br_linear(const Vector& values, double budget, const Vector& opp, double delta) {
  check_inputs(values, budget, opp, delta);
  const std::vector<Index> demanded = detail::demanded_goods(values);
  if (delta == 0.0) {
    for (Index j : demanded) {
      if (opp(j) == 0.0) throw UnattainedBestResponse(j);
    }
    return *waterfill(values, budget, opp, 0.0, demanded);
  }
  if (budget < delta) {
    // No bid can clear the fee; the whole budget is voided.
    BRResult out{Vector::Zero(values.size()), 0.0, 0, "waterfill", true};
    out.bids(demanded.front()) = budget;
    return out;
  }
  auto solve = [&](const std::vector<Index>& s) { return waterfill(values, budget, opp, delta, s); };
  std::optional<BRResult> best = detail::best_over_supports(demanded, budget, delta, solve, 16);
  best->iterations = 1;
  return *best;
}

BRResult br_leontief(const Vector& values, double budget, const Vector& opp, double delta) {
  check_inputs(values, budget, opp, delta);
  const Index m = values.size();
  const std::vector<Index> demanded = detail::demanded_goods(values);
  if (delta * static_cast<double>(demanded.size()) > budget) {
    throw std::invalid_argument("budget cannot cover the entrance fee on every demanded good");
  }
  BRResult out;
  out.method = "bisect";
  out.bids = Vector::Zero(m);

  std::vector<Index> live;
  std::vector<Index> uncontested;
  for (Index j : demanded) (opp(j) > 0.0 ? live : uncontested).push_back(j);
  if (delta == 0.0 && !uncontested.empty() && !live.empty()) throw UnattainedBestResponse(uncontested.front());

  // Uncontested goods are won whole at the fee; they cap t at 1 / v_j.
  double cap = std::numeric_limits<double>::infinity();
  for (Index j : uncontested) cap = std::min(cap, 1.0 / values(j));
  const double fixed = delta * static_cast<double>(uncontested.size());

  auto bid_for = [&](Index j, double t) {
    return std::max(delta, t * values(j) * opp(j) / (1.0 - t * values(j)));
  };
  auto need = [&](double t) {
    double s = fixed;
    for (Index j : live) s += bid_for(j, t);
    return s;
  };
  auto spread_over_uncontested = [&](double amount) {
    double weight = 0.0;
    for (Index j : uncontested) weight += values(j);
    for (Index j : uncontested) out.bids(j) += amount * values(j) / weight;
  };

  for (Index j : uncontested) out.bids(j) = delta;
  double vmax = 0.0;
  for (Index j : live) vmax = std::max(vmax, values(j));
  const double t_pole = live.empty() ? std::numeric_limits<double>::infinity() : 1.0 / vmax;

  if (live.empty() || (cap < t_pole && need(cap) <= budget)) {
    for (Index j : live) out.bids(j) = bid_for(j, cap);
    spread_over_uncontested(budget - out.bids.sum());
  } else {
    double lo = 0.0;
    double hi = std::min(cap, t_pole);
    for (; out.iterations < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi;
         ++out.iterations) {
      const double mid = 0.5 * (lo + hi);
      (need(mid) <= budget ? lo : hi) = mid;
    }
    double placed = fixed;
    Index largest = live.front();
    for (Index j : live) {
      out.bids(j) = bid_for(j, lo);
      placed += out.bids(j);
      if (out.bids(j) > out.bids(largest)) largest = j;
    }
    out.bids(largest) += budget - placed;
  }

  Vector frac = tp_fractions(out.bids, opp, delta);
  out.utility = std::numeric_limits<double>::infinity();
  for (Index j : demanded) out.utility = std::min(out.utility, frac(j) / values(j));
  return out;
}

BRResult best_response(const ValuationProfile& profile, Index agent, double budget, const Vector& opp,
                       double delta) {
  const Vector values = profile.matrix().row(agent).transpose();
  switch (profile.kind()) {
    case ValuationKind::Linear:
      return br_linear(values, budget, opp, delta);
    case ValuationKind::Leontief:
      return br_leontief(values, budget, opp, delta);
    case ValuationKind::CES:
      if (profile.rho() == 1.0) return br_linear(values, budget, opp, delta);
      return br_concave_numeric(profile, agent, budget, opp, delta);
  }
  throw std::logic_error("unhandled valuation kind");
}

}  // namespace mkt

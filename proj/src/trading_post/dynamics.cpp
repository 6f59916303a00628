#include "mkt/trading_post.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <tuple>

namespace mkt {

namespace {

double relative_change(const Vector& before, const Vector& after, double delta) {
  double worst = 0.0;
  for (Index j = 0; j < before.size(); ++j) {
    const double scale = std::max({before(j), after(j), delta});
    if (scale > 0.0) worst = std::max(worst, std::abs(after(j) - before(j)) / scale);
  }
  return worst;
}

BidProfile proportional_bids(const Instance& instance) {
  const Matrix& v = instance.valuations().matrix();
  BidProfile b(instance.n(), instance.m());
  for (Index i = 0; i < instance.n(); ++i) b.row(i) = instance.budget(i) * v.row(i) / v.row(i).sum();
  return b;
}

}  // namespace

NEReport verify_tp_ne(const Instance& instance, const BidProfile& bids, double delta, double tol) {
  if (bids.rows() != instance.n() || bids.cols() != instance.m()) {
    throw std::invalid_argument("bid profile shape does not match instance");
  }
  const auto& profile = instance.valuations();
  NEReport rep;
  rep.bids = bids;
  rep.gains = Vector::Zero(instance.n());
  const double stand_in = 1e-14 * instance.total_budget();
  for (Index i = 0; i < instance.n(); ++i) {
    Vector opp = opponent_spend(bids, i, delta);
    const double current = tp_utility(profile, i, bids.row(i).transpose(), opp, delta);
    double best = 0.0;
    try {
      best = best_response(profile, i, instance.budget(i), opp, delta).utility;
    } catch (const UnattainedBestResponse&) {
      for (Index j = 0; j < instance.m(); ++j) {
        if (profile.demands(i, j) && opp(j) == 0.0) opp(j) = stand_in;
      }
      best = best_response(profile, i, instance.budget(i), opp, delta).utility;
      rep.unattained.push_back(i);
    }
    rep.gains(i) = best - current;
  }
  rep.max_gain = rep.gains.maxCoeff();
  std::tie(rep.prices, rep.allocation) = ne_to_market(bids, delta);
  rep.utilities = utilities(profile, rep.allocation);
  rep.converged = rep.max_gain <= tol;
  rep.status = rep.converged ? "certified" : "uncertified";
  return rep;
}

NEReport br_dynamics(const Instance& instance, double delta, const BidProfile& init,
                     const DynamicsOptions& options) {
  if (!(delta >= 0.0)) throw std::invalid_argument("entrance fee must be non-negative");
  if (delta == 0.0 && instance.kind() != ValuationKind::Leontief && !instance.perfect_competition()) {
    throw std::invalid_argument("delta = 0 dynamics need perfect competition");
  }
  BidProfile bids = init.size() == 0 ? proportional_bids(instance) : init;
  if (bids.rows() != instance.n() || bids.cols() != instance.m()) {
    throw std::invalid_argument("initial bid profile shape does not match instance");
  }
  const auto& profile = instance.valuations();

  std::string status = "max_rounds";
  double best_step = std::numeric_limits<double>::infinity();
  int quiet = 0;
  int round = 0;
  double change = 0.0;
  bool done = false;
  while (!done && round < options.max_rounds) {
    ++round;
    change = 0.0;
    double step = 0.0;
    for (Index i = 0; i < instance.n(); ++i) {
      const Vector opp = opponent_spend(bids, i, delta);
      BRResult br;
      try {
        br = best_response(profile, i, instance.budget(i), opp, delta);
      } catch (const UnattainedBestResponse&) {
        status = "unattained_best_response";
        done = true;
        break;
      }
      change = std::max(change, relative_change(bids.row(i).transpose(), br.bids, delta));
      step = std::max(step, (br.bids - bids.row(i).transpose()).cwiseAbs().maxCoeff());
      bids.row(i) = br.bids.transpose();
    }
    if (done) break;
    if (options.trajectory) {
      const UtilityVector u = utilities(profile, tp_allocate(bids, delta));
      *options.trajectory << round << ' ' << format_real(change);
      for (Index i = 0; i < u.size(); ++i) *options.trajectory << ' ' << format_real(u(i));
      *options.trajectory << '\n';
    }
    if (change <= options.tol) {
      status = "stopped";
      break;
    }
    // Stopping is scale-relative so a bid decaying to zero never stops; the
    // stall test uses the absolute step, which shrinks on such runs.
    if (step < best_step * (1.0 - 1e-3)) {
      best_step = step;
      quiet = 0;
    } else if (options.stall_rounds > 0 && ++quiet >= options.stall_rounds) {
      status = "stalled";
      break;
    }
  }

  NEReport rep = verify_tp_ne(instance, bids, delta, options.gain_tol);
  rep.rounds = round;
  rep.last_change = change;
  if (status == "stopped") {
    rep.status = rep.converged ? "converged" : "uncertified";
  } else {
    rep.converged = false;
    rep.status = status;
  }
  return rep;
}

}  // namespace mkt

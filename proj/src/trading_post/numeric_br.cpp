#include "mkt/trading_post.hpp"

#include "support.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace mkt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Euclidean projection onto { x >= lo, sum x = total }.
Vector project_capped_simplex(const Vector& y, double lo, double total) {
  const Index k = y.size();
  const double mass = total - lo * static_cast<double>(k);
  Vector z = y.array() - lo;
  std::vector<double> s(z.data(), z.data() + k);
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0;
  double theta = 0.0;
  for (Index r = 0; r < k; ++r) {
    cum += s[static_cast<std::size_t>(r)];
    const double cand = (cum - mass) / static_cast<double>(r + 1);
    if (s[static_cast<std::size_t>(r)] - cand > 0.0) theta = cand;
  }
  return ((z.array() - theta).max(0.0) + lo).matrix();
}

// log u of a linear (rho = 1) or CES agent as a function of its bids on the
// contested goods of a support; uncontested goods contribute fraction 1.
struct LogPayoff {
  const Vector& values;
  const Vector& opp;
  double rho;
  std::vector<Index> live;
  std::vector<Index> uncontested;

  double value(const Vector& b) const {
    double mx = kNegInf;
    std::vector<double> terms;
    terms.reserve(live.size() + uncontested.size());
    for (std::size_t k = 0; k < live.size(); ++k) {
      const Index j = live[k];
      const double bk = b(static_cast<Index>(k));
      if (bk <= 0.0) {
        if (rho < 0.0) return kNegInf;
        continue;
      }
      terms.push_back(std::log(values(j)) + rho * std::log(bk / (bk + opp(j))));
    }
    for (Index j : uncontested) terms.push_back(std::log(values(j)));
    if (terms.empty()) return kNegInf;
    for (double t : terms) mx = std::max(mx, t);
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - mx);
    return (mx + std::log(acc)) / rho;
  }

  Vector gradient(const Vector& b) const {
    const double log_s = rho * value(b);
    Vector g(static_cast<Index>(live.size()));
    for (std::size_t k = 0; k < live.size(); ++k) {
      const Index j = live[k];
      const double bk = b(static_cast<Index>(k));
      const double d = opp(j);
      if (bk <= 0.0) {
        // rho >= 1 only: derivative of v f^rho at f = 0 over the sum.
        g(static_cast<Index>(k)) = rho == 1.0 ? values(j) / d * std::exp(-log_s) : std::numeric_limits<double>::infinity();
        continue;
      }
      const double f = bk / (bk + d);
      const double df = d / ((bk + d) * (bk + d));
      g(static_cast<Index>(k)) = std::exp(std::log(values(j)) + (rho - 1.0) * std::log(f) + std::log(df) - log_s);
    }
    return g;
  }
};

// Newton polish on the bids above the floor. sign(rho) sum v_j f_j^rho is
// separable and concave in the bids, so the Hessian is diagonal and the
// multiplier of the budget row has a closed form. Returns the steps taken;
// `b` is left unchanged unless the payoff does not drop.
int polish_newton(const LogPayoff& payoff, double floor, double rest, Vector& b) {
  std::vector<Index> free_idx;
  for (Index c = 0; c < b.size(); ++c) {
    if (b(c) > floor + 1e-12 * rest) free_idx.push_back(c);
  }
  if (free_idx.size() < 2) return 0;
  const double rho = payoff.rho;
  const double a = std::abs(rho);
  const double start = payoff.value(b);
  Vector trial = b;
  int steps = 0;
  for (; steps < 30; ++steps) {
    double num = 0.0;
    double den = 0.0;
    std::vector<double> gp(free_idx.size());
    std::vector<double> gpp(free_idx.size());
    for (std::size_t t = 0; t < free_idx.size(); ++t) {
      const Index c = free_idx[t];
      const Index j = payoff.live[static_cast<std::size_t>(c)];
      const double d = payoff.opp(j);
      const double s = trial(c) + d;
      const double f = trial(c) / s;
      const double f1 = d / (s * s);
      const double f2 = -2.0 * d / (s * s * s);
      const double v = payoff.values(j);
      gp[t] = a * v * std::pow(f, rho - 1.0) * f1;
      gpp[t] = a * v * ((rho - 1.0) * std::pow(f, rho - 2.0) * f1 * f1 + std::pow(f, rho - 1.0) * f2);
      if (!(gpp[t] < 0.0) || !std::isfinite(gp[t])) return 0;
      num += gp[t] / gpp[t];
      den += 1.0 / gpp[t];
    }
    const double lambda = num / den;
    double alpha = 1.0;
    double longest = 0.0;
    for (std::size_t t = 0; t < free_idx.size(); ++t) {
      const double dc = (lambda - gp[t]) / gpp[t];
      const double room = trial(free_idx[t]) - floor;
      if (dc < 0.0 && -dc >= room) alpha = std::min(alpha, 0.5 * room / -dc);
      longest = std::max(longest, std::abs(dc));
    }
    for (std::size_t t = 0; t < free_idx.size(); ++t) {
      trial(free_idx[t]) += alpha * (lambda - gp[t]) / gpp[t];
    }
    if (alpha * longest <= 1e-16 * rest) break;
  }
  const double end = payoff.value(trial);
  if (std::isfinite(end) && end >= start - 1e-15 * std::abs(start)) b = trial;
  return steps;
}

// Projected gradient with Barzilai-Borwein steps and Armijo backtracking.
std::optional<BRResult> gradient_on_support(const ValuationProfile& profile, Index agent, double budget,
                                            const Vector& opp, double floor,
                                            const std::vector<Index>& support, double tol,
                                            const Vector& init) {
  const Index m = profile.goods();
  const Vector values = profile.matrix().row(agent).transpose();
  const double rho = profile.kind() == ValuationKind::Linear ? 1.0 : profile.rho();
  LogPayoff payoff{values, opp, rho, {}, {}};
  for (Index j : support) (opp(j) > 0.0 ? payoff.live : payoff.uncontested).push_back(j);
  const double rest = budget - floor * static_cast<double>(payoff.uncontested.size());
  const auto k = static_cast<Index>(payoff.live.size());
  if (rest < floor * static_cast<double>(k) - 1e-15 * budget) return std::nullopt;

  BRResult out;
  out.method = "gradient";
  out.bids = Vector::Zero(m);
  for (Index j : payoff.uncontested) out.bids(j) = floor;
  if (k == 0) {
    out.bids(support.front()) += rest;
    out.utility = tp_utility(profile, agent, out.bids, opp, floor);
    return out;
  }

  Vector b(k);
  for (Index c = 0; c < k; ++c) {
    const Index j = payoff.live[static_cast<std::size_t>(c)];
    b(c) = init.size() == m ? init(j) : rest / static_cast<double>(k);
  }
  // Strictly inside so CES with rho < 0 starts at finite payoff.
  const double inner = floor + 1e-3 * (rest / static_cast<double>(k) - floor);
  b = project_capped_simplex(b, inner, rest);

  double f = payoff.value(b);
  Vector g = payoff.gradient(b);
  double step = rest / std::max(g.cwiseAbs().maxCoeff(), 1e-300);
  double measure = std::numeric_limits<double>::infinity();
  const int max_iter = 20000;
  int it = 0;
  for (; it < max_iter; ++it) {
    const double scale = rest / std::max(g.cwiseAbs().maxCoeff(), 1e-300);
    measure = (project_capped_simplex(b + scale * g, floor, rest) - b).cwiseAbs().maxCoeff() / rest;
    if (measure <= tol) break;

    bool accepted = false;
    double moved = 0.0;
    Vector next;
    for (int ls = 0; ls < 60; ++ls) {
      next = project_capped_simplex(b + step * g, floor, rest);
      // rho < 1 with no fee: the marginal is infinite at a zero bid, so the
      // maximizer is interior and iterates stay off the boundary.
      if (rho < 1.0 && floor == 0.0 && next.minCoeff() <= 0.0) {
        step *= 0.5;
        continue;
      }
      const double fn = payoff.value(next);
      if (std::isfinite(fn) && fn >= f + 1e-4 * g.dot(next - b)) {
        const Vector gn = payoff.gradient(next);
        const Vector s = next - b;
        const Vector yv = gn - g;
        const double sy = s.dot(yv);
        moved = s.cwiseAbs().maxCoeff();
        b = next;
        f = fn;
        g = gn;
        step = sy < 0.0 ? -s.squaredNorm() / sy : scale;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    if (moved <= 1e-15 * rest) break;
  }
  it += polish_newton(payoff, floor, rest, b);
  {
    g = payoff.gradient(b);
    const double scale = rest / std::max(g.cwiseAbs().maxCoeff(), 1e-300);
    measure = (project_capped_simplex(b + scale * g, floor, rest) - b).cwiseAbs().maxCoeff() / rest;
  }
  for (Index c = 0; c < k; ++c) out.bids(payoff.live[static_cast<std::size_t>(c)]) = b(c);
  out.iterations = it;
  out.converged = measure <= std::max(tol, 1e-9);
  out.utility = tp_utility(profile, agent, out.bids, opp, floor);
  return out;
}

double fraction(double b, double d) { return b > 0.0 ? b / (b + d) : 0.0; }

// Leontief: solve f_j(b_j) / v_j = t on free goods with sum b = budget by
// Newton's method, derivatives by central differences; goods whose bid
// would drop below the floor are pinned there.
BRResult newton_leontief(const Vector& values, double budget, const Vector& opp, double delta,
                         const Vector& init) {
  const Index m = values.size();
  const std::vector<Index> demanded = detail::demanded_goods(values);
  if (delta * static_cast<double>(demanded.size()) > budget) {
    throw std::invalid_argument("budget cannot cover the entrance fee on every demanded good");
  }
  std::vector<Index> live;
  std::vector<Index> uncontested;
  for (Index j : demanded) (opp(j) > 0.0 ? live : uncontested).push_back(j);
  if (!uncontested.empty() && !live.empty() && delta == 0.0) throw UnattainedBestResponse(uncontested.front());

  BRResult out;
  out.method = "newton";
  out.bids = Vector::Zero(m);
  double cap = std::numeric_limits<double>::infinity();
  double weight = 0.0;
  for (Index j : uncontested) {
    cap = std::min(cap, 1.0 / values(j));
    weight += values(j);
    out.bids(j) = delta;
  }
  const double rest = budget - delta * static_cast<double>(uncontested.size());
  auto finish = [&]() {
    const Vector frac = tp_fractions(out.bids, opp, delta);
    out.utility = std::numeric_limits<double>::infinity();
    for (Index j : demanded) out.utility = std::min(out.utility, frac(j) / values(j));
    return out;
  };
  if (live.empty()) {
    for (Index j : uncontested) out.bids(j) += rest * values(j) / weight;
    return finish();
  }

  const auto k = static_cast<Index>(live.size());
  Vector b(k);
  for (Index c = 0; c < k; ++c) {
    const Index j = live[static_cast<std::size_t>(c)];
    b(c) = init.size() == m && init(j) > 0.0 ? init(j) : rest / static_cast<double>(k);
  }
  b *= rest / b.sum();
  std::vector<bool> pinned(static_cast<std::size_t>(k), false);

  auto ratio = [&](Index c, double bid) {
    const Index j = live[static_cast<std::size_t>(c)];
    return fraction(bid, opp(j)) / values(j);
  };
  auto slope = [&](Index c, double bid) {
    const double h = 1e-6 * std::max(bid, 1e-12);
    return (ratio(c, bid + h) - ratio(c, bid - h)) / (2.0 * h);
  };

  double t = 0.0;
  int total_iter = 0;
  for (int pass = 0; pass < 4 * static_cast<int>(k) + 4; ++pass) {
    std::vector<Index> free_idx;
    double pinned_money = 0.0;
    for (Index c = 0; c < k; ++c) {
      if (pinned[static_cast<std::size_t>(c)]) {
        b(c) = delta;
        pinned_money += delta;
      } else {
        free_idx.push_back(c);
      }
    }
    const auto nf = static_cast<Index>(free_idx.size());
    const double free_money = rest - pinned_money;
    {
      double s = 0.0;
      for (Index c : free_idx) s += std::max(b(c), 1e-300);
      for (Index c : free_idx) b(c) = std::max(b(c), 1e-300) * free_money / s;
    }
    t = 0.0;
    for (Index c : free_idx) t += ratio(c, b(c));
    t /= static_cast<double>(nf);

    for (int it = 0; it < 200; ++it, ++total_iter) {
      Vector res(nf + 1);
      for (Index a = 0; a < nf; ++a) res(a) = ratio(free_idx[static_cast<std::size_t>(a)], b(free_idx[static_cast<std::size_t>(a)])) - t;
      double placed = 0.0;
      for (Index c : free_idx) placed += b(c);
      res(nf) = placed - free_money;
      if (res.head(nf).cwiseAbs().maxCoeff() <= 1e-15 * std::max(t, 1e-300) &&
          std::abs(res(nf)) <= 1e-15 * budget) {
        break;
      }
      Matrix jac = Matrix::Zero(nf + 1, nf + 1);
      for (Index a = 0; a < nf; ++a) {
        jac(a, a) = slope(free_idx[static_cast<std::size_t>(a)], b(free_idx[static_cast<std::size_t>(a)]));
        jac(a, nf) = -1.0;
        jac(nf, a) = 1.0;
      }
      const Vector d = jac.partialPivLu().solve(-res);
      double alpha = 1.0;
      for (Index a = 0; a < nf; ++a) {
        const double cur = b(free_idx[static_cast<std::size_t>(a)]);
        if (d(a) < 0.0) alpha = std::min(alpha, 0.9 * cur / -d(a));
      }
      for (Index a = 0; a < nf; ++a) b(free_idx[static_cast<std::size_t>(a)]) += alpha * d(a);
      t += alpha * d(nf);
      if (alpha * d.cwiseAbs().maxCoeff() <= 1e-17 * budget) break;
    }

    // Pin the worst floor violator, or release a pinned good that wants more.
    Index worst = -1;
    for (Index c : free_idx) {
      if (b(c) < delta && (worst < 0 || b(c) < b(worst))) worst = c;
    }
    if (worst >= 0) {
      pinned[static_cast<std::size_t>(worst)] = true;
      continue;
    }
    Index release = -1;
    for (Index c = 0; c < k; ++c) {
      if (pinned[static_cast<std::size_t>(c)] && ratio(c, delta) < t * (1.0 - 1e-12)) release = c;
    }
    if (release < 0) break;
    pinned[static_cast<std::size_t>(release)] = false;
  }

  for (Index c = 0; c < k; ++c) out.bids(live[static_cast<std::size_t>(c)]) = b(c);
  if (t > cap) {
    // An uncontested good binds: hold every contested ratio at the cap and
    // park the remainder on the uncontested goods.
    for (Index c = 0; c < k; ++c) {
      const Index j = live[static_cast<std::size_t>(c)];
      const double target = cap * values(j);
      out.bids(j) = std::max(delta, target * opp(j) / (1.0 - target));
    }
    const double left = budget - out.bids.sum();
    for (Index j : uncontested) out.bids(j) += left * values(j) / weight;
  }
  out.iterations = total_iter;
  return finish();
}

}  // namespace

BRResult br_concave_numeric(const ValuationProfile& profile, Index agent, double budget, const Vector& opp,
                            double delta, double tol, const Vector& init) {
  const Index m = profile.goods();
  if (opp.size() != m) throw std::invalid_argument("opponent vector length mismatch");
  if (!(budget > 0.0)) throw std::invalid_argument("budget must be positive");
  if (!(delta >= 0.0)) throw std::invalid_argument("entrance fee must be non-negative");
  if (init.size() != 0 && init.size() != m) throw std::invalid_argument("initial bid vector length mismatch");
  const Vector values = profile.matrix().row(agent).transpose();
  if (profile.kind() == ValuationKind::Leontief) return newton_leontief(values, budget, opp, delta, init);

  const std::vector<Index> demanded = detail::demanded_goods(values);
  const double rho = profile.kind() == ValuationKind::Linear ? 1.0 : profile.rho();
  if (delta == 0.0) {
    for (Index j : demanded) {
      if (opp(j) == 0.0) throw UnattainedBestResponse(j);
    }
    return *gradient_on_support(profile, agent, budget, opp, 0.0, demanded, tol, init);
  }
  if (rho < 0.0) {
    // Complements: every demanded good must clear the fee.
    if (delta * static_cast<double>(demanded.size()) > budget) {
      throw std::invalid_argument("budget cannot cover the entrance fee on every demanded good");
    }
    return *gradient_on_support(profile, agent, budget, opp, delta, demanded, tol, init);
  }
  if (budget < delta) {
    BRResult out{Vector::Zero(m), 0.0, 0, "gradient", true};
    out.bids(demanded.front()) = budget;
    return out;
  }
  auto solve = [&](const std::vector<Index>& s) {
    return gradient_on_support(profile, agent, budget, opp, delta, s, tol, init);
  };
  return *detail::best_over_supports(demanded, budget, delta, solve, 12);
}

BRResult br_grid_oracle(const ValuationProfile& profile, Index agent, double budget, const Vector& opp,
                        double delta, double grid_step) {
  const Index m = profile.goods();
  if (opp.size() != m) throw std::invalid_argument("opponent vector length mismatch");
  if (!(grid_step > 0.0) || !(budget > 0.0)) throw std::invalid_argument("grid step and budget must be positive");
  const std::vector<Index> demanded = detail::demanded_goods(profile.matrix().row(agent).transpose());
  const auto g = static_cast<int>(demanded.size());
  if (g > 4) throw std::invalid_argument("grid oracle handles at most 4 demanded goods");
  const long long units = std::llround(budget / grid_step);
  if (units < 1) throw std::invalid_argument("grid step exceeds the budget");

  // C(units + g - 1, g - 1) grid points.
  double points = 1.0;
  for (int r = 1; r < g; ++r) points = points * static_cast<double>(units + r) / static_cast<double>(r);
  if (points > 5e7) {
    std::ostringstream msg;
    msg << "grid too large: about " << points << " points (limit 5e7)";
    throw std::invalid_argument(msg.str());
  }

  const double unit = budget / static_cast<double>(units);
  BRResult best{Vector::Zero(m), -1.0, 0, "grid", true};
  Vector bids = Vector::Zero(m);
  std::vector<long long> counts(static_cast<std::size_t>(g), 0);
  auto visit = [&](auto&& self, int pos, long long left) -> void {
    if (pos == g - 1) {
      counts[static_cast<std::size_t>(pos)] = left;
      for (int k = 0; k < g; ++k) {
        bids(demanded[static_cast<std::size_t>(k)]) = static_cast<double>(counts[static_cast<std::size_t>(k)]) * unit;
      }
      ++best.iterations;
      const double u = tp_utility(profile, agent, bids, opp, delta);
      if (u > best.utility) {
        best.utility = u;
        best.bids = bids;
      }
      return;
    }
    for (long long c = 0; c <= left; ++c) {
      counts[static_cast<std::size_t>(pos)] = c;
      self(self, pos + 1, left - c);
    }
  };
  visit(visit, 0, units);
  return best;
}

}  // namespace mkt

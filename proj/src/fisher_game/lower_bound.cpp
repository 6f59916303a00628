#include "mkt/fisher_game.hpp"

#include <cmath>
#include <numbers>

namespace mkt {

namespace {

Index choose_k(Index n) {
  const double q = static_cast<double>(n) / std::numbers::e;
  const auto lo = static_cast<Index>(std::floor(q));
  return q - static_cast<double>(lo) > 0.5 ? lo + 1 : lo;
}

}  // namespace

LowerBoundValues lb_closed_form(Index n) {
  if (n < 8) throw std::invalid_argument("lower-bound construction needs n >= 8");
  LowerBoundValues out;
  const double nn = static_cast<double>(n);
  const Index k = choose_k(n);
  const double kk = static_cast<double>(k);
  const double eps = 1.0 / std::pow(nn, 4);
  const double delta = 2.0 / nn;
  const double denom = kk + (nn - kk) * (1.0 - delta);
  out.k = k;
  out.u_first = kk / denom;
  out.u_middle = 1.0 + (1.0 - delta) * kk * eps / denom;
  const double log_nsw = (kk * std::log(out.u_first) + (nn - kk) * std::log(out.u_middle)) / (nn + 2.0);
  out.nsw = std::exp(log_nsw);
  out.ratio = 1.0 / out.nsw;
  return out;
}

LowerBoundConstruction lb_construction(Index n) {
  if (n < 8) throw std::invalid_argument("lower-bound construction needs n >= 8");
  const Index k = choose_k(n);
  const double nn = static_cast<double>(n);
  const double eps = 1.0 / std::pow(nn, 4);
  const double eps_prime = 1.0 / nn;
  const double delta = 2.0 * eps_prime;
  const Index agents = n + 2;
  const Index goods = n + 1;
  const Index last = n;  // the shared good

  Matrix v = Matrix::Zero(agents, goods);
  for (Index i = 0; i < n; ++i) v(i, i) = 1.0;
  for (Index i = k; i < n; ++i) {
    for (Index j = 0; j < k; ++j) v(i, j) = eps;
  }
  for (Index j = k; j < n; ++j) v(n, j) = eps_prime;
  v(n, last) = 2.0;
  v(n + 1, last) = 2.0;

  // First-k goods cost 1 + (n - k)(1 - delta) / k at the profile.
  const double top_price = 1.0 + (nn - static_cast<double>(k)) * (1.0 - delta) / static_cast<double>(k);
  ReportProfile reports = v;
  BidProfile bids = BidProfile::Zero(agents, goods);
  for (Index i = 0; i < k; ++i) bids(i, i) = 1.0;
  for (Index i = k; i < n; ++i) {
    reports.row(i).setZero();
    reports(i, i) = delta;
    bids(i, i) = delta;
    for (Index j = 0; j < k; ++j) {
      reports(i, j) = top_price;
      bids(i, j) = (1.0 - delta) / static_cast<double>(k);
    }
  }
  bids(n, last) = 1.0;
  bids(n + 1, last) = 1.0;

  return LowerBoundConstruction{n,     k,   eps, eps_prime, delta,
                                Instance(Vector::Ones(agents), ValuationProfile::linear(v)),
                                reports, bids};
}

std::vector<std::pair<Index, Vector>> lb_structured_deviations(const LowerBoundConstruction& lb) {
  std::vector<std::pair<Index, Vector>> out;
  const Index n = lb.n;
  const Index k = lb.k;
  // Middle agents: shrinking the own-good weight cuts spending on it
  // (inviting agent n+1 in), growing it pulls money off the first k goods.
  for (Index i = k; i < n; ++i) {
    const Vector base = lb.reports.row(i).transpose();
    for (double scale : {0.25, 0.5, 0.9, 0.99, 1.01, 1.1, 2.0}) {
      Vector r = base;
      r(i) *= scale;
      out.emplace_back(i, r);
    }
    Vector own_only = Vector::Zero(base.size());
    own_only(i) = 1.0;
    out.emplace_back(i, own_only);
  }
  // Agent n+1: weight on the middle goods raised toward the shared good's.
  const Vector truth = lb.instance.valuations().matrix().row(n).transpose();
  for (double scale : {2.0, 10.0, 100.0, 1000.0}) {
    Vector r = truth;
    for (Index j = k; j < n; ++j) r(j) *= scale;
    out.emplace_back(n, r);
  }
  return out;
}

}  // namespace mkt

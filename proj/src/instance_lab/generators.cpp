#include "mkt/instance_lab.hpp"

#include <cmath>
#include <random>

namespace mkt {

Instance gen_identity_leontief(Index n) {
  if (n < 1) throw std::invalid_argument("identity instance needs n >= 1");
  return Instance(Vector::Ones(n), ValuationProfile::leontief(Matrix::Identity(n, n)));
}

Instance gen_example_3_1() {
  Matrix v(2, 2);
  v << 1.0, 0.0, 0.5, 0.5;
  return Instance(Vector::Ones(2), ValuationProfile::linear(v));
}

Instance gen_tp_nonexistence() {
  Matrix v(2, 2);
  v << 0.5, 0.5, 0.9, 0.1;
  return Instance(Vector::Ones(2), ValuationProfile::leontief(v));
}

InstanceWithBids gen_example_lin_family(double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("eps must lie in [0, 1]");
  Matrix v(4, 2);
  v << 1.0, 0.0, 0.0, 1.0, 0.5, 0.5, 0.5, 0.5;
  BidProfile b(4, 2);
  b << 1.0, 0.0, 0.0, 1.0, 1.0 - eps, eps, eps, 1.0 - eps;
  return {Instance(Vector::Ones(4), ValuationProfile::linear(v)), b};
}

InstanceWithBids gen_example_leo_family(double a) {
  if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("a must lie in (0, 1)");
  BidProfile b(2, 2);
  b << a, 1.0 - a, a, 1.0 - a;
  return {Instance(Vector::Ones(2), ValuationProfile::leontief(Matrix::Ones(2, 2))), b};
}

Instance gen_random(Index n, Index m, ValuationKind kind, double rho, std::uint64_t seed, double sparsity) {
  if (n < 2 || m < 1) throw std::invalid_argument("random instances need n >= 2 and m >= 1");
  if (!(sparsity >= 0.0 && sparsity < 1.0)) throw std::invalid_argument("sparsity must lie in [0, 1)");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto draw = [&]() {
    const double x = unif(rng);
    return unif(rng) < sparsity ? 0.0 : x;
  };
  Matrix v(n, m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) v(i, j) = draw();
  }
  // Redraw until every good has two interested agents and every agent
  // wants something.
  for (int attempt = 0; attempt < 10000; ++attempt) {
    bool clean = true;
    for (Index j = 0; j < m; ++j) {
      if ((v.col(j).array() > 0.0).count() < 2) {
        clean = false;
        for (Index i = 0; i < n; ++i) v(i, j) = draw();
      }
    }
    for (Index i = 0; i < n; ++i) {
      if (!(v.row(i).maxCoeff() > 0.0)) {
        clean = false;
        for (Index j = 0; j < m; ++j) v(i, j) = draw();
      }
    }
    if (clean) break;
  }
  switch (kind) {
    case ValuationKind::Linear:
      return Instance(Vector::Ones(n), ValuationProfile::linear(v));
    case ValuationKind::Leontief:
      for (Index i = 0; i < n; ++i) v.row(i) /= v.row(i).maxCoeff();
      return Instance(Vector::Ones(n), ValuationProfile::leontief(v));
    case ValuationKind::CES:
      return Instance(Vector::Ones(n), ValuationProfile::ces(v, rho));
  }
  throw std::logic_error("unhandled valuation kind");
}

std::pair<Allocation, PriceVector> perturb_equilibrium(const Instance& instance, const MarketEquilibrium& eq,
                                                       double sigma, std::uint64_t seed) {
  const Index n = instance.n();
  const Index m = instance.m();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double money = instance.total_budget();

  PriceVector p(m);
  for (Index j = 0; j < m; ++j) {
    p(j) = (eq.prices(j) + 1e-3 * money / static_cast<double>(m)) * std::exp(sigma * noise(rng));
  }
  p *= money / p.sum();

  // Start from equilibrium spending, filled in on every interested pair so
  // the fitting has room to move.
  const Matrix& v = instance.valuations().matrix();
  Matrix s(n, m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      s(i, j) = v(i, j) > 0.0 ? eq.allocation(i, j) * eq.prices(j) + 1e-6 * money : 0.0;
    }
  }
  for (int it = 0; it < 10000; ++it) {
    for (Index i = 0; i < n; ++i) s.row(i) *= instance.budget(i) / s.row(i).sum();
    for (Index j = 0; j < m; ++j) {
      const double c = s.col(j).sum();
      if (c > 0.0) s.col(j) *= p(j) / c;
    }
    const Vector rows = s.rowwise().sum();
    if ((rows - instance.budgets()).cwiseAbs().maxCoeff() <= 1e-14 * money) break;
  }
  Allocation x(n, m);
  for (Index j = 0; j < m; ++j) x.col(j) = s.col(j) / p(j);
  return {x, p};
}

}  // namespace mkt

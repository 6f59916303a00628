#include "mkt/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mkt {

std::string to_string(ValuationKind kind) {
  switch (kind) {
    case ValuationKind::Linear:
      return "linear";
    case ValuationKind::Leontief:
      return "leontief";
    case ValuationKind::CES:
      return "ces";
  }
  return "unknown";
}

ValuationKind parse_valuation_kind(const std::string& name) {
  if (name == "linear") return ValuationKind::Linear;
  if (name == "leontief") return ValuationKind::Leontief;
  if (name == "ces") return ValuationKind::CES;
  throw std::invalid_argument("unknown valuation kind '" + name + "'");
}

ValuationProfile::ValuationProfile(ValuationKind kind, Matrix values, double rho)
    : kind_(kind), values_(std::move(values)), rho_(rho) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw std::invalid_argument("valuation matrix must be at least 1x1");
  }
  if (!values_.allFinite() || (values_.array() < 0.0).any()) {
    throw std::invalid_argument("valuation entries must be finite and non-negative");
  }
  for (Index i = 0; i < values_.rows(); ++i) {
    if (values_.row(i).maxCoeff() <= 0.0) {
      throw std::invalid_argument("agent " + std::to_string(i) + " values no good");
    }
  }
  if (kind_ == ValuationKind::CES) {
    if (!std::isfinite(rho_) || rho_ > 1.0 || rho_ == 0.0) {
      throw std::invalid_argument("CES exponent must lie in (-inf, 1] without 0");
    }
  }
}

ValuationProfile ValuationProfile::linear(Matrix values) {
  return ValuationProfile(ValuationKind::Linear, std::move(values), 1.0);
}

ValuationProfile ValuationProfile::leontief(Matrix values) {
  return ValuationProfile(ValuationKind::Leontief, std::move(values), 0.0);
}

ValuationProfile ValuationProfile::ces(Matrix values, double rho) {
  return ValuationProfile(ValuationKind::CES, std::move(values), rho);
}

ValuationProfile ValuationProfile::with_matrix(Matrix values) const {
  return ValuationProfile(kind_, std::move(values), rho_);
}

Instance::Instance(Vector budgets, ValuationProfile valuations)
    : budgets_(std::move(budgets)), valuations_(std::move(valuations)) {
  if (budgets_.size() != valuations_.agents()) {
    throw std::invalid_argument("budget vector length does not match agent count");
  }
  if (!budgets_.allFinite() || (budgets_.array() <= 0.0).any()) {
    throw std::invalid_argument("budgets must be finite and strictly positive");
  }
}

bool Instance::perfect_competition() const {
  const Matrix& v = valuations_.matrix();
  for (Index j = 0; j < m(); ++j) {
    if ((v.col(j).array() > 0.0).count() < 2) return false;
  }
  return true;
}

std::vector<Index> Instance::undemanded_goods() const {
  std::vector<Index> out;
  const Matrix& v = valuations_.matrix();
  for (Index j = 0; j < m(); ++j) {
    if (v.col(j).maxCoeff() <= 0.0) out.push_back(j);
  }
  return out;
}

namespace {

double ces_value(const Eigen::Ref<const Eigen::RowVectorXd>& v, const Vector& x, double rho) {
  // log-sum-exp over demanded goods keeps very negative exponents in range
  double max_term = -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(v.size()));
  for (Index j = 0; j < v.size(); ++j) {
    if (v(j) <= 0.0) continue;
    if (x(j) <= 0.0) {
      if (rho < 0.0) return 0.0;
      continue;
    }
    const double t = std::log(v(j)) + rho * std::log(x(j));
    terms.push_back(t);
    max_term = std::max(max_term, t);
  }
  if (terms.empty()) return 0.0;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - max_term);
  const double log_s = max_term + std::log(acc);
  return std::exp(log_s / rho);
}

}  // namespace

double eval_valuation(const ValuationProfile& profile, Index agent, const Vector& bundle) {
  if (agent < 0 || agent >= profile.agents()) {
    throw std::out_of_range("agent index out of range");
  }
  if (bundle.size() != profile.goods()) {
    throw std::invalid_argument("bundle length does not match good count");
  }
  const auto v = profile.matrix().row(agent);
  switch (profile.kind()) {
    case ValuationKind::Linear:
      return v.dot(bundle);
    case ValuationKind::Leontief: {
      double u = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < v.size(); ++j) {
        if (v(j) > 0.0) u = std::min(u, bundle(j) / v(j));
      }
      return u;
    }
    case ValuationKind::CES:
      if (profile.rho() == 1.0) return v.dot(bundle);
      return ces_value(v, bundle, profile.rho());
  }
  return 0.0;
}

UtilityVector utilities(const ValuationProfile& profile, const Allocation& allocation) {
  if (allocation.rows() != profile.agents() || allocation.cols() != profile.goods()) {
    throw std::invalid_argument("allocation shape does not match valuation profile");
  }
  UtilityVector u(profile.agents());
  for (Index i = 0; i < profile.agents(); ++i) {
    u(i) = eval_valuation(profile, i, allocation.row(i).transpose());
  }
  return u;
}

}  // namespace mkt

// One PASS/FAIL line per acceptance criterion; exits nonzero on any FAIL.

#include "mkt/fisher_game.hpp"
#include "mkt/instance_lab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace mkt;

namespace {

// Tolerances pinned per criterion.
constexpr double kC1Utility = 1e-6;
constexpr double kC2Ratio = 1e-6;
constexpr double kC2Gain = 1e-6;
constexpr int kC2Trials = 200;
constexpr double kC3Delta = 1e-4;
constexpr double kC3Gain = 1e-6;
constexpr double kC3PoaSlack = 1e-3;
constexpr double kC4NswSlack = 1e-4;
constexpr double kC4Gap = 1e-6;
constexpr double kC5Ratio = 2.0 + 1e-3;
constexpr int kC5Linear = 50;
constexpr int kC5CesPerRho = 20;
constexpr double kC6GridSlack = 5e-3;
constexpr double kC6GridStep = 1e-3;
constexpr double kC6Numeric = 1e-6;
constexpr double kC7Bids = 1e-5;
constexpr int kC8Rounds = 100000;
constexpr double kC8Bid = 1e-6;
constexpr double kC8Delta = 1e-3;
constexpr double kC9Slack = 0.05;
constexpr double kC9Gain = 1e-3;
constexpr double kC11Gain = 1e-6;
constexpr double kC11Kkt = 1e-6;

/// Proportionality outcomes gathered from every equilibrium the suite builds.
struct ProportionalityLog {
  int checked = 0;
  int failed = 0;
  bool unequal_budgets = false;
  std::vector<std::string> failures;

  void record(const std::string& where, const Instance& inst, const Allocation& x, const Vector& slack) {
    ++checked;
    if (!proportionality_check(inst, x, slack).all_pass) {
      ++failed;
      failures.push_back(where);
    }
    if ((inst.budgets().array() != inst.budget(0)).any()) unequal_budgets = true;
  }
};

ProportionalityLog g_prop;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [fail: " << what << "]";
    }
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double optimum_nsw(const Instance& inst) {
  const MarketEquilibrium eq = solve_eg(inst);
  return nsw(eq.utilities, inst.budgets());
}

Outcome criterion_1() {
  Outcome o;
  const Instance inst = gen_example_3_1();
  const GameOutcome truthful = fisher_outcome(inst, inst.valuations().matrix());
  const double e0 = std::abs(truthful.true_utilities(0) - 1.0);
  const double e1 = std::abs(truthful.true_utilities(1) - 0.5);
  o.require(e0 <= kC1Utility && e1 <= kC1Utility, "truthful utilities");
  Matrix mis = inst.valuations().matrix();
  mis.row(1) << 0.5, 0.001;
  const GameOutcome dev = fisher_outcome(inst, mis);
  o.require(dev.true_utilities(1) > truthful.true_utilities(1), "misreport gain");
  g_prop.record("c1 truthful", inst, truthful.equilibrium.allocation, Vector::Zero(2));
  o.detail << "truthful=(" << fmt(truthful.true_utilities(0)) << ", " << fmt(truthful.true_utilities(1))
           << ") misreport u2=" << fmt(dev.true_utilities(1));
  return o;
}

Outcome criterion_2() {
  Outcome o;
  for (Index n : {2, 5, 10}) {
    const Instance inst = gen_identity_leontief(n);
    const auto [reports, out] = uniform_leontief_ne(inst);
    const double ratio = poa_ratio(optimum_nsw(inst), out.nsw);
    FalsifyOptions fo;
    fo.trials = kC2Trials;
    fo.threads = 4;
    const FalsifyReport fr = fisher_ne_falsify(inst, reports, fo);
    o.require(std::abs(ratio - static_cast<double>(n)) <= kC2Ratio, "ratio at n=" + std::to_string(n));
    o.require(fr.max_gain <= kC2Gain, "falsified at n=" + std::to_string(n));
    g_prop.record("c2", inst, out.equilibrium.allocation, Vector::Zero(n));
    o.detail << "n=" << n << " ratio=" << fmt(ratio) << " gain=" << fmt(fr.max_gain) << "; ";
  }
  return o;
}

Outcome criterion_3() {
  Outcome o;
  std::vector<Instance> instances{gen_identity_leontief(5)};
  std::mt19937_64 size_rng(3);
  std::uniform_int_distribution<int> size(2, 6);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    instances.push_back(gen_random(size(size_rng), size(size_rng), ValuationKind::Leontief, 1.0, seed));
  }
  int converged = 0;
  double worst_excess = -1.0;
  double worst_gain = 0.0;
  for (std::size_t t = 0; t < instances.size(); ++t) {
    const Instance& inst = instances[t];
    const double m = static_cast<double>(inst.m());
    const double eps = m * m * kC3Delta;
    const NEReport ne = br_dynamics(inst, kC3Delta);
    const std::string id = "instance " + std::to_string(t);
    o.require(ne.converged && ne.max_gain <= kC3Gain, id + " converged");
    if (!ne.converged) continue;
    ++converged;
    worst_gain = std::max(worst_gain, ne.max_gain);
    o.require(verify_eps_market_eq(inst, ne.allocation, ne.prices, eps).pass, id + " eps-market");
    const double ratio = poa_ratio(optimum_nsw(inst), nsw(ne.utilities, inst.budgets()));
    worst_excess = std::max(worst_excess, ratio - (1.0 + eps));
    o.require(ratio <= 1.0 + eps + kC3PoaSlack, id + " poa");
    g_prop.record("c3 " + id, inst, ne.allocation, entrance_fee_slack(inst, kC3Delta));
  }
  o.detail << converged << "/" << instances.size() << " converged, max gain " << fmt(worst_gain)
           << ", worst ratio - (1 + m^2 delta) = " << fmt(worst_excess);
  return o;
}

Outcome criterion_4() {
  Outcome o;
  int passing = 0;
  double worst = -1.0;
  double worst_gap = 0.0;
  const double sigmas[] = {0.01, 0.03, 0.1};
  for (int t = 0; t < 50; ++t) {
    const auto seed = static_cast<std::uint64_t>(t + 1);
    const Instance inst = gen_random(3 + t % 3, 3 + (t / 3) % 3, ValuationKind::Leontief, 1.0, seed);
    const MarketEquilibrium eq = solve_leontief_dual(inst);
    const double gap = duality_gap_leontief(inst, eq.allocation, eq.prices);
    worst_gap = std::max(worst_gap, std::abs(gap));
    o.require(std::abs(gap) <= kC4Gap, "duality gap seed " + std::to_string(seed));
    const double opt = nsw(eq.utilities, inst.budgets());
    const auto [x, p] = perturb_equilibrium(inst, eq, sigmas[t % 3], seed);
    const EpsEquilibriumReport probe = verify_eps_market_eq(inst, x, p, 0.0, 1e-9);
    const double eps = probe.eps_required;
    if (!verify_eps_market_eq(inst, x, p, eps, 1e-9).pass) continue;
    ++passing;
    const double ratio = opt / nsw(utilities(inst.valuations(), x), inst.budgets());
    worst = std::max(worst, ratio - (1.0 + eps));
    o.require(ratio <= 1.0 + eps + kC4NswSlack, "nsw bound seed " + std::to_string(seed));
  }
  o.require(passing >= 25, "too few perturbations pass the eps test");
  o.detail << passing << "/50 perturbations pass, worst ratio - (1 + eps) = " << fmt(worst)
           << ", max |duality gap| " << fmt(worst_gap);
  return o;
}

void add_records(Outcome& o, const std::vector<PoARecord>& recs, int& converged, double& worst,
                 std::vector<std::string>& skipped) {
  for (const PoARecord& r : recs) {
    if (!r.converged) {
      skipped.push_back(r.instance_id + " (" + r.failure + ")");
      continue;
    }
    ++converged;
    worst = std::max(worst, r.ratio);
    o.require(r.ratio <= kC5Ratio, r.instance_id + " ratio " + fmt(r.ratio));
    ++g_prop.checked;
    if (!r.proportional) {
      ++g_prop.failed;
      g_prop.failures.push_back("c5 " + r.instance_id);
    }
  }
}

Outcome criterion_5() {
  Outcome o;
  std::vector<std::string> skipped;
  double worst = 0.0;

  int linear = 0;
  ExperimentConfig lin;
  lin.n = 4;
  lin.m = 3;
  lin.threads = 4;
  lin.count = kC5Linear;
  // extend the sample until enough runs converge
  for (int batch = 0; batch < 3 && linear < kC5Linear; ++batch) {
    add_records(o, run_experiment(lin), linear, worst, skipped);
    lin.seed += static_cast<std::uint64_t>(lin.count);
    lin.count = kC5Linear - linear;
  }
  o.require(linear >= kC5Linear, "fewer than 50 converged linear runs");

  int ces = 0;
  for (double rho : {0.5, -1.0, -3.0}) {
    ExperimentConfig cfg;
    cfg.n = 4;
    cfg.m = 3;
    cfg.kind = ValuationKind::CES;
    cfg.rho = rho;
    cfg.count = kC5CesPerRho;
    cfg.threads = 4;
    add_records(o, run_experiment(cfg), ces, worst, skipped);
  }
  o.require(ces >= 20, "fewer than 20 converged CES runs");
  o.detail << linear << " linear and " << ces << " CES certified, worst ratio " << fmt(worst) << ", "
           << skipped.size() << " non-convergent reported";
  for (const std::string& s : skipped) o.detail << "; " << s;
  return o;
}

Outcome criterion_6() {
  Outcome o;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.05, 1.5);
  double worst_grid = 0.0;
  double worst_numeric = 0.0;
  for (int t = 0; t < 40; ++t) {
    const Index m = t % 2 == 0 ? 2 : 3;
    const Vector v = Vector::NullaryExpr(m, [&]() { return u(rng); });
    const Vector d = Vector::NullaryExpr(m, [&]() { return u(rng); });
    const double budget = 0.5 + u(rng);
    const double delta = t % 4 < 2 ? 0.0 : 0.01;
    const Matrix row = v.transpose();
    const ValuationProfile lin = ValuationProfile::linear(row);
    const ValuationProfile leo = ValuationProfile::leontief(row);

    const BRResult bl = br_linear(v, budget, d, delta);
    const BRResult gl = br_grid_oracle(lin, 0, budget, d, delta, kC6GridStep);
    const BRResult nl = br_concave_numeric(lin, 0, budget, d, delta);
    const BRResult bo = br_leontief(v, budget, d, delta);
    const BRResult go = br_grid_oracle(leo, 0, budget, d, delta, kC6GridStep);
    const BRResult no = br_concave_numeric(leo, 0, budget, d, delta);

    worst_grid = std::max({worst_grid, gl.utility - bl.utility, go.utility - bo.utility});
    worst_numeric = std::max({worst_numeric, std::abs(nl.utility - bl.utility), std::abs(no.utility - bo.utility)});
    o.require(bl.utility >= gl.utility - kC6GridSlack, "linear grid " + std::to_string(t));
    o.require(bo.utility >= go.utility - kC6GridSlack, "leontief grid " + std::to_string(t));
    o.require(std::abs(nl.utility - bl.utility) <= kC6Numeric, "linear numeric " + std::to_string(t));
    o.require(std::abs(no.utility - bo.utility) <= kC6Numeric, "leontief numeric " + std::to_string(t));
  }
  o.detail << "max grid excess " << fmt(worst_grid) << ", max numeric mismatch " << fmt(worst_numeric);
  return o;
}

Outcome criterion_7() {
  Outcome o;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.1, 1.5);
  const Vector v = Vector::NullaryExpr(3, [&]() { return u(rng); });
  const Vector d = Vector::NullaryExpr(3, [&]() { return u(rng); });
  const Matrix row = v.transpose();
  double worst = 0.0;
  const std::vector<std::pair<std::string, ValuationProfile>> kinds{
      {"linear", ValuationProfile::linear(row)},
      {"leontief", ValuationProfile::leontief(row)},
      {"ces 0.5", ValuationProfile::ces(row, 0.5)},
      {"ces -2", ValuationProfile::ces(row, -2.0)}};
  for (const auto& [name, profile] : kinds) {
    for (double delta : {0.0, 0.02}) {
      const Vector ref = best_response(profile, 0, 1.0, d, delta).bids;
      for (int t = 0; t < 10; ++t) {
        Vector init = Vector::NullaryExpr(3, [&]() { return u(rng); });
        init *= 1.0 / init.sum();
        const Vector b = br_concave_numeric(profile, 0, 1.0, d, delta, 1e-12, init).bids;
        const double diff = (b - ref).cwiseAbs().maxCoeff();
        worst = std::max(worst, diff);
        o.require(diff <= kC7Bids, name + " start " + std::to_string(t));
      }
    }
  }
  o.detail << "max bid spread over starts " << fmt(worst);
  return o;
}

Outcome criterion_8() {
  Outcome o;
  const Instance inst = gen_tp_nonexistence();
  DynamicsOptions zero;
  zero.max_rounds = kC8Rounds;
  zero.stall_rounds = 0;
  const NEReport ne0 = br_dynamics(inst, 0.0, BidProfile(), zero);
  o.require(!ne0.converged, "zero-fee dynamics converged");
  o.require(ne0.bids(1, 1) < kC8Bid, "b22 stays above the threshold");
  const NEReport fee = br_dynamics(inst, kC8Delta);
  o.require(fee.converged, "fee dynamics did not converge");
  g_prop.record("c8 fee", inst, fee.allocation, entrance_fee_slack(inst, kC8Delta));
  o.detail << "delta=0: " << ne0.status << " after " << ne0.rounds << " rounds, b22=" << fmt(ne0.bids(1, 1))
           << "; delta=" << fmt(kC8Delta) << ": " << fee.status << " after " << fee.rounds << " rounds";
  return o;
}

Outcome criterion_9() {
  Outcome o;
  double previous = 0.0;
  const double cap = std::exp(1.0 / std::exp(1.0)) + kC9Slack;
  for (Index n : {14, 27, 54, 109}) {
    const LowerBoundConstruction lb = lb_construction(n);
    const LowerBoundValues cf = lb_closed_form(n);
    const GameOutcome out = fisher_outcome(lb.instance, lb.reports);
    const double ratio = poa_ratio(optimum_nsw(lb.instance), out.nsw);
    const std::string id = "n=" + std::to_string(n);
    o.require(std::abs(ratio - cf.ratio) <= 1e-6, id + " solved ratio differs from closed form");
    o.require(ratio >= previous - 1e-12, id + " not monotone");
    o.require(ratio <= cap, id + " above cap");
    previous = ratio;

    FalsifyOptions fo;
    fo.structured_only = true;
    fo.extra = lb_structured_deviations(lb);
    fo.threads = 4;
    const FalsifyReport fisher = fisher_ne_falsify(lb.instance, lb.reports, fo);
    // the profile's own-good spend is the entrance fee; a lone zero-fee bid has no best response
    const NEReport tp = verify_tp_ne(lb.instance, lb.bids, lb.delta, kC9Gain);
    o.require(fisher.max_gain <= kC9Gain, id + " fisher deviation");
    o.require(tp.unattained.empty() && tp.max_gain <= kC9Gain, id + " trading post deviation");
    g_prop.record("c9 " + id, lb.instance, out.equilibrium.allocation, Vector::Zero(lb.instance.n()));
    o.detail << id << " ratio=" << fmt(ratio) << " fisher gain=" << fmt(fisher.max_gain)
             << " tp gain=" << fmt(tp.max_gain) << "; ";
  }
  o.detail << "cap " << fmt(cap);
  return o;
}

Outcome criterion_11() {
  Outcome o;
  int positive = 0;
  int round_trips = 0;
  double worst_gain = 0.0;
  double worst_kkt = 0.0;
  for (std::uint64_t seed = 1; seed <= 500 && positive < 10; ++seed) {
    const Instance inst = gen_random(2 + static_cast<Index>(seed % 3), 2 + static_cast<Index>(seed % 2),
                                     ValuationKind::Leontief, 1.0, seed);
    const MarketEquilibrium eq = solve_leontief_dual(inst);
    if (eq.prices.minCoeff() <= 1e-6) continue;
    ++positive;
    const std::string id = "seed " + std::to_string(seed);
    const NEReport at_eq = verify_tp_ne(inst, market_to_bids(eq.allocation, eq.prices), 0.0, kC11Gain);
    worst_gain = std::max(worst_gain, at_eq.max_gain);
    o.require(at_eq.converged && at_eq.unattained.empty(), id + " equilibrium bids not a trading post NE");

    DynamicsOptions opt;
    opt.gain_tol = kC11Gain;
    const NEReport ne = br_dynamics(inst, 0.0, BidProfile(), opt);
    if (!ne.converged) continue;
    ++round_trips;
    const auto [p, x] = ne_to_market(ne.bids, 0.0);
    const KktReport kkt = verify_kkt_leontief(inst, x, p, kC11Kkt);
    const EquilibriumResiduals& res = kkt.residuals;
    worst_kkt = std::max({worst_kkt, res.stationarity, res.clearing, res.budget, res.money});
    o.require(kkt.pass, id + " dynamics equilibrium fails KKT");
    g_prop.record("c11 " + id, inst, x, Vector::Zero(inst.n()));
  }
  o.require(positive >= 10, "fewer than 10 positive-price instances found");
  o.require(round_trips >= 1, "no dynamics run converged");
  o.detail << positive << " instances, max NE gain " << fmt(worst_gain) << ", " << round_trips
           << " dynamics round trips, max KKT violation " << fmt(worst_kkt);
  return o;
}

Outcome criterion_10() {
  Outcome o;
  const Vector budgets = (Vector(3) << 1, 2, 4).finished();

  const Instance id(budgets, ValuationProfile::leontief(Matrix::Identity(3, 3)));
  const auto [reports, out] = uniform_leontief_ne(id);
  g_prop.record("c10 fisher uniform", id, out.equilibrium.allocation, Vector::Zero(3));

  const NEReport tp = br_dynamics(id, kC3Delta);
  o.require(tp.converged, "unequal-budget leontief dynamics");
  g_prop.record("c10 tp leontief", id, tp.allocation, entrance_fee_slack(id, kC3Delta));

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Instance r = gen_random(3, 3, ValuationKind::Linear, 1.0, seed);
    const Instance inst(budgets, r.valuations());
    const NEReport ne = br_dynamics(inst, 0.0);
    if (ne.converged) g_prop.record("c10 tp linear " + std::to_string(seed), inst, ne.allocation, Vector::Zero(3));
    const GameOutcome truthful = fisher_outcome(inst, inst.valuations().matrix());
    g_prop.record("c10 fisher linear " + std::to_string(seed), inst, truthful.equilibrium.allocation,
                  Vector::Zero(3));
  }

  o.require(g_prop.failed == 0, "some equilibrium is not proportional");
  o.require(g_prop.unequal_budgets, "no unequal-budget run");
  o.detail << g_prop.checked << " equilibria checked, " << g_prop.failed << " failed";
  for (const std::string& f : g_prop.failures) o.detail << "; " << f;
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, criterion_1}, {2, criterion_2}, {3, criterion_3}, {4, criterion_4},  {5, criterion_5},
      {6, criterion_6}, {7, criterion_7}, {8, criterion_8}, {9, criterion_9}, {11, criterion_11},
      {10, criterion_10}};
  std::vector<std::pair<int, std::string>> lines;
  bool all = true;
  for (const auto& [k, run] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    all = all && o.pass;
    char head[64];
    std::snprintf(head, sizeof head, "criterion %2d: %s (%.1fs) ", k, o.pass ? "PASS" : "FAIL", secs);
    lines.emplace_back(k, head + o.detail.str());
    std::fprintf(stderr, "%s\n", lines.back().second.c_str());
  }
  // criterion 10 runs last because it audits every equilibrium built before it
  std::sort(lines.begin(), lines.end());
  for (const auto& line : lines) std::printf("%s\n", line.second.c_str());
  return all ? 0 : 1;
}

#include "mkt/fisher_game.hpp"
#include "mkt/instance_lab.hpp"

#include "helpers.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace mkt;
using testing_util::mat;
using testing_util::vec;

TEST_SUITE("outcomes") {
  TEST_CASE("truthful reports on the two-agent linear example") {
    const Instance inst = gen_example_3_1();
    const GameOutcome out = fisher_outcome(inst, inst.valuations().matrix());
    CHECK(out.true_utilities(0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(out.true_utilities(1) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(out.empty_reports.empty());
  }

  TEST_CASE("overstating interest in the contested good pays off") {
    const Instance inst = gen_example_3_1();
    const GameOutcome out = fisher_outcome(inst, mat(2, 2, {1, 0, 0.9, 0.1}));
    // agent 2 spends 0.2 on good 2 and 0.8 on good 1 at price 1.8
    CHECK(out.equilibrium.prices(0) == doctest::Approx(1.8).epsilon(1e-9));
    CHECK(out.true_utilities(1) == doctest::Approx(0.5 + 0.5 * 0.8 / 1.8).epsilon(1e-9));
    CHECK(out.true_utilities(1) > 0.5);
  }

  TEST_CASE("identity instance reported truthfully gives everyone their good") {
    const Instance inst = gen_identity_leontief(4);
    const GameOutcome out = fisher_outcome(inst, inst.valuations().matrix());
    CHECK((out.true_utilities.array() - 1.0).abs().maxCoeff() <= 1e-9);
    CHECK(out.nsw == doctest::Approx(1.0));
  }

  TEST_CASE("all-zero reports are left out") {
    const Instance inst = gen_identity_leontief(3);
    const GameOutcome out = fisher_outcome(inst, mat(3, 3, {1, 0, 0, 0, 0, 0, 0, 0, 1}));
    REQUIRE(out.empty_reports.size() == 1);
    CHECK(out.empty_reports[0] == 1);
    CHECK(out.true_utilities(1) == 0.0);
    CHECK(out.equilibrium.allocation.row(1).sum() == 0.0);
  }

  TEST_CASE("no report profile beats the truthful outcome's welfare") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Instance inst = gen_random(3, 3, ValuationKind::Linear, 1.0, seed);
      const double truthful = fisher_outcome(inst, inst.valuations().matrix()).nsw;
      for (int t = 0; t < 20; ++t) {
        const Matrix r = Matrix::NullaryExpr(3, 3, [&]() { return u(rng); });
        const GameOutcome out = fisher_outcome(inst, r);
        CHECK(out.nsw <= truthful + 1e-9);
        CHECK(out.nsw == doctest::Approx(oracle::nsw_direct(out.true_utilities, inst.budgets())));
      }
    }
  }

  TEST_CASE("outcome report is prefixed") {
    const Instance inst = gen_example_3_1();
    const Report r = to_report(fisher_outcome(inst, inst.valuations().matrix()));
    CHECK_NOTHROW(r.at("true_utilities"));
    CHECK_NOTHROW(r.at("equilibrium.prices"));
  }
}

TEST_SUITE("leontief equilibria") {
  TEST_CASE("uniform reports split every good by budget") {
    const auto [reports, out] = uniform_leontief_ne(gen_identity_leontief(5));
    CHECK((reports.array() - 0.2).abs().maxCoeff() == 0.0);
    CHECK((out.true_utilities.array() - 0.2).abs().maxCoeff() <= 1e-9);
    CHECK(1.0 / out.nsw == doctest::Approx(5.0));
  }

  TEST_CASE("uniform reports with unequal budgets") {
    const Instance inst(vec({1, 3}), ValuationProfile::leontief(Matrix::Identity(2, 2)));
    const auto [reports, out] = uniform_leontief_ne(inst);
    CHECK(out.true_utilities(0) == doctest::Approx(0.25));
    CHECK(out.true_utilities(1) == doctest::Approx(0.75));
    CHECK(proportionality_check(inst, out.equilibrium.allocation, Vector::Zero(2)).all_pass);
  }

  TEST_CASE("no sampled deviation improves on the uniform profile") {
    const Instance inst = gen_identity_leontief(3);
    const auto [reports, out] = uniform_leontief_ne(inst);
    FalsifyOptions opt;
    opt.trials = 100;
    CHECK(fisher_ne_falsify(inst, reports, opt).max_gain <= 1e-6);
  }
}

TEST_SUITE("lower bound construction") {
  TEST_CASE("shape and parameters") {
    const LowerBoundConstruction lb = lb_construction(8);
    CHECK(lb.instance.n() == 10);
    CHECK(lb.instance.m() == 9);
    CHECK(lb.k == 3);
    CHECK(lb.eps == doctest::Approx(1.0 / 4096.0));
    CHECK(lb.delta == doctest::Approx(0.25));
    CHECK_THROWS_AS(lb_construction(7), std::invalid_argument);
  }

  TEST_CASE("closed form matches the price-based reference") {
    for (Index n = 8; n <= 40; ++n) {
      const LowerBoundValues cf = lb_closed_form(n);
      const auto ref = oracle::lower_bound_reference(n, cf.k);
      CHECK(cf.u_first == doctest::Approx(ref.u_first).epsilon(1e-12));
      CHECK(cf.u_middle == doctest::Approx(ref.u_middle).epsilon(1e-12));
      CHECK(cf.ratio == doctest::Approx(ref.ratio).epsilon(1e-12));
      CHECK(cf.ratio <= std::exp(1.0 / std::exp(1.0)) + 0.05);
    }
  }

  TEST_CASE("the solved market on the reports reproduces the closed form") {
    for (Index n : {8, 12}) {
      const LowerBoundConstruction lb = lb_construction(n);
      const LowerBoundValues cf = lb_closed_form(n);
      const GameOutcome out = fisher_outcome(lb.instance, lb.reports);
      for (Index i = 0; i < n; ++i) {
        const double expect = i < lb.k ? cf.u_first : cf.u_middle;
        CHECK(std::abs(out.true_utilities(i) - expect) <= 1e-6);
      }
      for (Index i = lb.k; i < n; ++i) {
        const double own = out.equilibrium.allocation(i, i) * out.equilibrium.prices(i);
        CHECK(std::abs(own - lb.delta) <= 1e-6);
      }
      CHECK(std::abs(1.0 / out.nsw - cf.ratio) <= 1e-6);
    }
  }

  TEST_CASE("bids mirror the spending") {
    const LowerBoundConstruction lb = lb_construction(10);
    CHECK((lb.bids.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
    const auto [p, x] = ne_to_market(lb.bids, 0.0);
    const GameOutcome out = fisher_outcome(lb.instance, lb.reports);
    CHECK((p - out.equilibrium.prices).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_SUITE("falsification") {
  TEST_CASE("the two-agent linear example is not an equilibrium when truthful") {
    const Instance inst = gen_example_3_1();
    FalsifyOptions opt;
    opt.trials = 100;
    const FalsifyReport rep = fisher_ne_falsify(inst, inst.valuations().matrix(), opt);
    CHECK(rep.gains(1) > 0.1);
    CHECK(rep.gains(0) <= 1e-9);
    const GameOutcome dev = fisher_outcome(inst, [&] {
      Matrix r = inst.valuations().matrix();
      r.row(1) = rep.best_reports.row(1);
      return r;
    }());
    CHECK(dev.true_utilities(1) - 0.5 == doctest::Approx(rep.gains(1)).epsilon(1e-6));
  }

  TEST_CASE("thread count does not change the outcome") {
    const Instance inst = gen_random(3, 3, ValuationKind::Linear, 1.0, 4);
    FalsifyOptions a;
    a.trials = 40;
    FalsifyOptions b = a;
    b.threads = 4;
    const FalsifyReport ra = fisher_ne_falsify(inst, inst.valuations().matrix(), a);
    const FalsifyReport rb = fisher_ne_falsify(inst, inst.valuations().matrix(), b);
    CHECK((ra.gains - rb.gains).cwiseAbs().maxCoeff() == 0.0);
    CHECK(ra.trials == rb.trials);
  }

  TEST_CASE("improvement dynamics settle with welfare at least half the optimum") {
    int certified = 0;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      const Instance inst = gen_random(3, 3, ValuationKind::Linear, 1.0, seed);
      FalsifyOptions opt;
      opt.trials = 30;
      opt.seed = seed;
      const ImprovementRun run = fisher_improvement_dynamics(inst, 50, 1e-6, opt);
      if (!run.certified) continue;
      ++certified;
      const double opt_nsw = fisher_outcome(inst, inst.valuations().matrix()).nsw;
      CHECK(opt_nsw / run.outcome.nsw <= 2.0 + 1e-2);
      CHECK(opt_nsw / run.outcome.nsw >= 1.0 - 1e-9);
    }
    CHECK(certified >= 4);
  }
}

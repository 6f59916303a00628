#include "mkt/fisher_game.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

namespace mkt {

namespace {

struct Deviation {
  Index agent;
  Vector report;
};

void push_if_nonempty(std::vector<Deviation>& out, Index agent, Vector report) {
  if (report.maxCoeff() > 0.0) out.push_back({agent, std::move(report)});
}

std::vector<Deviation> build_deviations(const Instance& instance, const ReportProfile& reports,
                                        const FalsifyOptions& options, const std::vector<Index>& agents) {
  std::vector<Deviation> out;
  const Index m = instance.m();
  const Matrix& truth = instance.valuations().matrix();
  for (Index i : agents) {
    const Vector current = reports.row(i).transpose();
    const Vector honest = truth.row(i).transpose();
    if (honest != current) push_if_nonempty(out, i, honest);

    if (!options.structured_only) {
      if (m <= 10) {
        for (Index j = 0; j < m; ++j) {
          for (double f : {1e-3, 0.1, 0.5, 2.0, 10.0, 1e3}) {
            Vector r = current;
            r(j) = current(j) > 0.0 ? current(j) * f : f * current.maxCoeff() * 1e-2;
            push_if_nonempty(out, i, r);
          }
          if (current(j) > 0.0) {
            Vector r = current;
            r(j) = 0.0;
            push_if_nonempty(out, i, r);
          }
        }
      }
      // Seeded per agent so the sample does not depend on the agent subset.
      std::seed_seq seq{static_cast<std::uint64_t>(options.seed), static_cast<std::uint64_t>(i)};
      std::mt19937_64 rng(seq);
      const double span = std::log(options.scale_range);
      std::uniform_real_distribution<double> log_scale(-span, span);
      std::bernoulli_distribution keep(0.5);
      for (int t = 0; t < options.trials; ++t) {
        const Vector& base = (t % 2 == 0) ? current : honest;
        Vector r(m);
        for (Index j = 0; j < m; ++j) r(j) = base(j) * std::exp(log_scale(rng));
        if (t % 3 == 2) {
          Vector masked = r;
          for (Index j = 0; j < m; ++j) {
            if (!keep(rng)) masked(j) = 0.0;
          }
          if (masked.maxCoeff() > 0.0) r = masked;
        }
        push_if_nonempty(out, i, r);
      }
    }
  }
  for (const auto& [agent, report] : options.extra) {
    if (std::find(agents.begin(), agents.end(), agent) != agents.end()) push_if_nonempty(out, agent, report);
  }
  return out;
}

}  // namespace

FalsifyReport fisher_ne_falsify(const Instance& instance, const ReportProfile& reports,
                                const FalsifyOptions& options) {
  const GameOutcome base = fisher_outcome(instance, reports, options.solver);
  if (!base.equilibrium.converged) throw std::runtime_error("market solve at the probed profile did not converge");

  std::vector<Index> agents = options.agents;
  if (agents.empty()) {
    for (Index i = 0; i < instance.n(); ++i) agents.push_back(i);
  }
  const std::vector<Deviation> deviations = build_deviations(instance, reports, options, agents);

  const auto count = deviations.size();
  std::vector<double> gains(count, 0.0);
  std::vector<char> failed(count, 0);
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t t = next++; t < count; t = next++) {
      ReportProfile probe = reports;
      probe.row(deviations[t].agent) = deviations[t].report.transpose();
      try {
        const GameOutcome o = fisher_outcome(instance, probe, options.solver);
        if (!o.equilibrium.converged) {
          failed[t] = 1;
          continue;
        }
        const Index i = deviations[t].agent;
        gains[t] = o.true_utilities(i) - base.true_utilities(i);
      } catch (const std::exception&) {
        failed[t] = 1;
      }
    }
  };
  const int threads = std::max(1, options.threads);
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  FalsifyReport out;
  out.gains = Vector::Zero(instance.n());
  out.best_reports = Matrix::Zero(instance.n(), instance.m());
  out.trials = static_cast<int>(count);
  for (std::size_t t = 0; t < count; ++t) {
    if (failed[t]) {
      ++out.skipped;
      continue;
    }
    const Index i = deviations[t].agent;
    if (gains[t] > out.gains(i)) {
      out.gains(i) = gains[t];
      out.best_reports.row(i) = deviations[t].report.transpose();
    }
  }
  out.max_gain = out.gains.maxCoeff();
  return out;
}

ImprovementRun fisher_improvement_dynamics(const Instance& instance, int max_rounds, double gain_tol,
                                           const FalsifyOptions& options) {
  ImprovementRun run;
  run.reports = instance.valuations().matrix();
  for (run.rounds = 1; run.rounds <= max_rounds; ++run.rounds) {
    bool moved = false;
    for (Index i = 0; i < instance.n(); ++i) {
      FalsifyOptions probe = options;
      probe.agents = {i};
      probe.seed = options.seed + static_cast<std::uint64_t>(run.rounds) * 1000003u;
      const FalsifyReport rep = fisher_ne_falsify(instance, run.reports, probe);
      if (rep.gains(i) > gain_tol) {
        run.reports.row(i) = rep.best_reports.row(i);
        moved = true;
      }
    }
    if (!moved) {
      run.certified = true;
      break;
    }
  }
  run.rounds = std::min(run.rounds, max_rounds);
  run.outcome = fisher_outcome(instance, run.reports, options.solver);
  return run;
}

Report to_report(const FalsifyReport& report) {
  Report r;
  r.add("max_gain", report.max_gain)
      .add("gains", report.gains)
      .add("best_reports", report.best_reports)
      .add("trials", report.trials)
      .add("skipped", report.skipped);
  return r;
}

}  // namespace mkt

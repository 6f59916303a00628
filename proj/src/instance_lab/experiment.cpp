#include "mkt/instance_lab.hpp"

#include "mkt/fisher_game.hpp"
#include "mkt/io.hpp"

#include <atomic>
#include <chrono>
#include <ostream>
#include <thread>

namespace mkt {

namespace {

constexpr double kImprovementTol = 1e-4;

Instance with_budgets(const Instance& instance, const Vector& budgets) {
  if (budgets.size() == 0) return instance;
  return Instance(budgets, instance.valuations());
}

PoARecord run_one(const std::string& id, const Instance& instance, const ExperimentConfig& config) {
  PoARecord rec;
  rec.instance_id = id;
  rec.mechanism = config.mechanism;
  rec.delta = config.delta;
  const auto start = std::chrono::steady_clock::now();
  try {
    SolverOptions solver;
    solver.tol = config.tol;
    solver.max_iter = config.max_iter;
    const MarketEquilibrium opt = solve_eg(instance, solver);
    if (!opt.converged) throw std::runtime_error("optimum solve did not converge");
    rec.nsw_opt = nsw(opt.utilities, instance.budgets());

    Allocation x;
    PriceVector p;
    Vector slack = Vector::Zero(instance.n());
    if (config.mechanism == "trading_post") {
      DynamicsOptions dyn;
      dyn.max_rounds = config.max_rounds;
      const NEReport ne = br_dynamics(instance, config.delta, BidProfile(), dyn);
      rec.converged = ne.converged;
      rec.eps_br = ne.max_gain;
      x = ne.allocation;
      p = ne.prices;
      slack = entrance_fee_slack(instance, config.delta);
      if (!ne.converged) rec.failure = "dynamics " + ne.status;
    } else {
      FalsifyOptions fo;
      fo.trials = config.trials;
      fo.seed = config.seed;
      fo.solver = solver;
      GameOutcome outcome;
      ReportProfile reports;
      if (instance.kind() == ValuationKind::Leontief) {
        std::tie(reports, outcome) = uniform_leontief_ne(instance, solver);
        rec.eps_br = fisher_ne_falsify(instance, reports, fo).max_gain;
        rec.converged = true;
      } else {
        const ImprovementRun run =
            fisher_improvement_dynamics(instance, std::min(config.max_rounds, 50), kImprovementTol, fo);
        outcome = run.outcome;
        rec.eps_br = fisher_ne_falsify(instance, run.reports, fo).max_gain;
        rec.converged = run.certified && rec.eps_br <= kImprovementTol;
        if (!run.certified) {
          rec.failure = "improvement dynamics not certified";
        } else if (!rec.converged) {
          rec.failure = "fresh deviation sample beats the tolerance";
        }
      }
      x = outcome.equilibrium.allocation;
      p = outcome.equilibrium.prices;
    }
    const UtilityVector u = utilities(instance.valuations(), x);
    rec.nsw_eq = nsw(u, instance.budgets());
    rec.ratio = poa_ratio(rec.nsw_opt, rec.nsw_eq);
    rec.eps_market = verify_eps_market_eq(instance, x, p, 0.0, config.tol).eps_required;
    rec.proportional = proportionality_check(instance, x, slack).all_pass;
  } catch (const std::exception& e) {
    rec.failure = e.what();
    rec.converged = false;
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

}  // namespace

std::vector<std::pair<std::string, Instance>> experiment_instances(const ExperimentConfig& config) {
  std::vector<std::pair<std::string, Instance>> out;
  const std::string& src = config.source;
  if (src == "identity") {
    out.emplace_back("identity-" + std::to_string(config.n), gen_identity_leontief(config.n));
  } else if (src == "example-3.1") {
    out.emplace_back("example-3.1", gen_example_3_1());
  } else if (src == "tp-nonexistence") {
    out.emplace_back("tp-nonexistence", gen_tp_nonexistence());
  } else if (src == "lb") {
    out.emplace_back("lb-" + std::to_string(config.n), lb_construction(config.n).instance);
  } else if (src == "file") {
    out.emplace_back(config.path, read_instance(config.path));
  } else if (src == "random") {
    for (int t = 0; t < config.count; ++t) {
      const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(t);
      out.emplace_back("random-" + to_string(config.kind) + "-" + std::to_string(seed),
                       gen_random(config.n, config.m, config.kind, config.rho, seed, config.sparsity));
    }
  } else {
    throw std::invalid_argument("unknown instance source '" + src + "'");
  }
  for (auto& entry : out) entry.second = with_budgets(entry.second, config.budgets);
  return out;
}

std::vector<PoARecord> run_experiment(const ExperimentConfig& config) {
  if (config.mechanism != "fisher" && config.mechanism != "trading_post") {
    throw std::invalid_argument("mechanism must be fisher or trading_post");
  }
  if (!(config.delta >= 0.0)) throw std::invalid_argument("delta must be non-negative");
  const auto instances = experiment_instances(config);
  if (config.mechanism == "trading_post" && config.delta == 0.0) {
    for (const auto& entry : instances) {
      if (entry.second.kind() == ValuationKind::Leontief) {
        throw std::invalid_argument("Leontief trading post runs need delta > 0");
      }
    }
  }

  std::vector<PoARecord> records(instances.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t t = next++; t < instances.size(); t = next++) {
      records[t] = run_one(instances[t].first, instances[t].second, config);
    }
  };
  const int threads = std::max(1, config.threads);
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return records;
}

void write_poa_csv(std::ostream& os, const std::vector<PoARecord>& records) {
  os << "instance_id,mechanism,delta,nsw_opt,nsw_eq,ratio,eps_br,eps_market,proportional,seconds\n";
  for (const PoARecord& r : records) {
    os << r.instance_id << ',' << r.mechanism << ',' << format_real(r.delta) << ',' << format_real(r.nsw_opt)
       << ',' << format_real(r.nsw_eq) << ',' << format_real(r.ratio) << ',' << format_real(r.eps_br) << ','
       << format_real(r.eps_market) << ',' << (r.proportional ? "true" : "false") << ','
       << format_real(r.seconds) << '\n';
  }
}

}  // namespace mkt

#include "mkt/core.hpp"
#include "mkt/eq_solvers.hpp"
#include "mkt/fisher_game.hpp"
#include "mkt/instance_lab.hpp"
#include "mkt/io.hpp"
#include "mkt/trading_post.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace mkt;

struct Common {
  double tol = kDefaultTol;
  int max_iter = 0;  // 0: per-verb default
  double delta = 0.0;
  double eps = -1.0;  // < 0: per-verb default
  std::uint64_t seed = 1;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--tol", c.tol, "Solver / verification tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--max-iter", c.max_iter, "Iteration or round limit")->check(CLI::NonNegativeNumber);
  cmd->add_option("--delta", c.delta, "Trading Post entrance fee")->check(CLI::NonNegativeNumber);
  cmd->add_option("--eps", c.eps, "Epsilon parameter of the verb");
  cmd->add_option("--seed", c.seed, "Random seed");
  cmd->add_option("--out", c.out, "Also write the report here; CSV goes to <out>.csv");
}

SolverOptions solver_options(const Common& c) {
  SolverOptions s;
  s.tol = c.tol;
  if (c.max_iter > 0) s.max_iter = c.max_iter;
  return s;
}

void emit(const Common& c, const Report& report, const std::string& csv) {
  std::cout << report;
  if (c.out.empty()) return;
  write_file(c.out, report.str());
  if (!csv.empty()) write_file(c.out + ".csv", csv);
}

std::string report_csv(const Report& report) {
  std::string s = "key,value\n";
  for (const auto& [key, value] : report.entries()) {
    const bool quote = value.find(',') != std::string::npos;
    s += key + ',' + (quote ? '"' + value + '"' : value) + '\n';
  }
  return s;
}

std::string poa_csv(const std::vector<PoARecord>& records) {
  std::ostringstream os;
  write_poa_csv(os, records);
  return os.str();
}

Report record_report(const PoARecord& r) {
  Report rep;
  rep.add("instance_id", r.instance_id)
      .add("mechanism", r.mechanism)
      .add("delta", r.delta)
      .add("nsw_opt", r.nsw_opt)
      .add("nsw_eq", r.nsw_eq)
      .add("ratio", r.ratio)
      .add("eps_br", r.eps_br)
      .add("eps_market", r.eps_market)
      .add("proportional", r.proportional)
      .add("converged", r.converged);
  if (!r.failure.empty()) rep.add("failure", r.failure);
  return rep;
}

void warn_leontief_no_fee(const Instance& instance, double delta) {
  if (instance.kind() == ValuationKind::Leontief && delta == 0.0) {
    std::cerr << "warning: Leontief trading post with delta = 0 may have no pure equilibrium "
                 "(see `reproduce tp-nonexistence`); dynamics may end in an unattained best response\n";
  }
}

int cmd_solve_eg(const Common& c, const std::string& path) {
  const Instance inst = read_instance(path);
  const MarketEquilibrium eq = solve_eg(inst, solver_options(c));
  Report rep = to_report(eq);
  bool ok = eq.converged;
  if (inst.kind() == ValuationKind::Linear) {
    const KktReport k = verify_kkt_linear(inst, eq.allocation, eq.prices, c.tol);
    rep.add("kkt_pass", k.pass);
    ok = ok && k.pass;
  } else if (inst.kind() == ValuationKind::Leontief) {
    const KktReport k = verify_kkt_leontief(inst, eq.allocation, eq.prices, c.tol);
    rep.add("kkt_pass", k.pass);
    ok = ok && k.pass;
  }
  rep.add("nsw", nsw(eq.utilities, inst.budgets()));
  emit(c, rep, report_csv(rep));
  return ok ? 0 : 1;
}

int cmd_tp_dynamics(const Common& c, const std::string& path, const std::string& init_path, int stall) {
  const Instance inst = read_instance(path);
  warn_leontief_no_fee(inst, c.delta);
  DynamicsOptions opt;
  if (c.max_iter > 0) opt.max_rounds = c.max_iter;
  opt.stall_rounds = stall;
  if (c.eps > 0.0) opt.gain_tol = c.eps;
  std::ostringstream traj;
  opt.trajectory = &traj;
  const BidProfile init = init_path.empty() ? BidProfile() : read_matrix(init_path, "bids");
  const NEReport ne = br_dynamics(inst, c.delta, init, opt);
  Report rep = to_report(ne);
  rep.add("nsw", nsw(ne.utilities, inst.budgets()));
  std::string csv = "round,change";
  for (Index i = 0; i < inst.n(); ++i) csv += ",u" + std::to_string(i + 1);
  csv += '\n';
  std::string line;
  std::istringstream lines(traj.str());
  while (std::getline(lines, line)) {
    for (char& ch : line) {
      if (ch == ' ') ch = ',';
    }
    csv += line + '\n';
  }
  emit(c, rep, csv);
  return ne.converged ? 0 : 1;
}

int cmd_fisher_outcome(const Common& c, const std::string& path, const std::string& reports_path,
                       int trials) {
  const Instance inst = read_instance(path);
  const ReportProfile reports =
      reports_path.empty() ? ReportProfile(inst.valuations().matrix()) : read_matrix(reports_path, "reports");
  const GameOutcome outcome = fisher_outcome(inst, reports, solver_options(c));
  Report rep = to_report(outcome);
  if (trials > 0) {
    FalsifyOptions fo;
    fo.trials = trials;
    fo.seed = c.seed;
    fo.solver = solver_options(c);
    rep.merge("falsify", to_report(fisher_ne_falsify(inst, reports, fo)));
  }
  emit(c, rep, report_csv(rep));
  return outcome.equilibrium.converged ? 0 : 1;
}

int cmd_verify(const Common& c, const std::string& kind, const std::string& cert, const std::string& path) {
  const Instance inst = read_instance(path);
  Report rep;
  bool ok = false;
  if (kind == "tp-ne") {
    const BidProfile bids = read_matrix(cert, "bids");
    const double gain_tol = c.eps > 0.0 ? c.eps : 1e-6;
    const NEReport ne = verify_tp_ne(inst, bids, c.delta, gain_tol);
    rep = to_report(ne);
    ok = ne.converged;
  } else if (kind == "fisher-ne") {
    FalsifyOptions fo;
    fo.seed = c.seed;
    fo.solver = solver_options(c);
    const FalsifyReport fr = fisher_ne_falsify(inst, read_matrix(cert, "reports"), fo);
    rep = to_report(fr);
    ok = fr.max_gain <= (c.eps > 0.0 ? c.eps : 1e-6);
    rep.add("pass", ok);
  } else {
    const Allocation x = read_matrix(cert, "allocation");
    const PriceVector p = read_vector(cert, "prices");
    if (kind == "kkt") {
      KktReport k;
      if (inst.kind() == ValuationKind::Linear) {
        k = verify_kkt_linear(inst, x, p, c.tol);
      } else if (inst.kind() == ValuationKind::Leontief) {
        k = verify_kkt_leontief(inst, x, p, c.tol);
      } else {
        throw CLI::ValidationError("--kind kkt", "KKT verification covers linear and Leontief instances");
      }
      rep.add("stationarity", k.residuals.stationarity)
          .add("clearing", k.residuals.clearing)
          .add("budget", k.residuals.budget)
          .add("money", k.residuals.money)
          .add("pass", k.pass);
      ok = k.pass;
    } else if (kind == "eps-market") {
      const double eps = c.eps >= 0.0 ? c.eps : 0.0;
      const EpsEquilibriumReport e = verify_eps_market_eq(inst, x, p, eps, c.tol);
      rep.add("eps", e.eps)
          .add("eps_required", e.eps_required)
          .add("optimal_utilities", e.optimal_utilities)
          .add("actual_utilities", e.actual_utilities)
          .add("clearing_residual", e.clearing_residual)
          .add("budget_residual", e.budget_residual)
          .add("goods_sold", e.goods_sold)
          .add("budgets_spent", e.budgets_spent)
          .add("pass", e.pass);
      ok = e.pass;
    } else {
      throw CLI::ValidationError("--kind", "expected kkt, eps-market, tp-ne or fisher-ne");
    }
  }
  emit(c, rep, report_csv(rep));
  return ok ? 0 : 1;
}

struct PoaArgs {
  ExperimentConfig config;
  std::string kind = "linear";
  std::string budgets;
};

int cmd_poa(const Common& c, PoaArgs args) {
  ExperimentConfig& cfg = args.config;
  cfg.kind = parse_valuation_kind(args.kind);
  cfg.delta = c.delta;
  cfg.tol = c.tol;
  cfg.seed = c.seed;
  if (c.max_iter > 0) cfg.max_iter = c.max_iter;
  if (!args.budgets.empty()) {
    std::vector<double> b;
    std::stringstream ss(args.budgets);
    std::string tok;
    while (std::getline(ss, tok, ',')) b.push_back(std::stod(tok));
    cfg.budgets = Eigen::Map<Vector>(b.data(), static_cast<Index>(b.size()));
  }
  const std::vector<PoARecord> records = run_experiment(cfg);
  Report rep;
  int converged = 0;
  double worst = 0.0;
  bool proportional = true;
  for (const PoARecord& r : records) {
    rep.merge(r.instance_id, record_report(r));
    if (r.converged) {
      ++converged;
      worst = std::max(worst, r.ratio);
      proportional = proportional && r.proportional;
    }
  }
  rep.add("instances", static_cast<int>(records.size()))
      .add("converged", converged)
      .add("worst_ratio", worst)
      .add("all_proportional", proportional);
  emit(c, rep, poa_csv(records));
  return 0;
}

// Each reproduction returns 0; its report states what was observed.
int reproduce_example_3_1(const Common& c) {
  const Instance inst = gen_example_3_1();
  const SolverOptions so = solver_options(c);
  const GameOutcome truthful = fisher_outcome(inst, inst.valuations().matrix(), so);
  const double eps = c.eps > 0.0 ? c.eps : 1e-3;
  ReportProfile lie = inst.valuations().matrix();
  lie(1, 1) = eps;
  const GameOutcome misreport = fisher_outcome(inst, lie, so);
  Report rep;
  rep.add("truthful_utilities", truthful.true_utilities)
      .add("truthful_prices", truthful.equilibrium.prices)
      .add("misreport", Vector(lie.row(1).transpose()))
      .add("misreport_utilities", misreport.true_utilities)
      .add("misreport_prices", misreport.equilibrium.prices)
      .add("agent2_gain", misreport.true_utilities(1) - truthful.true_utilities(1))
      .add("perfect_competition", inst.perfect_competition());
  emit(c, rep, report_csv(rep));
  return 0;
}

int reproduce_theorem_3_3(const Common& c, Index n) {
  ExperimentConfig cfg;
  cfg.source = "identity";
  cfg.n = n;
  cfg.mechanism = "fisher";
  cfg.tol = c.tol;
  cfg.seed = c.seed;
  cfg.trials = 200;
  const std::vector<PoARecord> records = run_experiment(cfg);
  Report rep = record_report(records.front());
  rep.add("expected_ratio", static_cast<double>(n));
  emit(c, rep, poa_csv(records));
  return 0;
}

int reproduce_lb(const Common& c, Index n) {
  const LowerBoundConstruction lb = lb_construction(n);
  const LowerBoundValues cf = lb_closed_form(n);
  const SolverOptions so = solver_options(c);
  const GameOutcome outcome = fisher_outcome(lb.instance, lb.reports, so);
  const MarketEquilibrium opt = solve_eg(lb.instance, so);
  const double opt_nsw = nsw(opt.utilities, lb.instance.budgets());

  FalsifyOptions fo;
  fo.structured_only = true;
  fo.extra = lb_structured_deviations(lb);
  fo.solver = so;
  const FalsifyReport fisher_dev = fisher_ne_falsify(lb.instance, lb.reports, fo);
  const double fee = c.delta > 0.0 ? c.delta : lb.delta;
  const NEReport tp = verify_tp_ne(lb.instance, lb.bids, fee, 1e-3);

  Report rep;
  rep.add("n", static_cast<long long>(n))
      .add("k", static_cast<long long>(lb.k))
      .add("closed_form_u_first", cf.u_first)
      .add("closed_form_u_middle", cf.u_middle)
      .add("closed_form_ratio", cf.ratio)
      .add("nsw_opt", opt_nsw)
      .add("nsw_eq", outcome.nsw)
      .add("ratio", poa_ratio(opt_nsw, outcome.nsw))
      .add("limit", std::exp(1.0 / std::exp(1.0)))
      .add("fisher_structured_max_gain", fisher_dev.max_gain)
      .add("fisher_structured_trials", fisher_dev.trials)
      .add("tp_delta", fee)
      .add("tp_max_gain", tp.max_gain)
      .add("tp_unattained", tp.unattained);
  PoARecord rec;
  rec.instance_id = "lb-" + std::to_string(n);
  rec.mechanism = "fisher";
  rec.nsw_opt = opt_nsw;
  rec.nsw_eq = outcome.nsw;
  rec.ratio = poa_ratio(opt_nsw, outcome.nsw);
  rec.eps_br = fisher_dev.max_gain;
  rec.eps_market = verify_eps_market_eq(lb.instance, outcome.equilibrium.allocation,
                                        outcome.equilibrium.prices, 0.0, c.tol)
                       .eps_required;
  rec.proportional =
      proportionality_check(lb.instance, outcome.equilibrium.allocation, Vector::Zero(lb.instance.n())).all_pass;
  emit(c, rep, poa_csv({rec}));
  return 0;
}

int reproduce_tp_nonexistence(const Common& c) {
  const Instance inst = gen_tp_nonexistence();
  DynamicsOptions zero;
  zero.max_rounds = c.max_iter > 0 ? c.max_iter : 100000;
  zero.stall_rounds = 0;
  const NEReport ne0 = br_dynamics(inst, 0.0, BidProfile(), zero);
  const double fee = c.delta > 0.0 ? c.delta : 1e-3;
  const NEReport ne1 = br_dynamics(inst, fee, BidProfile(), DynamicsOptions());
  Report rep;
  rep.add("zero_fee_status", ne0.status)
      .add("zero_fee_rounds", ne0.rounds)
      .add("zero_fee_b22", ne0.bids(1, 1))
      .add("zero_fee_bids", ne0.bids)
      .add("fee", fee)
      .add("fee_status", ne1.status)
      .add("fee_rounds", ne1.rounds)
      .add("fee_max_gain", ne1.max_gain)
      .add("fee_bids", ne1.bids);
  emit(c, rep, report_csv(rep));
  return 0;
}

int reproduce_tp_leontief_poa(const Common& c, Index n) {
  ExperimentConfig cfg;
  cfg.source = "identity";
  cfg.n = n;
  cfg.mechanism = "trading_post";
  cfg.delta = c.delta > 0.0 ? c.delta : 1e-4;
  cfg.tol = c.tol;
  if (c.max_iter > 0) cfg.max_rounds = c.max_iter;
  const std::vector<PoARecord> records = run_experiment(cfg);
  Report rep = record_report(records.front());
  const double m = static_cast<double>(n);
  rep.add("bound", 1.0 + m * m * cfg.delta);
  emit(c, rep, poa_csv(records));
  return 0;
}

int reproduce_example_lin(const Common& c) {
  const double eps = c.eps >= 0.0 ? c.eps : 0.3;
  const InstanceWithBids ex = gen_example_lin_family(eps);
  const NEReport ne = verify_tp_ne(ex.instance, ex.bids, c.delta);
  Report rep;
  rep.add("eps", eps).merge("tp", to_report(ne));
  const auto [p, x] = ne_to_market(ex.bids, c.delta);
  rep.add("market_eq_eps_required", verify_eps_market_eq(ex.instance, x, p, 0.0, c.tol).eps_required);
  emit(c, rep, report_csv(rep));
  return 0;
}

int reproduce_example_leo(const Common& c, double a) {
  const InstanceWithBids ex = gen_example_leo_family(a);
  const NEReport ne = verify_tp_ne(ex.instance, ex.bids, c.delta);
  Report rep;
  rep.add("a", a).merge("tp", to_report(ne));
  emit(c, rep, report_csv(rep));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fisher market and Trading Post equilibrium toolkit"};
  app.require_subcommand(1);

  Common common;
  std::string instance_path;
  std::string aux_path;
  int stall = 50;
  int trials = 0;
  std::string verify_kind;
  PoaArgs poa;
  std::string repro_id;
  Index repro_n = 5;
  double repro_a = 0.5;

  auto* solve = app.add_subcommand("solve-eg", "Market equilibrium of an instance");
  solve->add_option("instance", instance_path, "Instance file")->required()->check(CLI::ExistingFile);
  add_common(solve, common);

  auto* dyn = app.add_subcommand("tp-dynamics", "Best-response dynamics in the Trading Post");
  dyn->add_option("instance", instance_path, "Instance file")->required()->check(CLI::ExistingFile);
  dyn->add_option("--init", aux_path, "Initial bids file")->check(CLI::ExistingFile);
  dyn->add_option("--stall-rounds", stall, "Rounds without progress before giving up (0: never)")
      ->check(CLI::NonNegativeNumber);
  add_common(dyn, common);

  auto* fo = app.add_subcommand("fisher-outcome", "Fisher market outcome of reported valuations");
  fo->add_option("instance", instance_path, "Instance file")->required()->check(CLI::ExistingFile);
  fo->add_option("--reports", aux_path, "Reports file (default: truthful)")->check(CLI::ExistingFile);
  fo->add_option("--trials", trials, "Sampled deviations per agent (0: none)")->check(CLI::NonNegativeNumber);
  add_common(fo, common);

  auto* ver = app.add_subcommand("verify", "Check an equilibrium certificate");
  ver->add_option("--kind", verify_kind, "kkt, eps-market, tp-ne or fisher-ne")
      ->required()
      ->check(CLI::IsMember({"kkt", "eps-market", "tp-ne", "fisher-ne"}));
  ver->add_option("certificate", aux_path, "Bids, reports or allocation/prices file")
      ->required()
      ->check(CLI::ExistingFile);
  ver->add_option("instance", instance_path, "Instance file")->required()->check(CLI::ExistingFile);
  add_common(ver, common);

  auto* pa = app.add_subcommand("poa", "Price-of-anarchy experiment");
  pa->add_option("--source", poa.config.source, "identity, example-3.1, tp-nonexistence, lb, file or random")
      ->check(CLI::IsMember({"identity", "example-3.1", "tp-nonexistence", "lb", "file", "random"}));
  pa->add_option("--instance", poa.config.path, "Instance file for --source file");
  pa->add_option("--n", poa.config.n, "Agents (or construction size)")->check(CLI::PositiveNumber);
  pa->add_option("--m", poa.config.m, "Goods")->check(CLI::PositiveNumber);
  pa->add_option("--kind", poa.kind, "linear, leontief or ces");
  pa->add_option("--rho", poa.config.rho, "CES exponent");
  pa->add_option("--count", poa.config.count, "Random instances")->check(CLI::PositiveNumber);
  pa->add_option("--sparsity", poa.config.sparsity, "Probability of a zero value");
  pa->add_option("--budgets", poa.budgets, "Comma-separated budgets");
  pa->add_option("--mechanism", poa.config.mechanism, "fisher or trading_post")
      ->check(CLI::IsMember({"fisher", "trading_post"}));
  pa->add_option("--max-rounds", poa.config.max_rounds, "Dynamics round limit")->check(CLI::PositiveNumber);
  pa->add_option("--trials", poa.config.trials, "Sampled deviations per agent")->check(CLI::NonNegativeNumber);
  pa->add_option("--threads", poa.config.threads, "Worker threads")->check(CLI::PositiveNumber);
  add_common(pa, common);

  auto* rep = app.add_subcommand("reproduce", "Rebuild a named construction and report on it");
  rep->add_option("id", repro_id, "Construction id")
      ->required()
      ->check(CLI::IsMember({"example-3.1", "theorem-3.3", "lb-construction", "tp-nonexistence",
                             "tp-leontief-poa", "example-lin", "example-leo"}));
  rep->add_option("--n", repro_n, "Size parameter")->check(CLI::PositiveNumber);
  rep->add_option("--a", repro_a, "Shared split for example-leo");
  add_common(rep, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return 0;
    std::cerr << app.help();
    return 2;
  }

  try {
    if (*solve) return cmd_solve_eg(common, instance_path);
    if (*dyn) return cmd_tp_dynamics(common, instance_path, aux_path, stall);
    if (*fo) return cmd_fisher_outcome(common, instance_path, aux_path, trials);
    if (*ver) return cmd_verify(common, verify_kind, aux_path, instance_path);
    if (*pa) {
      if (poa.config.source == "file" && poa.config.path.empty()) {
        throw CLI::ValidationError("--instance", "required with --source file");
      }
      return cmd_poa(common, poa);
    }
    if (repro_id == "example-3.1") return reproduce_example_3_1(common);
    if (repro_id == "theorem-3.3") return reproduce_theorem_3_3(common, repro_n);
    if (repro_id == "lb-construction") return reproduce_lb(common, rep->count("--n") ? repro_n : 14);
    if (repro_id == "tp-nonexistence") return reproduce_tp_nonexistence(common);
    if (repro_id == "tp-leontief-poa") return reproduce_tp_leontief_poa(common, repro_n);
    if (repro_id == "example-lin") return reproduce_example_lin(common);
    return reproduce_example_leo(common, repro_a);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

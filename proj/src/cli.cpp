#include "lodiag/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <ostream>

#include "lodiag/csv.hpp"
#include "lodiag/estimator.hpp"
#include "lodiag/portfolio.hpp"
#include "lodiag/simulation.hpp"

namespace lodiag::cli {

namespace {

struct EstimateOptions {
  std::string data_path;
  std::string cov_path;
  int n = 0;
  std::vector<int> ranks{1, 3, 5, 7, 9};
  double delta = 1.0;
  bool center = false;
  std::string out;
  FitConfig fit;
};

struct SimulateOptions {
  SimulationSpec spec;
  std::string out;
  std::string format = "csv";
  int k = 10;
};

struct BacktestOptions {
  std::string panel;
  BacktestConfig cfg;
  std::string estimator = "ld";
  std::string out;
};

void add_fit_options(CLI::App* sub, FitConfig& fit) {
  sub->add_option("--bcd-tol", fit.bcd_tol, "Relative objective change that stops coordinate descent")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--bcd-max-iter", fit.bcd_max_iter, "Coordinate descent iteration cap")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--newton-tol", fit.newton_tol, "Gradient tolerance of the diagonal Newton solve")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--newton-max-iter", fit.newton_max_iter, "Newton iteration cap")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

void add_simulation_options(CLI::App* sub, SimulateOptions& o) {
  auto& s = o.spec;
  sub->add_option("--example", s.example_id, "Covariance structure, 1 to 5")
      ->capture_default_str()
      ->check(CLI::Range(1, 5));
  sub->add_option("--p", s.p, "Dimension")->capture_default_str()->check(CLI::Range(2, 100000));
  sub->add_option("--n", s.n, "Training sample size")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--n-valid", s.n_valid, "Validation sample size")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--reps", s.reps, "Number of replications")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--seed", s.seed, "Master seed")->capture_default_str();
  sub->add_option("--deltas", s.delta_grid, "Penalty multipliers, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_option("--ranks", s.candidate_ranks, "Candidate ranks, ascending, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_option("--threads", s.threads, "Worker threads; output does not depend on it")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--out", o.out, "Output file (default: standard output)");
  sub->add_option("--format", o.format, "Output format")->capture_default_str()->check(CLI::IsMember({"csv", "table"}));
  add_fit_options(sub, s.fit);
}

// Writes to `path`, or to `fallback` when the path is empty.
template <typename F>
void emit(const std::string& path, std::ostream& fallback, F&& write) {
  if (path.empty()) {
    write(fallback);
    return;
  }
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write(os);
  if (!os) throw Error("failed writing '" + path + "'");
}

std::string join(const VectorXd& v) {
  std::string s;
  for (Index i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += format_double(v[i]);
  }
  return s;
}

void run_estimate(const EstimateOptions& o, std::ostream& out) {
  SymMatrix s(1);
  int n = o.n;
  if (!o.data_path.empty()) {
    MatrixXd x = read_numeric_csv_file(o.data_path).values;
    if (o.center) x = center_columns(x);
    s = sample_covariance(x);
    if (n == 0) n = static_cast<int>(x.rows());
  } else {
    const MatrixXd c = read_numeric_csv_file(o.cov_path).values;
    if (c.rows() != c.cols()) throw InvalidInput("covariance file is not square");
    if (n == 0) throw InvalidInput("--n is required with --cov");
    s = SymMatrix(c);
  }

  const FitResult fit = fit_rank_penalized(s, o.ranks, n, o.delta, o.fit);
  const auto& dec = fit.decomposition;
  VectorXd l_eig = sym_eigenvalues(dec.L);
  l_eig.conservativeResize(std::max(dec.rank, 0));

  out << "selected_rank: " << dec.rank << '\n'
      << "candidate_rank: " << fit.candidate_rank << '\n'
      << "objective: " << format_double(fit.objective) << '\n'
      << "penalty: " << format_double(fit.penalty) << '\n'
      << "penalized_objective: " << format_double(fit.penalized_objective()) << '\n'
      << "converged: " << (fit.converged ? "true" : "false") << '\n'
      << "l_eigenvalues: " << join(l_eig) << '\n'
      << "d_diagonal: " << join(dec.D.values()) << '\n';
  if (o.out.empty()) {
    out << "theta:\n";
    write_matrix_csv(out, dec.theta.matrix());
  } else {
    emit(o.out, out, [&](std::ostream& os) { write_matrix_csv(os, dec.theta.matrix()); });
  }
}

void run_simulate(const SimulateOptions& o, std::ostream& out) {
  const LossTable table = run_simulation(o.spec);
  emit(o.out, out, [&](std::ostream& os) {
    if (o.format == "table")
      write_loss_table_text(os, table);
    else
      write_loss_table_csv(os, table);
  });
}

void run_rank_recovery(const SimulateOptions& o, std::ostream& out) {
  const RankRecovery rr = rank_recovery(o.spec, o.k);
  emit(o.out, out, [&](std::ostream& os) {
    if (o.format == "table")
      write_rank_recovery_text(os, rr);
    else
      write_rank_recovery_csv(os, rr);
  });
}

void run_backtest(BacktestOptions o, std::ostream& out) {
  const ReturnsPanel panel = read_returns_panel_file(o.panel);
  o.cfg.estimator = parse_estimator_kind(o.estimator);
  const PortfolioResult result = rolling_backtest(panel, o.cfg);
  if (o.out.empty()) {
    write_portfolio_csv(out, result, panel.assets);
    out << '\n';
  } else {
    emit(o.out, out, [&](std::ostream& os) { write_portfolio_csv(os, result, panel.assets); });
  }
  write_portfolio_summary(out, result);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Low-rank plus diagonal precision matrix estimation", "lodiag"};
  app.require_subcommand(1);

  EstimateOptions est;
  auto* estimate = app.add_subcommand("estimate", "Fit the rank-penalized estimator to data or a covariance");
  auto* data_opt = estimate->add_option("--data", est.data_path, "Data CSV, rows are observations")
                       ->check(CLI::ExistingFile);
  auto* cov_opt = estimate->add_option("--cov", est.cov_path, "Covariance CSV")->check(CLI::ExistingFile);
  data_opt->excludes(cov_opt);
  estimate->add_option("--n", est.n, "Sample size in the penalty (default: rows of --data)")
      ->check(CLI::PositiveNumber);
  estimate->add_option("--ranks", est.ranks, "Candidate ranks, ascending, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  estimate->add_option("--delta", est.delta, "Penalty multiplier")->capture_default_str()->check(CLI::PositiveNumber);
  estimate->add_flag("--center", est.center, "Subtract column means before forming the covariance");
  estimate->add_option("--out", est.out, "Write the precision estimate here (default: standard output)");
  add_fit_options(estimate, est.fit);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Mean KL loss of S, diagonal and LD estimators");
  add_simulation_options(simulate, sim);

  SimulateOptions rec;
  rec.spec.example_id = 2;
  auto* recovery = app.add_subcommand("rank-recovery", "Leading eigenvalues of the fitted low-rank part");
  add_simulation_options(recovery, rec);
  recovery->add_option("--k", rec.k, "Number of eigenvalues reported")->capture_default_str()->check(CLI::PositiveNumber);

  BacktestOptions bt;
  auto* backtest = app.add_subcommand("backtest", "Rolling-window Markowitz backtest on a returns panel");
  backtest->add_option("--panel", bt.panel, "Returns CSV with header date,<assets>")
      ->required()
      ->check(CLI::ExistingFile);
  backtest->add_option("--window", bt.cfg.window, "Training window in periods")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  backtest->add_option("--mu0", bt.cfg.mu0, "Target return per period")->capture_default_str();
  backtest->add_option("--estimator", bt.estimator, "Precision estimator")
      ->capture_default_str()
      ->check(CLI::IsMember({"sample", "diagonal", "ld"}));
  backtest->add_option("--ranks", bt.cfg.candidate_ranks, "Candidate ranks, ascending, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  backtest->add_option("--deltas", bt.cfg.delta_grid, "Cross-validated penalty grid, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  backtest->add_option("--out", bt.out, "Per-period CSV (default: standard output, before the summary)");
  add_fit_options(backtest, bt.cfg.fit);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (estimate->parsed() && est.data_path.empty() && est.cov_path.empty()) {
      throw CLI::RequiredError("--data or --cov");
    }
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* failed = &app;
    for (const CLI::App* sub : app.get_subcommands()) failed = sub;
    err << failed->help();
    return UsageError;
  }

  try {
    if (estimate->parsed()) {
      run_estimate(est, out);
    } else if (simulate->parsed()) {
      run_simulate(sim, out);
    } else if (recovery->parsed()) {
      run_rank_recovery(rec, out);
    } else if (backtest->parsed()) {
      run_backtest(bt, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return DataError;
  }
  return Success;
}

}  // namespace lodiag::cli

// Python module lodiag._core. Matrices cross the boundary as float64
// ndarrays; SymMatrix inputs are symmetrized on the way in.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lodiag/csv.hpp"
#include "lodiag/estimator.hpp"
#include "lodiag/portfolio.hpp"
#include "lodiag/simulation.hpp"

namespace py = pybind11;
using namespace lodiag;

namespace {

SymMatrix sym(const MatrixXd& a) { return SymMatrix(a); }

FitConfig make_fit_config(double bcd_tol, int bcd_max_iter, double newton_tol, int newton_max_iter,
                          double rank_tol) {
  FitConfig cfg;
  cfg.bcd_tol = bcd_tol;
  cfg.bcd_max_iter = bcd_max_iter;
  cfg.newton_tol = newton_tol;
  cfg.newton_max_iter = newton_max_iter;
  cfg.rank_tol = rank_tol;
  cfg.validate();
  return cfg;
}

py::dict fit_to_dict(const FitResult& f) {
  py::dict d;
  d["theta"] = f.decomposition.theta.matrix();
  d["L"] = f.decomposition.L.matrix();
  d["D"] = f.decomposition.D.values();
  d["rank"] = f.decomposition.rank;
  d["objective"] = f.objective;
  d["objective_trace"] = f.objective_trace;
  d["candidate_rank"] = f.candidate_rank;
  d["penalty"] = f.penalty;
  d["converged"] = f.converged;
  d["iterations"] = f.iterations;
  return d;
}

py::object opt(const std::optional<double>& v) { return v ? py::object(py::float_(*v)) : py::none(); }

py::dict loss_to_dict(const MethodLoss& m) {
  py::dict d;
  d["mean_kl"] = opt(m.mean_kl);
  d["stderr"] = opt(m.stderr_kl);
  d["count"] = m.count;
  return d;
}

}  // namespace

#define FIT_ARGS                                                                                   \
  py::arg("bcd_tol") = 1e-7, py::arg("bcd_max_iter") = 500, py::arg("newton_tol") = 1e-8,          \
      py::arg("newton_max_iter") = 100, py::arg("rank_tol") = 1e-8

PYBIND11_MODULE(_core, m) {
  m.doc() = "Low-rank plus diagonal precision estimation";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
  py::register_exception<NotPositiveDefinite>(m, "NotPositiveDefinite", base.ptr());
  py::register_exception<InfeasibleConstraints>(m, "InfeasibleConstraints", base.ptr());
  py::register_exception<DegenerateReturns>(m, "DegenerateReturns", base.ptr());
  py::register_exception<SingularSampleCovariance>(m, "SingularSampleCovariance", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());

  // Linear algebra
  m.def(
      "sym_eig",
      [](const MatrixXd& a) {
        const EigenPairs e = sym_eig(sym(a));
        return py::make_tuple(e.values, e.vectors);
      },
      py::arg("a"), "Eigenvalues (non-increasing) and eigenvectors of a symmetric matrix.");
  m.def(
      "chol_pd", [](const MatrixXd& a) { return chol_pd(sym(a)).factor(); }, py::arg("a"),
      "Lower Cholesky factor; raises NotPositiveDefinite.");
  m.def("logdet_pd", [](const MatrixXd& a) { return logdet_pd(sym(a)); }, py::arg("a"));
  m.def("inv_pd", [](const MatrixXd& a) { return inv_pd(sym(a)).matrix(); }, py::arg("a"));
  m.def(
      "sample_covariance", [](const MatrixXd& x) { return sample_covariance(x).matrix(); }, py::arg("x"),
      "X^T X / n without centering.");
  m.def("center_columns", [](const MatrixXd& x) { return center_columns(x); }, py::arg("x"));

  // Estimator
  m.def(
      "objective", [](const MatrixXd& theta, const MatrixXd& s) { return objective(sym(theta), sym(s)); },
      py::arg("theta"), py::arg("s"));
  m.def(
      "update_L", [](const VectorXd& d, const MatrixXd& s, int r) { return update_L(DiagMatrix(d), sym(s), r).matrix(); },
      py::arg("d"), py::arg("s"), py::arg("r"));
  m.def(
      "fit_fixed_rank",
      [](const MatrixXd& s, int r, std::optional<VectorXd> d0, double bt, int bi, double nt, int ni, double rt) {
        const SymMatrix ss = sym(s);
        const DiagMatrix start = d0 ? DiagMatrix(*d0) : diagonal_start(ss);
        return fit_to_dict(fit_fixed_rank(ss, r, start, make_fit_config(bt, bi, nt, ni, rt)));
      },
      py::arg("s"), py::arg("r"), py::arg("d0") = py::none(), FIT_ARGS,
      "Minimize trace(theta S) - log|theta| over theta = D - L with rank(L) <= r.");
  m.def(
      "fit_rank_penalized",
      [](const MatrixXd& s, const std::vector<int>& ranks, int n, double delta, double bt, int bi, double nt, int ni,
         double rt) {
        return fit_to_dict(fit_rank_penalized(sym(s), ranks, n, delta, make_fit_config(bt, bi, nt, ni, rt)));
      },
      py::arg("s"), py::arg("ranks"), py::arg("n"), py::arg("delta") = 1.0, FIT_ARGS);
  m.def("rank_penalty", &rank_penalty, py::arg("r"), py::arg("p"), py::arg("n"), py::arg("delta"));
  m.def(
      "precision_parts",
      [](const MatrixXd& l_sigma, const VectorXd& d_sigma) {
        const PrecisionParts parts = precision_parts_from_covariance(sym(l_sigma), DiagMatrix(d_sigma));
        return py::make_tuple(parts.L0.matrix(), parts.D0.values());
      },
      py::arg("l_sigma"), py::arg("d_sigma"), "(L0, diag of D0) with (L_sigma + D_sigma)^{-1} = D0 - L0.");

  // Simulation
  m.def(
      "make_sigma", [](int example, int p, std::uint64_t seed) { return make_sigma(example, p, seed).sigma.matrix(); },
      py::arg("example"), py::arg("p"), py::arg("seed") = 1);
  m.def(
      "sample_mvn", [](const MatrixXd& sigma, int n, std::uint64_t seed) { return sample_mvn(sym(sigma), n, seed); },
      py::arg("sigma"), py::arg("n"), py::arg("seed"));
  m.def(
      "kl_loss", [](const MatrixXd& theta_hat, const MatrixXd& theta0) { return kl_loss(sym(theta_hat), sym(theta0)); },
      py::arg("theta_hat"), py::arg("theta0"));
  m.def(
      "run_simulation",
      [](int example, int p, int n, int n_valid, int reps, std::uint64_t seed, std::vector<double> deltas,
         std::vector<int> ranks, int threads) {
        SimulationSpec spec;
        spec.example_id = example;
        spec.p = p;
        spec.n = n;
        spec.n_valid = n_valid;
        spec.reps = reps;
        spec.seed = seed;
        spec.delta_grid = std::move(deltas);
        spec.candidate_ranks = std::move(ranks);
        spec.threads = threads;
        const LossTable t = run_simulation(spec);
        py::dict d;
        d["S"] = loss_to_dict(t.sample);
        d["D_S"] = loss_to_dict(t.diagonal);
        d["LD"] = loss_to_dict(t.ld);
        return d;
      },
      py::arg("example") = 1, py::arg("p") = 50, py::arg("n") = 100, py::arg("n_valid") = 100, py::arg("reps") = 100,
      py::arg("seed") = 1, py::arg("deltas") = std::vector<double>{0.6, 0.8, 1.0, 1.2, 1.4},
      py::arg("ranks") = std::vector<int>{1, 3, 5, 7, 9}, py::arg("threads") = 1,
      "Mean KL loss and standard error per method: S, D_S, LD.");

  // Portfolio
  m.def(
      "markowitz_weights",
      [](const MatrixXd& theta, const VectorXd& mu, double mu0) { return markowitz_weights(sym(theta), mu, mu0); },
      py::arg("theta"), py::arg("mu"), py::arg("mu0"), "Minimum-variance weights with w.mu = mu0 and w.1 = 1.");
  m.def(
      "sharpe_ratio", [](const std::vector<double>& r, double xb) { return sharpe_ratio(r, xb); }, py::arg("returns"),
      py::arg("xb") = 0.0);
  m.def(
      "rolling_backtest",
      [](const MatrixXd& returns, std::vector<std::string> dates, std::vector<std::string> assets,
         const std::string& estimator, int window, double mu0, std::optional<std::vector<int>> ranks,
         std::optional<std::vector<double>> deltas) {
        ReturnsPanel panel;
        panel.returns = returns;
        panel.dates = std::move(dates);
        panel.assets = std::move(assets);
        if (panel.dates.empty())
          for (Index t = 0; t < returns.rows(); ++t) panel.dates.push_back(std::to_string(t + 1));
        if (panel.assets.empty())
          for (Index j = 0; j < returns.cols(); ++j) panel.assets.push_back("A" + std::to_string(j + 1));
        BacktestConfig cfg;
        cfg.estimator = parse_estimator_kind(estimator);
        cfg.window = window;
        cfg.mu0 = mu0;
        if (ranks) cfg.candidate_ranks = *ranks;
        if (deltas) cfg.delta_grid = *deltas;
        const PortfolioResult r = rolling_backtest(panel, cfg);
        py::dict d;
        d["dates"] = r.dates;
        d["weights"] = r.weights;
        d["returns"] = r.realized_returns;
        d["selected_deltas"] = r.selected_deltas;
        d["mean"] = r.mean_return;
        d["std_error"] = r.std_error;
        d["stdev"] = r.stdev;
        d["sharpe"] = r.sharpe;
        return d;
      },
      py::arg("returns"), py::arg("dates") = std::vector<std::string>{}, py::arg("assets") = std::vector<std::string>{},
      py::arg("estimator") = "ld", py::arg("window") = 72, py::arg("mu0") = 0.013, py::arg("ranks") = py::none(),
      py::arg("deltas") = py::none(), "Rolling Markowitz backtest; estimator is one of sample, diagonal, ld.");
  m.def(
      "read_returns_panel",
      [](const std::string& path) {
        const ReturnsPanel p = read_returns_panel_file(path);
        return py::make_tuple(p.returns, p.dates, p.assets);
      },
      py::arg("path"), "(returns, dates, assets) from a CSV with a leading date column.");
}

#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/LU>

#include "lodiag/portfolio.hpp"
#include "support/checks.hpp"

using namespace lodiag;
using lodiag::testing::factor_panel;

namespace {

VectorXd vec(std::initializer_list<double> xs) {
  VectorXd v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

BacktestConfig quick_config(EstimatorKind kind, int window) {
  BacktestConfig cfg;
  cfg.estimator = kind;
  cfg.window = window;
  cfg.candidate_ranks = {1, 2, 3};
  cfg.delta_grid = {0.5, 1.0, 2.0};
  return cfg;
}

void check_constraints(const ReturnsPanel& panel, const BacktestConfig& cfg, const PortfolioResult& res) {
  for (std::size_t k = 0; k < res.weights.size(); ++k) {
    const Index t = cfg.window + static_cast<Index>(k);
    const VectorXd mu = panel.returns.middleRows(t - cfg.window, cfg.window).colwise().mean().transpose();
    CHECK(std::abs(res.weights[k].sum() - 1.0) <= 1e-10);
    CHECK(std::abs(res.weights[k].dot(mu) - cfg.mu0) <= 1e-8);
    CHECK(res.realized_returns[k] == doctest::Approx(res.weights[k].dot(panel.returns.row(t).transpose())));
  }
}

}  // namespace

TEST_SUITE("portfolio") {

TEST_CASE("markowitz_weights on hand-checked inputs") {
  const SymMatrix id = SymMatrix::identity(2);
  VectorXd w = markowitz_weights(id, vec({1, 2}), 1.5);
  CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(0.5).epsilon(1e-14));

  w = markowitz_weights(id, vec({1, 1}), 1.0);
  CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(0.5).epsilon(1e-14));

  CHECK_THROWS_AS(markowitz_weights(id, vec({1, 1}), 2.0), InfeasibleConstraints);
  CHECK_THROWS_AS(markowitz_weights(SymMatrix(2), vec({1, 2}), 1.5), NotPositiveDefinite);
  CHECK_THROWS_AS(markowitz_weights(id, vec({1, 2, 3}), 1.5), InvalidInput);
}

TEST_CASE("markowitz_weights with three assets matches the Lagrange system") {
  MatrixXd s(3, 3);
  s << 0.04, 0.01, 0.0, 0.01, 0.09, 0.02, 0.0, 0.02, 0.16;
  const SymMatrix sigma(s);
  const VectorXd mu = vec({0.01, 0.02, 0.03});
  const VectorXd w = markowitz_weights(inv_pd(sigma), mu, 0.025);
  // Solve [2 Sigma, A; A^T, 0] [w; lambda] = [0; b] directly.
  MatrixXd kkt = MatrixXd::Zero(5, 5);
  kkt.topLeftCorner(3, 3) = 2.0 * s;
  kkt.block(0, 3, 3, 1) = mu;
  kkt.block(0, 4, 3, 1) = VectorXd::Ones(3);
  kkt.block(3, 0, 1, 3) = mu.transpose();
  kkt.block(4, 0, 1, 3) = VectorXd::Ones(3).transpose();
  VectorXd rhs = VectorXd::Zero(5);
  rhs[3] = 0.025;
  rhs[4] = 1.0;
  const VectorXd sol = kkt.fullPivLu().solve(rhs);
  CHECK((w - sol.head(3)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("markowitz constraints, KKT and perturbation optimality") {
  const auto res = lodiag::testing::check_markowitz(40, 83);
  INFO(res.detail);
  CHECK(res.ok);
}

TEST_CASE("sharpe_ratio") {
  const std::vector<double> zero_mean{1.0, -1.0};
  CHECK(sharpe_ratio(zero_mean) == 0.0);
  const std::vector<double> unit{2.0, 0.0, 1.0};
  CHECK(sharpe_ratio(unit) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(sharpe_ratio(unit, 1.0) == 0.0);
  const std::vector<double> flat{1.0, 1.0, 1.0};
  CHECK_THROWS_AS(sharpe_ratio(flat), DegenerateReturns);
  const std::vector<double> single{1.0};
  CHECK_THROWS_AS(sharpe_ratio(single), InvalidInput);
}

TEST_CASE("estimator names") {
  CHECK(parse_estimator_kind("sample") == EstimatorKind::Sample);
  CHECK(parse_estimator_kind("diagonal") == EstimatorKind::Diagonal);
  CHECK(parse_estimator_kind("ld") == EstimatorKind::LowRankDiagonal);
  CHECK(to_string(EstimatorKind::LowRankDiagonal) == "ld");
  CHECK_THROWS_AS(parse_estimator_kind("glasso"), InvalidInput);
}

TEST_CASE("default backtest grids") {
  const auto ranks = default_backtest_ranks();
  REQUIRE(ranks.size() == 14);
  CHECK(ranks.front() == 2);
  CHECK(ranks.back() == 28);
  const auto deltas = default_backtest_deltas();
  REQUIRE(deltas.size() == 15);
  CHECK(deltas.front() == doctest::Approx(0.2));
  CHECK(deltas.back() == doctest::Approx(3.0));
}

TEST_CASE("ReturnsPanel validation") {
  ReturnsPanel panel = factor_panel(10, 3, 1);
  CHECK_NOTHROW(panel.validate());
  ReturnsPanel bad = panel;
  std::swap(bad.dates[3], bad.dates[4]);
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  bad = panel;
  bad.assets.pop_back();
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  bad = panel;
  bad.returns(2, 1) = NAN;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

TEST_CASE("estimate_precision arms") {
  const ReturnsPanel panel = factor_panel(40, 5, 2);
  const std::vector<int> ranks{1, 2};
  const SymMatrix diag = estimate_precision(panel.returns, EstimatorKind::Diagonal, 1.0, ranks, FitConfig{});
  const MatrixXd centred = panel.returns.rowwise() - panel.returns.colwise().mean();
  for (Index j = 0; j < 5; ++j)
    CHECK(diag(j, j) == doctest::Approx(40.0 / centred.col(j).squaredNorm()).epsilon(1e-12));

  const SymMatrix sample = estimate_precision(panel.returns, EstimatorKind::Sample, 1.0, ranks, FitConfig{});
  const MatrixXd cov = centred.transpose() * centred / 40.0;
  CHECK((sample.matrix() * cov - MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-8);

  const ReturnsPanel wide = factor_panel(8, 10, 3);
  CHECK_THROWS_AS(estimate_precision(wide.returns, EstimatorKind::Sample, 1.0, ranks, FitConfig{}),
                  SingularSampleCovariance);
  CHECK_NOTHROW(estimate_precision(wide.returns, EstimatorKind::LowRankDiagonal, 1.0, ranks, FitConfig{}));
}

TEST_CASE("cv_select") {
  const ReturnsPanel panel = factor_panel(30, 5, 4);
  const std::vector<int> ranks{1, 2};
  const std::vector<double> single{1.0};
  CHECK(cv_select(panel.returns, single, ranks, 0.013, FitConfig{}) == 1.0);
  const std::vector<double> dup{0.5, 0.5};
  CHECK(cv_select(panel.returns, dup, ranks, 0.013, FitConfig{}) == 0.5);
  const std::vector<double> grid{0.2, 1.0, 3.0};
  const double chosen = cv_select(panel.returns, grid, ranks, 0.013, FitConfig{});
  CHECK((chosen == 0.2 || chosen == 1.0 || chosen == 3.0));

  CHECK_THROWS_AS(cv_select(panel.returns.topRows(29), grid, ranks, 0.013, FitConfig{}), InvalidInput);
  const std::vector<double> empty;
  CHECK_THROWS_AS(cv_select(panel.returns, empty, ranks, 0.013, FitConfig{}), InvalidInput);
  const std::vector<double> negative{1.0, -1.0};
  CHECK_THROWS_AS(cv_select(panel.returns, negative, ranks, 0.013, FitConfig{}), InvalidInput);
}

TEST_CASE("rolling backtest period counts and constraints") {
  const ReturnsPanel panel = factor_panel(100, 6, 5);
  for (auto kind : {EstimatorKind::Sample, EstimatorKind::Diagonal}) {
    const BacktestConfig cfg = quick_config(kind, 72);
    const PortfolioResult res = rolling_backtest(panel, cfg);
    CHECK(res.realized_returns.size() == 28);
    CHECK(res.dates.front() == panel.dates[72]);
    CHECK(res.selected_deltas.empty());
    check_constraints(panel, cfg, res);
  }

  const ReturnsPanel long_panel = factor_panel(216, 6, 6);
  const PortfolioResult res = rolling_backtest(long_panel, quick_config(EstimatorKind::Diagonal, 72));
  CHECK(res.realized_returns.size() == 144);
  CHECK(res.dates.front() == "1996-01");
  CHECK(res.dates.back() == "2007-12");
}

TEST_CASE("LD backtest") {
  const ReturnsPanel panel = factor_panel(45, 6, 7);
  const BacktestConfig cfg = quick_config(EstimatorKind::LowRankDiagonal, 36);
  const PortfolioResult res = rolling_backtest(panel, cfg);
  REQUIRE(res.realized_returns.size() == 9);
  CHECK(res.selected_deltas.size() == 9);
  check_constraints(panel, cfg, res);

  // Summary statistics from the realized returns.
  double mean = 0.0;
  for (double x : res.realized_returns) mean += x;
  mean /= 9.0;
  CHECK(res.mean_return == doctest::Approx(mean).epsilon(1e-14));
  CHECK(res.sharpe == doctest::Approx(sharpe_ratio(res.realized_returns)).epsilon(1e-12));
  CHECK(res.std_error == doctest::Approx(res.stdev / 3.0).epsilon(1e-14));

  const PortfolioResult again = rolling_backtest(panel, cfg);
  CHECK(again.realized_returns == res.realized_returns);
  CHECK(again.selected_deltas == res.selected_deltas);
  for (std::size_t k = 0; k < res.weights.size(); ++k) CHECK(again.weights[k] == res.weights[k]);
}

TEST_CASE("weights are invariant to a joint rescaling of returns and target") {
  const ReturnsPanel panel = factor_panel(60, 6, 8);
  for (auto kind : {EstimatorKind::Sample, EstimatorKind::Diagonal, EstimatorKind::LowRankDiagonal}) {
    const BacktestConfig cfg = quick_config(kind, 45);
    const PortfolioResult base = rolling_backtest(panel, cfg);
    for (double c : {2.0, 0.5}) {
      ReturnsPanel scaled = panel;
      scaled.returns *= c;
      BacktestConfig scfg = cfg;
      scfg.mu0 *= c;
      const PortfolioResult res = rolling_backtest(scaled, scfg);
      INFO("estimator " << to_string(kind) << ", c = " << c);
      REQUIRE(res.weights.size() == base.weights.size());
      double worst = 0.0;
      for (std::size_t k = 0; k < res.weights.size(); ++k)
        worst = std::max(worst, (res.weights[k] - base.weights[k]).cwiseAbs().maxCoeff());
      CHECK(worst <= 1e-8);
    }
  }
}

TEST_CASE("backtest configuration errors") {
  const ReturnsPanel panel = factor_panel(30, 4, 9);
  BacktestConfig cfg = quick_config(EstimatorKind::Diagonal, 30);
  CHECK_THROWS_AS(rolling_backtest(panel, cfg), InvalidInput);
  cfg.window = 12;
  cfg.mu0 = INFINITY;
  CHECK_THROWS_AS(rolling_backtest(panel, cfg), InvalidInput);

  const ReturnsPanel wide = factor_panel(30, 12, 10);
  CHECK_THROWS_AS(rolling_backtest(wide, quick_config(EstimatorKind::Sample, 9)), SingularSampleCovariance);
}

}  // TEST_SUITE

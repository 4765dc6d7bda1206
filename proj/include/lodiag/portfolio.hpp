#pragma once

// Minimum-variance Markowitz portfolios built from a plug-in precision
// matrix, with a rolling-window backtest and cross-validated tuning of the
// rank penalty. Short positions are allowed: the only constraints are the
// target return and full investment.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lodiag/estimator.hpp"
#include "lodiag/matrix.hpp"

namespace lodiag {

/// T x p panel of per-period fractional returns (0.013 = 1.3%).
struct ReturnsPanel {
  std::vector<std::string> dates;
  std::vector<std::string> assets;
  MatrixXd returns;

  Index periods() const { return returns.rows(); }
  Index num_assets() const { return returns.cols(); }

  /// Throws InvalidInput unless labels match the matrix shape, T >= 2,
  /// entries are finite and dates strictly increase.
  void validate() const;
};

enum class EstimatorKind { Sample, Diagonal, LowRankDiagonal };

EstimatorKind parse_estimator_kind(std::string_view name);
std::string_view to_string(EstimatorKind kind);

std::vector<int> default_backtest_ranks();      ///< 2, 4, ..., 28
std::vector<double> default_backtest_deltas();  ///< 0.2, 0.4, ..., 3.0

struct BacktestConfig {
  int window = 72;
  double mu0 = 0.013;
  std::vector<int> candidate_ranks = default_backtest_ranks();
  std::vector<double> delta_grid = default_backtest_deltas();
  EstimatorKind estimator = EstimatorKind::LowRankDiagonal;
  FitConfig fit{};
};

struct PortfolioResult {
  std::vector<std::string> dates;  ///< evaluation period labels
  std::vector<VectorXd> weights;
  std::vector<double> realized_returns;
  std::vector<double> selected_deltas;  ///< LD only; empty otherwise
  double mean_return = 0.0;
  double std_error = 0.0;  ///< stdev / sqrt(periods)
  double stdev = 0.0;      ///< sample standard deviation of the realized returns
  double sharpe = 0.0;     ///< mean / stdev with xb = 0
};

/// argmin w^T Sigma w s.t. w^T mu = mu0, w^T 1 = 1, in closed form
/// w = theta A (A^T theta A)^{-1} b with A = [mu, 1], b = (mu0, 1).
/// When mu is parallel to 1 the return constraint is either implied
/// (mu0 equal to the common mean) or infeasible (InfeasibleConstraints).
VectorXd markowitz_weights(const SymMatrix& theta, const VectorXd& mu, double mu0);

/// mean(x - xb) / stdev(x - xb), stdev with divisor (n - 1).
/// Throws DegenerateReturns for zero spread, InvalidInput for n < 2.
double sharpe_ratio(std::span<const double> returns, double xb = 0.0);

/// Sample mean and precision estimate of a window of returns (rows =
/// periods). The covariance is centred at the window mean with divisor n.
/// LowRankDiagonal fits the rank-penalized estimator with `delta`.
SymMatrix estimate_precision(const Eigen::Ref<const MatrixXd>& window, EstimatorKind kind, double delta,
                             std::span<const int> candidate_ranks, const FitConfig& fit);

/// Three-fold contiguous cross-validation over the training window. For
/// each delta, a portfolio built on two folds is evaluated on every month
/// of the held-out fold; the delta with the highest average held-out
/// return wins, ties going to the earliest grid entry.
double cv_select(const Eigen::Ref<const MatrixXd>& window, std::span<const double> delta_grid,
                 std::span<const int> candidate_ranks, double mu0, const FitConfig& fit);

/// For every period t after the first `window` rows: estimate mu and the
/// precision from the preceding window, build the portfolio, record its
/// return in period t.
PortfolioResult rolling_backtest(const ReturnsPanel& panel, const BacktestConfig& cfg);

}  // namespace lodiag

#include "lodiag/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lodiag {

namespace {

// Ranks usable at dimension p; larger candidates are dropped.
std::vector<int> usable_ranks(std::span<const int> ranks, Index p) {
  std::vector<int> out;
  for (const int r : ranks)
    if (r >= 0 && r <= p) out.push_back(r);
  if (out.empty()) throw InvalidInput("no candidate rank fits the panel dimension");
  return out;
}

SymMatrix window_covariance(const Eigen::Ref<const MatrixXd>& window) {
  return sample_covariance(center_columns(window));
}

struct RankPath {
  VectorXd mu;
  std::vector<FitResult> path;
  int n = 0;
};

RankPath fit_window_path(const Eigen::Ref<const MatrixXd>& window, std::span<const int> ranks,
                         const FitConfig& fit) {
  RankPath out;
  out.mu = window.colwise().mean().transpose();
  out.n = static_cast<int>(window.rows());
  const std::vector<int> usable = usable_ranks(ranks, window.cols());
  out.path = fit_rank_path(window_covariance(window), usable, fit);
  return out;
}

MatrixXd drop_rows(const Eigen::Ref<const MatrixXd>& m, Index begin, Index end) {
  MatrixXd out(m.rows() - (end - begin), m.cols());
  out.topRows(begin) = m.topRows(begin);
  out.bottomRows(m.rows() - end) = m.bottomRows(m.rows() - end);
  return out;
}

}  // namespace

void ReturnsPanel::validate() const {
  if (returns.rows() < 2) throw InvalidInput("ReturnsPanel: need at least 2 periods");
  if (returns.cols() < 1) throw InvalidInput("ReturnsPanel: need at least 1 asset");
  if (static_cast<Index>(dates.size()) != returns.rows())
    throw InvalidInput("ReturnsPanel: date labels do not match the number of periods");
  if (static_cast<Index>(assets.size()) != returns.cols())
    throw InvalidInput("ReturnsPanel: asset labels do not match the number of assets");
  if (!returns.allFinite()) throw InvalidInput("ReturnsPanel: non-finite returns");
  for (std::size_t t = 1; t < dates.size(); ++t)
    if (!(dates[t - 1] < dates[t]))
      throw InvalidInput("ReturnsPanel: dates must be strictly increasing (at '" + dates[t] + "')");
}

EstimatorKind parse_estimator_kind(std::string_view name) {
  if (name == "sample") return EstimatorKind::Sample;
  if (name == "diagonal") return EstimatorKind::Diagonal;
  if (name == "ld") return EstimatorKind::LowRankDiagonal;
  throw InvalidInput("unknown estimator '" + std::string(name) + "' (expected sample, diagonal or ld)");
}

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Sample: return "sample";
    case EstimatorKind::Diagonal: return "diagonal";
    case EstimatorKind::LowRankDiagonal: return "ld";
  }
  return "?";
}

std::vector<int> default_backtest_ranks() {
  std::vector<int> out;
  for (int r = 2; r <= 28; r += 2) out.push_back(r);
  return out;
}

std::vector<double> default_backtest_deltas() {
  std::vector<double> out;
  for (int k = 1; k <= 15; ++k) out.push_back(k / 5.0);
  return out;
}

VectorXd markowitz_weights(const SymMatrix& theta, const VectorXd& mu, double mu0) {
  const Index p = theta.dim();
  if (mu.size() != p) throw InvalidInput("markowitz_weights: mu dimension mismatch");
  if (!mu.allFinite() || !std::isfinite(mu0)) throw InvalidInput("markowitz_weights: non-finite input");
  chol_pd(theta);

  const VectorXd ones = VectorXd::Ones(p);
  const VectorXd theta_mu = theta.matrix() * mu;
  const VectorXd theta_one = theta.matrix() * ones;
  const double a = mu.dot(theta_mu);
  const double b = mu.dot(theta_one);
  const double c = ones.dot(theta_one);
  const double det = a * c - b * b;

  if (det > 1e-12 * a * c) {
    // w = theta A M^{-1} (mu0, 1)^T with M = A^T theta A = [[a, b], [b, c]].
    const double coef_mu = (c * mu0 - b) / det;
    const double coef_one = (a - b * mu0) / det;
    return coef_mu * theta_mu + coef_one * theta_one;
  }

  // mu is parallel to 1: only the budget constraint is active.
  VectorXd w = theta_one / c;
  const double scale = std::max({std::abs(mu0), mu.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min()});
  if (std::abs(w.dot(mu) - mu0) > 1e-10 * scale) {
    throw InfeasibleConstraints("markowitz_weights: mu is parallel to 1 and cannot reach mu0");
  }
  return w;
}

double sharpe_ratio(std::span<const double> returns, double xb) {
  if (returns.size() < 2) throw InvalidInput("sharpe_ratio: need at least 2 returns");
  const double n = static_cast<double>(returns.size());
  double mean = 0.0;
  double scale = 0.0;
  for (const double x : returns) {
    mean += x - xb;
    scale = std::max(scale, std::abs(x - xb));
  }
  mean /= n;
  double ss = 0.0;
  for (const double x : returns) ss += (x - xb - mean) * (x - xb - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 1e-14 * scale)) throw DegenerateReturns("sharpe_ratio: returns have zero standard deviation");
  return mean / sd;
}

SymMatrix estimate_precision(const Eigen::Ref<const MatrixXd>& window, EstimatorKind kind, double delta,
                             std::span<const int> candidate_ranks, const FitConfig& fit) {
  const Index n = window.rows();
  const Index p = window.cols();
  if (n < 2) throw InvalidInput("estimate_precision: need at least 2 periods");
  switch (kind) {
    case EstimatorKind::Sample: {
      if (n - 1 < p) {
        throw SingularSampleCovariance("sample covariance of " + std::to_string(n) + " periods and " +
                                       std::to_string(p) + " assets is singular");
      }
      auto chol = try_chol_pd(window_covariance(window));
      if (!chol) throw SingularSampleCovariance("sample covariance is numerically singular");
      return chol->inverse();
    }
    case EstimatorKind::Diagonal:
      return diagonal_start(window_covariance(window)).to_dense();
    case EstimatorKind::LowRankDiagonal: {
      const RankPath rp = fit_window_path(window, candidate_ranks, fit);
      return select_penalized(rp.path, rp.n, delta).decomposition.theta;
    }
  }
  throw InvalidInput("estimate_precision: unknown estimator");
}

double cv_select(const Eigen::Ref<const MatrixXd>& window, std::span<const double> delta_grid,
                 std::span<const int> candidate_ranks, double mu0, const FitConfig& fit) {
  if (delta_grid.empty()) throw InvalidInput("cv_select: empty delta grid");
  for (const double d : delta_grid)
    if (!(d > 0.0)) throw InvalidInput("cv_select: deltas must be positive");
  const Index n = window.rows();
  if (n < 6 || n % 3 != 0) {
    throw InvalidInput("cv_select: window of " + std::to_string(n) +
                       " periods does not split into three equal folds");
  }
  if (delta_grid.size() == 1) return delta_grid[0];

  const Index fold = n / 3;
  std::vector<double> total(delta_grid.size(), 0.0);
  for (Index k = 0; k < 3; ++k) {
    const auto held_out = window.middleRows(k * fold, fold);
    const RankPath rp = fit_window_path(drop_rows(window, k * fold, (k + 1) * fold), candidate_ranks, fit);
    for (std::size_t j = 0; j < delta_grid.size(); ++j) {
      const FitResult sel = select_penalized(rp.path, rp.n, delta_grid[j]);
      const VectorXd w = markowitz_weights(sel.decomposition.theta, rp.mu, mu0);
      total[j] += (held_out * w).sum();
    }
  }
  // First maximum wins, so ties go to the earliest grid entry.
  std::size_t best = 0;
  for (std::size_t j = 1; j < total.size(); ++j)
    if (total[j] > total[best]) best = j;
  return delta_grid[best];
}

PortfolioResult rolling_backtest(const ReturnsPanel& panel, const BacktestConfig& cfg) {
  panel.validate();
  cfg.fit.validate();
  const Index t_total = panel.periods();
  if (cfg.window < 2 || cfg.window >= t_total) {
    throw InvalidInput("rolling_backtest: window must be in [2, T) with T = " + std::to_string(t_total));
  }
  if (!std::isfinite(cfg.mu0)) throw InvalidInput("rolling_backtest: mu0 must be finite");
  const bool ld = cfg.estimator == EstimatorKind::LowRankDiagonal;

  PortfolioResult out;
  for (Index t = cfg.window; t < t_total; ++t) {
    const auto window = panel.returns.middleRows(t - cfg.window, cfg.window);
    const VectorXd mu = window.colwise().mean().transpose();
    SymMatrix theta;
    if (ld) {
      const double delta = cv_select(window, cfg.delta_grid, cfg.candidate_ranks, cfg.mu0, cfg.fit);
      out.selected_deltas.push_back(delta);
      theta = estimate_precision(window, cfg.estimator, delta, cfg.candidate_ranks, cfg.fit);
    } else {
      theta = estimate_precision(window, cfg.estimator, 1.0, cfg.candidate_ranks, cfg.fit);
    }
    VectorXd w = markowitz_weights(theta, mu, cfg.mu0);
    out.realized_returns.push_back(w.dot(panel.returns.row(t).transpose()));
    out.weights.push_back(std::move(w));
    out.dates.push_back(panel.dates[static_cast<std::size_t>(t)]);
  }

  const auto& r = out.realized_returns;
  const double n = static_cast<double>(r.size());
  double mean = 0.0;
  for (const double x : r) mean += x;
  out.mean_return = mean / n;
  if (r.size() >= 2) {
    double ss = 0.0;
    for (const double x : r) ss += (x - out.mean_return) * (x - out.mean_return);
    out.stdev = std::sqrt(ss / (n - 1.0));
    out.std_error = out.stdev / std::sqrt(n);
    out.sharpe = out.stdev > 0.0 ? out.mean_return / out.stdev : std::numeric_limits<double>::quiet_NaN();
  } else {
    out.sharpe = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace lodiag

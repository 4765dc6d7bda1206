#include "lodiag/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace lodiag {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 60;

void require_square_pair(const SymMatrix& a, const SymMatrix& b, const char* who) {
  if (a.dim() != b.dim()) {
    throw InvalidInput(std::string(who) + ": dimension mismatch (" + std::to_string(a.dim()) +
                       " vs " + std::to_string(b.dim()) + ")");
  }
}

void require_rank(int r, Index p, const char* who) {
  if (r < 0 || r > p) {
    throw InvalidInput(std::string(who) + ": rank " + std::to_string(r) + " outside [0, " +
                       std::to_string(p) + "]");
  }
}

void require_positive_variances(const SymMatrix& s, const char* who) {
  if (!s.all_finite()) throw InvalidInput(std::string(who) + ": non-finite entries in S");
  for (Index j = 0; j < s.dim(); ++j) {
    if (!(s(j, j) > 0.0)) {
      throw InvalidInput(std::string(who) + ": S(" + std::to_string(j) + "," + std::to_string(j) +
                         ") <= 0 (zero-variance coordinate)");
    }
  }
}

// g(d) = sum_j d_j S_jj - log|diag(d) - L| given a factorization of diag(d) - L.
double diag_objective(const VectorXd& d, const VectorXd& s_diag, const Cholesky& chol) {
  return d.dot(s_diag) - chol.logdet();
}

}  // namespace

void FitConfig::validate() const {
  if (!(bcd_tol > 0.0) || !(newton_tol > 0.0) || !(rank_tol > 0.0)) {
    throw InvalidInput("FitConfig: tolerances must be > 0");
  }
  if (bcd_max_iter < 1 || newton_max_iter < 1) {
    throw InvalidInput("FitConfig: iteration caps must be >= 1");
  }
}

double objective(const SymMatrix& theta, const SymMatrix& s) {
  require_square_pair(theta, s, "objective");
  const Cholesky chol = chol_pd(theta);
  // trace(theta S) for symmetric arguments is the sum of the entrywise product.
  return theta.matrix().cwiseProduct(s.matrix()).sum() - chol.logdet();
}

SymMatrix update_L(const DiagMatrix& d, const SymMatrix& s, int r) {
  if (d.dim() != s.dim()) throw InvalidInput("update_L: dimension mismatch");
  if (!d.all_positive()) throw InvalidInput("update_L: D must have positive diagonal");
  const Index p = s.dim();
  require_rank(r, p, "update_L");
  if (r == 0) return SymMatrix(p);

  const VectorXd root = d.values().cwiseSqrt();
  const SymMatrix scaled(root.asDiagonal() * s.matrix() * root.asDiagonal());
  const EigenPairs eig = sym_eig(scaled);

  MatrixXd basis(p, r);
  VectorXd shrink(r);
  for (int k = 0; k < r; ++k) {
    basis.col(k) = root.asDiagonal() * eig.vectors.col(k);
    shrink[k] = 1.0 - 1.0 / std::max(eig.values[k], 1.0);
  }
  return SymMatrix(basis * shrink.asDiagonal() * basis.transpose());
}

DiagUpdate update_D(const SymMatrix& l, const SymMatrix& s, const DiagMatrix& d_init,
                    const FitConfig& cfg) {
  require_square_pair(l, s, "update_D");
  if (d_init.dim() != s.dim()) throw InvalidInput("update_D: dimension mismatch");
  cfg.validate();

  VectorXd d = d_init.values();
  auto chol = try_chol_pd(DiagMatrix(d) - l);
  if (!chol) throw InvalidInput("update_D: diag(d_init) - L is not positive definite");

  const VectorXd s_diag = s.diagonal();
  double f = diag_objective(d, s_diag, *chol);

  DiagUpdate out{DiagMatrix(d), false, 0, std::numeric_limits<double>::infinity()};
  for (int it = 0;; ++it) {
    const MatrixXd w = chol->inverse().matrix();
    const VectorXd grad = s_diag - w.diagonal();
    out.gradient_norm = grad.lpNorm<Eigen::Infinity>();
    out.iterations = it;
    if (out.gradient_norm <= cfg.newton_tol) {
      out.converged = true;
      break;
    }
    if (it == cfg.newton_max_iter) break;

    // Hessian of -log|diag(d) - L| in d is the Hadamard square of the inverse.
    const MatrixXd hess = w.cwiseAbs2();
    Eigen::LLT<MatrixXd> hess_llt(hess);
    VectorXd step = hess_llt.info() == Eigen::Success ? VectorXd(hess_llt.solve(-grad))
                                                      : VectorXd(-grad.cwiseQuotient(hess.diagonal()));
    double slope = grad.dot(step);
    if (!(slope < 0.0)) {
      step = -grad.cwiseQuotient(hess.diagonal());
      slope = grad.dot(step);
    }

    // Rounding slack so the last quadratic-convergence steps are not rejected
    // when the predicted decrease falls below machine precision.
    const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f));
    bool accepted = false;
    double t = 1.0;
    for (int h = 0; h < kMaxHalvings; ++h, t *= 0.5) {
      const VectorXd trial = d + t * step;
      auto trial_chol = try_chol_pd(DiagMatrix(trial) - l);
      if (!trial_chol) continue;
      const double f_trial = diag_objective(trial, s_diag, *trial_chol);
      if (f_trial <= f + kArmijo * t * slope + slack) {
        d = trial;
        f = f_trial;
        chol = std::move(trial_chol);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  out.D = DiagMatrix(d);
  return out;
}

DiagMatrix diagonal_start(const SymMatrix& s) {
  require_positive_variances(s, "diagonal_start");
  return DiagMatrix(s.diagonal().cwiseInverse());
}

FitResult fit_fixed_rank(const SymMatrix& s, int r, const DiagMatrix& d0, const FitConfig& cfg) {
  cfg.validate();
  require_positive_variances(s, "fit_fixed_rank");
  const Index p = s.dim();
  require_rank(r, p, "fit_fixed_rank");

  FitResult fit;
  fit.candidate_rank = r;

  if (r == 0) {
    DiagMatrix d = diagonal_start(s);
    SymMatrix theta = d.to_dense();
    fit.objective = objective(theta, s);
    fit.objective_trace = {fit.objective};
    fit.decomposition = {SymMatrix(p), std::move(d), std::move(theta), 0};
    fit.converged = true;
    return fit;
  }

  if (d0.dim() != p) throw InvalidInput("fit_fixed_rank: d0 dimension mismatch");
  if (!d0.all_positive()) throw InvalidInput("fit_fixed_rank: d0 must be positive");

  DiagMatrix d = d0;
  SymMatrix l(p);
  double f = objective(d.to_dense(), s);
  fit.objective_trace.push_back(f);

  bool inner_ok = true;
  for (int it = 1; it <= cfg.bcd_max_iter; ++it) {
    l = update_L(d, s, r);
    DiagUpdate upd = update_D(l, s, d, cfg);
    inner_ok = upd.converged;
    d = std::move(upd.D);

    const double f_new = objective(d - l, s);
    fit.objective_trace.push_back(f_new);
    fit.iterations = it;
    const double rel = std::abs(f - f_new) / std::max(1.0, std::abs(f_new));
    f = f_new;
    if (rel < cfg.bcd_tol) {
      fit.converged = inner_ok;
      break;
    }
  }

  fit.objective = f;
  const int rank = numerical_rank(l, cfg.rank_tol);
  SymMatrix theta = d - l;
  fit.decomposition = {std::move(l), std::move(d), std::move(theta), rank};
  return fit;
}

double rank_penalty(int r, int p, int n, double delta) {
  if (p < 1 || r < 0 || r > p) throw InvalidInput("rank_penalty: need 0 <= r <= p");
  if (n < 1) throw InvalidInput("rank_penalty: need n >= 1");
  if (!(delta > 0.0)) throw InvalidInput("rank_penalty: need delta > 0");
  const double rr = r;
  return delta * (2.0 * p * (rr + 1.0) - rr * (rr - 1.0)) / static_cast<double>(n);
}

std::vector<FitResult> fit_rank_path(const SymMatrix& s, std::span<const int> candidate_ranks,
                                     const FitConfig& cfg) {
  if (candidate_ranks.empty()) throw InvalidInput("fit_rank_path: no candidate ranks");
  for (std::size_t k = 0; k < candidate_ranks.size(); ++k) {
    require_rank(candidate_ranks[k], s.dim(), "fit_rank_path");
    if (k > 0 && candidate_ranks[k] <= candidate_ranks[k - 1]) {
      throw InvalidInput("fit_rank_path: candidate ranks must be strictly ascending");
    }
  }
  std::vector<FitResult> path;
  path.reserve(candidate_ranks.size());
  DiagMatrix d = diagonal_start(s);
  for (const int r : candidate_ranks) {
    path.push_back(fit_fixed_rank(s, r, d, cfg));
    d = path.back().decomposition.D;
  }
  return path;
}

FitResult select_penalized(std::span<const FitResult> path, int n, double delta) {
  if (path.empty()) throw InvalidInput("select_penalized: empty path");
  const int p = static_cast<int>(path.front().decomposition.theta.dim());
  std::size_t best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < path.size(); ++k) {
    const double value =
        path[k].objective + rank_penalty(path[k].decomposition.rank, p, n, delta);
    const bool better =
        value < best_value ||
        (value == best_value && path[k].decomposition.rank < path[best].decomposition.rank);
    if (better) {
      best = k;
      best_value = value;
    }
  }
  FitResult out = path[best];
  out.penalty = rank_penalty(out.decomposition.rank, p, n, delta);
  return out;
}

FitResult fit_rank_penalized(const SymMatrix& s, std::span<const int> candidate_ranks, int n,
                             double delta, const FitConfig& cfg) {
  const std::vector<FitResult> path = fit_rank_path(s, candidate_ranks, cfg);
  return select_penalized(path, n, delta);
}

PrecisionParts precision_parts_from_covariance(const SymMatrix& l_sigma, const DiagMatrix& d_sigma) {
  if (l_sigma.dim() != d_sigma.dim()) {
    throw InvalidInput("precision_parts_from_covariance: dimension mismatch");
  }
  if (!d_sigma.all_positive()) {
    throw InvalidInput("precision_parts_from_covariance: D_sigma must be positive");
  }
  const Index p = l_sigma.dim();
  // With K = D^{-1/2} L D^{-1/2}, L0 = D^{-1/2} (I + K)^{-1} K D^{-1/2}.
  const VectorXd inv_root = d_sigma.values().cwiseSqrt().cwiseInverse();
  const MatrixXd k = inv_root.asDiagonal() * l_sigma.matrix() * inv_root.asDiagonal();
  const Cholesky chol = chol_pd(SymMatrix(MatrixXd::Identity(p, p) + k));
  const MatrixXd core = chol.solve(k);
  SymMatrix l0(inv_root.asDiagonal() * core * inv_root.asDiagonal());
  return {std::move(l0), d_sigma.inverse()};
}

}  // namespace lodiag

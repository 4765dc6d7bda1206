#pragma once

// Precision matrix estimation under a "low-rank + diagonal" model:
//
//   theta = D - L,  L symmetric PSD with rank <= r,  D positive diagonal,
//
// fitted by minimizing trace(theta S) - log|theta|. For a fixed rank the
// fit alternates an exact L-update (closed form from the eigenpairs of
// D^{1/2} S D^{1/2}) with a damped Newton solve over the p diagonal
// entries of D. A rank-penalized sweep over several candidate ranks picks
// the model with the smallest penalized objective.

#include <span>
#include <vector>

#include "lodiag/matrix.hpp"

namespace lodiag {

struct FitConfig {
  double bcd_tol = 1e-7;  ///< relative objective change that stops the alternation
  int bcd_max_iter = 500;
  double newton_tol = 1e-8;  ///< infinity norm of the D-gradient
  int newton_max_iter = 100;
  double rank_tol = 1e-8;  ///< relative eigenvalue cut for the realized rank of L

  /// Throws InvalidInput unless every tolerance is > 0 and every cap >= 1.
  void validate() const;
};

struct PrecisionDecomposition {
  SymMatrix L;
  DiagMatrix D;
  SymMatrix theta;  ///< D - L
  int rank = 0;     ///< realized numerical rank of L
};

struct FitResult {
  PrecisionDecomposition decomposition;
  double objective = 0.0;               ///< trace(theta S) - log|theta|
  std::vector<double> objective_trace;  ///< starting point first, then one entry per iteration
  int candidate_rank = 0;
  double penalty = 0.0;  ///< 0 for fixed-rank fits
  bool converged = false;
  int iterations = 0;

  double penalized_objective() const { return objective + penalty; }
};

/// trace(theta S) - log|theta|. Throws NotPositiveDefinite if theta is not PD.
double objective(const SymMatrix& theta, const SymMatrix& s);

/// Minimizer of trace{(D - L) S} - log|D - L| over PSD L of rank <= r:
/// L = D^{1/2} U V U^T D^{1/2} with U the top-r eigenvectors of
/// D^{1/2} S D^{1/2} and V = diag(1 - 1/max(w_i, 1)).
SymMatrix update_L(const DiagMatrix& d, const SymMatrix& s, int r);

struct DiagUpdate {
  DiagMatrix D;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;  ///< max_j |S_jj - [(D - L)^{-1}]_jj| at return
};

/// Minimizes g(d) = sum_j d_j S_jj - log|diag(d) - L| by damped Newton with
/// Armijo backtracking, keeping diag(d) - L positive definite.
/// Throws InvalidInput if diag(d_init) - L is not PD. Running out of
/// iterations is reported through `converged`, not thrown.
DiagUpdate update_D(const SymMatrix& l, const SymMatrix& s, const DiagMatrix& d_init,
                    const FitConfig& cfg);

/// diag(1/S_11, ..., 1/S_pp), the exact rank-0 solution.
DiagMatrix diagonal_start(const SymMatrix& s);

/// Blockwise coordinate descent for a fixed rank r, started from d0.
/// r == 0 returns the closed form. Throws InvalidInput when some S_jj <= 0.
FitResult fit_fixed_rank(const SymMatrix& s, int r, const DiagMatrix& d0, const FitConfig& cfg);

/// Scaled AIC penalty delta * {2p(r + 1) - r(r - 1)} / n.
double rank_penalty(int r, int p, int n, double delta);

/// Fixed-rank fits over ascending candidate ranks, each warm-started from the
/// previous fit's D; the first one starts from the rank-0 solution.
std::vector<FitResult> fit_rank_path(const SymMatrix& s, std::span<const int> candidate_ranks,
                                     const FitConfig& cfg);

/// Picks the fit minimizing objective + rank_penalty(realized rank). Ties go
/// to the smaller realized rank, then the earlier candidate.
FitResult select_penalized(std::span<const FitResult> path, int n, double delta);

/// fit_rank_path followed by select_penalized. n is the sample size behind S.
FitResult fit_rank_penalized(const SymMatrix& s, std::span<const int> candidate_ranks, int n,
                             double delta, const FitConfig& cfg);

struct PrecisionParts {
  SymMatrix L0;
  DiagMatrix D0;
};

/// For Sigma = L_sigma + D_sigma returns the parts of Sigma^{-1} = D0 - L0:
/// D0 = D_sigma^{-1}, L0 = D_sigma^{-1} (I + L_sigma D_sigma^{-1})^{-1} L_sigma D_sigma^{-1}.
PrecisionParts precision_parts_from_covariance(const SymMatrix& l_sigma, const DiagMatrix& d_sigma);

}  // namespace lodiag

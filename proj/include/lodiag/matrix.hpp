#pragma once

// Dense symmetric linear algebra shared by the estimator, the simulation
// harness and the portfolio code.

#include <optional>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "lodiag/error.hpp"

namespace lodiag {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

class DiagMatrix;

/// Dense symmetric p x p matrix. Every constructor and mutator keeps
/// entry (i, j) bit-identical to entry (j, i).
class SymMatrix {
 public:
  SymMatrix() = default;

  /// Zero matrix of dimension p.
  explicit SymMatrix(Index p);

  /// Symmetrizes as (A + A^T) / 2, which leaves an already symmetric
  /// input unchanged. Throws InvalidInput for non-square or empty input.
  explicit SymMatrix(const Eigen::Ref<const MatrixXd>& a);

  static SymMatrix identity(Index p);

  Index dim() const { return data_.rows(); }
  double operator()(Index i, Index j) const { return data_(i, j); }
  void set(Index i, Index j, double v);

  const MatrixXd& matrix() const { return data_; }
  VectorXd diagonal() const { return data_.diagonal(); }
  double trace() const { return data_.trace(); }
  bool all_finite() const { return data_.allFinite(); }

  SymMatrix& operator*=(double s);
  friend SymMatrix operator*(double s, SymMatrix a) { return a *= s; }
  friend SymMatrix operator+(const SymMatrix& a, const SymMatrix& b);
  friend SymMatrix operator-(const SymMatrix& a, const SymMatrix& b);

 private:
  MatrixXd data_;
};

/// Diagonal matrix stored as its p diagonal entries.
class DiagMatrix {
 public:
  DiagMatrix() = default;
  explicit DiagMatrix(VectorXd diag);

  static DiagMatrix constant(Index p, double value);

  Index dim() const { return diag_.size(); }
  double operator[](Index i) const { return diag_[i]; }
  double& operator[](Index i) { return diag_[i]; }
  const VectorXd& values() const { return diag_; }

  bool all_positive() const { return diag_.size() > 0 && (diag_.array() > 0.0).all(); }
  DiagMatrix inverse() const;
  DiagMatrix sqrt() const;
  SymMatrix to_dense() const;

 private:
  VectorXd diag_;
};

/// D - A, the precision layout used throughout (theta = D - L).
SymMatrix operator-(const DiagMatrix& d, const SymMatrix& a);
SymMatrix operator+(const SymMatrix& a, const DiagMatrix& d);

/// Spectral decomposition with values sorted non-increasing; column i of
/// `vectors` pairs with values[i].
struct EigenPairs {
  VectorXd values;
  MatrixXd vectors;
};

/// Lower-triangular Cholesky factor of a positive definite matrix.
class Cholesky {
 public:
  explicit Cholesky(Eigen::LLT<MatrixXd> llt) : llt_(std::move(llt)) {}

  Index dim() const { return llt_.rows(); }
  MatrixXd factor() const { return llt_.matrixL(); }
  /// 2 * sum(log G_ii).
  double logdet() const;
  SymMatrix inverse() const;
  VectorXd solve_vector(const Eigen::Ref<const VectorXd>& b) const { return llt_.solve(b); }
  MatrixXd solve(const Eigen::Ref<const MatrixXd>& b) const { return llt_.solve(b); }

 private:
  Eigen::LLT<MatrixXd> llt_;
};

/// Full symmetric eigendecomposition, eigenvalues descending. Ties keep
/// the solver's original order so top-r selection is deterministic.
/// Throws InvalidInput on non-finite entries.
EigenPairs sym_eig(const SymMatrix& a);

/// Cyclic Jacobi eigensolver. Sweeps until the off-diagonal Frobenius norm
/// drops below 1e-12 * ||A||_F or 100 sweeps elapse. Same ordering rules as
/// sym_eig; slower, kept as an independent reference.
EigenPairs jacobi_eig(const SymMatrix& a);

/// Eigenvalues only, descending.
VectorXd sym_eigenvalues(const SymMatrix& a);

/// Throws NotPositiveDefinite when any pivot is <= 1e-12 * trace(A) / p.
Cholesky chol_pd(const SymMatrix& a);

/// Non-throwing variant for feasibility probes in line searches.
std::optional<Cholesky> try_chol_pd(const SymMatrix& a);

double logdet_pd(const SymMatrix& a);
SymMatrix inv_pd(const SymMatrix& a);

/// (1/n) X^T X with rows as observations. No mean subtraction.
SymMatrix sample_covariance(const Eigen::Ref<const MatrixXd>& x);

/// Column-centred copy of X.
MatrixXd center_columns(const Eigen::Ref<const MatrixXd>& x);

/// Number of eigenvalues above rel_tol * max(1, largest eigenvalue).
int numerical_rank(const SymMatrix& a, double rel_tol);

}  // namespace lodiag

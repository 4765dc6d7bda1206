#include "lodiag/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

namespace lodiag {

SymMatrix::SymMatrix(Index p) {
  if (p < 1) {
    throw InvalidInput("SymMatrix: dimension must be >= 1, got " + std::to_string(p));
  }
  data_ = MatrixXd::Zero(p, p);
}

SymMatrix::SymMatrix(const Eigen::Ref<const MatrixXd>& a) {
  if (a.rows() != a.cols() || a.rows() < 1) {
    throw InvalidInput("SymMatrix: need a non-empty square matrix, got " +
                       std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  data_ = 0.5 * (a + a.transpose());
}

SymMatrix SymMatrix::identity(Index p) {
  SymMatrix out(p);
  out.data_.diagonal().setOnes();
  return out;
}

void SymMatrix::set(Index i, Index j, double v) {
  data_(i, j) = v;
  data_(j, i) = v;
}

SymMatrix& SymMatrix::operator*=(double s) {
  data_ *= s;
  return *this;
}

SymMatrix operator+(const SymMatrix& a, const SymMatrix& b) {
  if (a.dim() != b.dim()) throw InvalidInput("SymMatrix +: dimension mismatch");
  return SymMatrix(a.data_ + b.data_);
}

SymMatrix operator-(const SymMatrix& a, const SymMatrix& b) {
  if (a.dim() != b.dim()) throw InvalidInput("SymMatrix -: dimension mismatch");
  return SymMatrix(a.data_ - b.data_);
}

DiagMatrix::DiagMatrix(VectorXd diag) : diag_(std::move(diag)) {
  if (diag_.size() < 1) throw InvalidInput("DiagMatrix: dimension must be >= 1");
}

DiagMatrix DiagMatrix::constant(Index p, double value) {
  return DiagMatrix(VectorXd::Constant(p, value));
}

DiagMatrix DiagMatrix::inverse() const { return DiagMatrix(diag_.cwiseInverse()); }

DiagMatrix DiagMatrix::sqrt() const { return DiagMatrix(diag_.cwiseSqrt()); }

SymMatrix DiagMatrix::to_dense() const { return SymMatrix(MatrixXd(diag_.asDiagonal())); }

SymMatrix operator-(const DiagMatrix& d, const SymMatrix& a) {
  if (d.dim() != a.dim()) throw InvalidInput("DiagMatrix - SymMatrix: dimension mismatch");
  MatrixXd m = -a.matrix();
  m.diagonal() += d.values();
  return SymMatrix(m);
}

SymMatrix operator+(const SymMatrix& a, const DiagMatrix& d) {
  if (d.dim() != a.dim()) throw InvalidInput("SymMatrix + DiagMatrix: dimension mismatch");
  MatrixXd m = a.matrix();
  m.diagonal() += d.values();
  return SymMatrix(m);
}

double Cholesky::logdet() const {
  const MatrixXd& lu = llt_.matrixLLT();
  return 2.0 * lu.diagonal().array().log().sum();
}

SymMatrix Cholesky::inverse() const {
  return SymMatrix(llt_.solve(MatrixXd::Identity(dim(), dim())));
}

namespace {

void require_finite(const SymMatrix& a, const char* who) {
  if (!a.all_finite()) throw InvalidInput(std::string(who) + ": non-finite entries");
}

// Descending by value; equal values keep their incoming order. Each
// eigenvector is flipped so its largest-magnitude component is positive.
EigenPairs sort_descending(const VectorXd& values, const MatrixXd& vectors) {
  const Index p = values.size();
  std::vector<Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return values[a] > values[b]; });
  EigenPairs out{VectorXd(p), MatrixXd(p, p)};
  for (Index k = 0; k < p; ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    out.values[k] = values[src];
    VectorXd v = vectors.col(src);
    Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v[imax] < 0.0) v = -v;
    out.vectors.col(k) = v;
  }
  return out;
}

}  // namespace

EigenPairs sym_eig(const SymMatrix& a) {
  require_finite(a, "sym_eig");
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(a.matrix(), Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw InvalidInput("sym_eig: eigensolver failed");
  // Eigen reports ascending order; reversing first keeps ties in a fixed order.
  const VectorXd values = solver.eigenvalues().reverse();
  const MatrixXd vectors = solver.eigenvectors().rowwise().reverse();
  return sort_descending(values, vectors);
}

VectorXd sym_eigenvalues(const SymMatrix& a) {
  require_finite(a, "sym_eigenvalues");
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(a.matrix(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw InvalidInput("sym_eigenvalues: eigensolver failed");
  return solver.eigenvalues().reverse();
}

EigenPairs jacobi_eig(const SymMatrix& a_in) {
  require_finite(a_in, "jacobi_eig");
  const Index p = a_in.dim();
  MatrixXd a = a_in.matrix();
  MatrixXd v = MatrixXd::Identity(p, p);
  const double target = 1e-12 * a.norm();

  auto off_norm = [&] {
    double s = 0.0;
    for (Index j = 0; j < p; ++j)
      for (Index i = 0; i < p; ++i)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < 100 && off_norm() > target; ++sweep) {
    for (Index i = 0; i < p - 1; ++i) {
      for (Index j = i + 1; j < p; ++j) {
        const double aij = a(i, j);
        if (aij == 0.0) continue;
        const double theta = (a(j, j) - a(i, i)) / (2.0 * aij);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (Index k = 0; k < p; ++k) {
          const double aki = a(k, i);
          const double akj = a(k, j);
          a(k, i) = c * aki - s * akj;
          a(k, j) = s * aki + c * akj;
        }
        for (Index k = 0; k < p; ++k) {
          const double aik = a(i, k);
          const double ajk = a(j, k);
          a(i, k) = c * aik - s * ajk;
          a(j, k) = s * aik + c * ajk;
        }
        for (Index k = 0; k < p; ++k) {
          const double vki = v(k, i);
          const double vkj = v(k, j);
          v(k, i) = c * vki - s * vkj;
          v(k, j) = s * vki + c * vkj;
        }
      }
    }
  }
  return sort_descending(a.diagonal(), v);
}

std::optional<Cholesky> try_chol_pd(const SymMatrix& a) {
  if (!a.all_finite()) return std::nullopt;
  const double threshold = 1e-12 * a.trace() / static_cast<double>(a.dim());
  if (!(threshold > 0.0)) return std::nullopt;
  Eigen::LLT<MatrixXd> llt(a.matrix());
  if (llt.info() != Eigen::Success) return std::nullopt;
  // Pivot k of the factorization is G_kk^2.
  const VectorXd pivots = llt.matrixLLT().diagonal().array().square();
  if (pivots.minCoeff() <= threshold) return std::nullopt;
  return Cholesky(std::move(llt));
}

Cholesky chol_pd(const SymMatrix& a) {
  auto c = try_chol_pd(a);
  if (!c) throw NotPositiveDefinite("chol_pd: matrix is not positive definite");
  return std::move(*c);
}

double logdet_pd(const SymMatrix& a) { return chol_pd(a).logdet(); }

SymMatrix inv_pd(const SymMatrix& a) { return chol_pd(a).inverse(); }

SymMatrix sample_covariance(const Eigen::Ref<const MatrixXd>& x) {
  if (x.rows() < 1 || x.cols() < 1) throw InvalidInput("sample_covariance: empty data");
  if (!x.allFinite()) throw InvalidInput("sample_covariance: non-finite data");
  MatrixXd s = MatrixXd::Zero(x.cols(), x.cols());
  s.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose(), 1.0 / static_cast<double>(x.rows()));
  s.triangularView<Eigen::StrictlyUpper>() = s.transpose();
  return SymMatrix(s);
}

MatrixXd center_columns(const Eigen::Ref<const MatrixXd>& x) {
  if (x.rows() < 1) throw InvalidInput("center_columns: empty data");
  const Eigen::RowVectorXd mean = x.colwise().mean();
  return x.rowwise() - mean;
}

int numerical_rank(const SymMatrix& a, double rel_tol) {
  const VectorXd w = sym_eigenvalues(a);
  const double cut = rel_tol * std::max(1.0, w[0]);
  return static_cast<int>((w.array() > cut).count());
}

}  // namespace lodiag

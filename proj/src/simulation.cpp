#include "lodiag/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

namespace lodiag {

namespace {

constexpr double kPdShift = 0.05;

// Inverse of a symmetric (possibly indefinite) nonsingular matrix.
SymMatrix symmetric_inverse(const SymMatrix& a) {
  const EigenPairs eig = sym_eig(a);
  const double scale = std::max(1.0, eig.values.cwiseAbs().maxCoeff());
  if (eig.values.cwiseAbs().minCoeff() <= 1e-12 * scale) {
    throw InvalidInput("make_sigma: perturbed precision is numerically singular");
  }
  return SymMatrix(eig.vectors * eig.values.cwiseInverse().asDiagonal() * eig.vectors.transpose());
}

// Each entry is Uniform(lo, hi) with probability `keep` and 0 otherwise.
MatrixXd sparse_uniform(Index rows, Index cols, double keep, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_real_distribution<double> value(lo, hi);
  MatrixXd m = MatrixXd::Zero(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      if (coin(rng) < keep) m(i, j) = value(rng);
  return m;
}

double pd_shift(const SymMatrix& b) { return std::abs(std::min(sym_eigenvalues(b).minCoeff(), 0.0)) + kPdShift; }

// Precomputed pieces of the KL loss for a fixed theta0.
struct KlReference {
  SymMatrix sigma0;
  double logdet_theta0;
  double operator()(const SymMatrix& theta_hat) const {
    const Cholesky chol = chol_pd(theta_hat);
    const double tr = sigma0.matrix().cwiseProduct(theta_hat.matrix()).sum();
    return tr - chol.logdet() + logdet_theta0 - static_cast<double>(sigma0.dim());
  }
};

ReplicationOutcome run_one(const SimulationSpec& spec, const KlReference& kl, const SymMatrix& sigma,
                           std::uint64_t seed) {
  Rng rng(seed);
  const MatrixXd train = sample_mvn(sigma, spec.n, rng);
  const MatrixXd valid = sample_mvn(sigma, spec.n_valid, rng);
  const SymMatrix s = sample_covariance(train);
  const SymMatrix s_valid = sample_covariance(valid);

  ReplicationOutcome out;
  if (spec.p < spec.n) {
    if (auto chol = try_chol_pd(s)) out.kl_sample = kl(chol->inverse());
  }
  out.kl_diagonal = kl(diagonal_start(s).to_dense());

  const std::vector<FitResult> path = fit_rank_path(s, spec.candidate_ranks, spec.fit);
  std::optional<FitResult> best;
  double best_nll = 0.0;
  for (const double delta : spec.delta_grid) {
    FitResult fit = select_penalized(path, spec.n, delta);
    const double nll = objective(fit.decomposition.theta, s_valid);
    if (!best || nll < best_nll) {
      best_nll = nll;
      out.selected_delta = delta;
      best = std::move(fit);
    }
  }

  const PrecisionDecomposition& dec = best->decomposition;
  out.kl_ld = kl(dec.theta);
  out.candidate_rank = best->candidate_rank;
  out.realized_rank = dec.rank;
  VectorXd w = sym_eigenvalues(dec.L);
  const double cut = spec.fit.rank_tol * std::max(1.0, w[0]);
  for (Index i = 0; i < w.size(); ++i)
    if (w[i] <= cut) w[i] = 0.0;
  out.l_eigenvalues = std::move(w);
  return out;
}

struct MeanSe {
  double mean;
  double se;
};

MeanSe mean_se(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (const double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (const double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

MethodLoss summarize(std::string name, const std::vector<double>& xs) {
  MethodLoss m;
  m.method = std::move(name);
  m.count = static_cast<int>(xs.size());
  if (!xs.empty()) {
    const MeanSe ms = mean_se(xs);
    m.mean_kl = ms.mean;
    m.stderr_kl = ms.se;
  }
  return m;
}

std::string fmt_sig(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

std::string fmt_csv(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

void SimulationSpec::validate() const {
  if (example_id < 1 || example_id > 5) throw InvalidInput("SimulationSpec: example_id must be in 1..5");
  if (p < 2) throw InvalidInput("SimulationSpec: p must be >= 2");
  if (example_id == 3 && p % 5 != 0) throw InvalidInput("SimulationSpec: example 3 needs p divisible by 5");
  if (n < 1 || n_valid < 1) throw InvalidInput("SimulationSpec: sample sizes must be >= 1");
  if (reps < 1) throw InvalidInput("SimulationSpec: reps must be >= 1");
  if (threads < 1) throw InvalidInput("SimulationSpec: threads must be >= 1");
  if (delta_grid.empty()) throw InvalidInput("SimulationSpec: empty delta grid");
  for (const double d : delta_grid)
    if (!(d > 0.0) || !std::isfinite(d)) throw InvalidInput("SimulationSpec: deltas must be positive");
  if (candidate_ranks.empty()) throw InvalidInput("SimulationSpec: no candidate ranks");
  for (std::size_t k = 0; k < candidate_ranks.size(); ++k) {
    if (candidate_ranks[k] < 0 || candidate_ranks[k] > p)
      throw InvalidInput("SimulationSpec: candidate rank outside [0, p]");
    if (k > 0 && candidate_ranks[k] <= candidate_ranks[k - 1])
      throw InvalidInput("SimulationSpec: candidate ranks must be strictly ascending");
  }
  fit.validate();
}

GroundTruth make_sigma(int example_id, int p, std::uint64_t seed) {
  if (p < 2) throw InvalidInput("make_sigma: p must be >= 2");
  Rng rng(seed);
  GroundTruth truth;

  switch (example_id) {
    case 1: {
      truth.L_sigma = SymMatrix(MatrixXd::Constant(p, p, 0.2));
      truth.D_sigma = DiagMatrix::constant(p, 0.8);
      truth.r0 = 1;
      truth.exact_decomposition = true;
      break;
    }
    case 2: {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      MatrixXd r(p, 5);
      for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < 5; ++j) r(i, j) = unif(rng);
      truth.L_sigma = SymMatrix(r * r.transpose());
      truth.D_sigma = DiagMatrix::constant(p, 1.0);
      truth.r0 = 5;
      truth.exact_decomposition = true;
      break;
    }
    case 3: {
      if (p % 5 != 0) throw InvalidInput("make_sigma: example 3 needs p divisible by 5");
      const Index q = p / 5;
      MatrixXd l = MatrixXd::Zero(p, p);
      for (Index b = 0; b < 5; ++b) l.block(b * q, b * q, q, q).setConstant(0.2);
      truth.L_sigma = SymMatrix(l);
      truth.D_sigma = DiagMatrix::constant(p, 0.8);
      truth.r0 = 5;
      truth.exact_decomposition = true;
      break;
    }
    case 4: {
      const MatrixXd r = sparse_uniform(p, 3, 0.8, 0.0, 1.0, rng);
      const MatrixXd b1 = sparse_uniform(p, p, 0.05, -0.05, 0.05, rng);
      const SymMatrix rrt(r * r.transpose());
      const SymMatrix b0 = rrt + DiagMatrix::constant(p, 1.0);
      // B = {B0^{-1} + (B1 + B1^T)/2}^{-1}; SymMatrix(b1) is exactly the symmetrized B1.
      const SymMatrix b = symmetric_inverse(inv_pd(b0) + SymMatrix(b1));
      truth.sigma = b + DiagMatrix::constant(p, pd_shift(b));
      truth.L_sigma = rrt;
      truth.D_sigma = DiagMatrix::constant(p, 1.0);
      truth.r0 = 3;
      truth.exact_decomposition = false;
      break;
    }
    case 5: {
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      MatrixXd b0 = MatrixXd::Zero(p, p);
      for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j)
          if (coin(rng) < 0.5) b0(i, j) = 0.5;
      const SymMatrix b(b0 + b0.transpose());
      truth.theta = b + DiagMatrix::constant(p, pd_shift(b));
      truth.sigma = inv_pd(truth.theta);
      return truth;
    }
    default:
      throw InvalidInput("make_sigma: example_id must be in 1..5");
  }

  if (truth.exact_decomposition) truth.sigma = *truth.L_sigma + *truth.D_sigma;
  truth.theta = inv_pd(truth.sigma);
  truth.L0 = precision_parts_from_covariance(*truth.L_sigma, *truth.D_sigma).L0;
  return truth;
}

MatrixXd sample_mvn(const SymMatrix& sigma, int n, Rng& rng) {
  if (n < 1) throw InvalidInput("sample_mvn: n must be >= 1");
  const MatrixXd g = chol_pd(sigma).factor();
  const Index p = sigma.dim();
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd z(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) z(i, j) = normal(rng);
  return z * g.transpose();
}

MatrixXd sample_mvn(const SymMatrix& sigma, int n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_mvn(sigma, n, rng);
}

double kl_loss(const SymMatrix& theta_hat, const SymMatrix& theta0) {
  if (theta_hat.dim() != theta0.dim()) throw InvalidInput("kl_loss: dimension mismatch");
  const Cholesky chol0 = chol_pd(theta0);
  const KlReference ref{chol0.inverse(), chol0.logdet()};
  return ref(theta_hat);
}

std::vector<ReplicationOutcome> run_replications(const SimulationSpec& spec, const GroundTruth& truth) {
  spec.validate();
  if (truth.sigma.dim() != spec.p) throw InvalidInput("run_replications: ground truth dimension mismatch");
  const Cholesky chol0 = chol_pd(truth.theta);
  const KlReference kl{truth.sigma, chol0.logdet()};

  const auto reps = static_cast<std::size_t>(spec.reps);
  std::vector<ReplicationOutcome> out(reps);
  std::vector<std::exception_ptr> errors(reps);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < reps; i = next++) {
      try {
        out[i] = run_one(spec, kl, truth.sigma, stream_seed(spec.seed, i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const auto n_threads = static_cast<std::size_t>(std::min(spec.threads, spec.reps));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  // Report the lowest-index failure so the error is thread-count independent.
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

LossTable aggregate_losses(const SimulationSpec& spec, std::span<const ReplicationOutcome> reps) {
  std::vector<double> s, ds, ld;
  for (const auto& r : reps) {
    if (r.kl_sample) s.push_back(*r.kl_sample);
    ds.push_back(r.kl_diagonal);
    ld.push_back(r.kl_ld);
  }
  LossTable table;
  table.example_id = spec.example_id;
  table.p = spec.p;
  table.reps = static_cast<int>(reps.size());
  // A partially available S column would bias the mean; report NA unless every replication has it.
  table.sample = summarize("S", s.size() == reps.size() ? s : std::vector<double>{});
  table.diagonal = summarize("D_S", ds);
  table.ld = summarize("LD", ld);
  return table;
}

RankRecovery summarize_rank_recovery(const SimulationSpec& spec, const GroundTruth& truth,
                                     std::span<const ReplicationOutcome> reps, int k) {
  if (k < 1) throw InvalidInput("rank_recovery: k must be >= 1");
  if (!truth.L0) throw InvalidInput("rank_recovery: ground truth has no low-rank component");
  RankRecovery rr;
  rr.example_id = spec.example_id;
  rr.p = spec.p;
  rr.k = k;

  const VectorXd w0 = sym_eigenvalues(*truth.L0);
  const double cut = spec.fit.rank_tol * std::max(1.0, w0[0]);
  for (int i = 0; i < k; ++i) {
    const double v = i < w0.size() ? w0[i] : 0.0;
    rr.true_eigenvalues.push_back(v > cut ? v : 0.0);
  }

  std::vector<double> column(reps.size());
  for (int i = 0; i < k; ++i) {
    for (std::size_t r = 0; r < reps.size(); ++r) {
      const VectorXd& w = reps[r].l_eigenvalues;
      column[r] = i < w.size() ? w[i] : 0.0;
    }
    const MeanSe ms = mean_se(column);
    rr.mean.push_back(ms.mean);
    rr.lower.push_back(ms.mean - 1.96 * ms.se);
    rr.upper.push_back(ms.mean + 1.96 * ms.se);
  }

  for (const auto& r : reps) ++rr.rank_counts[r.realized_rank];
  int best_count = -1;
  for (const auto& [rank, count] : rr.rank_counts) {
    if (count > best_count) {
      best_count = count;
      rr.modal_rank = rank;
    }
  }
  return rr;
}

LossTable run_simulation(const SimulationSpec& spec) {
  spec.validate();
  const GroundTruth truth = make_sigma(spec.example_id, spec.p, spec.seed);
  const auto reps = run_replications(spec, truth);
  return aggregate_losses(spec, reps);
}

RankRecovery rank_recovery(const SimulationSpec& spec, int k) {
  spec.validate();
  if (spec.example_id == 5) throw InvalidInput("rank_recovery: example 5 has no low-rank component");
  if (k < 1) throw InvalidInput("rank_recovery: k must be >= 1");
  const GroundTruth truth = make_sigma(spec.example_id, spec.p, spec.seed);
  const auto reps = run_replications(spec, truth);
  return summarize_rank_recovery(spec, truth, reps, k);
}

void write_loss_table_csv(std::ostream& os, const LossTable& table) {
  os << "method,mean_kl,stderr\n";
  for (const MethodLoss* m : {&table.sample, &table.diagonal, &table.ld}) {
    os << m->method << ',' << (m->mean_kl ? fmt_csv(*m->mean_kl) : "NA") << ','
       << (m->stderr_kl ? fmt_csv(*m->stderr_kl) : "NA") << '\n';
  }
}

void write_loss_table_text(std::ostream& os, const LossTable& table) {
  auto cell = [](const MethodLoss& m) {
    if (!m.mean_kl) return std::string("NA");
    return fmt_sig(*m.mean_kl, 4) + " (" + fmt_sig(*m.stderr_kl, 3) + ")";
  };
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %-10s %-18s %-18s %-18s\n", "", "", "S", "D_S", "LD");
  os << "Average (standard error) of Kullback-Leibler loss over " << table.reps << " replications\n"
     << line;
  const std::string example = "Example " + std::to_string(table.example_id);
  const std::string dim = "p = " + std::to_string(table.p);
  std::snprintf(line, sizeof line, "%-12s %-10s %-18s %-18s %-18s\n", example.c_str(), dim.c_str(),
                cell(table.sample).c_str(), cell(table.diagonal).c_str(), cell(table.ld).c_str());
  os << line;
}

void write_rank_recovery_csv(std::ostream& os, const RankRecovery& rr) {
  os << "index,true_l0,mean,lower,upper\n";
  for (int i = 0; i < rr.k; ++i) {
    const auto u = static_cast<std::size_t>(i);
    os << (i + 1) << ',' << fmt_csv(rr.true_eigenvalues[u]) << ',' << fmt_csv(rr.mean[u]) << ','
       << fmt_csv(rr.lower[u]) << ',' << fmt_csv(rr.upper[u]) << '\n';
  }
}

void write_rank_recovery_text(std::ostream& os, const RankRecovery& rr) {
  os << "Top " << rr.k << " eigenvalues of L0 and of the fitted L (example " << rr.example_id
     << ", p = " << rr.p << ")\n";
  char line[160];
  std::snprintf(line, sizeof line, "%5s %12s %12s %12s %12s\n", "index", "true", "mean", "lower", "upper");
  os << line;
  for (int i = 0; i < rr.k; ++i) {
    const auto u = static_cast<std::size_t>(i);
    std::snprintf(line, sizeof line, "%5d %12.5f %12.5f %12.5f %12.5f\n", i + 1, rr.true_eigenvalues[u],
                  rr.mean[u], rr.lower[u], rr.upper[u]);
    os << line;
  }
  os << "realized rank counts:";
  for (const auto& [rank, count] : rr.rank_counts) os << ' ' << rank << ':' << count;
  os << "\nmodal rank: " << rr.modal_rank << '\n';
}

}  // namespace lodiag

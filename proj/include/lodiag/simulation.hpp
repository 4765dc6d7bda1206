#pragma once

// Simulation harness: five population covariance structures, Gaussian
// sampling, Kullback-Leibler loss, replicated loss tables and rank-recovery
// summaries for the low-rank + diagonal estimator.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lodiag/estimator.hpp"
#include "lodiag/matrix.hpp"
#include "lodiag/rng.hpp"

namespace lodiag {

struct SimulationSpec {
  int example_id = 1;
  int p = 50;
  int n = 100;
  int n_valid = 100;
  int reps = 100;
  std::uint64_t seed = 1;
  std::vector<double> delta_grid{0.6, 0.8, 1.0, 1.2, 1.4};
  std::vector<int> candidate_ranks{1, 3, 5, 7, 9};
  FitConfig fit{};
  int threads = 1;

  void validate() const;
};

/// Population covariance of one example together with its known structure.
struct GroundTruth {
  SymMatrix sigma;
  std::optional<SymMatrix> L_sigma;
  std::optional<DiagMatrix> D_sigma;
  SymMatrix theta;  ///< sigma^{-1}
  std::optional<SymMatrix> L0;
  std::optional<int> r0;
  /// False when (L_sigma, D_sigma) only approximates sigma (example 4).
  bool exact_decomposition = false;
};

/// Example 1: compound symmetric 0.2 * 11^T + 0.8 I.
/// Example 2: I + R R^T, R p x 5 with Uniform(0, 1) entries.
/// Example 3: five identical compound-symmetric blocks (p divisible by 5).
/// Example 4: example-2-like B0 = I + R R^T (R p x 3, entries kept with
///            probability 0.8) perturbed in the precision domain, then
///            shifted to be positive definite.
/// Example 5: inverse of a shifted random 0/0.5 pattern (sparse precision).
GroundTruth make_sigma(int example_id, int p, std::uint64_t seed);

/// n iid N(0, sigma) rows, generated as G z with G the Cholesky factor.
MatrixXd sample_mvn(const SymMatrix& sigma, int n, std::uint64_t seed);
MatrixXd sample_mvn(const SymMatrix& sigma, int n, Rng& rng);

/// trace(theta0^{-1} theta_hat) - log|theta0^{-1} theta_hat| - p.
double kl_loss(const SymMatrix& theta_hat, const SymMatrix& theta0);

/// Per-replication record; losses for the three estimators plus the fitted
/// low-rank spectrum.
struct ReplicationOutcome {
  std::optional<double> kl_sample;  ///< empty when S is singular (p >= n)
  double kl_diagonal = 0.0;
  double kl_ld = 0.0;
  double selected_delta = 0.0;
  int candidate_rank = 0;
  int realized_rank = 0;
  VectorXd l_eigenvalues;  ///< descending; entries below the rank tolerance set to 0
};

struct MethodLoss {
  std::string method;
  std::optional<double> mean_kl;  ///< empty renders as NA
  std::optional<double> stderr_kl;
  int count = 0;
};

struct LossTable {
  int example_id = 0;
  int p = 0;
  int reps = 0;
  MethodLoss sample{"S", {}, {}, 0};
  MethodLoss diagonal{"D_S", {}, {}, 0};
  MethodLoss ld{"LD", {}, {}, 0};
};

struct RankRecovery {
  int example_id = 0;
  int p = 0;
  int k = 0;
  std::vector<double> true_eigenvalues;  ///< top-k of L0, zero below tolerance
  std::vector<double> mean;
  std::vector<double> lower;  ///< mean - 1.96 se
  std::vector<double> upper;  ///< mean + 1.96 se
  std::map<int, int> rank_counts;
  int modal_rank = 0;
};

/// Runs spec.reps independent replications against a fixed ground truth.
/// Replication i draws from stream_seed(spec.seed, i); results are indexed
/// by replication, so any thread count gives identical output.
std::vector<ReplicationOutcome> run_replications(const SimulationSpec& spec, const GroundTruth& truth);

LossTable aggregate_losses(const SimulationSpec& spec, std::span<const ReplicationOutcome> reps);
RankRecovery summarize_rank_recovery(const SimulationSpec& spec, const GroundTruth& truth,
                                     std::span<const ReplicationOutcome> reps, int k);

/// Ground truth from make_sigma(example_id, p, seed), then the replications.
LossTable run_simulation(const SimulationSpec& spec);

/// Examples 1-4 only; example 5 has no low-rank component.
RankRecovery rank_recovery(const SimulationSpec& spec, int k);

void write_loss_table_csv(std::ostream& os, const LossTable& table);
void write_loss_table_text(std::ostream& os, const LossTable& table);
void write_rank_recovery_csv(std::ostream& os, const RankRecovery& rr);
void write_rank_recovery_text(std::ostream& os, const RankRecovery& rr);

}  // namespace lodiag

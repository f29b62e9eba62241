#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "corrdiff/corrmat.hpp"
#include "corrdiff/link.hpp"

namespace corrdiff {

/// Group-averaged plug-in weight matrices for the quadratic loss, with cached
/// Cholesky factorizations. `regularization` is the diagonal-shrinkage weight
/// actually applied (it can exceed the requested value when the factorization
/// needed rescuing). `gauge` is the mean diagonal of the two matrices; the
/// inner optimizer uses it to stay invariant under a common rescaling of both
/// weights.
struct WeightMatrices {
  Eigen::MatrixXd c_bar_h;
  Eigen::MatrixXd c_bar_d;
  Eigen::LLT<Eigen::MatrixXd> factor_h;
  Eigen::LLT<Eigen::MatrixXd> factor_d;
  double regularization = 0.0;
  double gauge = 1.0;
};

struct FitConfig {
  int max_outer_iters = 100;
  double outer_tol = 1e-6;   // inf-norm change of alpha across outer steps
  double inner_tol = 1e-6;   // gradient inf-norm threshold, in gauge units
  int max_inner_iters = 500;
  double armijo_c = 1e-4;
  double armijo_shrink = 0.5;
  double regularization_lambda = 0.0;  // in [0, 1]
  double alpha_floor = 1e-3;           // multiplicative link: alpha_j >= floor
  std::uint64_t seed = 0;              // recorded in artifacts; fitting is deterministic
};

struct FitDiagnostics {
  bool identifiable = true;
  int identifiability_rank = 0;
  int theta_range_violations = 0;  // |Theta_ij| > 1 at the solution
  bool line_search_stalled = false;
  bool loss_monotone = true;  // outer loss trace non-increasing (measured, not enforced)
  double applied_lambda = 0.0;
};

struct FitResult {
  CorrelationMatrix theta_hat = CorrelationMatrix::identity(1);
  Eigen::VectorXd alpha_hat;
  std::vector<double> loss_trace;
  int outer_iters = 0;
  bool converged = false;
  WeightMatrices weights;
  FitDiagnostics diagnostics;
};

/// C-bar_g = group mean of corr_covariance(R_i), shrunk toward its diagonal
/// by lambda. If the Cholesky factorization fails at the requested lambda,
/// the shrinkage escalates geometrically (x10, from 1e-6 when starting at 0)
/// up to 1; DegenerateWeights if even full shrinkage fails.
WeightMatrices build_weights(const TwoGroupSample& sample, double lambda,
                             int threads = 1);

/// Per-group sums of the per-subject covariance matrices. The jackknife
/// assembles leave-one-out weights by subtracting one subject's term from
/// these sums instead of re-evaluating the whole group.
struct WeightAccumulator {
  Eigen::MatrixXd sum_h;
  Eigen::MatrixXd sum_d;
  int n_h = 0;
  int n_d = 0;
};

WeightAccumulator accumulate_weight_terms(const TwoGroupSample& sample, int threads = 1);
WeightMatrices weights_from_sums(Eigen::MatrixXd sum_h, int n_h, Eigen::MatrixXd sum_d,
                                 int n_d, double lambda);

/// S(Theta, alpha) = S_h(Theta) + S_d(Theta, alpha); quadratic forms go
/// through the cached triangular factors, never an explicit inverse.
double loss(const CorrelationMatrix& theta, const Eigen::VectorXd& alpha,
            const TwoGroupSample& sample, const WeightMatrices& weights,
            const LinkModel& link);

/// Exact gradient of S_d in alpha (S_h is alpha-free):
/// -2 sum_D J^t C-bar_d^{-1} (R_i - g).
Eigen::VectorXd loss_gradient_alpha(const CorrelationMatrix& theta,
                                    const Eigen::VectorXd& alpha,
                                    const TwoGroupSample& sample,
                                    const WeightMatrices& weights,
                                    const LinkModel& link);

struct AlphaMinimizeResult {
  Eigen::VectorXd alpha;
  int iterations = 0;
  bool stalled = false;      // line search underflowed; best iterate returned
  double grad_norm = 0.0;    // gradient inf-norm at exit, gauge units
};

/// Projected steepest descent with Armijo backtracking on S_d(theta, .).
/// Accepted steps keep alpha in the link domain and never increase the loss.
AlphaMinimizeResult minimize_alpha(const CorrelationMatrix& theta,
                                   const TwoGroupSample& sample,
                                   const WeightMatrices& weights,
                                   const LinkModel& link,
                                   const Eigen::VectorXd& alpha_start,
                                   const FitConfig& config);

/// Method-of-moments update: pooled mean of the control matrices and the
/// alpha-inverted perturbed matrices. Entries may leave [-1, 1]; they are
/// reported via diagnostics, not clipped. Diagonal forced to 1.
CorrelationMatrix update_theta(const TwoGroupSample& sample,
                               const Eigen::VectorXd& alpha,
                               const LinkModel& link);

/// Alternating estimation: Theta_0 from the null alpha, then alpha-step /
/// Theta-step until the alpha change drops below outer_tol. A warm start for
/// alpha (e.g. from a full-data fit) skips the null initialization.
FitResult fit(const TwoGroupSample& sample, const LinkModel& link,
              const FitConfig& config, int threads = 1,
              const std::optional<Eigen::VectorXd>& alpha_start = std::nullopt);

/// As `fit`, but with prebuilt weights (the jackknife rebuilds them per fold
/// from cached per-subject covariance terms).
FitResult fit_with_weights(const TwoGroupSample& sample, const LinkModel& link,
                           const FitConfig& config, WeightMatrices weights,
                           const std::optional<Eigen::VectorXd>& alpha_start = std::nullopt);

}  // namespace corrdiff

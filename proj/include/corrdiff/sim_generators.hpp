#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "corrdiff/corrmat.hpp"
#include "corrdiff/link.hpp"
#include "corrdiff/rng.hpp"

namespace corrdiff {

struct SimParams {
  int p = 16;
  double alpha_prop = 0.2;  // fraction of non-null effects (first coordinates)
  double alpha_low = 0.7;
  double alpha_high = 1.1;
  int n_h = 50;
  int n_d = 50;
  int T = 100;
  std::vector<double> ar;  // AR coefficients; empty = i.i.d. rows
  std::vector<double> ma;  // MA coefficients
  std::uint64_t seed = 0;
};

struct GeneratedParameters {
  CorrelationMatrix theta = CorrelationMatrix::identity(1);
  Eigen::VectorXd alpha;
};

/// Base matrix from a scaled 2p-sample Gram matrix (strictly PD almost
/// surely); the first round(alpha_prop * p) effects are uniform on
/// [alpha_low, alpha_high], the rest are 1.
GeneratedParameters gen_parameters(const SimParams& params, RngStream& rng);

/// Two-pass ARMA filter: Y starts as X, the MA pass adds lagged X terms, the
/// AR pass adds lagged (already filtered) Y terms. Out-of-range lags
/// contribute zero, so early rows ramp up from a cold start.
Eigen::MatrixXd arma_filter(const Eigen::MatrixXd& x, const std::vector<double>& ar,
                            const std::vector<double>& ma);

/// n filtered Gaussian rows with row-covariance v, returned as Y'Y / n.
/// burn_in extra rows are generated and discarded before the product, for
/// checks that need the filter warmed up.
Eigen::MatrixXd gen_arma_cov(const Eigen::MatrixXd& v, int n,
                             const std::vector<double>& ar,
                             const std::vector<double>& ma, RngStream& rng,
                             int burn_in = 0);

/// Bartlett construction; the result has mean dof * sigma.
Eigen::MatrixXd wishart_bartlett(const Eigen::MatrixXd& sigma, int dof, RngStream& rng);

/// n correlation matrices with population matrix lambda: a random variance
/// profile scales lambda to a covariance (inert after rescaling, kept for
/// construction fidelity), per-subject covariances come from the Wishart
/// (i.i.d. rows) or ARMA branch, and each is scaled back to a correlation.
std::vector<CorrelationMatrix> gen_samples(const CorrelationMatrix& lambda, int n, int T,
                                           const std::vector<double>& ar,
                                           const std::vector<double>& ma, RngStream& rng);

/// Control group from theta, perturbed group from link(theta, alpha).
TwoGroupSample make_two_group_sample(const CorrelationMatrix& theta,
                                     const Eigen::VectorXd& alpha, const LinkModel& link,
                                     const SimParams& params, RngStream& rng);

}  // namespace corrdiff

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "corrdiff/corrmat.hpp"
#include "corrdiff/estimate.hpp"
#include "corrdiff/link.hpp"

namespace corrdiff {

enum class VarianceMethod { Gee, Jackknife };
const char* variance_method_name(VarianceMethod method);

struct AlphaCovariance {
  Eigen::MatrixXd matrix;  // p x p covariance of the alpha estimate
  VarianceMethod method = VarianceMethod::Gee;
  double inflation_applied = 1.0;  // multiplier already applied to SDs downstream
};

/// Sandwich covariance I0^{-1} I1 I0^{-1} at the fitted solution. The theta
/// estimate is itself a function of alpha through the moment update, so the
/// perturbed-group Jacobian is the total derivative (link Jacobian plus the
/// chain through the theta update); the control group contributes through the
/// theta-update Jacobian alone. Empirical residual covariances use divisor
/// n_g - 1. SingularBread if the bread matrix is not invertible.
AlphaCovariance gee_covariance(const FitResult& fit, const TwoGroupSample& sample,
                               const LinkModel& link);

struct JackknifeResult {
  Eigen::VectorXd alpha_jack;
  AlphaCovariance covariance;
  Eigen::MatrixXd loo_estimates;  // one row per fold, control folds first
};

/// Leave-one-subject-out refits, warm-started from the full-data solution.
/// The estimate is the group-size weighted mean of the per-group fold means;
/// the covariance sums the two ((n_g - 1) / n_g)-scaled scatter matrices.
/// Any failed fold aborts with diagnostics.
JackknifeResult jackknife(const TwoGroupSample& sample, const LinkModel& link,
                          const FitConfig& config, const FitResult& fit,
                          int threads = 1);

/// Location correction: subtract the median, add the link's null value.
Eigen::VectorXd median_center(const Eigen::VectorXd& alpha_hat, const LinkModel& link);

struct InferenceRow {
  int index = 0;  // 1-based variable index (original numbering when labelled)
  std::string name;
  double alpha_tilde = 0.0;
  double sd = 0.0;
  double z_value = 0.0;
  double p_value = 1.0;
  double p_adjusted = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool selected = false;
  bool tested = true;  // false when sd == 0 (excluded from testing, reported)
};

struct InferenceTable {
  std::vector<InferenceRow> rows;
  double q_level = 0.05;
  std::string correction_method = "BH";
  int n_selected = 0;
  VarianceMethod method = VarianceMethod::Gee;
  double inflation = 1.0;
};

/// Wald z-tests against the link null with BH-adjusted p-values and
/// FCR-adjusted confidence intervals: the R selected variables get marginal
/// level 1 - R q / p, the rest plain 1 - q intervals.
InferenceTable wald_inference(const Eigen::VectorXd& alpha, const AlphaCovariance& cov,
                              double q, double inflate, double null_value);

struct MassUnivariateRow {
  int k = 0, l = 0;  // 0-based pair
  double t_statistic = 0.0;
  double welch_df = 0.0;
  double p_value = 1.0;
  double p_adjusted = 1.0;
  bool degenerate = false;  // a group had constant transformed values
};

struct MassUnivariateTable {
  std::vector<MassUnivariateRow> rows;  // m = p(p-1)/2 rows
  double q_level = 0.05;
};

/// Welch t-test per off-diagonal pair on Fisher-transformed values, BH
/// correction across all m tests. Degenerate pairs are flagged with p = 1.
MassUnivariateTable mass_univariate(const TwoGroupSample& sample, double q);

struct PowerConfig {
  int p = 16;
  int n_h = 50, n_d = 50;
  int T = 100;
  double non_null_prop = 0.1;
  std::vector<double> effect_sizes;  // non-null alpha = 1 - effect
  int replications = 200;
  double q = 0.05;
  double inflate = 1.10;
  std::vector<double> ar, ma;
  std::uint64_t seed = 0;
};

struct PowerCell {
  double effect_size = 0.0;
  int replicate = 0;
  double model_global_reject = 0.0;    // any BH selection among the p tests
  double model_nonnull_power = 0.0;    // fraction of truly non-null alphas selected
  double mu_global_reject = 0.0;       // any BH rejection among the m pair tests
  double mu_affected_power = 0.0;      // fraction of truly affected pairs rejected
};

/// Model vs mass-univariate power over a grid of effect sizes; replicate r
/// shares its random stream across effect sizes (common random numbers).
std::vector<PowerCell> power_comparison(const PowerConfig& config,
                                        const LinkModel& link,
                                        const FitConfig& fit_config, int threads = 1);

}  // namespace corrdiff

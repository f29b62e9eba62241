#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace corrdiff {

/// Per-dimension PSD tolerance: ingestion accepts min eigenvalue >= -tol * p.
inline constexpr double kPsdTolPerDim = 1e-8;

/// Symmetric matrix with unit diagonal and entries in [-1, 1] (up to a PSD
/// tolerance for observed data). `validated` enforces the invariants and is
/// the path for external data; `unchecked` is for internally produced
/// matrices, which may carry range violations that downstream diagnostics
/// report rather than clip.
class CorrelationMatrix {
 public:
  static CorrelationMatrix validated(Eigen::MatrixXd entries,
                                     double psd_tol_per_dim = kPsdTolPerDim);
  static CorrelationMatrix unchecked(Eigen::MatrixXd entries);
  static CorrelationMatrix identity(int p);

  int p() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXd& mat() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

  double min_eigenvalue() const;
  /// Off-diagonal (i, j) pairs (i < j) with |entry| > 1 + tol.
  std::vector<std::pair<int, int>> range_violations(double tol = 1e-9) const;

 private:
  explicit CorrelationMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {}
  Eigen::MatrixXd m_;
};

/// Two labelled groups of correlation matrices sharing one dimension.
/// T is the per-subject measurement count; it is informational (effective
/// degrees of freedom diagnostics) and never enters the estimation itself.
struct TwoGroupSample {
  std::vector<CorrelationMatrix> healthy;   // control group
  std::vector<CorrelationMatrix> diseased;  // perturbed group
  int T = 0;                                // 0 = not provided

  int n_h() const { return static_cast<int>(healthy.size()); }
  int n_d() const { return static_cast<int>(diseased.size()); }
  int p() const;
  void validate() const;  // shared dimension, at least 2 subjects per group
};

// Upper-triangle vectorization, row-major: (0,1), (0,2), ..., (0,p-1), (1,2), ...
int pair_count(int p);
int pair_index(int i, int j, int p);
std::pair<int, int> pair_from_index(int a, int p);

Eigen::VectorXd vectorize(const CorrelationMatrix& r);
Eigen::VectorXd vectorize(const Eigen::MatrixXd& r);

/// Inverse of vectorize; fails with NonTriangularLength if the size is not
/// p(p-1)/2 for an integer p.
CorrelationMatrix unvectorize(const Eigen::VectorXd& v);

/// scale(W) = diag(W)^{-1/2} W diag(W)^{-1/2}; NonPositiveDiagonal if any
/// W_ii <= 0. The diagonal of the result is exactly 1.
CorrelationMatrix scale_to_correlation(const Eigen::MatrixXd& w);

/// Asymptotic covariance (scaled by the measurement count) of the vectorized
/// empirical correlation matrix of a Gaussian sample with population
/// correlation rho. Dense m x m, exactly symmetric.
Eigen::MatrixXd corr_covariance(const CorrelationMatrix& rho);

/// The mean-of-squares statistic is printed as "root-mean-square" in the
/// source formula and then squared again in the effective-df denominator; the
/// two readings disagree, so both are exposed. Literal is the default.
enum class PsiReading { Literal, RootMeanSquare };

/// psi statistic over the off-diagonal correlations.
double psi_statistic(const CorrelationMatrix& rho,
                     PsiReading reading = PsiReading::Literal);

/// Effective degrees of freedom T / (1 + (T-1) psi^2), in (0, T].
double effective_df(int t, const CorrelationMatrix& rho,
                    PsiReading reading = PsiReading::Literal);

/// atanh(r); OutOfDomain at |r| >= 1.
double fisher_z(double r);

/// Entrywise mean; EmptyGroup / DimensionMismatch on bad input.
CorrelationMatrix group_average(const std::vector<CorrelationMatrix>& group);

}  // namespace corrdiff

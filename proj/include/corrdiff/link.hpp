#pragma once

#include <Eigen/Dense>
#include <string_view>

#include "corrdiff/corrmat.hpp"

namespace corrdiff {

enum class LinkKind { Multiplicative, AdditiveQuotient };

LinkKind link_from_name(std::string_view name);
const char* link_name(LinkKind kind);

/// A link maps (base correlation matrix, per-variable effects) to the
/// perturbed population's expected correlation matrix.
///
/// Multiplicative:     g_ij = Theta_ij * alpha_i * alpha_j, null alpha = 1.
/// Additive-quotient:  g_ij = Theta_ij / (1 + alpha_i + alpha_j), null = 0.
class LinkModel {
 public:
  explicit LinkModel(LinkKind kind) : kind_(kind) {}

  LinkKind kind() const { return kind_; }
  double null_value() const { return kind_ == LinkKind::Multiplicative ? 1.0 : 0.0; }
  Eigen::VectorXd null_alpha(int p) const {
    return Eigen::VectorXd::Constant(p, null_value());
  }

  /// Checked evaluation: raises EntryOutOfRange if an output entry leaves
  /// [-1, 1] (never clips) and QuotientPole at a vanishing denominator.
  CorrelationMatrix apply(const CorrelationMatrix& theta,
                          const Eigen::VectorXd& alpha) const;

  /// g^{-1} with g^{-1}(g(Theta, alpha), alpha) = Theta. Output entries may
  /// exceed [-1, 1]; they are reported downstream, not clipped here.
  CorrelationMatrix invert(const CorrelationMatrix& lambda,
                           const Eigen::VectorXd& alpha) const;

  // Unchecked entrywise maps used inside the estimator, where intermediate
  // matrices can legitimately leave the correlation space.
  Eigen::MatrixXd apply_unchecked(const Eigen::MatrixXd& theta,
                                  const Eigen::VectorXd& alpha) const;
  Eigen::MatrixXd invert_unchecked(const Eigen::MatrixXd& lambda,
                                   const Eigen::VectorXd& alpha) const;

  /// m x p Jacobian of vec g(theta, alpha) in alpha. Row a = (i, j) has at
  /// most two nonzeros, in columns i and j.
  Eigen::MatrixXd jacobian(const Eigen::MatrixXd& theta,
                           const Eigen::VectorXd& alpha) const;

  /// d g_ij / d Theta_ij as a length-m vector (the dependence is entrywise).
  Eigen::VectorXd dg_dtheta(const Eigen::VectorXd& alpha, int p) const;

  /// m x p Jacobian of vec g^{-1}(lambda, alpha) in alpha; linear in lambda.
  Eigen::MatrixXd inverse_jacobian(const Eigen::MatrixXd& lambda,
                                   const Eigen::VectorXd& alpha) const;

  /// Domain test used by the optimizer's line search: all alpha_j >= floor
  /// (multiplicative) or all pair denominators bounded away from the pole
  /// (additive-quotient).
  bool in_domain(const Eigen::VectorXd& alpha, double floor) const;

 private:
  void check_alpha(const Eigen::VectorXd& alpha) const;
  LinkKind kind_;
};

/// Slack of the sufficient PSD condition for the multiplicative link:
/// lambda_min(Theta) - (max|alpha|^2 - 1) / min|alpha|^2. Nonnegative slack
/// certifies a PSD output; a negative value is inconclusive.
double psd_margin(const CorrelationMatrix& theta, const Eigen::VectorXd& alpha);

struct IdentifiabilityReport {
  bool identifiable = false;
  int rank = 0;
  int nonzero_count = 0;
};

/// Builds the incidence matrix with one row e_i + e_j per off-diagonal entry
/// |Theta_ij| > zero_threshold; the model is identifiable iff it has rank p.
IdentifiabilityReport identifiability_check(const CorrelationMatrix& theta,
                                            double zero_threshold = 1e-10);

}  // namespace corrdiff

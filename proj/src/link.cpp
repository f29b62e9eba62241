#include "corrdiff/link.hpp"

#include <cmath>
#include <string>

#include "corrdiff/errors.hpp"

namespace corrdiff {

namespace {
constexpr double kRangeTol = 1e-9;
constexpr double kPoleTol = 1e-12;
}  // namespace

LinkKind link_from_name(std::string_view name) {
  if (name == "multiplicative") return LinkKind::Multiplicative;
  if (name == "additive_quotient") return LinkKind::AdditiveQuotient;
  fail(ErrorCode::ConfigError, "unknown link '" + std::string(name) +
                                   "' (expected multiplicative | additive_quotient)");
}

const char* link_name(LinkKind kind) {
  return kind == LinkKind::Multiplicative ? "multiplicative" : "additive_quotient";
}

void LinkModel::check_alpha(const Eigen::VectorXd& alpha) const {
  if (kind_ == LinkKind::Multiplicative) {
    for (Eigen::Index j = 0; j < alpha.size(); ++j)
      if (alpha[j] == 0.0)
        fail(ErrorCode::ZeroAlpha, "alpha[" + std::to_string(j) + "] = 0");
  }
}

Eigen::MatrixXd LinkModel::apply_unchecked(const Eigen::MatrixXd& theta,
                                           const Eigen::VectorXd& alpha) const {
  const auto p = theta.rows();
  Eigen::MatrixXd g(p, p);
  if (kind_ == LinkKind::Multiplicative) {
    g = theta.cwiseProduct(alpha * alpha.transpose());
  } else {
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = 0; j < p; ++j) {
        double denom = 1.0 + alpha[i] + alpha[j];
        if (std::abs(denom) < kPoleTol)
          fail(ErrorCode::QuotientPole, "1 + alpha_i + alpha_j vanishes at (" +
                                            std::to_string(i) + "," + std::to_string(j) + ")");
        g(i, j) = theta(i, j) / denom;
      }
  }
  g.diagonal().setOnes();
  return g;
}

CorrelationMatrix LinkModel::apply(const CorrelationMatrix& theta,
                                   const Eigen::VectorXd& alpha) const {
  if (alpha.size() != theta.p())
    fail(ErrorCode::DimensionMismatch, "alpha length does not match matrix dimension");
  Eigen::MatrixXd g = apply_unchecked(theta.mat(), alpha);
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = i + 1; j < g.cols(); ++j)
      if (std::abs(g(i, j)) > 1.0 + kRangeTol)
        fail(ErrorCode::EntryOutOfRange,
             "link output " + std::to_string(g(i, j)) + " at (" + std::to_string(i) + "," +
                 std::to_string(j) + ") leaves [-1, 1]");
  return CorrelationMatrix::unchecked(std::move(g));
}

Eigen::MatrixXd LinkModel::invert_unchecked(const Eigen::MatrixXd& lambda,
                                            const Eigen::VectorXd& alpha) const {
  const auto p = lambda.rows();
  Eigen::MatrixXd theta(p, p);
  if (kind_ == LinkKind::Multiplicative) {
    theta = lambda.cwiseQuotient(alpha * alpha.transpose());
  } else {
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = 0; j < p; ++j)
        theta(i, j) = lambda(i, j) * (1.0 + alpha[i] + alpha[j]);
  }
  theta.diagonal().setOnes();
  return theta;
}

CorrelationMatrix LinkModel::invert(const CorrelationMatrix& lambda,
                                    const Eigen::VectorXd& alpha) const {
  if (alpha.size() != lambda.p())
    fail(ErrorCode::DimensionMismatch, "alpha length does not match matrix dimension");
  check_alpha(alpha);
  return CorrelationMatrix::unchecked(invert_unchecked(lambda.mat(), alpha));
}

Eigen::MatrixXd LinkModel::jacobian(const Eigen::MatrixXd& theta,
                                    const Eigen::VectorXd& alpha) const {
  const int p = static_cast<int>(theta.rows());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(pair_count(p), p);
  int a = 0;
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j, ++a) {
      if (kind_ == LinkKind::Multiplicative) {
        jac(a, i) = theta(i, j) * alpha[j];
        jac(a, j) = theta(i, j) * alpha[i];
      } else {
        double denom = 1.0 + alpha[i] + alpha[j];
        double d = -theta(i, j) / (denom * denom);
        jac(a, i) = d;
        jac(a, j) = d;
      }
    }
  return jac;
}

Eigen::VectorXd LinkModel::dg_dtheta(const Eigen::VectorXd& alpha, int p) const {
  Eigen::VectorXd d(pair_count(p));
  int a = 0;
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j, ++a)
      d[a] = kind_ == LinkKind::Multiplicative ? alpha[i] * alpha[j]
                                               : 1.0 / (1.0 + alpha[i] + alpha[j]);
  return d;
}

Eigen::MatrixXd LinkModel::inverse_jacobian(const Eigen::MatrixXd& lambda,
                                            const Eigen::VectorXd& alpha) const {
  const int p = static_cast<int>(lambda.rows());
  check_alpha(alpha);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(pair_count(p), p);
  int a = 0;
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j, ++a) {
      if (kind_ == LinkKind::Multiplicative) {
        double base = lambda(i, j) / (alpha[i] * alpha[j]);
        jac(a, i) = -base / alpha[i];
        jac(a, j) = -base / alpha[j];
      } else {
        jac(a, i) = lambda(i, j);
        jac(a, j) = lambda(i, j);
      }
    }
  return jac;
}

bool LinkModel::in_domain(const Eigen::VectorXd& alpha, double floor) const {
  if (kind_ == LinkKind::Multiplicative) return (alpha.array() >= floor).all();
  for (Eigen::Index i = 0; i < alpha.size(); ++i)
    for (Eigen::Index j = i; j < alpha.size(); ++j)
      if (std::abs(1.0 + alpha[i] + alpha[j]) < floor) return false;
  return true;
}

double psd_margin(const CorrelationMatrix& theta, const Eigen::VectorXd& alpha) {
  double alpha_min = alpha.array().abs().minCoeff();
  double alpha_max = alpha.array().abs().maxCoeff();
  if (alpha_min == 0.0) fail(ErrorCode::ZeroAlpha, "psd_margin requires alpha_j != 0");
  return theta.min_eigenvalue() - (alpha_max * alpha_max - 1.0) / (alpha_min * alpha_min);
}

IdentifiabilityReport identifiability_check(const CorrelationMatrix& theta,
                                            double zero_threshold) {
  const int p = theta.p();
  std::vector<std::pair<int, int>> nonzero;
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j)
      if (std::abs(theta(i, j)) > zero_threshold) nonzero.emplace_back(i, j);

  IdentifiabilityReport report;
  report.nonzero_count = static_cast<int>(nonzero.size());
  if (report.nonzero_count == 0) return report;
  Eigen::MatrixXd incidence = Eigen::MatrixXd::Zero(report.nonzero_count, p);
  for (int row = 0; row < report.nonzero_count; ++row) {
    incidence(row, nonzero[row].first) = 1.0;
    incidence(row, nonzero[row].second) = 1.0;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(incidence);
  qr.setThreshold(1e-10);
  report.rank = static_cast<int>(qr.rank());
  report.identifiable = report.rank == p;
  return report;
}

}  // namespace corrdiff

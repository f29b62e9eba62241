#include "corrdiff/sim_generators.hpp"

#include <cmath>
#include <utility>

#include "corrdiff/errors.hpp"

namespace corrdiff {

namespace {

Eigen::MatrixXd gaussian_matrix(int rows, int cols, RngStream& rng) {
  Eigen::MatrixXd x(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) x(i, j) = rng.normal();
  return x;
}

Eigen::MatrixXd cholesky_of(const Eigen::MatrixXd& sigma, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    fail(ErrorCode::NonPositiveDefinite, std::string(what) + " is not positive definite");
  return llt.matrixL();
}

}  // namespace

GeneratedParameters gen_parameters(const SimParams& params, RngStream& rng) {
  const int p = params.p;
  if (p < 2) fail(ErrorCode::InvalidArgument, "simulation dimension must be >= 2");
  if (params.alpha_low > params.alpha_high)
    fail(ErrorCode::InvalidArgument, "alpha_range low > high");
  Eigen::MatrixXd x = gaussian_matrix(2 * p, p, rng);
  GeneratedParameters out;
  out.theta = scale_to_correlation(x.transpose() * x);
  out.alpha = Eigen::VectorXd::Ones(p);
  const int non_null = static_cast<int>(std::nearbyint(params.alpha_prop * p));
  for (int j = 0; j < non_null && j < p; ++j)
    out.alpha[j] = rng.uniform(params.alpha_low, params.alpha_high);
  return out;
}

Eigen::MatrixXd arma_filter(const Eigen::MatrixXd& x, const std::vector<double>& ar,
                            const std::vector<double>& ma) {
  const int n = static_cast<int>(x.rows());
  Eigen::MatrixXd y = x;
  for (int i = 0; i < n; ++i)
    for (int j = 1; j <= static_cast<int>(ma.size()); ++j)
      if (i - j >= 0) y.row(i) += ma[j - 1] * x.row(i - j);
  for (int i = 0; i < n; ++i)
    for (int j = 1; j <= static_cast<int>(ar.size()); ++j)
      if (i - j >= 0) y.row(i) += ar[j - 1] * y.row(i - j);
  return y;
}

Eigen::MatrixXd gen_arma_cov(const Eigen::MatrixXd& v, int n,
                             const std::vector<double>& ar,
                             const std::vector<double>& ma, RngStream& rng,
                             int burn_in) {
  const int lag_max = static_cast<int>(std::max(ar.size(), ma.size()));
  if (n <= lag_max)
    fail(ErrorCode::InvalidArgument, "row count must exceed the filter order");
  Eigen::MatrixXd chol = cholesky_of(v, "row covariance");
  Eigen::MatrixXd x =
      gaussian_matrix(n + burn_in, static_cast<int>(v.rows()), rng) * chol.transpose();
  Eigen::MatrixXd y = arma_filter(x, ar, ma);
  if (burn_in > 0) y = y.bottomRows(n).eval();
  return y.transpose() * y / static_cast<double>(n);
}

Eigen::MatrixXd wishart_bartlett(const Eigen::MatrixXd& sigma, int dof, RngStream& rng) {
  const int p = static_cast<int>(sigma.rows());
  if (dof < p)
    fail(ErrorCode::InvalidArgument, "Wishart degrees of freedom must be >= dimension");
  Eigen::MatrixXd chol = cholesky_of(sigma, "Wishart scale");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < p; ++i) {
    a(i, i) = std::sqrt(rng.chi_square(static_cast<double>(dof - i)));
    for (int j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  Eigen::MatrixXd la = chol * a;
  return la * la.transpose();
}

std::vector<CorrelationMatrix> gen_samples(const CorrelationMatrix& lambda, int n, int T,
                                           const std::vector<double>& ar,
                                           const std::vector<double>& ma,
                                           RngStream& rng) {
  const int p = lambda.p();
  Eigen::VectorXd xs(p);
  for (int j = 0; j < p; ++j) xs[j] = rng.uniform(std::sqrt(10.0), 10.0);
  Eigen::MatrixXd xi = lambda.mat().cwiseProduct(xs * xs.transpose());

  std::vector<CorrelationMatrix> out;
  out.reserve(n);
  const bool use_arma = !ar.empty() || !ma.empty();
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd w = use_arma
                            ? gen_arma_cov(xi, T, ar, ma, rng)
                            : wishart_bartlett(xi, T, rng) / static_cast<double>(T);
    out.push_back(scale_to_correlation(w));
  }
  return out;
}

TwoGroupSample make_two_group_sample(const CorrelationMatrix& theta,
                                     const Eigen::VectorXd& alpha, const LinkModel& link,
                                     const SimParams& params, RngStream& rng) {
  TwoGroupSample sample;
  sample.T = params.T;
  CorrelationMatrix lambda_d = link.apply(theta, alpha);
  sample.healthy = gen_samples(theta, params.n_h, params.T, params.ar, params.ma, rng);
  sample.diseased =
      gen_samples(lambda_d, params.n_d, params.T, params.ar, params.ma, rng);
  return sample;
}

}  // namespace corrdiff

#include "corrdiff/corrmat.hpp"

#include <cmath>
#include <string>

#include "corrdiff/errors.hpp"

namespace corrdiff {

namespace {
constexpr double kSymTol = 1e-10;
constexpr double kDiagTol = 1e-8;
constexpr double kRangeTol = 1e-9;
}  // namespace

CorrelationMatrix CorrelationMatrix::validated(Eigen::MatrixXd entries,
                                               double psd_tol_per_dim) {
  const auto rows = entries.rows();
  if (rows == 0 || rows != entries.cols())
    fail(ErrorCode::DimensionMismatch, "correlation matrix must be square and non-empty");
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!std::isfinite(entries(i, i)) || std::abs(entries(i, i) - 1.0) > kDiagTol)
      fail(ErrorCode::InvalidArgument,
           "diagonal entry (" + std::to_string(i) + ") is not 1");
    for (Eigen::Index j = i + 1; j < rows; ++j) {
      double a = entries(i, j), b = entries(j, i);
      if (!std::isfinite(a) || !std::isfinite(b))
        fail(ErrorCode::InvalidArgument,
             "non-finite entry at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      if (std::abs(a - b) > kSymTol)
        fail(ErrorCode::InvalidArgument,
             "asymmetry at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      if (std::abs(a) > 1.0 + kRangeTol)
        fail(ErrorCode::EntryOutOfRange,
             "entry (" + std::to_string(i) + "," + std::to_string(j) + ") outside [-1, 1]");
    }
    entries(i, i) = 1.0;
  }
  // Exact symmetry so vectorize round-trips bit-for-bit.
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = i + 1; j < rows; ++j) entries(j, i) = entries(i, j);
  CorrelationMatrix r(std::move(entries));
  double min_eig = r.min_eigenvalue();
  if (min_eig < -psd_tol_per_dim * static_cast<double>(rows))
    fail(ErrorCode::PsdViolation,
         "minimal eigenvalue " + std::to_string(min_eig) + " below tolerance");
  return r;
}

CorrelationMatrix CorrelationMatrix::unchecked(Eigen::MatrixXd entries) {
  return CorrelationMatrix(std::move(entries));
}

CorrelationMatrix CorrelationMatrix::identity(int p) {
  return CorrelationMatrix(Eigen::MatrixXd::Identity(p, p));
}

double CorrelationMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m_, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

std::vector<std::pair<int, int>> CorrelationMatrix::range_violations(double tol) const {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < p(); ++i)
    for (int j = i + 1; j < p(); ++j)
      if (std::abs(m_(i, j)) > 1.0 + tol) out.emplace_back(i, j);
  return out;
}

int TwoGroupSample::p() const {
  if (!healthy.empty()) return healthy.front().p();
  if (!diseased.empty()) return diseased.front().p();
  return 0;
}

void TwoGroupSample::validate() const {
  if (n_h() < 2 || n_d() < 2)
    fail(ErrorCode::EmptyGroup, "each group needs at least 2 subjects (n_h=" +
                                    std::to_string(n_h()) + ", n_d=" + std::to_string(n_d()) + ")");
  const int dim = p();
  for (const auto& r : healthy)
    if (r.p() != dim) fail(ErrorCode::DimensionMismatch, "control group dimensions differ");
  for (const auto& r : diseased)
    if (r.p() != dim) fail(ErrorCode::DimensionMismatch, "perturbed group dimensions differ");
}

int pair_count(int p) { return p * (p - 1) / 2; }

int pair_index(int i, int j, int p) {
  // Row-major upper triangle, i < j.
  return i * p - i * (i + 1) / 2 + (j - i - 1);
}

std::pair<int, int> pair_from_index(int a, int p) {
  int i = 0;
  int row_len = p - 1;
  while (a >= row_len) {
    a -= row_len;
    --row_len;
    ++i;
  }
  return {i, i + 1 + a};
}

Eigen::VectorXd vectorize(const Eigen::MatrixXd& r) {
  const int p = static_cast<int>(r.rows());
  Eigen::VectorXd v(pair_count(p));
  int a = 0;
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) v[a++] = r(i, j);
  return v;
}

Eigen::VectorXd vectorize(const CorrelationMatrix& r) { return vectorize(r.mat()); }

CorrelationMatrix unvectorize(const Eigen::VectorXd& v) {
  const auto m = v.size();
  // p(p-1)/2 = m  =>  p = (1 + sqrt(1 + 8m)) / 2
  const auto p_real = (1.0 + std::sqrt(1.0 + 8.0 * static_cast<double>(m))) / 2.0;
  const int p = static_cast<int>(std::lround(p_real));
  if (p < 1 || pair_count(p) != m)
    fail(ErrorCode::NonTriangularLength,
         "length " + std::to_string(m) + " is not p(p-1)/2 for integer p");
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(p, p);
  int a = 0;
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) {
      out(i, j) = v[a];
      out(j, i) = v[a];
      ++a;
    }
  return CorrelationMatrix::unchecked(std::move(out));
}

CorrelationMatrix scale_to_correlation(const Eigen::MatrixXd& w) {
  const auto p = w.rows();
  if (p != w.cols()) fail(ErrorCode::DimensionMismatch, "scale requires a square matrix");
  Eigen::VectorXd inv_sd(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    if (!(w(i, i) > 0.0))
      fail(ErrorCode::NonPositiveDiagonal,
           "diagonal entry " + std::to_string(i) + " is " + std::to_string(w(i, i)));
    inv_sd[i] = 1.0 / std::sqrt(w(i, i));
  }
  Eigen::MatrixXd r = inv_sd.asDiagonal() * w * inv_sd.asDiagonal();
  for (Eigen::Index i = 0; i < p; ++i) {
    r(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < p; ++j) r(j, i) = r(i, j);
  }
  return CorrelationMatrix::unchecked(std::move(r));
}

Eigen::MatrixXd corr_covariance(const CorrelationMatrix& rho) {
  const int p = rho.p();
  const int m = pair_count(p);
  const Eigen::MatrixXd& r = rho.mat();
  Eigen::MatrixXd c(m, m);
  int a = 0;
  for (int i = 0; i < p; ++i) {
    for (int j = i + 1; j < p; ++j, ++a) {
      int b = a;
      for (int k = i; k < p; ++k) {
        for (int l = (k == i ? j : k + 1); l < p; ++l, ++b) {
          double r_ij = r(i, j), r_kl = r(k, l);
          double r_ik = r(i, k), r_il = r(i, l), r_jk = r(j, k), r_jl = r(j, l);
          double value =
              0.5 * r_ij * r_kl * (r_ik * r_ik + r_il * r_il + r_jk * r_jk + r_jl * r_jl) -
              r_ij * (r_ik * r_il + r_jk * r_jl) - r_kl * (r_ik * r_jk + r_il * r_jl) +
              (r_ik * r_jl + r_il * r_jk);
          c(a, b) = value;
          c(b, a) = value;
        }
      }
    }
  }
  return c;
}

double psi_statistic(const CorrelationMatrix& rho, PsiReading reading) {
  const int p = rho.p();
  const int m = pair_count(p);
  if (m == 0) return 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) sum_sq += rho(i, j) * rho(i, j);
  double mean_sq = sum_sq / m;
  return reading == PsiReading::Literal ? mean_sq : std::sqrt(mean_sq);
}

double effective_df(int t, const CorrelationMatrix& rho, PsiReading reading) {
  if (t < 2) fail(ErrorCode::InvalidArgument, "effective_df requires T >= 2");
  double psi = psi_statistic(rho, reading);
  return t / (1.0 + (t - 1) * psi * psi);
}

double fisher_z(double r) {
  if (!(std::abs(r) < 1.0))
    fail(ErrorCode::OutOfDomain, "fisher_z requires |r| < 1, got " + std::to_string(r));
  return std::atanh(r);
}

CorrelationMatrix group_average(const std::vector<CorrelationMatrix>& group) {
  if (group.empty()) fail(ErrorCode::EmptyGroup, "group_average of empty group");
  const int p = group.front().p();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(p, p);
  for (const auto& r : group) {
    if (r.p() != p) fail(ErrorCode::DimensionMismatch, "group_average dimensions differ");
    sum += r.mat();
  }
  sum /= static_cast<double>(group.size());
  sum.diagonal().setOnes();
  return CorrelationMatrix::unchecked(std::move(sum));
}

}  // namespace corrdiff

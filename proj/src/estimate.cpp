#include "corrdiff/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "corrdiff/errors.hpp"
#include "corrdiff/parallel.hpp"

namespace corrdiff {

namespace {

// Cached per-group sums: the quadratic loss in (Theta, alpha) only needs the
// vectorized group sums and the constant sum_i R_i' C^{-1} R_i, so each
// objective/gradient evaluation costs a single triangular solve.
struct GlsTerms {
  Eigen::VectorXd sum_h;
  Eigen::VectorXd sum_d;
  double const_h = 0.0;
  double const_d = 0.0;
  int n_h = 0;
  int n_d = 0;
};

GlsTerms build_terms(const TwoGroupSample& sample, const WeightMatrices& weights) {
  GlsTerms terms;
  terms.n_h = sample.n_h();
  terms.n_d = sample.n_d();
  const int m = static_cast<int>(weights.c_bar_h.rows());
  terms.sum_h = Eigen::VectorXd::Zero(m);
  terms.sum_d = Eigen::VectorXd::Zero(m);
  for (const auto& r : sample.healthy) {
    Eigen::VectorXd v = vectorize(r);
    terms.sum_h += v;
    terms.const_h += v.dot(weights.factor_h.solve(v));
  }
  for (const auto& r : sample.diseased) {
    Eigen::VectorXd v = vectorize(r);
    terms.sum_d += v;
    terms.const_d += v.dot(weights.factor_d.solve(v));
  }
  return terms;
}

double quadratic_part(const Eigen::VectorXd& mean_vec, const Eigen::VectorXd& sum_vec,
                      double const_term, int n,
                      const Eigen::LLT<Eigen::MatrixXd>& factor) {
  Eigen::VectorXd w = factor.solve(mean_vec);
  return const_term - 2.0 * sum_vec.dot(w) + n * mean_vec.dot(w);
}

double loss_from_terms(const Eigen::MatrixXd& theta, const Eigen::VectorXd& alpha,
                       const GlsTerms& terms, const WeightMatrices& weights,
                       const LinkModel& link) {
  Eigen::VectorXd theta_vec = vectorize(theta);
  Eigen::VectorXd g_vec = vectorize(link.apply_unchecked(theta, alpha));
  double s_h = quadratic_part(theta_vec, terms.sum_h, terms.const_h, terms.n_h,
                              weights.factor_h);
  double s_d = quadratic_part(g_vec, terms.sum_d, terms.const_d, terms.n_d,
                              weights.factor_d);
  return std::max(0.0, s_h + s_d);
}

double sd_loss_from_terms(const Eigen::MatrixXd& theta, const Eigen::VectorXd& alpha,
                          const GlsTerms& terms, const WeightMatrices& weights,
                          const LinkModel& link) {
  Eigen::VectorXd g_vec = vectorize(link.apply_unchecked(theta, alpha));
  return quadratic_part(g_vec, terms.sum_d, terms.const_d, terms.n_d, weights.factor_d);
}

// grad = -2 J^t C_d^{-1} (sum_d - n_d g); J has two nonzeros per row, so the
// transpose-product is accumulated directly.
Eigen::VectorXd sd_gradient_from_terms(const Eigen::MatrixXd& theta,
                                       const Eigen::VectorXd& alpha,
                                       const GlsTerms& terms,
                                       const WeightMatrices& weights,
                                       const LinkModel& link) {
  const int p = static_cast<int>(theta.rows());
  Eigen::VectorXd g_vec = vectorize(link.apply_unchecked(theta, alpha));
  Eigen::VectorXd residual = terms.sum_d - static_cast<double>(terms.n_d) * g_vec;
  Eigen::VectorXd u = weights.factor_d.solve(residual);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(p);
  int a = 0;
  if (link.kind() == LinkKind::Multiplicative) {
    for (int i = 0; i < p; ++i)
      for (int j = i + 1; j < p; ++j, ++a) {
        grad[i] += theta(i, j) * alpha[j] * u[a];
        grad[j] += theta(i, j) * alpha[i] * u[a];
      }
  } else {
    for (int i = 0; i < p; ++i)
      for (int j = i + 1; j < p; ++j, ++a) {
        double denom = 1.0 + alpha[i] + alpha[j];
        double d = -theta(i, j) / (denom * denom);
        grad[i] += d * u[a];
        grad[j] += d * u[a];
      }
  }
  return -2.0 * grad;
}

Eigen::VectorXd project_to_domain(const LinkModel& link, Eigen::VectorXd alpha,
                                  double floor) {
  if (link.kind() == LinkKind::Multiplicative)
    alpha = alpha.cwiseMax(floor);
  return alpha;
}

AlphaMinimizeResult minimize_alpha_terms(const Eigen::MatrixXd& theta,
                                         const GlsTerms& terms,
                                         const WeightMatrices& weights,
                                         const LinkModel& link,
                                         const Eigen::VectorXd& alpha_start,
                                         const FitConfig& config) {
  AlphaMinimizeResult result;
  result.alpha = project_to_domain(link, alpha_start, config.alpha_floor);
  // Step length and stopping threshold carry the weight gauge, so a common
  // rescaling of both weight matrices leaves the trajectory unchanged.
  const double gauge = weights.gauge;
  double current = sd_loss_from_terms(theta, result.alpha, terms, weights, link);
  for (int iter = 0; iter < config.max_inner_iters; ++iter) {
    Eigen::VectorXd grad =
        sd_gradient_from_terms(theta, result.alpha, terms, weights, link);
    result.grad_norm = grad.lpNorm<Eigen::Infinity>() * gauge;
    if (result.grad_norm <= config.inner_tol) return result;

    double step = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 80; ++bt) {
      Eigen::VectorXd candidate =
          project_to_domain(link, result.alpha - (step * gauge) * grad,
                            config.alpha_floor);
      if (!link.in_domain(candidate, config.alpha_floor)) {
        step *= config.armijo_shrink;
        continue;
      }
      double directional = grad.dot(candidate - result.alpha);
      if (directional >= 0.0) break;  // projection ate the whole step
      double trial = sd_loss_from_terms(theta, candidate, terms, weights, link);
      if (trial <= current + config.armijo_c * directional) {
        result.alpha = std::move(candidate);
        current = trial;
        accepted = true;
        break;
      }
      step *= config.armijo_shrink;
    }
    ++result.iterations;
    if (!accepted) {
      result.stalled = true;
      return result;
    }
  }
  Eigen::VectorXd grad =
      sd_gradient_from_terms(theta, result.alpha, terms, weights, link);
  result.grad_norm = grad.lpNorm<Eigen::Infinity>() * gauge;
  return result;
}

}  // namespace

WeightMatrices weights_from_sums(Eigen::MatrixXd sum_h, int n_h, Eigen::MatrixXd sum_d,
                                 int n_d, double lambda) {
  WeightMatrices weights;
  weights.c_bar_h = sum_h / static_cast<double>(n_h);
  weights.c_bar_d = sum_d / static_cast<double>(n_d);
  const int m = static_cast<int>(weights.c_bar_h.rows());

  if ((weights.c_bar_h.diagonal().array() <= 0.0).any() ||
      (weights.c_bar_d.diagonal().array() <= 0.0).any())
    fail(ErrorCode::DegenerateWeights, "weight matrix has a non-positive diagonal entry");

  auto try_factorize = [&](double applied) {
    Eigen::MatrixXd reg_h =
        (1.0 - applied) * weights.c_bar_h +
        applied * Eigen::MatrixXd(weights.c_bar_h.diagonal().asDiagonal());
    Eigen::MatrixXd reg_d =
        (1.0 - applied) * weights.c_bar_d +
        applied * Eigen::MatrixXd(weights.c_bar_d.diagonal().asDiagonal());
    Eigen::LLT<Eigen::MatrixXd> llt_h(reg_h);
    if (llt_h.info() != Eigen::Success) return false;
    Eigen::LLT<Eigen::MatrixXd> llt_d(reg_d);
    if (llt_d.info() != Eigen::Success) return false;
    weights.c_bar_h = std::move(reg_h);
    weights.c_bar_d = std::move(reg_d);
    weights.factor_h = std::move(llt_h);
    weights.factor_d = std::move(llt_d);
    weights.regularization = applied;
    return true;
  };

  double applied = std::clamp(lambda, 0.0, 1.0);
  for (;;) {
    if (try_factorize(applied)) break;
    if (applied >= 1.0)
      fail(ErrorCode::DegenerateWeights,
           "weight factorization failed even at full diagonal shrinkage");
    applied = applied == 0.0 ? 1e-6 : std::min(1.0, applied * 10.0);
  }
  weights.gauge = (weights.c_bar_h.trace() + weights.c_bar_d.trace()) / (2.0 * m);
  return weights;
}

WeightAccumulator accumulate_weight_terms(const TwoGroupSample& sample, int threads) {
  const int m = pair_count(sample.p());
  WeightAccumulator acc;
  acc.n_h = sample.n_h();
  acc.n_d = sample.n_d();
  acc.sum_h = Eigen::MatrixXd::Zero(m, m);
  acc.sum_d = Eigen::MatrixXd::Zero(m, m);

  // Per-subject covariance matrices are computed in parallel windows and
  // added in fixed subject order, so the sums are thread-count independent.
  auto accumulate_group = [&](const std::vector<CorrelationMatrix>& group,
                              Eigen::MatrixXd& sum) {
    const int n = static_cast<int>(group.size());
    const int window = std::max(1, threads);
    std::vector<Eigen::MatrixXd> slots(window);
    for (int start = 0; start < n; start += window) {
      const int count = std::min(window, n - start);
      parallel_for(count, threads,
                   [&](int k) { slots[k] = corr_covariance(group[start + k]); });
      for (int k = 0; k < count; ++k) sum += slots[k];
    }
  };
  accumulate_group(sample.healthy, acc.sum_h);
  accumulate_group(sample.diseased, acc.sum_d);
  return acc;
}

WeightMatrices build_weights(const TwoGroupSample& sample, double lambda, int threads) {
  sample.validate();
  WeightAccumulator acc = accumulate_weight_terms(sample, threads);
  return weights_from_sums(std::move(acc.sum_h), acc.n_h, std::move(acc.sum_d), acc.n_d,
                           lambda);
}

double loss(const CorrelationMatrix& theta, const Eigen::VectorXd& alpha,
            const TwoGroupSample& sample, const WeightMatrices& weights,
            const LinkModel& link) {
  Eigen::VectorXd theta_vec = vectorize(theta);
  Eigen::VectorXd g_vec = vectorize(link.apply_unchecked(theta.mat(), alpha));
  double total = 0.0;
  for (const auto& r : sample.healthy) {
    Eigen::VectorXd res = vectorize(r) - theta_vec;
    total += res.dot(weights.factor_h.solve(res));
  }
  for (const auto& r : sample.diseased) {
    Eigen::VectorXd res = vectorize(r) - g_vec;
    total += res.dot(weights.factor_d.solve(res));
  }
  return std::max(0.0, total);
}

Eigen::VectorXd loss_gradient_alpha(const CorrelationMatrix& theta,
                                    const Eigen::VectorXd& alpha,
                                    const TwoGroupSample& sample,
                                    const WeightMatrices& weights,
                                    const LinkModel& link) {
  GlsTerms terms;
  terms.n_d = sample.n_d();
  const int m = pair_count(sample.p());
  terms.sum_d = Eigen::VectorXd::Zero(m);
  for (const auto& r : sample.diseased) terms.sum_d += vectorize(r);
  return sd_gradient_from_terms(theta.mat(), alpha, terms, weights, link);
}

AlphaMinimizeResult minimize_alpha(const CorrelationMatrix& theta,
                                   const TwoGroupSample& sample,
                                   const WeightMatrices& weights,
                                   const LinkModel& link,
                                   const Eigen::VectorXd& alpha_start,
                                   const FitConfig& config) {
  GlsTerms terms = build_terms(sample, weights);
  return minimize_alpha_terms(theta.mat(), terms, weights, link, alpha_start, config);
}

CorrelationMatrix update_theta(const TwoGroupSample& sample, const Eigen::VectorXd& alpha,
                               const LinkModel& link) {
  const int p = sample.p();
  if (link.kind() == LinkKind::Multiplicative && (alpha.array() == 0.0).any())
    fail(ErrorCode::ZeroAlpha, "theta update requires alpha_j != 0");
  Eigen::MatrixXd sum_h = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd sum_d = Eigen::MatrixXd::Zero(p, p);
  for (const auto& r : sample.healthy) sum_h += r.mat();
  for (const auto& r : sample.diseased) sum_d += r.mat();
  // g^{-1} acts entrywise and linearly off the diagonal, so the group sum can
  // be inverted in one pass.
  Eigen::MatrixXd theta = sum_h + link.invert_unchecked(sum_d, alpha);
  theta /= static_cast<double>(sample.n_h() + sample.n_d());
  theta.diagonal().setOnes();
  return CorrelationMatrix::unchecked(std::move(theta));
}

FitResult fit_with_weights(const TwoGroupSample& sample, const LinkModel& link,
                           const FitConfig& config, WeightMatrices weights,
                           const std::optional<Eigen::VectorXd>& alpha_start) {
  sample.validate();
  FitResult result;
  result.weights = std::move(weights);
  result.diagnostics.applied_lambda = result.weights.regularization;

  GlsTerms terms = build_terms(sample, result.weights);
  Eigen::VectorXd alpha = alpha_start ? *alpha_start : link.null_alpha(sample.p());
  CorrelationMatrix theta = update_theta(sample, alpha, link);

  IdentifiabilityReport ident = identifiability_check(theta);
  result.diagnostics.identifiable = ident.identifiable;
  result.diagnostics.identifiability_rank = ident.rank;
  if (!ident.identifiable)
    fail(ErrorCode::NotIdentifiable,
         "initial estimate is not identifiable (incidence rank " +
             std::to_string(ident.rank) + " < p = " + std::to_string(sample.p()) +
             ", nonzero entries " + std::to_string(ident.nonzero_count) + ")");

  result.loss_trace.push_back(loss_from_terms(theta.mat(), alpha, terms, result.weights, link));

  for (int k = 1; k <= config.max_outer_iters; ++k) {
    AlphaMinimizeResult inner =
        minimize_alpha_terms(theta.mat(), terms, result.weights, link, alpha, config);
    result.diagnostics.line_search_stalled |= inner.stalled;
    double delta = (inner.alpha - alpha).lpNorm<Eigen::Infinity>();
    alpha = std::move(inner.alpha);
    theta = update_theta(sample, alpha, link);
    result.loss_trace.push_back(
        loss_from_terms(theta.mat(), alpha, terms, result.weights, link));
    result.outer_iters = k;
    if (delta <= config.outer_tol) {
      result.converged = true;
      break;
    }
  }

  for (std::size_t k = 1; k < result.loss_trace.size(); ++k) {
    double prev = result.loss_trace[k - 1];
    if (result.loss_trace[k] > prev + 1e-10 * std::max(1.0, std::abs(prev)))
      result.diagnostics.loss_monotone = false;
  }
  result.diagnostics.theta_range_violations =
      static_cast<int>(theta.range_violations().size());
  result.theta_hat = std::move(theta);
  result.alpha_hat = std::move(alpha);
  return result;
}

FitResult fit(const TwoGroupSample& sample, const LinkModel& link, const FitConfig& config,
              int threads, const std::optional<Eigen::VectorXd>& alpha_start) {
  return fit_with_weights(sample, link, config,
                          build_weights(sample, config.regularization_lambda, threads),
                          alpha_start);
}

}  // namespace corrdiff

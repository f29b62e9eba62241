#include "corrdiff/infer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "corrdiff/errors.hpp"
#include "corrdiff/parallel.hpp"
#include "corrdiff/rng.hpp"
#include "corrdiff/sim_generators.hpp"
#include "corrdiff/stats.hpp"

namespace corrdiff {

const char* variance_method_name(VarianceMethod method) {
  return method == VarianceMethod::Gee ? "gee" : "jackknife";
}

AlphaCovariance gee_covariance(const FitResult& fit, const TwoGroupSample& sample,
                               const LinkModel& link) {
  sample.validate();
  const int p = sample.p();
  const int n_h = sample.n_h();
  const int n_d = sample.n_d();
  const int total = n_h + n_d;
  const Eigen::MatrixXd& theta = fit.theta_hat.mat();
  const Eigen::VectorXd& alpha = fit.alpha_hat;

  Eigen::MatrixXd sum_d = Eigen::MatrixXd::Zero(p, p);
  for (const auto& r : sample.diseased) sum_d += r.mat();

  // Jacobian of the theta update map in alpha.
  Eigen::MatrixXd jac_theta =
      link.inverse_jacobian(sum_d, alpha) / static_cast<double>(total);
  // Total derivative of g(theta(alpha), alpha): the link part plus the chain
  // through the theta update (g depends on theta entrywise).
  Eigen::MatrixXd jac_g = link.jacobian(theta, alpha);
  jac_g += link.dg_dtheta(alpha, p).asDiagonal() * jac_theta;

  // X_g = C_bar_g^{-1} J_g; I1 terms accumulate per-subject score outer
  // products, so the m x m empirical covariance is never materialized.
  Eigen::MatrixXd x_d = fit.weights.factor_d.solve(jac_g);
  Eigen::MatrixXd x_h = fit.weights.factor_h.solve(jac_theta);

  Eigen::MatrixXd bread = n_d * (jac_g.transpose() * x_d).eval() +
                          n_h * (jac_theta.transpose() * x_h).eval();
  bread = 0.5 * (bread + bread.transpose()).eval();

  Eigen::VectorXd g_vec = vectorize(link.apply_unchecked(theta, alpha));
  Eigen::VectorXd t_vec = vectorize(theta);

  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
  for (const auto& r : sample.diseased) {
    Eigen::VectorXd score = x_d.transpose() * (vectorize(r) - g_vec);
    meat += static_cast<double>(n_d) / (n_d - 1) * (score * score.transpose());
  }
  for (const auto& r : sample.healthy) {
    Eigen::VectorXd score = x_h.transpose() * (vectorize(r) - t_vec);
    meat += static_cast<double>(n_h) / (n_h - 1) * (score * score.transpose());
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(bread);
  double eig_max = eig.eigenvalues().array().abs().maxCoeff();
  double eig_min = eig.eigenvalues().array().abs().minCoeff();
  if (!(eig_max > 0.0) || eig_min <= 1e-12 * eig_max)
    fail(ErrorCode::SingularBread,
         "bread matrix is singular (condition ~ " +
             std::to_string(eig_max / std::max(eig_min, 1e-300)) + ")");

  Eigen::MatrixXd bread_inv =
      eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
      eig.eigenvectors().transpose();

  AlphaCovariance cov;
  cov.method = VarianceMethod::Gee;
  cov.matrix = bread_inv * meat * bread_inv;
  cov.matrix = 0.5 * (cov.matrix + cov.matrix.transpose()).eval();
  return cov;
}

JackknifeResult jackknife(const TwoGroupSample& sample, const LinkModel& link,
                          const FitConfig& config, const FitResult& fit, int threads) {
  sample.validate();
  const int n_h = sample.n_h();
  const int n_d = sample.n_d();
  if (n_h < 3 || n_d < 3)
    fail(ErrorCode::JackknifeFoldFailed,
         "leave-one-out refits need at least 3 subjects per group");
  const int folds = n_h + n_d;

  WeightAccumulator acc = accumulate_weight_terms(sample, threads);

  std::vector<Eigen::VectorXd> estimates(folds);
  std::vector<std::string> failures(folds);

  parallel_for(folds, threads, [&](int fold) {
    const bool from_h = fold < n_h;
    const int within = from_h ? fold : fold - n_h;
    try {
      TwoGroupSample reduced;
      reduced.T = sample.T;
      reduced.healthy.reserve(n_h - (from_h ? 1 : 0));
      reduced.diseased.reserve(n_d - (from_h ? 0 : 1));
      for (int i = 0; i < n_h; ++i)
        if (!(from_h && i == within)) reduced.healthy.push_back(sample.healthy[i]);
      for (int i = 0; i < n_d; ++i)
        if (!(!from_h && i == within)) reduced.diseased.push_back(sample.diseased[i]);

      const CorrelationMatrix& omitted =
          from_h ? sample.healthy[within] : sample.diseased[within];
      Eigen::MatrixXd c_omitted = corr_covariance(omitted);
      Eigen::MatrixXd sum_h = acc.sum_h;
      Eigen::MatrixXd sum_d = acc.sum_d;
      (from_h ? sum_h : sum_d) -= c_omitted;

      WeightMatrices weights =
          weights_from_sums(std::move(sum_h), reduced.n_h(), std::move(sum_d),
                            reduced.n_d(), config.regularization_lambda);
      FitResult refit = fit_with_weights(reduced, link, config, std::move(weights),
                                         fit.alpha_hat);
      estimates[fold] = std::move(refit.alpha_hat);
    } catch (const std::exception& e) {
      failures[fold] = e.what();
    }
  });

  std::string failed;
  for (int fold = 0; fold < folds; ++fold)
    if (!failures[fold].empty())
      failed += "\n  fold " + std::to_string(fold) + ": " + failures[fold];
  if (!failed.empty())
    fail(ErrorCode::JackknifeFoldFailed, "leave-one-out refits failed:" + failed);

  const int p = sample.p();
  auto group_mean = [&](int begin, int count) {
    std::vector<Eigen::VectorXd> items(estimates.begin() + begin,
                                       estimates.begin() + begin + count);
    Eigen::VectorXd sum = pairwise_reduce(
        std::move(items), [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
          return Eigen::VectorXd(a + b);
        });
    return Eigen::VectorXd(sum / count);
  };
  Eigen::VectorXd mean_h = group_mean(0, n_h);
  Eigen::VectorXd mean_d = group_mean(n_h, n_d);

  auto scatter = [&](int begin, int count, const Eigen::VectorXd& center) {
    Eigen::MatrixXd nu = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < count; ++i) {
      Eigen::VectorXd dev = estimates[begin + i] - center;
      nu += dev * dev.transpose();
    }
    return Eigen::MatrixXd(nu * (static_cast<double>(count - 1) / count));
  };

  JackknifeResult result;
  result.alpha_jack = (n_h * mean_h + n_d * mean_d) / static_cast<double>(folds);
  result.covariance.method = VarianceMethod::Jackknife;
  result.covariance.matrix = scatter(0, n_h, mean_h) + scatter(n_h, n_d, mean_d);
  result.loo_estimates.resize(folds, p);
  for (int fold = 0; fold < folds; ++fold)
    result.loo_estimates.row(fold) = estimates[fold].transpose();
  return result;
}

Eigen::VectorXd median_center(const Eigen::VectorXd& alpha_hat, const LinkModel& link) {
  std::vector<double> values(alpha_hat.data(), alpha_hat.data() + alpha_hat.size());
  double shift = median(std::move(values)) - link.null_value();
  return alpha_hat.array() - shift;
}

InferenceTable wald_inference(const Eigen::VectorXd& alpha, const AlphaCovariance& cov,
                              double q, double inflate, double null_value) {
  const int p = static_cast<int>(alpha.size());
  if (!(q > 0.0 && q < 1.0)) fail(ErrorCode::InvalidArgument, "q must be in (0, 1)");
  if (cov.matrix.rows() != p || cov.matrix.cols() != p)
    fail(ErrorCode::DimensionMismatch, "covariance dimension does not match alpha");

  InferenceTable table;
  table.q_level = q;
  table.method = cov.method;
  table.inflation = inflate;
  table.rows.resize(p);

  std::vector<int> tested;
  std::vector<double> tested_p;
  for (int j = 0; j < p; ++j) {
    InferenceRow& row = table.rows[j];
    row.index = j + 1;
    row.alpha_tilde = alpha[j];
    double var = cov.matrix(j, j);
    double sd = var > 0.0 ? inflate * std::sqrt(var) : 0.0;
    row.sd = sd;
    if (sd <= 0.0) {
      row.tested = false;
      row.z_value = std::numeric_limits<double>::quiet_NaN();
      row.p_value = std::numeric_limits<double>::quiet_NaN();
      row.p_adjusted = std::numeric_limits<double>::quiet_NaN();
      row.ci_low = row.ci_high = alpha[j];
      continue;
    }
    row.z_value = (alpha[j] - null_value) / sd;
    row.p_value = normal_two_sided_p(row.z_value);
    tested.push_back(j);
    tested_p.push_back(row.p_value);
  }

  const int m_tested = static_cast<int>(tested.size());
  std::vector<double> adjusted = bh_adjust(tested_p);
  int n_selected = 0;
  for (int k = 0; k < m_tested; ++k) {
    InferenceRow& row = table.rows[tested[k]];
    row.p_adjusted = adjusted[k];
    row.selected = adjusted[k] <= q;
    if (row.selected) ++n_selected;
  }
  table.n_selected = n_selected;

  // FCR-adjusted intervals: marginal level 1 - R q / p for the R selected
  // variables; unselected variables get plain 1 - q intervals.
  double z_plain = normal_quantile(1.0 - q / 2.0);
  double z_selected =
      n_selected > 0
          ? normal_quantile(1.0 - (static_cast<double>(n_selected) * q / m_tested) / 2.0)
          : z_plain;
  for (int k = 0; k < m_tested; ++k) {
    InferenceRow& row = table.rows[tested[k]];
    double half = (row.selected ? z_selected : z_plain) * row.sd;
    row.ci_low = row.alpha_tilde - half;
    row.ci_high = row.alpha_tilde + half;
  }
  return table;
}

MassUnivariateTable mass_univariate(const TwoGroupSample& sample, double q) {
  sample.validate();
  if (!(q > 0.0 && q < 1.0)) fail(ErrorCode::InvalidArgument, "q must be in (0, 1)");
  const int p = sample.p();
  const int n_h = sample.n_h();
  const int n_d = sample.n_d();

  MassUnivariateTable table;
  table.q_level = q;
  table.rows.reserve(pair_count(p));
  std::vector<double> p_values;
  p_values.reserve(pair_count(p));

  for (int k = 0; k < p; ++k) {
    for (int l = k + 1; l < p; ++l) {
      MassUnivariateRow row;
      row.k = k;
      row.l = l;
      double mean_h = 0.0, mean_d = 0.0;
      for (const auto& r : sample.healthy) mean_h += fisher_z(r(k, l));
      for (const auto& r : sample.diseased) mean_d += fisher_z(r(k, l));
      mean_h /= n_h;
      mean_d /= n_d;
      double var_h = 0.0, var_d = 0.0;
      for (const auto& r : sample.healthy) {
        double dev = fisher_z(r(k, l)) - mean_h;
        var_h += dev * dev;
      }
      for (const auto& r : sample.diseased) {
        double dev = fisher_z(r(k, l)) - mean_d;
        var_d += dev * dev;
      }
      var_h /= n_h - 1;
      var_d /= n_d - 1;

      if (var_h == 0.0 || var_d == 0.0) {
        row.degenerate = true;
        row.t_statistic = 0.0;
        row.welch_df = 0.0;
        row.p_value = 1.0;
      } else {
        double se_h = var_h / n_h, se_d = var_d / n_d;
        double denom = se_h + se_d;
        row.t_statistic = (mean_d - mean_h) / std::sqrt(denom);
        row.welch_df =
            denom * denom / (se_h * se_h / (n_h - 1) + se_d * se_d / (n_d - 1));
        row.p_value = student_t_two_sided_p(row.t_statistic, row.welch_df);
      }
      p_values.push_back(row.p_value);
      table.rows.push_back(row);
    }
  }

  std::vector<double> adjusted = bh_adjust(p_values);
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    table.rows[i].p_adjusted = adjusted[i];
  return table;
}

std::vector<PowerCell> power_comparison(const PowerConfig& config, const LinkModel& link,
                                        const FitConfig& fit_config, int threads) {
  const int p = config.p;
  const int non_null = static_cast<int>(std::nearbyint(config.non_null_prop * p));
  const int n_effects = static_cast<int>(config.effect_sizes.size());
  std::vector<PowerCell> cells(
      static_cast<std::size_t>(n_effects) * config.replications);

  parallel_for(config.replications, threads, [&](int rep) {
    RngStream rep_stream(config.seed, static_cast<std::uint64_t>(rep) + 1);
    SimParams params;
    params.p = p;
    params.alpha_prop = 0.0;  // theta only; alpha is set per effect size
    params.n_h = config.n_h;
    params.n_d = config.n_d;
    params.T = config.T;
    params.ar = config.ar;
    params.ma = config.ma;
    RngStream theta_stream = rep_stream.split(0);
    GeneratedParameters base = gen_parameters(params, theta_stream);

    for (int e = 0; e < n_effects; ++e) {
      double effect = config.effect_sizes[e];
      Eigen::VectorXd alpha_true = link.null_alpha(p);
      for (int j = 0; j < non_null; ++j) alpha_true[j] = 1.0 - effect;

      // The data stream is shared across effect sizes (common random numbers).
      RngStream data_stream = rep_stream.split(1);
      TwoGroupSample sample =
          make_two_group_sample(base.theta, alpha_true, link, params, data_stream);

      PowerCell cell;
      cell.effect_size = effect;
      cell.replicate = rep;

      FitResult fit_result = fit(sample, link, fit_config);
      AlphaCovariance cov = gee_covariance(fit_result, sample, link);
      InferenceTable table = wald_inference(fit_result.alpha_hat, cov, config.q,
                                            config.inflate, link.null_value());
      cell.model_global_reject = table.n_selected > 0 ? 1.0 : 0.0;
      if (effect > 0.0 && non_null > 0) {
        int hits = 0;
        for (int j = 0; j < non_null; ++j)
          if (table.rows[j].selected) ++hits;
        cell.model_nonnull_power = static_cast<double>(hits) / non_null;
      } else {
        cell.model_nonnull_power = std::numeric_limits<double>::quiet_NaN();
      }

      MassUnivariateTable mu = mass_univariate(sample, config.q);
      int rejected = 0, affected = 0, affected_rejected = 0;
      for (const auto& row : mu.rows) {
        bool reject = row.p_adjusted <= config.q;
        if (reject) ++rejected;
        if (effect > 0.0 && std::min(row.k, row.l) < non_null) {
          ++affected;
          if (reject) ++affected_rejected;
        }
      }
      cell.mu_global_reject = rejected > 0 ? 1.0 : 0.0;
      cell.mu_affected_power =
          affected > 0 ? static_cast<double>(affected_rejected) / affected
                       : std::numeric_limits<double>::quiet_NaN();

      cells[static_cast<std::size_t>(e) * config.replications + rep] = cell;
    }
  });
  return cells;
}

}  // namespace corrdiff

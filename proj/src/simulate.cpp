#include "corrdiff/simulate.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "corrdiff/errors.hpp"
#include "corrdiff/parallel.hpp"

namespace corrdiff {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}  // namespace

BootstrapResult parametric_bootstrap(const CorrelationMatrix& theta,
                                     const Eigen::VectorXd& alpha,
                                     const SimParams& design, int B,
                                     const LinkModel& link, const FitConfig& config,
                                     BootstrapOptions options, int threads) {
  if (B < 20) fail(ErrorCode::InvalidArgument, "parametric bootstrap needs B >= 20");
  const int p = theta.p();

  BootstrapResult result;
  result.alpha_hats = Eigen::MatrixXd::Constant(B, p, kNaN);
  Eigen::MatrixXd gee_sds = Eigen::MatrixXd::Constant(B, p, kNaN);
  Eigen::MatrixXd jack_sds = Eigen::MatrixXd::Constant(B, p, kNaN);
  std::vector<int> failed(B, 0);

  RngStream root(design.seed, 1);
  parallel_for(B, threads, [&](int rep) {
    try {
      RngStream stream = root.split(static_cast<std::uint64_t>(rep));
      TwoGroupSample sample = make_two_group_sample(theta, alpha, link, design, stream);
      FitResult fit_result = fit(sample, link, config);
      result.alpha_hats.row(rep) = fit_result.alpha_hat.transpose();
      if (options.gee) {
        AlphaCovariance cov = gee_covariance(fit_result, sample, link);
        gee_sds.row(rep) = cov.matrix.diagonal().cwiseMax(0.0).cwiseSqrt().transpose();
      }
      if (options.jackknife) {
        JackknifeResult jack = jackknife(sample, link, config, fit_result);
        jack_sds.row(rep) =
            jack.covariance.matrix.diagonal().cwiseMax(0.0).cwiseSqrt().transpose();
      }
    } catch (const Error&) {
      failed[rep] = 1;
    }
  });

  for (int rep = 0; rep < B; ++rep) result.failures += failed[rep];
  if (result.failures * 20 > B)
    fail(ErrorCode::DegenerateWeights,
         "parametric bootstrap: " + std::to_string(result.failures) + " of " +
             std::to_string(B) + " replicates failed");

  const int good = B - result.failures;
  auto column_mean = [&](const Eigen::MatrixXd& values, int j) {
    double sum = 0.0;
    for (int rep = 0; rep < B; ++rep)
      if (!failed[rep]) sum += values(rep, j);
    return sum / good;
  };

  result.empirical_sd.resize(p);
  result.mean_gee_sd = Eigen::VectorXd::Constant(p, kNaN);
  result.mean_jack_sd = Eigen::VectorXd::Constant(p, kNaN);
  for (int j = 0; j < p; ++j) {
    double mean = column_mean(result.alpha_hats, j);
    double ss = 0.0;
    for (int rep = 0; rep < B; ++rep)
      if (!failed[rep]) {
        double dev = result.alpha_hats(rep, j) - mean;
        ss += dev * dev;
      }
    result.empirical_sd[j] = std::sqrt(ss / (good - 1));
    if (options.gee) result.mean_gee_sd[j] = column_mean(gee_sds, j);
    if (options.jackknife) result.mean_jack_sd[j] = column_mean(jack_sds, j);
  }
  return result;
}

ExperimentKind experiment_from_name(std::string_view name) {
  if (name == "bias") return ExperimentKind::Bias;
  if (name == "gee_calibration") return ExperimentKind::GeeCalibration;
  if (name == "jackknife_calibration") return ExperimentKind::JackknifeCalibration;
  if (name == "imbalance") return ExperimentKind::Imbalance;
  if (name == "error_rates") return ExperimentKind::ErrorRates;
  if (name == "power") return ExperimentKind::Power;
  if (name == "timing") return ExperimentKind::Timing;
  fail(ErrorCode::ConfigError, "unknown experiment '" + std::string(name) + "'");
}

const char* experiment_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Bias: return "bias";
    case ExperimentKind::GeeCalibration: return "gee_calibration";
    case ExperimentKind::JackknifeCalibration: return "jackknife_calibration";
    case ExperimentKind::Imbalance: return "imbalance";
    case ExperimentKind::ErrorRates: return "error_rates";
    case ExperimentKind::Power: return "power";
    case ExperimentKind::Timing: return "timing";
  }
  fail(ErrorCode::ConfigError, "unknown experiment kind");
}

namespace {

Table run_bias(const ExperimentConfig& config, int threads) {
  Table table;
  table.columns = {"n", "p", "replicate", "j", "alpha_true", "alpha_hat", "abs_error"};
  std::vector<int> n_list = config.n_list.empty() ? std::vector<int>{20, 40, 80}
                                                  : config.n_list;
  std::vector<int> p_list = config.p_list.empty() ? std::vector<int>{8, 16} : config.p_list;
  LinkModel link(config.link);

  struct Cell {
    int n, p, rep;
  };
  std::vector<Cell> cells;
  for (int n : n_list)
    for (int p : p_list)
      for (int rep = 0; rep < config.replicates; ++rep) cells.push_back({n, p, rep});

  std::vector<std::vector<std::vector<double>>> rows(cells.size());
  parallel_for(static_cast<int>(cells.size()), threads, [&](int c) {
    const Cell& cell = cells[c];
    SimParams params = config.base;
    params.p = cell.p;
    params.n_h = params.n_d = cell.n;
    RngStream stream(config.base.seed, static_cast<std::uint64_t>(c) + 1);
    GeneratedParameters gp = gen_parameters(params, stream);
    TwoGroupSample sample = make_two_group_sample(gp.theta, gp.alpha, link, params, stream);
    FitResult fit_result = fit(sample, link, config.fit);
    for (int j = 0; j < cell.p; ++j)
      rows[c].push_back({static_cast<double>(cell.n), static_cast<double>(cell.p),
                         static_cast<double>(cell.rep), static_cast<double>(j + 1),
                         gp.alpha[j], fit_result.alpha_hat[j],
                         std::abs(fit_result.alpha_hat[j] - gp.alpha[j])});
  });
  for (auto& cell_rows : rows)
    for (auto& row : cell_rows) table.rows.push_back(std::move(row));
  return table;
}

Table run_calibration(const ExperimentConfig& config, bool jackknife_method, int threads) {
  Table table;
  const char* sd_column = jackknife_method ? "mean_jack_sd" : "mean_gee_sd";
  table.columns = {"j", "alpha_true", "empirical_sd", sd_column, "sd_ratio"};
  LinkModel link(config.link);

  RngStream param_stream(config.base.seed, 0);
  GeneratedParameters gp = gen_parameters(config.base, param_stream);
  BootstrapOptions options;
  options.gee = !jackknife_method;
  options.jackknife = jackknife_method;
  BootstrapResult boot = parametric_bootstrap(gp.theta, gp.alpha, config.base,
                                              config.bootstrap_b, link, config.fit,
                                              options, threads);
  for (int j = 0; j < config.base.p; ++j) {
    double mean_sd = jackknife_method ? boot.mean_jack_sd[j] : boot.mean_gee_sd[j];
    table.rows.push_back({static_cast<double>(j + 1), gp.alpha[j], boot.empirical_sd[j],
                          mean_sd, mean_sd / boot.empirical_sd[j]});
  }
  return table;
}

Table run_imbalance(const ExperimentConfig& config, int threads) {
  Table table;
  table.columns = {"fraction", "n_d", "n_h", "j", "empirical_sd", "mean_gee_sd",
                   "sd_ratio"};
  LinkModel link(config.link);
  std::vector<double> fractions =
      config.fractions.empty() ? std::vector<double>{0.1, 0.5} : config.fractions;
  const int n_total = config.base.n_h + config.base.n_d;

  RngStream param_stream(config.base.seed, 0);
  GeneratedParameters gp = gen_parameters(config.base, param_stream);

  for (double fraction : fractions) {
    SimParams design = config.base;
    design.n_d = std::max(2, static_cast<int>(std::nearbyint(fraction * n_total)));
    design.n_h = std::max(2, n_total - design.n_d);
    BootstrapResult boot = parametric_bootstrap(gp.theta, gp.alpha, design,
                                                config.replicates, link, config.fit,
                                                {.gee = true, .jackknife = false},
                                                threads);
    for (int j = 0; j < config.base.p; ++j)
      table.rows.push_back({fraction, static_cast<double>(design.n_d),
                            static_cast<double>(design.n_h), static_cast<double>(j + 1),
                            boot.empirical_sd[j], boot.mean_gee_sd[j],
                            boot.mean_gee_sd[j] / boot.empirical_sd[j]});
  }
  return table;
}

Table run_error_rates(const ExperimentConfig& config, int threads) {
  Table table;
  table.columns = {"replicate",          "inflate",
                   "per_comparison_rate", "bh_any_false",
                   "bh_false_fraction",   "bonf_any_false"};
  LinkModel link(config.link);
  const int p = config.base.p;
  const std::vector<double> inflations = {config.inflate, 1.0};

  std::vector<std::vector<std::vector<double>>> rows(config.replicates);
  parallel_for(config.replicates, threads, [&](int rep) {
    SimParams params = config.base;
    RngStream stream(config.base.seed, static_cast<std::uint64_t>(rep) + 1);
    GeneratedParameters gp = gen_parameters(params, stream);
    const int non_null = static_cast<int>(std::nearbyint(params.alpha_prop * p));
    TwoGroupSample sample = make_two_group_sample(gp.theta, gp.alpha, link, params, stream);
    FitResult fit_result = fit(sample, link, config.fit);
    AlphaCovariance cov = gee_covariance(fit_result, sample, link);

    for (double inflate : inflations) {
      InferenceTable inf = wald_inference(fit_result.alpha_hat, cov, config.q, inflate,
                                          link.null_value());
      int null_count = 0, raw_null_rejections = 0, bonf_false = 0;
      int selected = 0, false_selected = 0;
      for (int j = 0; j < p; ++j) {
        const InferenceRow& row = inf.rows[j];
        const bool is_null = j >= non_null || gp.alpha[j] == 1.0;
        if (row.selected) ++selected;
        if (!is_null) continue;
        ++null_count;
        if (row.p_value <= config.q) ++raw_null_rejections;
        if (row.p_value <= config.q / p) bonf_false = 1;
        if (row.selected) ++false_selected;
      }
      double per_comparison =
          null_count > 0 ? static_cast<double>(raw_null_rejections) / null_count : kNaN;
      double bh_false_fraction =
          selected > 0 ? static_cast<double>(false_selected) / selected : 0.0;
      rows[rep].push_back({static_cast<double>(rep), inflate, per_comparison,
                           false_selected > 0 ? 1.0 : 0.0, bh_false_fraction,
                           static_cast<double>(bonf_false)});
    }
  });
  for (auto& rep_rows : rows)
    for (auto& row : rep_rows) table.rows.push_back(std::move(row));
  return table;
}

Table run_power(const ExperimentConfig& config, int threads) {
  Table table;
  table.columns = {"effect_size",        "replicate",        "model_global_reject",
                   "model_nonnull_power", "mu_global_reject", "mu_affected_power"};
  LinkModel link(config.link);
  PowerConfig power;
  power.p = config.base.p;
  power.n_h = config.base.n_h;
  power.n_d = config.base.n_d;
  power.T = config.base.T;
  power.non_null_prop = config.base.alpha_prop;
  power.effect_sizes =
      config.effect_sizes.empty() ? std::vector<double>{0.0, 0.1, 0.2} : config.effect_sizes;
  power.replications = config.replicates;
  power.q = config.q;
  power.inflate = config.inflate;
  power.ar = config.base.ar;
  power.ma = config.base.ma;
  power.seed = config.base.seed;
  for (const PowerCell& cell : power_comparison(power, link, config.fit, threads))
    table.rows.push_back({cell.effect_size, static_cast<double>(cell.replicate),
                          cell.model_global_reject, cell.model_nonnull_power,
                          cell.mu_global_reject, cell.mu_affected_power});
  return table;
}

Table run_timing(const ExperimentConfig& config, int threads) {
  Table table;
  table.columns = {"p", "m", "replicate", "seconds"};
  LinkModel link(config.link);
  std::vector<int> p_list =
      config.p_list.empty() ? std::vector<int>{8, 16, 24, 32, 48} : config.p_list;

  // Timed sequentially; threads only speed up the inner weight construction.
  int cell = 0;
  for (int p : p_list) {
    for (int rep = 0; rep < config.replicates; ++rep, ++cell) {
      SimParams params = config.base;
      params.p = p;
      RngStream stream(config.base.seed, static_cast<std::uint64_t>(cell) + 1);
      GeneratedParameters gp = gen_parameters(params, stream);
      TwoGroupSample sample =
          make_two_group_sample(gp.theta, gp.alpha, link, params, stream);
      auto start = std::chrono::steady_clock::now();
      FitResult fit_result = fit(sample, link, config.fit, threads);
      auto stop = std::chrono::steady_clock::now();
      (void)fit_result;
      double seconds = std::chrono::duration<double>(stop - start).count();
      table.rows.push_back({static_cast<double>(p), static_cast<double>(pair_count(p)),
                            static_cast<double>(rep), seconds});
    }
  }
  return table;
}

}  // namespace

Table experiment_driver(const ExperimentConfig& config, int threads) {
  switch (config.kind) {
    case ExperimentKind::Bias: return run_bias(config, threads);
    case ExperimentKind::GeeCalibration: return run_calibration(config, false, threads);
    case ExperimentKind::JackknifeCalibration:
      return run_calibration(config, true, threads);
    case ExperimentKind::Imbalance: return run_imbalance(config, threads);
    case ExperimentKind::ErrorRates: return run_error_rates(config, threads);
    case ExperimentKind::Power: return run_power(config, threads);
    case ExperimentKind::Timing: return run_timing(config, threads);
  }
  fail(ErrorCode::ConfigError, "unknown experiment kind");
}

}  // namespace corrdiff

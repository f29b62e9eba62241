// corrdiff: two-group correlation-matrix comparison.
//
// Subcommands: validate, fit, infer, baseline, simulate.
// Exit codes: 0 success, 2 input/config error, 3 numerical/optimization error.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "corrdiff/corrmat.hpp"
#include "corrdiff/errors.hpp"
#include "corrdiff/estimate.hpp"
#include "corrdiff/infer.hpp"
#include "corrdiff/io.hpp"
#include "corrdiff/link.hpp"
#include "corrdiff/simulate.hpp"
#include "corrdiff/stats.hpp"
#include "corrdiff/version.hpp"

namespace fs = std::filesystem;
using corrdiff::Error;
using corrdiff::ErrorKind;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

const std::set<std::string> kFitConfigKeys = {
    "link",       "max_outer_iters",      "outer_tol", "inner_tol",
    "alpha_floor", "regularization_lambda", "seed"};

const std::set<std::string> kGridKeys = {
    "p",        "n_h",        "n_d",       "T",           "alpha_prop",
    "alpha_low", "alpha_high", "ar",        "ma",          "replicates",
    "bootstrap_b", "q",       "inflate",   "n_list",      "p_list",
    "fractions", "effect_sizes"};

struct CommonOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
  int t_measurements = 0;
};

int resolve_threads(const CommonOptions& options) {
  if (options.threads > 0) return options.threads;
  if (const char* env = std::getenv("CORRDIFF_THREADS")) {
    int value = std::atoi(env);
    if (value > 0) return value;
  }
  return 1;
}

std::string timestamp_utc(std::chrono::system_clock::time_point when) {
  std::time_t t = std::chrono::system_clock::to_time_t(when);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

std::string compact_timestamp(std::chrono::system_clock::time_point when) {
  std::time_t t = std::chrono::system_clock::to_time_t(when);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y%m%d_%H%M%S", &tm);
  return buffer;
}

corrdiff::Config load_config(const CommonOptions& options) {
  if (options.config_path.empty()) return corrdiff::Config::from_string("");
  return corrdiff::Config::from_file(options.config_path);
}

corrdiff::FitConfig fit_config_from(const corrdiff::Config& config,
                                    const CommonOptions& options) {
  corrdiff::FitConfig fit;
  fit.max_outer_iters = config.get_int("max_outer_iters", fit.max_outer_iters);
  fit.outer_tol = config.get_double("outer_tol", fit.outer_tol);
  fit.inner_tol = config.get_double("inner_tol", fit.inner_tol);
  fit.regularization_lambda =
      config.get_double("regularization_lambda", fit.regularization_lambda);
  fit.alpha_floor = config.get_double("alpha_floor", fit.alpha_floor);
  fit.seed = options.seed_given ? options.seed : config.get_uint64("seed", 0);
  return fit;
}

corrdiff::LinkModel link_from(const corrdiff::Config& config,
                              const std::string& cli_link) {
  std::string name = !cli_link.empty() ? cli_link
                                       : config.get_string("link", "multiplicative");
  return corrdiff::LinkModel(corrdiff::link_from_name(name));
}

struct ManifestWriter {
  std::string command;
  std::chrono::system_clock::time_point started = std::chrono::system_clock::now();
  ordered_json input_digests = ordered_json::object();
  std::string config_digest = corrdiff::hex_digest(corrdiff::fnv1a64("", 0));
  std::uint64_t seed = 0;

  void add_input(const std::string& path) {
    input_digests[path] = corrdiff::file_digest(path);
  }

  void write(const fs::path& path) const {
    ordered_json manifest;
    manifest["command"] = command;
    manifest["software_version"] = corrdiff::kVersion;
    manifest["digest_algorithm"] = "fnv1a64";
    manifest["config_digest"] = config_digest;
    manifest["input_digests"] = input_digests;
    manifest["seed"] = seed;
    manifest["started"] = timestamp_utc(started);
    manifest["finished"] = timestamp_utc(std::chrono::system_clock::now());
    corrdiff::write_text_file(path.string(), manifest.dump(2) + "\n");
  }
};

void write_diagnostics(const fs::path& out_dir, const std::vector<ordered_json>& events) {
  std::string text;
  for (const auto& event : events) text += event.dump() + "\n";
  corrdiff::write_text_file((out_dir / "diagnostics.jsonl").string(), text);
}

std::string csv_cell(double value) {
  if (std::isnan(value)) return "nan";
  return corrdiff::format_double(value);
}

void write_table_csv(const fs::path& path, const corrdiff::Table& table) {
  std::string text;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) text += ',';
    text += table.columns[c];
  }
  text += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) text += ',';
      text += csv_cell(row[c]);
    }
    text += '\n';
  }
  corrdiff::write_text_file(path.string(), text);
}

struct LoadedData {
  corrdiff::IngestResult ingest;
  std::vector<ordered_json> events;
};

LoadedData load_data(const std::string& manifest_path, const std::string& labels_path,
                     int t_measurements) {
  LoadedData data;
  data.ingest = corrdiff::ingest(manifest_path, labels_path, t_measurements);
  for (const std::string& note : data.ingest.notes)
    data.events.push_back({{"event", "ingest"}, {"note", note}});
  if (!data.ingest.dropped_indices.empty())
    data.events.push_back(
        {{"event", "dropped_variables"}, {"indices", data.ingest.dropped_indices}});
  return data;
}

std::string variable_name(const corrdiff::IngestResult& ingest, int kept_position) {
  if (!ingest.labels.empty()) return ingest.labels[kept_position];
  return std::to_string(ingest.kept_indices[kept_position]);
}

void collect_fit_events(const corrdiff::FitResult& fit,
                        std::vector<ordered_json>& events) {
  events.push_back({{"event", "weights"},
                    {"applied_lambda", fit.diagnostics.applied_lambda}});
  if (fit.diagnostics.theta_range_violations > 0)
    events.push_back({{"event", "theta_range_violations"},
                      {"count", fit.diagnostics.theta_range_violations}});
  if (fit.diagnostics.line_search_stalled)
    events.push_back({{"event", "line_search_stalled"}});
  if (!fit.diagnostics.loss_monotone)
    events.push_back({{"event", "loss_trace_not_monotone"}});
  if (!fit.converged) events.push_back({{"event", "outer_loop_hit_iteration_cap"}});
}

void write_fit_artifacts(const fs::path& out_dir, const corrdiff::FitResult& fit,
                         const corrdiff::LinkModel& link) {
  corrdiff::write_matrix_csv((out_dir / "theta.csv").string(), fit.theta_hat.mat());

  ordered_json alpha_json;
  alpha_json["link"] = corrdiff::link_name(link.kind());
  alpha_json["p"] = fit.alpha_hat.size();
  alpha_json["alpha"] = std::vector<double>(fit.alpha_hat.data(),
                                            fit.alpha_hat.data() + fit.alpha_hat.size());
  corrdiff::write_text_file((out_dir / "alpha.json").string(),
                            alpha_json.dump(2) + "\n");

  ordered_json report;
  report["theta"] = "theta.csv";
  report["alpha"] = alpha_json["alpha"];
  report["loss_trace"] = fit.loss_trace;
  report["converged"] = fit.converged;
  report["applied_lambda"] = fit.diagnostics.applied_lambda;
  report["outer_iters"] = fit.outer_iters;
  report["identifiable"] = fit.diagnostics.identifiable;
  report["identifiability_rank"] = fit.diagnostics.identifiability_rank;
  report["theta_range_violations"] = fit.diagnostics.theta_range_violations;
  report["line_search_stalled"] = fit.diagnostics.line_search_stalled;
  report["loss_monotone"] = fit.diagnostics.loss_monotone;
  corrdiff::write_text_file((out_dir / "fit_report.json").string(),
                            report.dump(2) + "\n");
}

void write_inference_artifacts(const fs::path& out_dir,
                               const corrdiff::InferenceTable& table,
                               bool median_correction) {
  std::string csv = "index,name,alpha_tilde,sd,z,p,p_bh,ci_low,ci_high,selected\n";
  for (const auto& row : table.rows) {
    csv += std::to_string(row.index) + ',' + row.name + ',' +
           csv_cell(row.alpha_tilde) + ',' + csv_cell(row.sd) + ',' +
           csv_cell(row.z_value) + ',' + csv_cell(row.p_value) + ',' +
           csv_cell(row.p_adjusted) + ',' + csv_cell(row.ci_low) + ',' +
           csv_cell(row.ci_high) + ',' + (row.selected ? "1" : "0") + '\n';
  }
  corrdiff::write_text_file((out_dir / "inference.csv").string(), csv);

  ordered_json json;
  json["q_level"] = table.q_level;
  json["correction_method"] = table.correction_method;
  json["variance_method"] = corrdiff::variance_method_name(table.method);
  json["inflation"] = table.inflation;
  json["median_correction"] = median_correction;
  json["n_selected"] = table.n_selected;
  ordered_json rows = ordered_json::array();
  for (const auto& row : table.rows) {
    ordered_json r;
    r["index"] = row.index;
    r["name"] = row.name;
    r["alpha_tilde"] = row.alpha_tilde;
    r["sd"] = row.sd;
    r["z"] = row.z_value;
    r["p"] = row.p_value;
    r["p_bh"] = row.p_adjusted;
    r["ci_low"] = row.ci_low;
    r["ci_high"] = row.ci_high;
    r["selected"] = row.selected;
    r["tested"] = row.tested;
    rows.push_back(std::move(r));
  }
  json["rows"] = std::move(rows);
  corrdiff::write_text_file((out_dir / "inference.json").string(), json.dump(2) + "\n");

  // Manhattan data: -log10 p per variable plus constant threshold lines.
  int tested = 0;
  for (const auto& row : table.rows)
    if (row.tested) ++tested;
  double bh_cutoff_rank = table.n_selected > 0 ? table.n_selected : 1;
  double bh_threshold = table.q_level * bh_cutoff_rank / std::max(tested, 1);
  double bonf_threshold = table.q_level / std::max(tested, 1);
  std::string manhattan =
      "index,name,p,p_bh,neglog10_p,neglog10_p_bh,bh_threshold_neglog10,"
      "bonferroni_threshold_neglog10\n";
  for (const auto& row : table.rows) {
    double nl_p = -std::log10(row.p_value);
    double nl_bh = -std::log10(row.p_adjusted);
    manhattan += std::to_string(row.index) + ',' + row.name + ',' +
                 csv_cell(row.p_value) + ',' + csv_cell(row.p_adjusted) + ',' +
                 csv_cell(nl_p) + ',' + csv_cell(nl_bh) + ',' +
                 csv_cell(-std::log10(bh_threshold)) + ',' +
                 csv_cell(-std::log10(bonf_threshold)) + '\n';
  }
  corrdiff::write_text_file((out_dir / "manhattan.csv").string(), manhattan);
}

// ---------------------------------------------------------------------------

int cmd_validate(const CommonOptions& options, const std::string& manifest_path,
                 const std::string& labels_path) {
  LoadedData data = load_data(manifest_path, labels_path, options.t_measurements);
  fs::create_directories(options.out_dir);

  const corrdiff::TwoGroupSample& sample = data.ingest.sample;
  std::cout << "ok: " << sample.n_h() << " control and " << sample.n_d()
            << " perturbed subjects, p = " << sample.p() << "\n";
  for (const std::string& note : data.ingest.notes) std::cout << note << "\n";
  if (sample.T >= 2) {
    double t_eff =
        corrdiff::effective_df(sample.T, corrdiff::group_average(sample.healthy));
    std::cout << "effective degrees of freedom (control average): " << t_eff << "\n";
  }

  ManifestWriter manifest;
  manifest.command = "validate";
  manifest.seed = options.seed;
  manifest.add_input(manifest_path);
  if (!labels_path.empty()) manifest.add_input(labels_path);
  manifest.write(fs::path(options.out_dir) / "manifest.json");
  write_diagnostics(options.out_dir, data.events);
  return 0;
}

int cmd_fit(const CommonOptions& options, const std::string& manifest_path,
            const std::string& labels_path, const std::string& cli_link) {
  corrdiff::Config config = load_config(options);
  config.require_known(kFitConfigKeys);
  corrdiff::FitConfig fit_config = fit_config_from(config, options);
  corrdiff::LinkModel link = link_from(config, cli_link);
  int threads = resolve_threads(options);

  LoadedData data = load_data(manifest_path, labels_path, options.t_measurements);
  corrdiff::FitResult fit_result =
      corrdiff::fit(data.ingest.sample, link, fit_config, threads);
  collect_fit_events(fit_result, data.events);

  fs::create_directories(options.out_dir);
  write_fit_artifacts(options.out_dir, fit_result, link);

  ManifestWriter manifest;
  manifest.command = "fit";
  manifest.seed = fit_config.seed;
  manifest.add_input(manifest_path);
  if (!labels_path.empty()) manifest.add_input(labels_path);
  if (!options.config_path.empty()) {
    manifest.add_input(options.config_path);
    manifest.config_digest = corrdiff::file_digest(options.config_path);
  }
  manifest.write(fs::path(options.out_dir) / "manifest.json");
  write_diagnostics(options.out_dir, data.events);

  std::cout << "fit: converged=" << (fit_result.converged ? "yes" : "no")
            << " outer_iters=" << fit_result.outer_iters
            << " final_loss=" << fit_result.loss_trace.back() << "\n";
  return 0;
}

int cmd_infer(const CommonOptions& options, const std::string& manifest_path,
              const std::string& labels_path, const std::string& cli_link,
              const std::string& variance, double inflate, bool inflate_given,
              double q, bool no_median_correction) {
  corrdiff::Config config = load_config(options);
  config.require_known(kFitConfigKeys);
  corrdiff::FitConfig fit_config = fit_config_from(config, options);
  corrdiff::LinkModel link = link_from(config, cli_link);
  int threads = resolve_threads(options);

  corrdiff::VarianceMethod method = corrdiff::VarianceMethod::Gee;
  if (variance == "jackknife")
    method = corrdiff::VarianceMethod::Jackknife;
  else if (variance != "gee")
    corrdiff::fail(corrdiff::ErrorCode::ConfigError,
                   "--variance must be gee or jackknife");
  // Jackknife SDs are reported without inflation unless asked for explicitly.
  double applied_inflate =
      inflate_given ? inflate
                    : (method == corrdiff::VarianceMethod::Gee ? inflate : 1.0);

  LoadedData data = load_data(manifest_path, labels_path, options.t_measurements);
  corrdiff::FitResult fit_result =
      corrdiff::fit(data.ingest.sample, link, fit_config, threads);
  collect_fit_events(fit_result, data.events);

  corrdiff::AlphaCovariance cov =
      method == corrdiff::VarianceMethod::Gee
          ? corrdiff::gee_covariance(fit_result, data.ingest.sample, link)
          : corrdiff::jackknife(data.ingest.sample, link, fit_config, fit_result,
                                threads)
                .covariance;

  Eigen::VectorXd alpha = fit_result.alpha_hat;
  if (!no_median_correction) alpha = corrdiff::median_center(alpha, link);
  corrdiff::InferenceTable table =
      corrdiff::wald_inference(alpha, cov, q, applied_inflate, link.null_value());
  for (std::size_t j = 0; j < table.rows.size(); ++j) {
    table.rows[j].index = data.ingest.kept_indices[j];
    table.rows[j].name = variable_name(data.ingest, static_cast<int>(j));
  }

  fs::create_directories(options.out_dir);
  write_fit_artifacts(options.out_dir, fit_result, link);
  write_inference_artifacts(options.out_dir, table, !no_median_correction);

  ManifestWriter manifest;
  manifest.command = "infer";
  manifest.seed = fit_config.seed;
  manifest.add_input(manifest_path);
  if (!labels_path.empty()) manifest.add_input(labels_path);
  if (!options.config_path.empty()) {
    manifest.add_input(options.config_path);
    manifest.config_digest = corrdiff::file_digest(options.config_path);
  }
  manifest.write(fs::path(options.out_dir) / "manifest.json");
  data.events.push_back({{"event", "inference"},
                         {"variance_method", corrdiff::variance_method_name(method)},
                         {"inflation", applied_inflate},
                         {"n_selected", table.n_selected}});
  write_diagnostics(options.out_dir, data.events);

  std::cout << "infer: method=" << corrdiff::variance_method_name(method)
            << " inflation=" << applied_inflate << " selected=" << table.n_selected
            << " of " << table.rows.size() << "\n";
  return 0;
}

int cmd_baseline(const CommonOptions& options, const std::string& manifest_path,
                 const std::string& labels_path, double q) {
  LoadedData data = load_data(manifest_path, labels_path, options.t_measurements);
  corrdiff::MassUnivariateTable table = corrdiff::mass_univariate(data.ingest.sample, q);

  fs::create_directories(options.out_dir);
  std::string csv = "k,l,t,welch_df,p,p_bh,degenerate\n";
  for (const auto& row : table.rows) {
    csv += std::to_string(data.ingest.kept_indices[row.k]) + ',' +
           std::to_string(data.ingest.kept_indices[row.l]) + ',' +
           csv_cell(row.t_statistic) + ',' + csv_cell(row.welch_df) + ',' +
           csv_cell(row.p_value) + ',' + csv_cell(row.p_adjusted) + ',' +
           (row.degenerate ? "1" : "0") + '\n';
  }
  corrdiff::write_text_file((fs::path(options.out_dir) / "baseline.csv").string(), csv);

  // Each pair appears under both of its endpoints.
  std::string manhattan = "index,name,other,p,p_bh,neglog10_p,neglog10_p_bh\n";
  auto emit = [&](int variable, int other, const corrdiff::MassUnivariateRow& row) {
    manhattan += std::to_string(data.ingest.kept_indices[variable]) + ',' +
                 variable_name(data.ingest, variable) + ',' +
                 std::to_string(data.ingest.kept_indices[other]) + ',' +
                 csv_cell(row.p_value) + ',' + csv_cell(row.p_adjusted) + ',' +
                 csv_cell(-std::log10(row.p_value)) + ',' +
                 csv_cell(-std::log10(row.p_adjusted)) + '\n';
  };
  for (const auto& row : table.rows) {
    emit(row.k, row.l, row);
    emit(row.l, row.k, row);
  }
  corrdiff::write_text_file(
      (fs::path(options.out_dir) / "baseline_manhattan.csv").string(), manhattan);

  ManifestWriter manifest;
  manifest.command = "baseline";
  manifest.seed = options.seed;
  manifest.add_input(manifest_path);
  if (!labels_path.empty()) manifest.add_input(labels_path);
  manifest.write(fs::path(options.out_dir) / "manifest.json");
  write_diagnostics(options.out_dir, data.events);

  int rejections = 0;
  double min_p_bh = 1.0;
  for (const auto& row : table.rows) {
    if (row.p_adjusted <= q) ++rejections;
    min_p_bh = std::min(min_p_bh, row.p_adjusted);
  }
  std::cout << "baseline: " << table.rows.size() << " tests, " << rejections
            << " BH rejections at q=" << q << ", minimal adjusted p=" << min_p_bh
            << "\n";
  return 0;
}

corrdiff::ExperimentConfig experiment_config_from(corrdiff::ExperimentKind kind,
                                                  const corrdiff::Config& config,
                                                  const CommonOptions& options) {
  corrdiff::ExperimentConfig experiment;
  experiment.kind = kind;
  experiment.link =
      corrdiff::link_from_name(config.get_string("link", "multiplicative"));

  // Per-experiment defaults; the config file overrides any of them.
  corrdiff::SimParams& base = experiment.base;
  switch (kind) {
    case corrdiff::ExperimentKind::Bias:
      experiment.n_list = {20, 40, 80};
      experiment.p_list = {8, 16};
      experiment.replicates = 3;
      base.alpha_prop = 0.2;
      break;
    case corrdiff::ExperimentKind::GeeCalibration:
    case corrdiff::ExperimentKind::JackknifeCalibration:
      base.alpha_prop = 0.5;
      base.ar = {0.5};
      base.ma = {0.5};
      experiment.bootstrap_b = 100;
      break;
    case corrdiff::ExperimentKind::Imbalance:
      base.n_h = base.n_d = 25;
      experiment.fractions = {0.1, 0.5};
      experiment.replicates = 30;
      base.alpha_prop = 0.5;
      break;
    case corrdiff::ExperimentKind::ErrorRates:
      base.alpha_prop = 0.0;
      experiment.replicates = 200;
      break;
    case corrdiff::ExperimentKind::Power:
      base.alpha_prop = 0.1;
      experiment.effect_sizes = {0.0, 0.05, 0.1, 0.2, 0.3};
      experiment.replicates = 200;
      break;
    case corrdiff::ExperimentKind::Timing:
      experiment.p_list = {8, 16, 24, 32, 48};
      base.n_h = base.n_d = 20;
      experiment.replicates = 3;
      break;
  }

  base.p = config.get_int("p", base.p);
  base.n_h = config.get_int("n_h", base.n_h);
  base.n_d = config.get_int("n_d", base.n_d);
  base.T = config.get_int("T", base.T);
  base.alpha_prop = config.get_double("alpha_prop", base.alpha_prop);
  base.alpha_low = config.get_double("alpha_low", base.alpha_low);
  base.alpha_high = config.get_double("alpha_high", base.alpha_high);
  base.ar = config.get_double_list("ar", base.ar);
  base.ma = config.get_double_list("ma", base.ma);
  base.seed = options.seed_given ? options.seed : config.get_uint64("seed", 0);

  experiment.fit = fit_config_from(config, options);
  experiment.replicates = config.get_int("replicates", experiment.replicates);
  experiment.bootstrap_b = config.get_int("bootstrap_b", experiment.bootstrap_b);
  experiment.q = config.get_double("q", experiment.q);
  experiment.inflate = config.get_double("inflate", experiment.inflate);
  experiment.n_list = config.get_int_list("n_list", experiment.n_list);
  experiment.p_list = config.get_int_list("p_list", experiment.p_list);
  experiment.fractions = config.get_double_list("fractions", experiment.fractions);
  experiment.effect_sizes =
      config.get_double_list("effect_sizes", experiment.effect_sizes);
  return experiment;
}

int cmd_simulate(const CommonOptions& options, const std::string& experiment_name_arg) {
  corrdiff::ExperimentKind kind = corrdiff::experiment_from_name(experiment_name_arg);
  corrdiff::Config config = load_config(options);
  std::set<std::string> allowed = kFitConfigKeys;
  allowed.insert(kGridKeys.begin(), kGridKeys.end());
  config.require_known(allowed);
  corrdiff::ExperimentConfig experiment = experiment_config_from(kind, config, options);
  int threads = resolve_threads(options);

  auto started = std::chrono::system_clock::now();
  corrdiff::Table table = corrdiff::experiment_driver(experiment, threads);

  fs::create_directories(options.out_dir);
  std::string stem =
      std::string(corrdiff::experiment_name(kind)) + "_" + compact_timestamp(started);
  fs::path csv_path = fs::path(options.out_dir) / (stem + ".csv");
  write_table_csv(csv_path, table);

  ordered_json grid;
  grid["experiment"] = corrdiff::experiment_name(kind);
  grid["link"] = corrdiff::link_name(experiment.link);
  grid["p"] = experiment.base.p;
  grid["n_h"] = experiment.base.n_h;
  grid["n_d"] = experiment.base.n_d;
  grid["T"] = experiment.base.T;
  grid["alpha_prop"] = experiment.base.alpha_prop;
  grid["alpha_low"] = experiment.base.alpha_low;
  grid["alpha_high"] = experiment.base.alpha_high;
  grid["ar"] = experiment.base.ar;
  grid["ma"] = experiment.base.ma;
  grid["replicates"] = experiment.replicates;
  grid["bootstrap_b"] = experiment.bootstrap_b;
  grid["q"] = experiment.q;
  grid["inflate"] = experiment.inflate;
  grid["n_list"] = experiment.n_list;
  grid["p_list"] = experiment.p_list;
  grid["fractions"] = experiment.fractions;
  grid["effect_sizes"] = experiment.effect_sizes;

  ordered_json manifest;
  manifest["command"] = "simulate";
  manifest["software_version"] = corrdiff::kVersion;
  manifest["seed"] = experiment.base.seed;
  manifest["grid"] = std::move(grid);
  manifest["rows"] = table.rows.size();
  manifest["started"] = timestamp_utc(started);
  manifest["finished"] = timestamp_utc(std::chrono::system_clock::now());
  fs::path manifest_path = fs::path(options.out_dir) / (stem + "_manifest.json");
  corrdiff::write_text_file(manifest_path.string(), manifest.dump(2) + "\n");

  std::cout << "wrote " << csv_path.string() << " (" << table.rows.size()
            << " rows)\nwrote " << manifest_path.string() << "\n";

  if (kind == corrdiff::ExperimentKind::Timing) {
    // Log-log regression of wall time on p.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& row : table.rows) {
      double x = std::log(row[0]), y = std::log(std::max(row[3], 1e-9));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++n;
    }
    double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    std::cout << "timing: log-log slope of fit time vs p = " << slope << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-group correlation-matrix comparison"};
  app.require_subcommand(1);

  CommonOptions options;
  app.add_option("--config", options.config_path, "key = value configuration file");
  app.add_option("--out", options.out_dir, "output directory (default .)");
  auto* seed_opt = app.add_option("--seed", options.seed, "random seed");
  app.add_option("--threads", options.threads,
                 "worker threads (or CORRDIFF_THREADS; default 1)");
  app.add_option("--T", options.t_measurements,
                 "measurements per subject (diagnostics only)");

  std::string manifest_path, labels_path, cli_link;
  std::string variance = "gee";
  double inflate = 1.10, q = 0.05;
  bool no_median_correction = false;
  std::string experiment;

  auto add_data_options = [&](CLI::App* cmd) {
    cmd->fallthrough();  // global flags may appear after the subcommand
    cmd->add_option("manifest", manifest_path, "sample manifest CSV")->required();
    cmd->add_option("--labels", labels_path, "variable labels CSV");
  };

  CLI::App* validate = app.add_subcommand("validate", "load and validate a dataset");
  add_data_options(validate);

  CLI::App* fit = app.add_subcommand("fit", "estimate the model");
  add_data_options(fit);
  fit->add_option("--link", cli_link, "multiplicative | additive_quotient");

  CLI::App* infer = app.add_subcommand("infer", "fit and run per-variable inference");
  add_data_options(infer);
  infer->add_option("--link", cli_link, "multiplicative | additive_quotient");
  infer->add_option("--variance", variance, "gee | jackknife (default gee)");
  auto* inflate_opt =
      infer->add_option("--inflate", inflate, "SD inflation factor (default 1.10)");
  infer->add_option("--q", q, "FDR level (default 0.05)");
  infer->add_flag("--no-median-correction", no_median_correction,
                  "skip the median location correction");

  CLI::App* baseline = app.add_subcommand("baseline", "mass-univariate Welch tests");
  add_data_options(baseline);
  baseline->add_option("--q", q, "FDR level (default 0.05)");

  CLI::App* simulate = app.add_subcommand("simulate", "run a simulation experiment");
  simulate->fallthrough();
  simulate
      ->add_option("--experiment", experiment,
                   "bias | gee_calibration | jackknife_calibration | imbalance | "
                   "error_rates | power | timing")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  options.seed_given = seed_opt->count() > 0;

  try {
    if (app.got_subcommand(validate))
      return cmd_validate(options, manifest_path, labels_path);
    if (app.got_subcommand(fit))
      return cmd_fit(options, manifest_path, labels_path, cli_link);
    if (app.got_subcommand(infer))
      return cmd_infer(options, manifest_path, labels_path, cli_link, variance, inflate,
                       inflate_opt->count() > 0, q, no_median_correction);
    if (app.got_subcommand(baseline))
      return cmd_baseline(options, manifest_path, labels_path, q);
    if (app.got_subcommand(simulate)) return cmd_simulate(options, experiment);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::Input ? kExitInput : kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitInput;
}

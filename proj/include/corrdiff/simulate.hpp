#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <vector>

#include "corrdiff/estimate.hpp"
#include "corrdiff/infer.hpp"
#include "corrdiff/link.hpp"
#include "corrdiff/sim_generators.hpp"

namespace corrdiff {

struct BootstrapOptions {
  bool gee = true;
  bool jackknife = false;
};

struct BootstrapResult {
  Eigen::MatrixXd alpha_hats;   // B x p, NaN rows for failed replicates
  Eigen::VectorXd empirical_sd; // across-replicate SD of the alpha estimates
  Eigen::VectorXd mean_gee_sd;  // NaN-filled when not requested
  Eigen::VectorXd mean_jack_sd; // NaN-filled when not requested
  int failures = 0;
};

/// Simulates B two-group datasets at (theta, link(theta, alpha)), fits each,
/// and reports the across-dataset spread of the estimates next to the mean
/// estimated SDs of the requested variance methods. More than 5% failed
/// replicates aborts.
BootstrapResult parametric_bootstrap(const CorrelationMatrix& theta,
                                     const Eigen::VectorXd& alpha,
                                     const SimParams& design, int B,
                                     const LinkModel& link, const FitConfig& config,
                                     BootstrapOptions options = {}, int threads = 1);

enum class ExperimentKind {
  Bias,
  GeeCalibration,
  JackknifeCalibration,
  Imbalance,
  ErrorRates,
  Power,
  Timing,
};

ExperimentKind experiment_from_name(std::string_view name);
const char* experiment_name(ExperimentKind kind);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Bias;
  LinkKind link = LinkKind::Multiplicative;
  SimParams base;
  FitConfig fit;
  std::vector<int> n_list;            // bias: per-group sizes
  std::vector<int> p_list;            // bias / timing: dimensions
  std::vector<double> fractions;      // imbalance: n_d / (n_h + n_d)
  std::vector<double> effect_sizes;   // power
  int replicates = 30;
  int bootstrap_b = 100;              // calibration experiments
  double q = 0.05;
  double inflate = 1.10;
};

/// Tidy numeric table, one row per cell per replicate (or per coordinate for
/// the calibration experiments).
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

Table experiment_driver(const ExperimentConfig& config, int threads = 1);

}  // namespace corrdiff

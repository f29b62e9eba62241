#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "corrdiff/corrmat.hpp"

namespace corrdiff {

/// Shortest decimal representation that parses back to the same double, so
/// CSV/JSON artifacts are lossless and byte-stable.
std::string format_double(double x);

/// p x p CSV, no header; empty cells and "nan" parse to NaN (missing).
Eigen::MatrixXd read_matrix_csv(const std::string& path);
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& matrix);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

struct ManifestEntry {
  std::string subject_id;
  char group = 'H';  // 'H' or 'D'
  std::string path;  // resolved relative to the manifest's directory
};

/// CSV with header subject_id,group,path.
std::vector<ManifestEntry> read_sample_manifest(const std::string& path);

/// CSV with header index,name (1-based indices).
std::map<int, std::string> read_labels(const std::string& path);

struct IngestResult {
  TwoGroupSample sample;
  std::vector<int> kept_indices;     // original 1-based variable indices
  std::vector<int> dropped_indices;  // original 1-based, dropped for missing data
  std::vector<std::string> labels;   // per kept variable; empty when unlabelled
  std::vector<std::string> notes;    // diagnostics (drops, counts)
};

/// Loads and validates every matrix in the manifest. Variables with missing
/// values in any subject are dropped for all subjects (greedy: repeatedly
/// drop the column with the most missing cells) before validation.
IngestResult ingest(const std::string& manifest_path, const std::string& labels_path = "",
                    int t_measurements = 0);

/// key = value configuration file; '#' starts a comment.
class Config {
 public:
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      std::vector<double> fallback) const;
  std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) const;

  /// Rejects keys outside the allowed set (typo guard).
  void require_known(const std::set<std::string>& allowed) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a64(const void* data, std::size_t size);
std::string hex_digest(std::uint64_t value);
std::string file_digest(const std::string& path);

}  // namespace corrdiff

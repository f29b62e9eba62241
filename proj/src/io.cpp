#include "corrdiff/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "corrdiff/errors.hpp"

namespace corrdiff {

namespace fs = std::filesystem;

std::string format_double(double x) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), x);
  if (ec != std::errc()) fail(ErrorCode::IoError, "number formatting failed");
  return std::string(buffer, ptr);
}

namespace {

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_cell(const std::string& cell, const std::string& path, int row, int col) {
  if (cell.empty() || cell == "nan" || cell == "NaN" || cell == "NA")
    return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  double value = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0')
    fail(ErrorCode::IoError, path + ": cell (" + std::to_string(row + 1) + "," +
                                 std::to_string(col + 1) + ") is not numeric: '" + cell +
                                 "'");
  return value;
}

}  // namespace

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c)
      row.push_back(parse_cell(cells[c], path, static_cast<int>(rows.size()),
                               static_cast<int>(c)));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorCode::IoError, path + ": empty matrix file");
  const std::size_t p = rows.size();
  for (const auto& row : rows)
    if (row.size() != p)
      fail(ErrorCode::IoError, path + ": matrix is not square (" + std::to_string(p) +
                                   " rows, row with " + std::to_string(row.size()) +
                                   " columns)");
  Eigen::MatrixXd out(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) out(i, j) = rows[i][j];
  return out;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& matrix) {
  std::ostringstream out;
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      if (j) out << ',';
      out << format_double(matrix(i, j));
    }
    out << '\n';
  }
  write_text_file(path, out.str());
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  out << content;
  if (!out) fail(ErrorCode::IoError, "write failed for " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::vector<ManifestEntry> read_sample_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open manifest " + path);
  fs::path base = fs::path(path).parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (!header_seen) {
      header_seen = true;
      if (fields.size() < 3 || fields[0] != "subject_id" || fields[1] != "group" ||
          fields[2] != "path")
        fail(ErrorCode::IoError,
             path + ": manifest header must be subject_id,group,path");
      continue;
    }
    if (fields.size() < 3)
      fail(ErrorCode::IoError, path + ": manifest row with fewer than 3 fields");
    ManifestEntry entry;
    entry.subject_id = fields[0];
    if (fields[1] != "H" && fields[1] != "D")
      fail(ErrorCode::IoError,
           path + ": group must be H or D, got '" + fields[1] + "'");
    entry.group = fields[1][0];
    fs::path matrix_path(fields[2]);
    entry.path = matrix_path.is_absolute() ? matrix_path.string()
                                           : (base / matrix_path).string();
    entries.push_back(std::move(entry));
  }
  if (entries.empty()) fail(ErrorCode::IoError, path + ": manifest lists no subjects");
  return entries;
}

std::map<int, std::string> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open labels " + path);
  std::map<int, std::string> labels;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (!header_seen) {
      header_seen = true;
      if (fields.size() < 2 || fields[0] != "index" || fields[1] != "name")
        fail(ErrorCode::IoError, path + ": labels header must be index,name");
      continue;
    }
    if (fields.size() < 2) fail(ErrorCode::IoError, path + ": labels row too short");
    int index = 0;
    auto [ptr, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), index);
    if (ec != std::errc() || ptr != fields[0].data() + fields[0].size())
      fail(ErrorCode::IoError, path + ": bad label index '" + fields[0] + "'");
    if (!labels.emplace(index, fields[1]).second)
      fail(ErrorCode::IoError, path + ": duplicate label index " + fields[0]);
  }
  return labels;
}

namespace {

// Greedy cover of the combined missing mask: repeatedly drop the variable
// whose column holds the most missing cells (ties to the lowest index). A
// fully missing region is removed in one step; a single missing cell drops
// its column variable.
std::vector<int> variables_to_drop(const Eigen::MatrixXd& mask) {
  const int p = static_cast<int>(mask.rows());
  std::vector<bool> dropped(p, false);
  std::vector<int> order;
  for (;;) {
    int best = -1;
    int best_count = 0;
    for (int j = 0; j < p; ++j) {
      if (dropped[j]) continue;
      int count = 0;
      for (int i = 0; i < p; ++i)
        if (!dropped[i] && mask(i, j) > 0.0) ++count;
      if (count > best_count) {
        best_count = count;
        best = j;
      }
    }
    if (best < 0) break;
    dropped[best] = true;
    order.push_back(best);
  }
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace

IngestResult ingest(const std::string& manifest_path, const std::string& labels_path,
                    int t_measurements) {
  std::vector<ManifestEntry> entries = read_sample_manifest(manifest_path);

  std::vector<Eigen::MatrixXd> raw;
  raw.reserve(entries.size());
  int p = -1;
  for (const auto& entry : entries) {
    Eigen::MatrixXd m = read_matrix_csv(entry.path);
    if (p < 0) p = static_cast<int>(m.rows());
    if (m.rows() != p)
      fail(ErrorCode::DimensionMismatch,
           entry.path + ": dimension " + std::to_string(m.rows()) +
               " differs from first subject's " + std::to_string(p));
    raw.push_back(std::move(m));
  }

  // Combined missing mask over all subjects, then a global drop list.
  Eigen::MatrixXd missing = Eigen::MatrixXd::Zero(p, p);
  for (const auto& m : raw)
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j)
        if (std::isnan(m(i, j))) missing(i, j) = 1.0;
  std::vector<int> drop = variables_to_drop(missing);

  IngestResult result;
  std::vector<int> keep;
  for (int j = 0; j < p; ++j)
    if (!std::binary_search(drop.begin(), drop.end(), j)) keep.push_back(j);
  if (static_cast<int>(keep.size()) < 2)
    fail(ErrorCode::IoError, "fewer than 2 variables remain after dropping missing data");
  for (int j : keep) result.kept_indices.push_back(j + 1);
  for (int j : drop) result.dropped_indices.push_back(j + 1);
  if (!drop.empty()) {
    std::string note = "dropped variables with missing values:";
    for (int j : drop) note += " " + std::to_string(j + 1);
    result.notes.push_back(note);
  }

  result.sample.T = t_measurements;
  for (std::size_t s = 0; s < raw.size(); ++s) {
    Eigen::MatrixXd reduced(keep.size(), keep.size());
    for (std::size_t a = 0; a < keep.size(); ++a)
      for (std::size_t b = 0; b < keep.size(); ++b)
        reduced(a, b) = raw[s](keep[a], keep[b]);
    CorrelationMatrix matrix = [&] {
      try {
        return CorrelationMatrix::validated(std::move(reduced));
      } catch (const Error& e) {
        fail(e.code(), entries[s].path + ": " + e.what());
      }
    }();
    if (entries[s].group == 'H')
      result.sample.healthy.push_back(std::move(matrix));
    else
      result.sample.diseased.push_back(std::move(matrix));
  }
  result.sample.validate();

  if (!labels_path.empty()) {
    std::map<int, std::string> labels = read_labels(labels_path);
    for (int original : result.kept_indices) {
      auto it = labels.find(original);
      if (it == labels.end())
        fail(ErrorCode::IoError,
             "labels file is missing variable " + std::to_string(original));
      result.labels.push_back(it->second);
    }
  }
  result.notes.push_back("subjects: " + std::to_string(result.sample.n_h()) + " H, " +
                         std::to_string(result.sample.n_d()) + " D; p = " +
                         std::to_string(result.sample.p()));
  return result;
}

Config Config::from_string(const std::string& text) {
  Config config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::ConfigError,
           "line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": empty key");
    config.values_[key] = value;
  }
  return config;
}

Config Config::from_file(const std::string& path) {
  return from_string(read_text_file(path));
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  char* end = nullptr;
  double value = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str() || *end != '\0')
    fail(ErrorCode::ConfigError, key + ": not a number: '" + it->second + "'");
  return value;
}

int Config::get_int(const std::string& key, int fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  int value = 0;
  auto [ptr, ec] =
      std::from_chars(it->second.data(), it->second.data() + it->second.size(), value);
  if (ec != std::errc() || ptr != it->second.data() + it->second.size())
    fail(ErrorCode::ConfigError, key + ": not an integer: '" + it->second + "'");
  return value;
}

std::uint64_t Config::get_uint64(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::uint64_t value = 0;
  auto [ptr, ec] =
      std::from_chars(it->second.data(), it->second.data() + it->second.size(), value);
  if (ec != std::errc() || ptr != it->second.data() + it->second.size())
    fail(ErrorCode::ConfigError, key + ": not an unsigned integer: '" + it->second + "'");
  return value;
}

std::vector<double> Config::get_double_list(const std::string& key,
                                            std::vector<double> fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  for (const std::string& cell : split_csv_line(it->second)) {
    if (cell.empty()) continue;
    char* end = nullptr;
    double value = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0')
      fail(ErrorCode::ConfigError, key + ": bad list entry '" + cell + "'");
    out.push_back(value);
  }
  return out;
}

std::vector<int> Config::get_int_list(const std::string& key,
                                      std::vector<int> fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<int> out;
  for (const std::string& cell : split_csv_line(it->second)) {
    if (cell.empty()) continue;
    int value = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size())
      fail(ErrorCode::ConfigError, key + ": bad list entry '" + cell + "'");
    out.push_back(value);
  }
  return out;
}

void Config::require_known(const std::set<std::string>& allowed) const {
  for (const auto& [key, value] : values_)
    if (!allowed.count(key))
      fail(ErrorCode::ConfigError, "unknown config key '" + key + "'");
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hex_digest(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[value & 0xF];
    value >>= 4;
  }
  return out;
}

std::string file_digest(const std::string& path) {
  std::string content = read_text_file(path);
  return hex_digest(fnv1a64(content.data(), content.size()));
}

}  // namespace corrdiff

#include "corrdiff/io.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "corrdiff/errors.hpp"
#include "corrdiff/rng.hpp"
#include "corrdiff/sim_generators.hpp"
#include "support/oracles.hpp"

using namespace corrdiff;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("corrdiff_io_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

// Writes a small two-group dataset and returns the manifest path.
fs::path write_dataset(const fs::path& dir, const std::vector<CorrelationMatrix>& h,
                       const std::vector<CorrelationMatrix>& d) {
  std::string manifest = "subject_id,group,path\n";
  int id = 0;
  for (const auto& r : h) {
    std::string name = "h" + std::to_string(id++) + ".csv";
    write_matrix_csv((dir / name).string(), r.mat());
    manifest += "subj" + std::to_string(id) + ",H," + name + "\n";
  }
  for (const auto& r : d) {
    std::string name = "d" + std::to_string(id++) + ".csv";
    write_matrix_csv((dir / name).string(), r.mat());
    manifest += "subj" + std::to_string(id) + ",D," + name + "\n";
  }
  fs::path path = dir / "manifest.csv";
  write_file(path, manifest);
  return path;
}

}  // namespace

TEST_CASE("shortest round-trip formatting") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0, 13.913043478260869}) {
    std::string s = format_double(x);
    CHECK(std::strtod(s.c_str(), nullptr) == x);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
}

TEST_CASE("matrix csv round trip is exact") {
  fs::path dir = fresh_dir("matrix");
  RngStream rng(61);
  CorrelationMatrix r = oracles::random_correlation(7, rng);
  std::string path = (dir / "m.csv").string();
  write_matrix_csv(path, r.mat());
  Eigen::MatrixXd back = read_matrix_csv(path);
  REQUIRE(back == r.mat());
}

TEST_CASE("ingest validates and reports") {
  RngStream rng(62);
  std::vector<CorrelationMatrix> h, d;
  for (int i = 0; i < 3; ++i) h.push_back(oracles::random_correlation(4, rng));
  for (int i = 0; i < 2; ++i) d.push_back(oracles::random_correlation(4, rng));

  SECTION("clean dataset") {
    fs::path dir = fresh_dir("clean");
    fs::path manifest = write_dataset(dir, h, d);
    IngestResult result = ingest(manifest.string());
    CHECK(result.sample.n_h() == 3);
    CHECK(result.sample.n_d() == 2);
    CHECK(result.sample.p() == 4);
    CHECK(result.dropped_indices.empty());
    CHECK(result.kept_indices == std::vector<int>{1, 2, 3, 4});
  }

  SECTION("asymmetric matrix is rejected with the failing invariant named") {
    fs::path dir = fresh_dir("asym");
    fs::path manifest = write_dataset(dir, h, d);
    Eigen::MatrixXd bad = h[0].mat();
    bad(0, 1) += 0.2;
    write_matrix_csv((dir / "h0.csv").string(), bad);
    CHECK_THROWS_MATCHES(ingest(manifest.string()), Error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("asymmetry")));
  }

  SECTION("a missing cell drops its variable for all subjects") {
    fs::path dir = fresh_dir("missing");
    fs::path manifest = write_dataset(dir, h, d);
    // Blank out one cell in column 3 (1-based) of the first control subject.
    Eigen::MatrixXd m = h[0].mat();
    std::string text;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        if (j) text += ',';
        if (i == 0 && j == 2)
          text += "";
        else
          text += format_double(m(i, j));
      }
      text += '\n';
    }
    write_file(dir / "h0.csv", text);
    IngestResult result = ingest(manifest.string());
    CHECK(result.sample.p() == 3);
    CHECK(result.dropped_indices == std::vector<int>{3});
    CHECK(result.kept_indices == std::vector<int>{1, 2, 4});
  }

  SECTION("an entirely missing region drops exactly that region") {
    fs::path dir = fresh_dir("region");
    fs::path manifest = write_dataset(dir, h, d);
    Eigen::MatrixXd m = d[0].mat();
    std::string text;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        if (j) text += ',';
        if (i == 1 || j == 1)
          text += "nan";
        else
          text += format_double(m(i, j));
      }
      text += '\n';
    }
    write_file(dir / ("d" + std::to_string(3) + ".csv"), text);
    IngestResult result = ingest(manifest.string());
    CHECK(result.sample.p() == 3);
    CHECK(result.dropped_indices == std::vector<int>{2});
  }

  SECTION("labels are filtered to the kept variables") {
    fs::path dir = fresh_dir("labels");
    fs::path manifest = write_dataset(dir, h, d);
    write_file(dir / "labels.csv", "index,name\n1,Alpha\n2,Beta\n3,Gamma\n4,Delta\n");
    IngestResult result = ingest(manifest.string(), (dir / "labels.csv").string());
    REQUIRE(result.labels.size() == 4);
    CHECK(result.labels[2] == "Gamma");
  }

  SECTION("round trip: export the ingested sample and re-ingest") {
    fs::path dir = fresh_dir("roundtrip");
    fs::path manifest = write_dataset(dir, h, d);
    IngestResult first = ingest(manifest.string());

    fs::path dir2 = fresh_dir("roundtrip2");
    fs::path manifest2 = write_dataset(dir2, first.sample.healthy, first.sample.diseased);
    IngestResult second = ingest(manifest2.string());
    REQUIRE(second.sample.n_h() == first.sample.n_h());
    for (int i = 0; i < first.sample.n_h(); ++i)
      REQUIRE(second.sample.healthy[i].mat() == first.sample.healthy[i].mat());
    for (int i = 0; i < first.sample.n_d(); ++i)
      REQUIRE(second.sample.diseased[i].mat() == first.sample.diseased[i].mat());
  }
}

TEST_CASE("study-scale ingestion", "[slow]") {
  // Synthetic dataset shaped like a small clinical study: 17 controls, 12
  // patients, 86 variables.
  fs::path dir = fresh_dir("study");
  RngStream rng(63);
  CorrelationMatrix lambda = oracles::random_correlation(86, rng);
  std::vector<CorrelationMatrix> all = gen_samples(lambda, 29, 200, {}, {}, rng);
  std::vector<CorrelationMatrix> h(all.begin(), all.begin() + 17);
  std::vector<CorrelationMatrix> d(all.begin() + 17, all.end());
  fs::path manifest = write_dataset(dir, h, d);
  IngestResult result = ingest(manifest.string());
  CHECK(result.sample.n_h() == 17);
  CHECK(result.sample.n_d() == 12);
  CHECK(result.sample.p() == 86);
}

TEST_CASE("config parsing") {
  Config config = Config::from_string(
      "# comment\n"
      "link = multiplicative\n"
      "outer_tol = 1e-6\n"
      "max_outer_iters = 50\n"
      "seed = 12345\n"
      "effect_sizes = 0, 0.1, 0.2\n");
  CHECK(config.get_string("link", "") == "multiplicative");
  CHECK(config.get_double("outer_tol", 0.0) == 1e-6);
  CHECK(config.get_int("max_outer_iters", 0) == 50);
  CHECK(config.get_uint64("seed", 0) == 12345);
  CHECK(config.get_double_list("effect_sizes", {}) ==
        std::vector<double>{0.0, 0.1, 0.2});
  CHECK(config.get_double("missing", 2.5) == 2.5);

  CHECK_THROWS_AS(Config::from_string("novalue\n"), Error);
  CHECK_THROWS_AS(config.require_known({"link", "outer_tol"}), Error);
  CHECK_NOTHROW(config.require_known(
      {"link", "outer_tol", "max_outer_iters", "seed", "effect_sizes"}));
}

TEST_CASE("digests are stable") {
  const char* data = "corrdiff";
  CHECK(hex_digest(fnv1a64(data, 8)) == hex_digest(fnv1a64(data, 8)));
  CHECK(hex_digest(fnv1a64(data, 8)).size() == 16);
  CHECK(fnv1a64("a", 1) != fnv1a64("b", 1));
}

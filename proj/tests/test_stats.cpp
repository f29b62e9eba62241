#include "corrdiff/stats.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "corrdiff/errors.hpp"
#include "corrdiff/rng.hpp"
#include "support/oracles.hpp"

using namespace corrdiff;
using Catch::Approx;

TEST_CASE("normal tail probabilities") {
  CHECK(normal_cdf(0.0) == Approx(0.5).margin(1e-15));
  CHECK(normal_two_sided_p(0.0) == Approx(1.0));
  // Reference values from an independent implementation of the normal tail.
  CHECK(normal_two_sided_p(1.0) == Approx(0.3173105078629141).epsilon(1e-12));
  CHECK(normal_two_sided_p(2.5) == Approx(0.01241933065155226).epsilon(1e-12));
  CHECK(normal_two_sided_p(5.0) == Approx(5.733031437583866e-07).epsilon(1e-12));
  CHECK(normal_two_sided_p(-2.5) == normal_two_sided_p(2.5));
}

TEST_CASE("normal quantile") {
  CHECK(normal_quantile(0.975) == Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(0.995) == Approx(2.5758293035489).epsilon(1e-12));
  CHECK(normal_quantile(0.9999) == Approx(3.719016485455709).epsilon(1e-12));
  CHECK(normal_quantile(0.6) == Approx(0.2533471031357997).epsilon(1e-12));
  CHECK(normal_quantile(0.5) == Approx(0.0).margin(1e-15));
  // Round trip through the CDF across the useful range.
  for (double x = -6.0; x <= 6.0; x += 0.25)
    CHECK(normal_quantile(normal_cdf(x)) == Approx(x).margin(1e-10));
  CHECK_THROWS_AS(normal_quantile(0.0), Error);
  CHECK_THROWS_AS(normal_quantile(1.0), Error);
}

TEST_CASE("student t two-sided tail, fractional df") {
  // Frozen reference values (independent statistical library).
  CHECK(student_t_two_sided_p(2.5, 3.7) == Approx(0.07182202291182675).epsilon(1e-10));
  CHECK(student_t_two_sided_p(1.0, 1.0) == Approx(0.5).epsilon(1e-10));
  CHECK(student_t_two_sided_p(3.2, 45.3) == Approx(0.002511250273741845).epsilon(1e-10));
  CHECK(student_t_two_sided_p(0.5, 2.0) == Approx(2.0 / 3.0).epsilon(1e-10));
  CHECK(student_t_two_sided_p(6.0, 10.0) == Approx(0.0001321088603547856).epsilon(1e-10));
  CHECK(student_t_two_sided_p(2.0, 1.5) == Approx(0.2241883303560511).epsilon(1e-10));
  CHECK(student_t_two_sided_p(12.0, 3.0) == Approx(0.001245015800789336).epsilon(1e-10));
  CHECK(student_t_two_sided_p(0.0, 5.0) == 1.0);
  CHECK(student_t_two_sided_p(-2.5, 3.7) == student_t_two_sided_p(2.5, 3.7));
}

TEST_CASE("benjamini-hochberg adjustment") {
  SECTION("worked example") {
    std::vector<double> p = {0.01, 0.02, 0.03, 0.04};
    std::vector<double> adjusted = bh_adjust(p);
    for (double value : adjusted) CHECK(value == Approx(0.04).margin(1e-15));
  }

  SECTION("matches the direct step-up definition on grid-valued vectors") {
    RngStream rng(77);
    for (int trial = 0; trial < 400; ++trial) {
      int m = 1 + static_cast<int>(rng.next_u64() % 6);
      std::vector<double> p(m);
      for (int i = 0; i < m; ++i)
        p[i] = 0.01 * (1 + static_cast<int>(rng.next_u64() % 100));
      std::vector<double> fast = bh_adjust(p);
      std::vector<double> direct = oracles::bh_adjust_direct(p);
      for (int i = 0; i < m; ++i) CHECK(fast[i] == Approx(direct[i]).margin(1e-14));

      // Selection via adjusted values reproduces the classical step-up rule.
      for (double q : {0.01, 0.05, 0.1, 0.25}) {
        std::vector<bool> via_adjusted(m);
        for (int i = 0; i < m; ++i) via_adjusted[i] = fast[i] <= q;
        CHECK(via_adjusted == oracles::bh_reject_direct(p, q));
      }
    }
  }

  SECTION("adjusted values never fall below the raw ones") {
    RngStream rng(78);
    for (int trial = 0; trial < 50; ++trial) {
      int m = 2 + static_cast<int>(rng.next_u64() % 10);
      std::vector<double> p(m);
      for (int i = 0; i < m; ++i) p[i] = rng.uniform();
      std::vector<double> adjusted = bh_adjust(p);
      for (int i = 0; i < m; ++i) {
        CHECK(adjusted[i] >= p[i] - 1e-15);
        CHECK(adjusted[i] <= 1.0);
      }
    }
  }
}

TEST_CASE("median") {
  CHECK(median({3.0}) == 3.0);
  CHECK(median({1.0, 2.0}) == Approx(1.5));
  CHECK(median({5.0, 1.0, 3.0}) == 3.0);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == Approx(2.5));
  CHECK_THROWS_AS(median({}), Error);

  // Against a sort-based reference, even and odd sizes.
  RngStream rng(79);
  for (int trial = 0; trial < 50; ++trial) {
    int n = 1 + static_cast<int>(rng.next_u64() % 12);
    std::vector<double> values(n);
    for (int i = 0; i < n; ++i) values[i] = rng.uniform(-5.0, 5.0);
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    double expected =
        n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    CHECK(median(values) == Approx(expected).margin(1e-15));
  }
}

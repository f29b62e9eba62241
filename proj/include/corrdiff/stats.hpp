#pragma once

#include <vector>

namespace corrdiff {

/// Standard normal CDF via std::erfc; absolute error well below 1e-12.
double normal_cdf(double x);

/// Two-sided normal tail probability P(|Z| >= |z|).
double normal_two_sided_p(double z);

/// Standard normal quantile. Acklam's rational approximation refined with one
/// Halley step against the erfc-based CDF; accurate to ~1e-15 in (0, 1).
double normal_quantile(double prob);

/// Two-sided Student-t tail probability P(|T_df| >= |t|), fractional df
/// supported (regularized incomplete beta, Lentz continued fraction).
double student_t_two_sided_p(double t, double df);

double regularized_incomplete_beta(double a, double b, double x);

/// Benjamini-Hochberg step-up adjusted p-values (same order as the input).
std::vector<double> bh_adjust(const std::vector<double>& p_values);

/// Median; for even sizes the mean of the two central order statistics.
double median(std::vector<double> values);

}  // namespace corrdiff

#pragma once

#include <span>

namespace fm::numerics {

/// Standard normal CDF, evaluated through erfc so both tails keep full
/// relative precision.
double gaussian_cdf(double x) noexcept;

/// Standard normal density.
double gaussian_pdf(double x) noexcept;

/// Percent point function (inverse CDF) of the standard normal.
///
/// Acklam's rational approximation followed by one Newton step on
/// gaussian_cdf. Throws Error{Errc::Domain} unless 0 < p < 1.
double gaussian_ppf(double p);

/// Regularized incomplete beta function I_x(a, b) for a, b > 0, x in [0, 1].
double regularized_incomplete_beta(double a, double b, double x);

/// Two-tailed tail probability P(|T_df| >= |t|) of Student's t.
double student_t_two_tailed_p(double t, int df);

double mean(std::span<const double> xs);

/// Population variance (divides by N).
double population_variance(std::span<const double> xs);

/// Unbiased sample variance (divides by N - 1). Requires N >= 2.
double sample_variance(std::span<const double> xs);

/// Linearly interpolated quantile of the sorted data (Hyndman-Fan type 7).
double quantile_sorted(std::span<const double> sorted, double q);

}  // namespace fm::numerics

#pragma once

#include <cstddef>

namespace contra::stats {

// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double regularized_gamma_p(double a, double x);

// Chi-squared distribution with k degrees of freedom.
double chi_square_cdf(double k, double x);
double chi_square_quantile(double k, double p);

// Median of the chi distribution (norm of a k-dimensional standard normal).
double chi_median(double k);
double chi_quantile(double k, double p);

// Volume of the Euclidean unit ball in R^q: pi^{q/2} / Gamma(q/2 + 1).
double unit_ball_volume(std::size_t q);
double ball_volume(std::size_t q, double radius);

// Split-conformal order statistic: the ceil((1-alpha)(n+1))-th smallest
// calibration score is the threshold. Returns the 1-based index k, or 0 when
// k would exceed n (the region is then the whole space). The product is
// snapped to the nearest integer when within 1e-9 so that exact rational
// cases like alpha = 0.1, n = 9 do not fall victim to binary rounding.
std::size_t conformal_rank(std::size_t n, double alpha);

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

// Sample mean and standard error (sd / sqrt(n)) of a series.
MeanSe mean_se(const double* v, std::size_t n);

}  // namespace contra::stats

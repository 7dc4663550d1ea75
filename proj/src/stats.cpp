#include "contra/stats.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace contra::stats {

namespace {

// Series expansion of P(a, x), converges fast for x < a + 1.
double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) = 1 - P(a, x), for x >= a + 1.
double gamma_q_contfrac(double a, double x) {
    const double tiny = std::numeric_limits<double>::min() / 1e-30;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double regularized_gamma_p(double a, double x) {
    if (!(a > 0.0)) throw std::invalid_argument("regularized_gamma_p: a must be > 0");
    if (x < 0.0) throw std::invalid_argument("regularized_gamma_p: x must be >= 0");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_contfrac(a, x);
}

double chi_square_cdf(double k, double x) {
    if (x <= 0.0) return 0.0;
    return regularized_gamma_p(0.5 * k, 0.5 * x);
}

double chi_square_quantile(double k, double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("chi_square_quantile: p must be in (0,1)");
    // Bisection on the CDF; bracket grows until it contains the quantile.
    double lo = 0.0;
    double hi = k + 10.0;
    while (chi_square_cdf(k, hi) < p) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (chi_square_cdf(k, mid) < p)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-13 * (1.0 + hi)) break;
    }
    return 0.5 * (lo + hi);
}

double chi_quantile(double k, double p) { return std::sqrt(chi_square_quantile(k, p)); }

double chi_median(double k) { return chi_quantile(k, 0.5); }

double unit_ball_volume(std::size_t q) {
    const double qd = static_cast<double>(q);
    return std::pow(std::numbers::pi, 0.5 * qd) / std::tgamma(0.5 * qd + 1.0);
}

double ball_volume(std::size_t q, double radius) {
    return unit_ball_volume(q) * std::pow(radius, static_cast<double>(q));
}

std::size_t conformal_rank(std::size_t n, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("conformal_rank: alpha must be in (0,1)");
    if (n == 0) throw std::invalid_argument("conformal_rank: empty calibration set");
    const double target = (1.0 - alpha) * static_cast<double>(n + 1);
    const double snapped = std::round(target);
    const double k = (std::fabs(target - snapped) < 1e-9 * (1.0 + std::fabs(target)))
                         ? snapped
                         : std::ceil(target);
    if (k > static_cast<double>(n)) return 0;
    return static_cast<std::size_t>(k);
}

MeanSe mean_se(const double* v, std::size_t n) {
    MeanSe out;
    if (n == 0) return out;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += v[i];
    out.mean = sum / static_cast<double>(n);
    if (n < 2) return out;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = v[i] - out.mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    out.se = sd / std::sqrt(static_cast<double>(n));
    return out;
}

}  // namespace contra::stats

#include "contra/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "contra/kernels.hpp"
#include "contra/stats.hpp"

namespace contra {

const char* to_string(DispersionFlag flag) {
    switch (flag) {
        case DispersionFlag::Ok: return "OK";
        case DispersionFlag::OverDispersed: return "OVER_DISPERSED";
        case DispersionFlag::UnderDispersed: return "UNDER_DISPERSED";
    }
    return "?";
}

LatentCalibration calibrate(const FlowModel& model, const Dataset& cal) {
    if (cal.n == 0) throw std::invalid_argument("calibrate: empty calibration set");
    if (cal.p != model.p || cal.q != model.q)
        throw std::invalid_argument("calibrate: dataset dimensions do not match model");
    LatentCalibration out;
    out.n2 = cal.n;
    out.q = model.q;
    out.z = Matrix(cal.n, model.q);
    out.sorted_norms.resize(cal.n);
    FlowEvaluator eval(model);
    for (std::size_t i = 0; i < cal.n; ++i) {
        eval.condition(cal.x_row(i));
        eval.inverse(cal.y_row(i), {out.z.row(i), model.q});
        out.sorted_norms[i] = std::sqrt(kernels::active().sumsq(out.z.row(i), model.q));
    }
    std::sort(out.sorted_norms.begin(), out.sorted_norms.end());
    return out;
}

ConformalBall conformal_radius(const LatentCalibration& cal, double alpha) {
    if (cal.n2 == 0) throw std::invalid_argument("conformal_radius: empty calibration");
    ConformalBall ball;
    ball.alpha = alpha;
    ball.n2 = cal.n2;
    const std::size_t k = stats::conformal_rank(cal.n2, alpha);
    if (k == 0) {
        ball.unbounded = true;
        return ball;
    }
    ball.radius = cal.sorted_norms[k - 1];
    return ball;
}

bool region_contains(const FlowModel& model, const ConformalBall& ball,
                     std::span<const double> x, std::span<const double> y) {
    if (ball.unbounded) return true;
    FlowEvaluator eval(model);
    eval.condition(x);
    return eval.latent_norm(y) <= ball.radius;
}

RegionBoundary region_boundary(const FlowModel& model, const ConformalBall& ball,
                               std::span<const double> x, std::size_t m_points,
                               std::uint64_t seed) {
    if (ball.unbounded)
        throw std::domain_error("region_boundary: unbounded region has no boundary");
    if (m_points < 3) throw std::invalid_argument("region_boundary: need m_points >= 3");
    RegionBoundary out;
    out.x.assign(x.begin(), x.end());
    out.points = Matrix(m_points, model.q);
    FlowEvaluator eval(model);
    eval.condition(x);
    std::vector<double> z(model.q);
    if (model.q == 2) {
        out.closed = true;
        for (std::size_t j = 0; j < m_points; ++j) {
            const double theta =
                2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(m_points);
            z[0] = ball.radius * std::cos(theta);
            z[1] = ball.radius * std::sin(theta);
            eval.forward(z, {out.points.row(j), model.q});
        }
        return out;
    }
    Rng rng(seed);
    for (std::size_t j = 0; j < m_points; ++j) {
        double norm = 0.0;
        do {
            rng.normal_fill(z.data(), z.size());
            norm = std::sqrt(kernels::active().sumsq(z.data(), z.size()));
        } while (norm == 0.0);
        const double scale = ball.radius / norm;
        for (double& v : z) v *= scale;
        eval.forward(z, {out.points.row(j), model.q});
    }
    return out;
}

VolumeEstimate region_volume(const FlowModel& model, const ConformalBall& ball,
                             std::span<const double> x, std::size_t b, std::uint64_t seed) {
    if (ball.unbounded)
        throw std::domain_error("region_volume: unbounded region has infinite volume");
    if (b < 100) throw std::invalid_argument("region_volume: need at least 100 draws");
    VolumeEstimate out;
    out.samples = b;
    out.seed = seed;
    const double ball_vol = stats::ball_volume(model.q, ball.radius);
    FlowEvaluator eval(model);
    eval.condition(x);
    Rng rng(seed);
    std::vector<double> z(model.q);
    std::vector<double> y(model.q);
    double sum = 0.0, sumsq = 0.0;
    const double inv_q = 1.0 / static_cast<double>(model.q);
    for (std::size_t i = 0; i < b; ++i) {
        double norm = 0.0;
        do {
            rng.normal_fill(z.data(), z.size());
            norm = std::sqrt(kernels::active().sumsq(z.data(), z.size()));
        } while (norm == 0.0);
        // Uniform in the ball: random direction, radius r * U^{1/q}.
        const double radius = ball.radius * std::pow(rng.uniform(), inv_q);
        const double scale = radius / norm;
        for (double& v : z) v *= scale;
        const double det = std::exp(eval.forward(z, y));
        sum += det;
        sumsq += det * det;
    }
    const double nb = static_cast<double>(b);
    const double mean = sum / nb;
    const double var = std::max(0.0, (sumsq - nb * mean * mean) / (nb - 1.0));
    out.estimate = ball_vol * mean;
    out.std_error = ball_vol * std::sqrt(var / nb);
    return out;
}

LatentDiagnostics latent_diagnostics(const LatentCalibration& cal, double factor) {
    if (cal.n2 < 20)
        throw std::invalid_argument("latent_diagnostics: need at least 20 calibration points");
    LatentDiagnostics out;
    out.factor = factor;
    const std::size_t q = cal.q;
    const std::size_t n = cal.n2;
    out.mean.assign(q, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < q; ++j) out.mean[j] += cal.z(i, j);
    for (double& m : out.mean) m /= static_cast<double>(n);
    out.covariance = Matrix(q, q);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < q; ++j)
            for (std::size_t l = 0; l < q; ++l)
                out.covariance(j, l) +=
                    (cal.z(i, j) - out.mean[j]) * (cal.z(i, l) - out.mean[l]);
    for (double& v : out.covariance.a) v /= static_cast<double>(n - 1);

    out.probs = {0.25, 0.5, 0.75, 0.9};
    const auto& norms = cal.sorted_norms;
    for (double prob : out.probs) {
        const auto idx = static_cast<std::size_t>(
            std::min<double>(static_cast<double>(n - 1),
                             std::floor(prob * static_cast<double>(n))));
        const double empirical = norms[idx];
        out.norm_quantile_ratio.push_back(
            empirical / stats::chi_quantile(static_cast<double>(q), prob));
    }
    const std::size_t mid = n / 2;
    out.median_norm = (n % 2 == 1) ? norms[mid] : 0.5 * (norms[mid - 1] + norms[mid]);
    out.chi_median = stats::chi_median(static_cast<double>(q));
    if (out.median_norm > factor * out.chi_median)
        out.flag = DispersionFlag::OverDispersed;
    else if (out.median_norm < out.chi_median / factor)
        out.flag = DispersionFlag::UnderDispersed;
    else
        out.flag = DispersionFlag::Ok;
    return out;
}

}  // namespace contra

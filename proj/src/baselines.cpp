#include "contra/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "contra/kernels.hpp"
#include "contra/stats.hpp"

namespace contra {

namespace {

// K conditional samples at x, written as a k x q matrix.
Matrix draw_samples(const FlowModel& model, std::span<const double> x, std::size_t k,
                    std::uint64_t seed) {
    Matrix out(k, model.q);
    FlowEvaluator eval(model);
    eval.condition(x);
    Rng rng(seed);
    std::vector<double> z(model.q);
    for (std::size_t i = 0; i < k; ++i) {
        rng.normal_fill(z.data(), z.size());
        eval.forward(z, {out.row(i), model.q});
    }
    return out;
}

double min_distance(const Matrix& samples, std::span<const double> y) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < samples.rows; ++i) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < samples.cols; ++j) {
            const double d = samples(i, j) - y[j];
            d2 += d * d;
        }
        best = std::min(best, d2);
    }
    return std::sqrt(best);
}

std::uint64_t query_seed(const PcpPredictor& pred, std::span<const double> x) {
    return Rng::hash_combine(pred.seed, hash_doubles(x.data(), x.size()));
}

}  // namespace

double pcp_score(const FlowModel& model, std::span<const double> x, std::span<const double> y,
                 std::size_t k, std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("pcp_score: need k >= 1");
    return min_distance(draw_samples(model, x, k, seed), y);
}

PcpPredictor pcp_calibrate(std::shared_ptr<const FlowModel> model, const Dataset& cal,
                           std::size_t k, double alpha, std::uint64_t seed) {
    if (!model) throw std::invalid_argument("pcp_calibrate: null model");
    if (k < 1) throw std::invalid_argument("pcp_calibrate: need k >= 1");
    if (cal.n == 0) throw std::invalid_argument("pcp_calibrate: empty calibration set");
    PcpPredictor pred;
    pred.model = std::move(model);
    pred.k = k;
    pred.alpha = alpha;
    pred.seed = seed;
    std::vector<double> scores(cal.n);
    for (std::size_t i = 0; i < cal.n; ++i)
        scores[i] = pcp_score(*pred.model, cal.x_row(i), cal.y_row(i), k,
                              Rng::hash_combine(seed, i));
    const std::size_t rank = stats::conformal_rank(cal.n, alpha);
    if (rank == 0) {
        pred.unbounded = true;
        return pred;
    }
    std::nth_element(scores.begin(), scores.begin() + (rank - 1), scores.end());
    pred.radius = scores[rank - 1];
    return pred;
}

bool pcp_contains(const PcpPredictor& pred, std::span<const double> x,
                  std::span<const double> y) {
    if (pred.unbounded) return true;
    const Matrix samples = draw_samples(*pred.model, x, pred.k, query_seed(pred, x));
    return min_distance(samples, y) <= pred.radius;
}

VolumeEstimate pcp_volume(const PcpPredictor& pred, std::span<const double> x, std::size_t b,
                          std::uint64_t seed) {
    if (pred.unbounded)
        throw std::domain_error("pcp_volume: unbounded region has infinite volume");
    if (b < 100) throw std::invalid_argument("pcp_volume: need at least 100 draws");
    const std::size_t q = pred.model->q;
    const Matrix centers = draw_samples(*pred.model, x, pred.k, query_seed(pred, x));
    std::vector<double> lo(q, std::numeric_limits<double>::infinity());
    std::vector<double> hi(q, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < centers.rows; ++i)
        for (std::size_t j = 0; j < q; ++j) {
            lo[j] = std::min(lo[j], centers(i, j) - pred.radius);
            hi[j] = std::max(hi[j], centers(i, j) + pred.radius);
        }
    double box_vol = 1.0;
    for (std::size_t j = 0; j < q; ++j) box_vol *= hi[j] - lo[j];

    Rng rng(seed);
    std::vector<double> point(q);
    const double r2 = pred.radius * pred.radius;
    std::size_t hits = 0;
    for (std::size_t t = 0; t < b; ++t) {
        for (std::size_t j = 0; j < q; ++j) point[j] = rng.uniform(lo[j], hi[j]);
        for (std::size_t i = 0; i < centers.rows; ++i) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < q; ++j) {
                const double d = centers(i, j) - point[j];
                d2 += d * d;
            }
            if (d2 <= r2) {
                ++hits;
                break;
            }
        }
    }
    const double frac = static_cast<double>(hits) / static_cast<double>(b);
    VolumeEstimate out;
    out.samples = b;
    out.seed = seed;
    out.estimate = box_vol * frac;
    out.std_error = box_vol * std::sqrt(frac * (1.0 - frac) / static_cast<double>(b));
    return out;
}

RcpPredictor rcp_fit(const Dataset& d1, const KernelRidgeConfig& cfg) {
    if (d1.n < 2) throw std::invalid_argument("rcp_fit: need at least 2 training points");
    RcpPredictor pred;
    pred.center = KernelRidge(cfg);
    pred.center.fit(d1);

    const std::size_t q = d1.q;
    pred.covariance = Matrix(q, q);
    Matrix residuals(d1.n, q);
    std::vector<double> mean(q, 0.0);
    for (std::size_t i = 0; i < d1.n; ++i) {
        const auto fhat = pred.center.predict(d1.x_row(i));
        for (std::size_t j = 0; j < q; ++j) {
            residuals(i, j) = d1.y[i * q + j] - fhat[j];
            mean[j] += residuals(i, j);
        }
    }
    for (double& v : mean) v /= static_cast<double>(d1.n);
    for (std::size_t i = 0; i < d1.n; ++i)
        for (std::size_t j = 0; j < q; ++j)
            for (std::size_t l = 0; l < q; ++l)
                pred.covariance(j, l) += (residuals(i, j) - mean[j]) * (residuals(i, l) - mean[l]);
    for (double& v : pred.covariance.a) v /= static_cast<double>(d1.n - 1);

    // Ridge-regularize until the factorization succeeds.
    double trace = 0.0;
    for (std::size_t j = 0; j < q; ++j) trace += pred.covariance(j, j);
    double jitter = 0.0;
    for (int attempt = 0;; ++attempt) {
        pred.chol = pred.covariance;
        for (std::size_t j = 0; j < q; ++j) pred.chol(j, j) += jitter;
        if (cholesky_in_place(pred.chol)) {
            if (jitter > 0.0)
                for (std::size_t j = 0; j < q; ++j) pred.covariance(j, j) += jitter;
            break;
        }
        if (attempt >= 20) throw std::runtime_error("rcp_fit: covariance stayed singular");
        jitter = jitter == 0.0 ? 1e-12 * std::max(trace, 1.0) : jitter * 10.0;
    }
    pred.log_det = cholesky_log_det(pred.chol);
    return pred;
}

double rcp_score(const RcpPredictor& pred, std::span<const double> x,
                 std::span<const double> y) {
    const auto fhat = pred.center.predict(x);
    const std::size_t q = y.size();
    std::vector<double> diff(q), white(q);
    for (std::size_t j = 0; j < q; ++j) diff[j] = y[j] - fhat[j];
    forward_substitute(pred.chol, diff.data(), white.data());
    return std::sqrt(kernels::active().sumsq(white.data(), q));
}

void rcp_calibrate(RcpPredictor& pred, const Dataset& cal, double alpha) {
    if (cal.n == 0) throw std::invalid_argument("rcp_calibrate: empty calibration set");
    pred.alpha = alpha;
    std::vector<double> scores(cal.n);
    for (std::size_t i = 0; i < cal.n; ++i)
        scores[i] = rcp_score(pred, cal.x_row(i), cal.y_row(i));
    const std::size_t rank = stats::conformal_rank(cal.n, alpha);
    if (rank == 0) {
        pred.unbounded = true;
        return;
    }
    std::nth_element(scores.begin(), scores.begin() + (rank - 1), scores.end());
    pred.radius = scores[rank - 1];
    pred.unbounded = false;
}

bool rcp_contains(const RcpPredictor& pred, std::span<const double> x,
                  std::span<const double> y) {
    if (pred.unbounded) return true;
    return rcp_score(pred, x, y) <= pred.radius;
}

double rcp_volume(const RcpPredictor& pred) {
    if (pred.unbounded)
        throw std::domain_error("rcp_volume: unbounded region has infinite volume");
    const std::size_t q = pred.covariance.rows;
    return stats::unit_ball_volume(q) * std::exp(0.5 * pred.log_det) *
           std::pow(pred.radius, static_cast<double>(q));
}

}  // namespace contra

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "contra/flow.hpp"
#include "contra/linalg.hpp"

namespace contra {

// Latent representations z_i = t^{-1}(y_i, x_i) of a calibration set and
// their sorted Euclidean norms.
struct LatentCalibration {
    Matrix z;                         // n2 x q
    std::vector<double> sorted_norms;  // ascending
    std::size_t n2 = 0;
    std::size_t q = 0;
};

// Latent-space ball of calibrated radius. `unbounded` marks the whole-space
// region forced when ceil((1-alpha)(n2+1)) > n2.
struct ConformalBall {
    double radius = 0.0;
    bool unbounded = false;
    double alpha = 0.0;
    std::size_t n2 = 0;
};

struct RegionBoundary {
    std::vector<double> x;
    Matrix points;  // m x q, sweep-ordered for q = 2
    bool closed = false;
};

struct VolumeEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
};

enum class DispersionFlag { Ok, OverDispersed, UnderDispersed };

struct LatentDiagnostics {
    std::vector<double> mean;           // per latent coordinate
    Matrix covariance;                  // q x q
    std::vector<double> probs;          // quantile levels checked
    std::vector<double> norm_quantile_ratio;  // empirical / chi_q quantile
    double median_norm = 0.0;
    double chi_median = 0.0;
    double factor = 1.25;
    DispersionFlag flag = DispersionFlag::Ok;
};

const char* to_string(DispersionFlag flag);

LatentCalibration calibrate(const FlowModel& model, const Dataset& cal);

ConformalBall conformal_radius(const LatentCalibration& cal, double alpha);

// Membership: ||t^{-1}(y, x)|| <= r. An unbounded ball contains everything.
bool region_contains(const FlowModel& model, const ConformalBall& ball,
                     std::span<const double> x, std::span<const double> y);

// Forward image of the radius-r sphere: deterministic angular sweep for
// q = 2 (closed polyline), seeded random directions otherwise.
RegionBoundary region_boundary(const FlowModel& model, const ConformalBall& ball,
                               std::span<const double> x, std::size_t m_points,
                               std::uint64_t seed);

// Vol(E) * mean_b |det J_t(z_b)| over uniform-in-ball draws, with MC
// standard error. Estimates are in raw output units.
VolumeEstimate region_volume(const FlowModel& model, const ConformalBall& ball,
                             std::span<const double> x, std::size_t b, std::uint64_t seed);

// Health check of calibration latents against N(0, I_q); flags over/under-
// dispersion when the median norm strays from the chi_q median by more than
// `factor`. A well-fitted flow leaves latents close to the base Gaussian.
LatentDiagnostics latent_diagnostics(const LatentCalibration& cal, double factor = 1.25);

}  // namespace contra

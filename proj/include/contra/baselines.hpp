#pragma once

#include <cstdint>
#include <memory>
#include <span>

#include "contra/conformal.hpp"
#include "contra/rescontra.hpp"

namespace contra {

// PCP: the region is a union of balls of calibrated radius around K
// conditional samples. Prediction-time samples are regenerated from
// (seed, hash(x)) so repeated queries at the same x agree.
struct PcpPredictor {
    std::shared_ptr<const FlowModel> model;
    std::size_t k = 40;
    double radius = 0.0;
    bool unbounded = false;
    double alpha = 0.0;
    std::uint64_t seed = 0;
};

// min_k || y - y_hat_k || over K seeded conditional samples.
double pcp_score(const FlowModel& model, std::span<const double> x, std::span<const double> y,
                 std::size_t k, std::uint64_t seed);

// Calibration score i uses the seed stream derive(seed, i).
PcpPredictor pcp_calibrate(std::shared_ptr<const FlowModel> model, const Dataset& cal,
                           std::size_t k, double alpha, std::uint64_t seed);

bool pcp_contains(const PcpPredictor& pred, std::span<const double> x,
                  std::span<const double> y);

// Hit-or-miss Monte Carlo over the bounding box of the K ball centers
// inflated by the radius; union-correct (no double counting).
VolumeEstimate pcp_volume(const PcpPredictor& pred, std::span<const double> x, std::size_t b,
                          std::uint64_t seed);

// RCP: global-covariance ellipsoid around a conditional-mean estimate.
// Score is the Mahalanobis distance of the residual under the pooled
// covariance; the region volume is closed-form.
struct RcpPredictor {
    KernelRidge center;
    Matrix covariance;    // q x q, ridge-regularized to be PD
    Matrix chol;          // Cholesky factor of covariance
    double log_det = 0.0;
    double radius = 0.0;  // calibrated Mahalanobis radius
    bool unbounded = false;
    double alpha = 0.0;
};

RcpPredictor rcp_fit(const Dataset& d1, const KernelRidgeConfig& cfg);
void rcp_calibrate(RcpPredictor& pred, const Dataset& cal, double alpha);
double rcp_score(const RcpPredictor& pred, std::span<const double> x,
                 std::span<const double> y);
bool rcp_contains(const RcpPredictor& pred, std::span<const double> x,
                  std::span<const double> y);
// Vol(unit ball_q) * sqrt(det Sigma) * rho^q; independent of x.
double rcp_volume(const RcpPredictor& pred);

}  // namespace contra

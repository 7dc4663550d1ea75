#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "contra/dataset.hpp"
#include "contra/net.hpp"

namespace contra {

struct QuantileNetConfig {
    std::size_t hidden = 64;
    std::size_t hidden_layers = 2;
    std::size_t epochs = 80;
    std::size_t batch = 256;
    double lr = 1e-3;
    std::uint64_t seed = 1;
};

// Per-dimension lower/upper conditional quantile nets at levels alpha/2 and
// 1 - alpha/2, trained with pinball loss on standardized data; the public
// evaluations are in raw units.
struct QuantilePair {
    std::vector<DenseNet> lower;  // q nets, x -> scalar
    std::vector<DenseNet> upper;
    double alpha = 0.1;
    StandardizeStats x_stats;
    StandardizeStats y_stats;
    std::vector<double> loss_trace;  // mean pinball loss per epoch (standardized)
};

QuantilePair train_quantile_nets(const Dataset& d1, double alpha,
                                 const QuantileNetConfig& cfg);

// Raw-unit quantile estimates for every output dimension.
void quantile_eval(const QuantilePair& nets, std::span<const double> x,
                   std::span<double> lower_out, std::span<double> upper_out);

// Pinball loss of a scalar net over a batch, gradients accumulated; shared
// by training and the finite-difference tests.
double pinball_loss_grad(const DenseNet& net, std::span<const double> xs,
                         std::span<const double> targets, std::size_t n, std::size_t p,
                         double tau, NetGrads& grads);

// w = (w_11, w_12, ..., w_q1, w_q2): lower[j] = w_j1, upper[j] = w_j2.
struct WeightVector {
    std::vector<double> lower;
    std::vector<double> upper;
};
WeightVector uniform_weights(std::size_t q);
// Scale so the smallest component is 1 (regions are scaling-invariant).
WeightVector normalize(WeightVector w);

// max_j { w_j1 (Ql_j(x) - y_j), w_j2 (y_j - Qu_j(x)) }; negative inside the
// unexpanded box.
double mcqr_score(const QuantilePair& nets, const WeightVector& w, std::span<const double> x,
                  std::span<const double> y);

struct McqrThreshold {
    double s = 0.0;
    bool unbounded = false;
    double alpha = 0.0;
    std::size_t n2 = 0;
};
McqrThreshold mcqr_calibrate(const QuantilePair& nets, const WeightVector& w,
                             const Dataset& cal, double alpha);

struct BoxRegion {
    std::vector<double> lower;
    std::vector<double> upper;
    bool degenerate = false;  // some side is negative: the box is empty
};
BoxRegion mcqr_region(const QuantilePair& nets, const WeightVector& w, double s,
                      std::span<const double> x);
// Product of side lengths; 0 for a degenerate box.
double box_volume(const BoxRegion& box);
bool box_contains(const BoxRegion& box, std::span<const double> y);

// Cyclic coordinate search over log-weights minimizing the average
// calibrated-region volume on `d2_weights`; never worse than w = 1.
WeightVector optimize_weights(const QuantilePair& nets, const Dataset& d2_weights,
                              double alpha);

struct McqrPredictor {
    QuantilePair nets;
    WeightVector w;
    McqrThreshold threshold;
};

// Trains on d1 and calibrates on d2. To keep calibration scores exchangeable
// with test scores, d2 is split in half: weights are optimized on the first
// half, the threshold s_{1-alpha} comes from the second half only.
McqrPredictor mcqr_fit(const Dataset& d1, const Dataset& d2, double alpha,
                       const QuantileNetConfig& cfg, bool optimize = true);

// Calibration-only path for already-trained nets (same half-split rule).
McqrPredictor mcqr_calibrate_predictor(QuantilePair nets, const Dataset& d2, double alpha,
                                       bool optimize = true);

bool mcqr_contains(const McqrPredictor& pred, std::span<const double> x,
                   std::span<const double> y);
BoxRegion mcqr_predict_region(const McqrPredictor& pred, std::span<const double> x);

}  // namespace contra

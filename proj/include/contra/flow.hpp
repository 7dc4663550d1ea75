#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "contra/dataset.hpp"
#include "contra/net.hpp"

namespace contra {

// Conditional RealNVP: a stack of affine coupling layers defines a bijection
// t(z, x) between a standard Gaussian latent and the output, conditioned on x.
// Raw scale outputs pass through c*tanh(u/c) before exponentiation so every
// layer stays invertible with per-layer log-det bounded by clamp * q.

struct CouplingLayer {
    std::vector<std::uint32_t> pass_idx;   // I1, unchanged (empty when q == 1)
    std::vector<std::uint32_t> trans_idx;  // I2, scaled and shifted
    DenseNet scale_net;                    // (y_I1, x) -> |I2|
    DenseNet shift_net;                    // (y_I1, x) -> |I2|
    double clamp = 5.0;
};

struct FlowConfig {
    std::size_t layers = 6;
    std::size_t hidden = 128;
    std::size_t hidden_layers = 2;
    std::size_t epochs = 200;
    std::size_t batch = 256;
    double lr = 1e-3;
    // Cosine decay from lr to lr * lr_floor across the epochs; a constant
    // rate leaves the endpoint on an oscillation instead of a settled state.
    double lr_floor = 0.05;
    double clamp = 5.0;
    std::uint64_t seed = 1;
    bool standardize_y = true;  // internal; outputs stay in raw units
};

struct FlowModel {
    std::size_t p = 0;
    std::size_t q = 0;
    std::vector<CouplingLayer> layers;
    StandardizeStats x_stats;  // applied to the conditioner input
    StandardizeStats y_stats;  // folded into the bijection as an affine layer
    FlowConfig config;
    std::vector<double> loss_trace;  // mean NLL per epoch, raw units
    bool aborted_divergent = false;
};

// Alternating even/odd partitions (I1 = {0}, I2 = {1} for q = 2); for q = 1
// each layer is the conditional affine map y -> y exp(u(x)) + v(x).
FlowModel make_flow(std::size_t p, std::size_t q, const FlowConfig& cfg, Rng& rng);
// Zero conditioner nets: the flow is the identity (up to y standardization).
FlowModel make_identity_flow(std::size_t p, std::size_t q, const FlowConfig& cfg);

// Single-layer transform; `cond` is the conditioner input tail (the model
// feeds standardized x here). Returns the layer's forward log-det (the
// inverse direction contributes its negation).
struct CouplingWork {
    NetScratch scale, shift;
    std::vector<double> h, s_raw, s, tanh_s, v;
};
void coupling_forward(const CouplingLayer& layer, std::span<const double> in,
                      std::span<const double> cond, std::span<double> out, double& logdet,
                      CouplingWork& work);
void coupling_inverse(const CouplingLayer& layer, std::span<const double> in,
                      std::span<const double> cond, std::span<double> out, double& logdet,
                      CouplingWork& work);

// Reusable evaluation workspace bound to one model. condition(x) standardizes
// and caches the conditioning point for repeated forward/inverse calls.
class FlowEvaluator {
public:
    explicit FlowEvaluator(const FlowModel& model);

    void condition(std::span<const double> x);

    // z (latent) -> y (raw units); returns log|det J_t| including the
    // y-standardization Jacobian. Throws on non-finite intermediates.
    double forward(std::span<const double> z, std::span<double> y);
    // y (raw) -> z; returns log-det of the inverse map.
    double inverse(std::span<const double> y, std::span<double> z);

    double latent_norm(std::span<const double> y);

    const FlowModel& model() const { return *model_; }

private:
    const FlowModel* model_;
    std::vector<double> x_std_;
    std::vector<double> buf_a_, buf_b_;
    std::vector<CouplingWork> work_;
    bool conditioned_ = false;
};

struct FlowEval {
    std::vector<double> point;
    double logdet = 0.0;
};

// One-shot wrappers.
FlowEval flow_forward(const FlowModel& model, std::span<const double> z,
                      std::span<const double> x);
FlowEval flow_inverse(const FlowModel& model, std::span<const double> y,
                      std::span<const double> x);

// Mean negative log likelihood over a dataset (raw units).
double flow_nll(const FlowModel& model, const Dataset& ds);

// Gradient structures for the training objective.
struct CouplingGrads {
    NetGrads scale, shift;
};
struct FlowGrads {
    std::vector<CouplingGrads> layers;
    void zero();
};
FlowGrads make_grads(const FlowModel& model);
std::vector<ParamView> collect_params(FlowModel& model, FlowGrads& grads);

// Sum of per-point NLL over the batch with gradients accumulated into
// `grads`; the caller scales. Used by training and the gradient-check tests.
double flow_nll_grad(const FlowModel& model, std::span<const double> xs,
                     std::span<const double> ys, std::size_t n, FlowGrads& grads);

// Maximum-likelihood training (Adam, shuffled minibatches). Deterministic in
// (data, config). On a non-finite loss the last finite epoch checkpoint is
// restored and the model is returned with aborted_divergent set.
FlowModel train_flow(const Dataset& train, const FlowConfig& cfg);
FlowModel train_flow(FlowModel model, const Dataset& train);

// n conditional draws y = t(z, x), z ~ N(0, I_q) from the seeded generator.
std::vector<std::vector<double>> sample(const FlowModel& model, std::span<const double> x,
                                        std::size_t n, std::uint64_t seed);

}  // namespace contra

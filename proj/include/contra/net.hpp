#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "contra/linalg.hpp"
#include "contra/rng.hpp"

namespace contra {

// Fully-connected net with rectifier hidden layers and identity output.
// Weights are row-major (out x in). Training is single-threaded; a trained
// net is immutable and safe to read from many threads.
struct NetLayer {
    Matrix w;
    std::vector<double> b;
};

struct DenseNet {
    std::vector<NetLayer> layers;

    std::size_t input_width() const { return layers.front().w.cols; }
    std::size_t output_width() const { return layers.back().w.rows; }
    std::size_t parameter_count() const;
};

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
DenseNet make_dense_net(std::span<const std::size_t> widths, Rng& rng);
// All parameters zero (the net is the constant-zero function).
DenseNet make_zero_net(std::span<const std::size_t> widths);

// Per-call workspace: forward intermediates reused by the backward pass.
struct NetScratch {
    std::vector<double> input;
    std::vector<std::vector<double>> pre;   // pre-activation per layer
    std::vector<std::vector<double>> act;   // post-activation per layer
    std::vector<double> delta;
    std::vector<double> delta_next;
    std::vector<double> input_grad;
};

// Forward pass; output lives in the scratch until the next call.
const std::vector<double>& net_forward(const DenseNet& net, std::span<const double> input,
                                       NetScratch& scratch);

// Convenience wrapper with shape validation.
std::vector<double> net_apply(const DenseNet& net, std::span<const double> input);

struct NetGrads {
    std::vector<Matrix> w;
    std::vector<std::vector<double>> b;
    void zero();
};

NetGrads make_grads(const DenseNet& net);

// Reverse-mode gradients of (upstream . output) for the most recent
// net_forward into `scratch`. Parameter gradients accumulate into `grads`;
// the returned reference is d/d(input) and is valid until the next call.
const std::vector<double>& net_backward(const DenseNet& net, NetScratch& scratch,
                                        std::span<const double> upstream, NetGrads& grads);

// Flattened (parameter, gradient) chunk; the optimizer walks a fixed list.
struct ParamView {
    double* params;
    double* grads;
    std::size_t n;
};

std::vector<ParamView> collect_params(DenseNet& net, NetGrads& grads);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam over a fixed-size parameter vector, fed as chunks.
class Adam {
public:
    Adam(std::size_t total, AdamConfig cfg = {});

    // All-or-nothing update: any non-finite gradient rejects the whole step,
    // leaves state untouched and records a diagnostic.
    bool step(std::span<const ParamView> views);

    std::uint64_t steps() const { return t_; }
    const std::string& last_error() const { return last_error_; }
    const AdamConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }

private:
    AdamConfig cfg_;
    std::vector<double> m_, v_;
    std::uint64_t t_ = 0;
    std::string last_error_;
};

bool all_finite(const double* v, std::size_t n);

}  // namespace contra

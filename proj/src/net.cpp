#include "contra/net.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "contra/kernels.hpp"

namespace contra {

std::size_t DenseNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.a.size() + l.b.size();
    return n;
}

DenseNet make_dense_net(std::span<const std::size_t> widths, Rng& rng) {
    if (widths.size() < 2) throw std::invalid_argument("net needs at least 2 widths");
    DenseNet net;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        NetLayer layer;
        layer.w = Matrix(widths[l + 1], widths[l]);
        layer.b.assign(widths[l + 1], 0.0);
        const double scale = 1.0 / std::sqrt(static_cast<double>(widths[l]));
        for (double& x : layer.w.a) x = rng.uniform(-scale, scale);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

DenseNet make_zero_net(std::span<const std::size_t> widths) {
    if (widths.size() < 2) throw std::invalid_argument("net needs at least 2 widths");
    DenseNet net;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        NetLayer layer;
        layer.w = Matrix(widths[l + 1], widths[l]);
        layer.b.assign(widths[l + 1], 0.0);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

const std::vector<double>& net_forward(const DenseNet& net, std::span<const double> input,
                                       NetScratch& s) {
    if (input.size() != net.input_width())
        throw std::invalid_argument("net_forward: input width " + std::to_string(input.size()) +
                                    " does not match net input " +
                                    std::to_string(net.input_width()));
    const auto& k = kernels::active();
    const std::size_t depth = net.layers.size();
    s.input.assign(input.begin(), input.end());
    s.pre.resize(depth);
    s.act.resize(depth);
    const double* cur = s.input.data();
    for (std::size_t l = 0; l < depth; ++l) {
        const NetLayer& layer = net.layers[l];
        s.pre[l].resize(layer.w.rows);
        k.matvec(layer.w.a.data(), cur, layer.b.data(), s.pre[l].data(), layer.w.rows,
                 layer.w.cols);
        s.act[l] = s.pre[l];
        if (l + 1 < depth) k.relu(s.act[l].data(), s.act[l].size());
        cur = s.act[l].data();
    }
    return s.act.back();
}

std::vector<double> net_apply(const DenseNet& net, std::span<const double> input) {
    NetScratch s;
    return net_forward(net, input, s);
}

void NetGrads::zero() {
    for (auto& m : w) std::memset(m.a.data(), 0, m.a.size() * sizeof(double));
    for (auto& v : b) std::memset(v.data(), 0, v.size() * sizeof(double));
}

NetGrads make_grads(const DenseNet& net) {
    NetGrads g;
    for (const auto& l : net.layers) {
        g.w.emplace_back(l.w.rows, l.w.cols);
        g.b.emplace_back(l.b.size(), 0.0);
    }
    return g;
}

const std::vector<double>& net_backward(const DenseNet& net, NetScratch& s,
                                        std::span<const double> upstream, NetGrads& g) {
    if (upstream.size() != net.output_width())
        throw std::invalid_argument("net_backward: upstream width mismatch");
    const auto& k = kernels::active();
    const std::size_t depth = net.layers.size();
    s.delta.assign(upstream.begin(), upstream.end());
    for (std::size_t l = depth; l-- > 0;) {
        const NetLayer& layer = net.layers[l];
        const double* in_act = (l == 0) ? s.input.data() : s.act[l - 1].data();
        // dL/db += delta, dL/dW += delta (outer) in_act
        for (std::size_t r = 0; r < layer.w.rows; ++r) {
            g.b[l][r] += s.delta[r];
            k.axpy(s.delta[r], in_act, g.w[l].row(r), layer.w.cols);
        }
        // delta for the layer below: W^T delta, gated by the rectifier mask
        std::vector<double>& down = (l == 0) ? s.input_grad : s.delta_next;
        down.assign(layer.w.cols, 0.0);
        for (std::size_t r = 0; r < layer.w.rows; ++r)
            k.axpy(s.delta[r], layer.w.row(r), down.data(), layer.w.cols);
        if (l == 0) break;
        k.relu_backward(s.pre[l - 1].data(), down.data(), down.size());
        std::swap(s.delta, s.delta_next);
    }
    return s.input_grad;
}

std::vector<ParamView> collect_params(DenseNet& net, NetGrads& grads) {
    std::vector<ParamView> views;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        views.push_back({net.layers[l].w.a.data(), grads.w[l].a.data(), net.layers[l].w.a.size()});
        views.push_back({net.layers[l].b.data(), grads.b[l].data(), net.layers[l].b.size()});
    }
    return views;
}

bool all_finite(const double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(v[i])) return false;
    return true;
}

Adam::Adam(std::size_t total, AdamConfig cfg)
    : cfg_(cfg), m_(total, 0.0), v_(total, 0.0) {}

bool Adam::step(std::span<const ParamView> views) {
    std::size_t total = 0;
    for (const auto& view : views) total += view.n;
    if (total != m_.size()) throw std::invalid_argument("adam: parameter count changed");
    for (const auto& view : views) {
        if (!all_finite(view.grads, view.n)) {
            last_error_ = "adam: non-finite gradient, update rejected at step " +
                          std::to_string(t_ + 1);
            return false;
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const auto& k = kernels::active();
    std::size_t off = 0;
    for (const auto& view : views) {
        k.adam_update(view.params, m_.data() + off, v_.data() + off, view.grads, view.n,
                      cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.eps, bc1, bc2);
        off += view.n;
    }
    return true;
}

}  // namespace contra

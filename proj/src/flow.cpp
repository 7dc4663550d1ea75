#include "contra/flow.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>

#include "contra/kernels.hpp"

namespace contra {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2 pi)

void build_partition(std::size_t q, std::size_t layer_idx, std::vector<std::uint32_t>& pass,
                     std::vector<std::uint32_t>& trans) {
    pass.clear();
    trans.clear();
    if (q == 1) {
        trans.push_back(0);
        return;
    }
    const bool even_pass = (layer_idx % 2 == 0);
    for (std::uint32_t j = 0; j < q; ++j) {
        if ((j % 2 == 0) == even_pass)
            pass.push_back(j);
        else
            trans.push_back(j);
    }
}

std::vector<std::size_t> conditioner_widths(std::size_t in, std::size_t out,
                                            const FlowConfig& cfg) {
    std::vector<std::size_t> widths;
    widths.push_back(in);
    for (std::size_t i = 0; i < cfg.hidden_layers; ++i) widths.push_back(cfg.hidden);
    widths.push_back(out);
    return widths;
}

void require_finite(std::span<const double> v, const char* what) {
    if (!all_finite(v.data(), v.size()))
        throw std::invalid_argument(std::string(what) + ": non-finite input");
}

// Evaluates both conditioner nets on h = [in(pass); cond] and fills the
// clamped scale. After the call work.scale.act.back() holds the raw scale,
// work.s the clamped scale, work.v the shift.
void conditioner_eval(const CouplingLayer& layer, std::span<const double> in,
                      std::span<const double> cond, CouplingWork& w) {
    const std::size_t q1 = layer.pass_idx.size();
    w.h.resize(q1 + cond.size());
    for (std::size_t i = 0; i < q1; ++i) w.h[i] = in[layer.pass_idx[i]];
    std::memcpy(w.h.data() + q1, cond.data(), cond.size() * sizeof(double));
    const std::vector<double>& s_raw = net_forward(layer.scale_net, w.h, w.scale);
    const std::vector<double>& v = net_forward(layer.shift_net, w.h, w.shift);
    const std::size_t q2 = layer.trans_idx.size();
    w.s.resize(q2);
    w.tanh_s.resize(q2);
    w.v.assign(v.begin(), v.end());
    const double c = layer.clamp;
    for (std::size_t j = 0; j < q2; ++j) {
        w.tanh_s[j] = std::tanh(s_raw[j] / c);
        w.s[j] = c * w.tanh_s[j];
    }
}

}  // namespace

void coupling_forward(const CouplingLayer& layer, std::span<const double> in,
                      std::span<const double> cond, std::span<double> out, double& logdet,
                      CouplingWork& work) {
    conditioner_eval(layer, in, cond, work);
    for (std::uint32_t j : layer.pass_idx) out[j] = in[j];
    for (std::size_t j = 0; j < layer.trans_idx.size(); ++j) {
        const std::uint32_t t = layer.trans_idx[j];
        out[t] = in[t] * std::exp(work.s[j]) + work.v[j];
        logdet += work.s[j];
    }
}

void coupling_inverse(const CouplingLayer& layer, std::span<const double> in,
                      std::span<const double> cond, std::span<double> out, double& logdet,
                      CouplingWork& work) {
    conditioner_eval(layer, in, cond, work);
    for (std::uint32_t j : layer.pass_idx) out[j] = in[j];
    for (std::size_t j = 0; j < layer.trans_idx.size(); ++j) {
        const std::uint32_t t = layer.trans_idx[j];
        out[t] = (in[t] - work.v[j]) * std::exp(-work.s[j]);
        logdet -= work.s[j];
    }
}

FlowModel make_flow(std::size_t p, std::size_t q, const FlowConfig& cfg, Rng& rng) {
    if (q < 1) throw std::invalid_argument("flow: q must be >= 1");
    if (cfg.layers < 1) throw std::invalid_argument("flow: needs at least one layer");
    FlowModel model;
    model.p = p;
    model.q = q;
    model.config = cfg;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        CouplingLayer layer;
        layer.clamp = cfg.clamp;
        build_partition(q, l, layer.pass_idx, layer.trans_idx);
        const auto widths =
            conditioner_widths(layer.pass_idx.size() + p, layer.trans_idx.size(), cfg);
        layer.scale_net = make_dense_net(widths, rng);
        layer.shift_net = make_dense_net(widths, rng);
        // Zeroed conditioner output layers start the flow at the identity;
        // training then grows each layer's transform from a stable state.
        for (double& w : layer.scale_net.layers.back().w.a) w = 0.0;
        for (double& w : layer.shift_net.layers.back().w.a) w = 0.0;
        model.layers.push_back(std::move(layer));
    }
    return model;
}

FlowModel make_identity_flow(std::size_t p, std::size_t q, const FlowConfig& cfg) {
    FlowModel model;
    model.p = p;
    model.q = q;
    model.config = cfg;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        CouplingLayer layer;
        layer.clamp = cfg.clamp;
        build_partition(q, l, layer.pass_idx, layer.trans_idx);
        const auto widths =
            conditioner_widths(layer.pass_idx.size() + p, layer.trans_idx.size(), cfg);
        layer.scale_net = make_zero_net(widths);
        layer.shift_net = make_zero_net(widths);
        model.layers.push_back(std::move(layer));
    }
    return model;
}

FlowEvaluator::FlowEvaluator(const FlowModel& model) : model_(&model) {
    x_std_.resize(model.p);
    buf_a_.resize(model.q);
    buf_b_.resize(model.q);
    work_.resize(model.layers.size());
}

void FlowEvaluator::condition(std::span<const double> x) {
    if (x.size() != model_->p)
        throw std::invalid_argument("flow: conditioning point has wrong dimension");
    require_finite(x, "flow condition");
    model_->x_stats.apply(x, x_std_);
    conditioned_ = true;
}

double FlowEvaluator::forward(std::span<const double> z, std::span<double> y) {
    if (!conditioned_) throw std::logic_error("flow: condition(x) before evaluation");
    if (z.size() != model_->q || y.size() != model_->q)
        throw std::invalid_argument("flow: z/y dimension mismatch");
    require_finite(z, "flow_forward");
    std::copy(z.begin(), z.end(), buf_a_.begin());
    double logdet = 0.0;
    for (std::size_t l = 0; l < model_->layers.size(); ++l) {
        coupling_forward(model_->layers[l], buf_a_, x_std_, buf_b_, logdet, work_[l]);
        if (!all_finite(buf_b_.data(), buf_b_.size()))
            throw std::runtime_error("flow_forward: non-finite value after layer " +
                                     std::to_string(l));
        std::swap(buf_a_, buf_b_);
    }
    model_->y_stats.invert(buf_a_, y);
    if (!model_->y_stats.identity())
        for (double sd : model_->y_stats.std) logdet += std::log(sd);
    return logdet;
}

double FlowEvaluator::inverse(std::span<const double> y, std::span<double> z) {
    if (!conditioned_) throw std::logic_error("flow: condition(x) before evaluation");
    if (z.size() != model_->q || y.size() != model_->q)
        throw std::invalid_argument("flow: z/y dimension mismatch");
    require_finite(y, "flow_inverse");
    model_->y_stats.apply(y, buf_a_);
    double logdet = 0.0;
    if (!model_->y_stats.identity())
        for (double sd : model_->y_stats.std) logdet -= std::log(sd);
    for (std::size_t l = model_->layers.size(); l-- > 0;) {
        coupling_inverse(model_->layers[l], buf_a_, x_std_, buf_b_, logdet, work_[l]);
        if (!all_finite(buf_b_.data(), buf_b_.size()))
            throw std::runtime_error("flow_inverse: non-finite value after layer " +
                                     std::to_string(l));
        std::swap(buf_a_, buf_b_);
    }
    std::copy(buf_a_.begin(), buf_a_.end(), z.begin());
    return logdet;
}

double FlowEvaluator::latent_norm(std::span<const double> y) {
    std::vector<double> z(model_->q);
    inverse(y, z);
    return std::sqrt(kernels::active().sumsq(z.data(), z.size()));
}

FlowEval flow_forward(const FlowModel& model, std::span<const double> z,
                      std::span<const double> x) {
    FlowEvaluator eval(model);
    eval.condition(x);
    FlowEval out;
    out.point.resize(model.q);
    out.logdet = eval.forward(z, out.point);
    return out;
}

FlowEval flow_inverse(const FlowModel& model, std::span<const double> y,
                      std::span<const double> x) {
    FlowEvaluator eval(model);
    eval.condition(x);
    FlowEval out;
    out.point.resize(model.q);
    out.logdet = eval.inverse(y, out.point);
    return out;
}

double flow_nll(const FlowModel& model, const Dataset& ds) {
    if (ds.n == 0) throw std::invalid_argument("flow_nll: empty batch");
    if (ds.p != model.p || ds.q != model.q)
        throw std::invalid_argument("flow_nll: dataset dimensions do not match model");
    FlowEvaluator eval(model);
    std::vector<double> z(model.q);
    double total = 0.0;
    for (std::size_t i = 0; i < ds.n; ++i) {
        eval.condition(ds.x_row(i));
        const double logdet = eval.inverse(ds.y_row(i), z);
        total += 0.5 * static_cast<double>(model.q) * kLog2Pi +
                 0.5 * kernels::active().sumsq(z.data(), z.size()) - logdet;
    }
    return total / static_cast<double>(ds.n);
}

void FlowGrads::zero() {
    for (auto& l : layers) {
        l.scale.zero();
        l.shift.zero();
    }
}

FlowGrads make_grads(const FlowModel& model) {
    FlowGrads g;
    for (const auto& layer : model.layers)
        g.layers.push_back({make_grads(layer.scale_net), make_grads(layer.shift_net)});
    return g;
}

std::vector<ParamView> collect_params(FlowModel& model, FlowGrads& grads) {
    std::vector<ParamView> views;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto sub = collect_params(model.layers[l].scale_net, grads.layers[l].scale);
        views.insert(views.end(), sub.begin(), sub.end());
        sub = collect_params(model.layers[l].shift_net, grads.layers[l].shift);
        views.insert(views.end(), sub.begin(), sub.end());
    }
    return views;
}

namespace {

// Per-layer caches from the inverse pass, consumed by the backward sweep.
struct LayerCache {
    CouplingWork work;
    std::vector<double> out_trans;   // latent-side transformed coords
    std::vector<double> exp_neg_s;
    std::vector<double> gs, gv;      // backward temps
};

struct TrainWorkspace {
    std::vector<double> x_std;
    std::vector<double> a, b;       // ping-pong state vectors
    std::vector<double> g, g_next;  // gradient w.r.t. the running state
    std::vector<LayerCache> layers;
};

// Single-point NLL (raw units) with gradients accumulated into `grads`.
double point_nll_grad(const FlowModel& model, std::span<const double> x,
                      std::span<const double> y, FlowGrads& grads, TrainWorkspace& ws) {
    const std::size_t q = model.q;
    const std::size_t m = model.layers.size();
    ws.x_std.resize(model.p);
    model.x_stats.apply(x, ws.x_std);
    ws.a.resize(q);
    ws.b.resize(q);
    model.y_stats.apply(y, ws.a);
    ws.layers.resize(m);

    double sum_s = 0.0;
    // Inverse pass, data -> latent, caching everything backward needs.
    for (std::size_t l = m; l-- > 0;) {
        const CouplingLayer& layer = model.layers[l];
        LayerCache& cache = ws.layers[l];
        conditioner_eval(layer, ws.a, ws.x_std, cache.work);
        const std::size_t q2 = layer.trans_idx.size();
        cache.out_trans.resize(q2);
        cache.exp_neg_s.resize(q2);
        for (std::uint32_t jp : layer.pass_idx) ws.b[jp] = ws.a[jp];
        for (std::size_t j = 0; j < q2; ++j) {
            const std::uint32_t t = layer.trans_idx[j];
            cache.exp_neg_s[j] = std::exp(-cache.work.s[j]);
            cache.out_trans[j] = (ws.a[t] - cache.work.v[j]) * cache.exp_neg_s[j];
            ws.b[t] = cache.out_trans[j];
            sum_s += cache.work.s[j];
        }
        std::swap(ws.a, ws.b);
    }

    double loss = 0.5 * static_cast<double>(q) * kLog2Pi +
                  0.5 * kernels::active().sumsq(ws.a.data(), q) + sum_s;
    if (!model.y_stats.identity())
        for (double sd : model.y_stats.std) loss += std::log(sd);

    // Backward sweep, latent -> data.
    ws.g.assign(ws.a.begin(), ws.a.end());  // d(0.5 ||z||^2)/dz = z
    ws.g_next.resize(q);
    for (std::size_t l = 0; l < m; ++l) {
        const CouplingLayer& layer = model.layers[l];
        LayerCache& cache = ws.layers[l];
        const std::size_t q2 = layer.trans_idx.size();
        cache.gs.resize(q2);
        cache.gv.resize(q2);
        for (std::uint32_t jp : layer.pass_idx) ws.g_next[jp] = ws.g[jp];
        for (std::size_t j = 0; j < q2; ++j) {
            const std::uint32_t t = layer.trans_idx[j];
            const double go = ws.g[t];
            ws.g_next[t] = go * cache.exp_neg_s[j];
            cache.gv[j] = -go * cache.exp_neg_s[j];
            // d(loss)/ds_j: +1 from the log-det term, -go * out from the state;
            // then through the clamp, d(c tanh(s/c))/ds = 1 - tanh^2.
            const double gs = 1.0 - go * cache.out_trans[j];
            cache.gs[j] = gs * (1.0 - cache.work.tanh_s[j] * cache.work.tanh_s[j]);
        }
        const std::vector<double>& gh_scale =
            net_backward(layer.scale_net, cache.work.scale, cache.gs, grads.layers[l].scale);
        for (std::size_t i = 0; i < layer.pass_idx.size(); ++i)
            ws.g_next[layer.pass_idx[i]] += gh_scale[i];
        const std::vector<double>& gh_shift =
            net_backward(layer.shift_net, cache.work.shift, cache.gv, grads.layers[l].shift);
        for (std::size_t i = 0; i < layer.pass_idx.size(); ++i)
            ws.g_next[layer.pass_idx[i]] += gh_shift[i];
        std::swap(ws.g, ws.g_next);
    }
    return loss;
}

}  // namespace

double flow_nll_grad(const FlowModel& model, std::span<const double> xs,
                     std::span<const double> ys, std::size_t n, FlowGrads& grads) {
    TrainWorkspace ws;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        total += point_nll_grad(model, xs.subspan(i * model.p, model.p),
                                ys.subspan(i * model.q, model.q), grads, ws);
    return total;
}

FlowModel train_flow(const Dataset& train, const FlowConfig& cfg) {
    if (train.n == 0) throw std::invalid_argument("train_flow: empty training set");
    Rng init_rng = Rng::derive(cfg.seed, 0x666c6f77);  // "flow"
    FlowModel model = make_flow(train.p, train.q, cfg, init_rng);
    std::vector<std::size_t> all(train.n);
    for (std::size_t i = 0; i < train.n; ++i) all[i] = i;
    model.x_stats = compute_stats(train.x, train.p, all, "x");
    if (cfg.standardize_y) model.y_stats = compute_stats(train.y, train.q, all, "y");
    return train_flow(std::move(model), train);
}

FlowModel train_flow(FlowModel model, const Dataset& train) {
    const FlowConfig& cfg = model.config;
    if (train.p != model.p || train.q != model.q)
        throw std::invalid_argument("train_flow: dataset dimensions do not match model");
    FlowGrads grads = make_grads(model);
    const auto views = collect_params(model, grads);
    std::size_t total = 0;
    for (const auto& view : views) total += view.n;
    Adam opt(total, {.lr = cfg.lr});
    Rng shuffle_rng = Rng::derive(cfg.seed, 0x73687566);  // "shuf"

    std::vector<std::size_t> order(train.n);
    for (std::size_t i = 0; i < train.n; ++i) order[i] = i;

    TrainWorkspace ws;
    std::vector<CouplingLayer> checkpoint = model.layers;
    const std::size_t batch = cfg.batch == 0 ? train.n : cfg.batch;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.lr_floor < 1.0 && cfg.epochs > 1) {
            const double t = static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1);
            const double floor_lr = cfg.lr * cfg.lr_floor;
            opt.set_lr(floor_lr +
                       (cfg.lr - floor_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * t)));
        }
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < train.n; start += batch) {
            const std::size_t stop = std::min(start + batch, train.n);
            grads.zero();
            double batch_loss = 0.0;
            for (std::size_t k = start; k < stop; ++k) {
                const std::size_t i = order[k];
                batch_loss += point_nll_grad(model, train.x_row(i), train.y_row(i), grads, ws);
            }
            if (!std::isfinite(batch_loss)) {
                model.layers = std::move(checkpoint);
                model.aborted_divergent = true;
                return model;
            }
            const double inv = 1.0 / static_cast<double>(stop - start);
            for (const auto& view : views) kernels::active().scal(inv, view.grads, view.n);
            if (!opt.step(views)) {
                model.layers = std::move(checkpoint);
                model.aborted_divergent = true;
                return model;
            }
            epoch_loss += batch_loss;
        }
        model.loss_trace.push_back(epoch_loss / static_cast<double>(train.n));
        checkpoint = model.layers;
    }
    return model;
}

std::vector<std::vector<double>> sample(const FlowModel& model, std::span<const double> x,
                                        std::size_t n, std::uint64_t seed) {
    FlowEvaluator eval(model);
    eval.condition(x);
    Rng rng(seed);
    std::vector<std::vector<double>> out;
    out.reserve(n);
    std::vector<double> z(model.q);
    for (std::size_t i = 0; i < n; ++i) {
        rng.normal_fill(z.data(), z.size());
        std::vector<double> y(model.q);
        eval.forward(z, y);
        out.push_back(std::move(y));
    }
    return out;
}

}  // namespace contra

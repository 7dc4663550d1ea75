#include "contra/mcqr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "contra/kernels.hpp"
#include "contra/stats.hpp"

namespace contra {

namespace {

double pinball(double u, double tau) { return u >= 0.0 ? tau * u : (tau - 1.0) * u; }

// d(pinball(y - f, tau))/df; the kink at zero residual takes the lower branch.
double pinball_grad_f(double u, double tau) { return u > 0.0 ? -tau : (1.0 - tau); }

// Target scaling tolerates constant columns (std set to 1): a constant output
// is a legitimate quantile-regression target.
StandardizeStats permissive_stats(const std::vector<double>& values, std::size_t width,
                                  std::size_t n) {
    StandardizeStats stats;
    stats.mean.assign(width, 0.0);
    stats.std.assign(width, 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < width; ++j) stats.mean[j] += values[i * width + j];
    for (double& m : stats.mean) m *= inv_n;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < width; ++j) {
            const double d = values[i * width + j] - stats.mean[j];
            stats.std[j] += d * d;
        }
    for (double& s : stats.std) {
        s = std::sqrt(s * inv_n);
        if (!(s > 0.0)) s = 1.0;
    }
    return stats;
}

}  // namespace

double pinball_loss_grad(const DenseNet& net, std::span<const double> xs,
                         std::span<const double> targets, std::size_t n, std::size_t p,
                         double tau, NetGrads& grads) {
    NetScratch scratch;
    double total = 0.0;
    double upstream[1];
    for (std::size_t i = 0; i < n; ++i) {
        const auto& out = net_forward(net, xs.subspan(i * p, p), scratch);
        const double u = targets[i] - out[0];
        total += pinball(u, tau);
        upstream[0] = pinball_grad_f(u, tau);
        net_backward(net, scratch, {upstream, 1}, grads);
    }
    return total;
}

QuantilePair train_quantile_nets(const Dataset& d1, double alpha,
                                 const QuantileNetConfig& cfg) {
    if (d1.n == 0) throw std::invalid_argument("train_quantile_nets: empty training set");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("train_quantile_nets: alpha must be in (0,1)");
    QuantilePair out;
    out.alpha = alpha;
    out.x_stats = permissive_stats(d1.x, d1.p, d1.n);
    out.y_stats = permissive_stats(d1.y, d1.q, d1.n);

    std::vector<double> xs(d1.n * d1.p);
    std::vector<double> ys(d1.n * d1.q);
    for (std::size_t i = 0; i < d1.n; ++i) {
        out.x_stats.apply(d1.x_row(i), {xs.data() + i * d1.p, d1.p});
        out.y_stats.apply(d1.y_row(i), {ys.data() + i * d1.q, d1.q});
    }

    Rng init = Rng::derive(cfg.seed, 0x71726e);
    std::vector<std::size_t> widths;
    widths.push_back(d1.p);
    for (std::size_t i = 0; i < cfg.hidden_layers; ++i) widths.push_back(cfg.hidden);
    widths.push_back(1);
    for (std::size_t j = 0; j < d1.q; ++j) {
        out.lower.push_back(make_dense_net(widths, init));
        out.upper.push_back(make_dense_net(widths, init));
    }

    struct NetSlot {
        DenseNet* net;
        NetGrads grads;
        double tau;
        std::size_t dim;
    };
    std::vector<NetSlot> slots;
    for (std::size_t j = 0; j < d1.q; ++j) {
        slots.push_back({&out.lower[j], make_grads(out.lower[j]), alpha / 2.0, j});
        slots.push_back({&out.upper[j], make_grads(out.upper[j]), 1.0 - alpha / 2.0, j});
    }
    std::vector<ParamView> views;
    for (auto& slot : slots) {
        auto sub = collect_params(*slot.net, slot.grads);
        views.insert(views.end(), sub.begin(), sub.end());
    }
    std::size_t total_params = 0;
    for (const auto& view : views) total_params += view.n;
    Adam opt(total_params, {.lr = cfg.lr});
    Rng shuffle_rng = Rng::derive(cfg.seed, 0x73687566);

    std::vector<std::size_t> order(d1.n);
    for (std::size_t i = 0; i < d1.n; ++i) order[i] = i;
    const std::size_t batch = cfg.batch == 0 ? d1.n : cfg.batch;
    NetScratch scratch;
    double upstream[1];

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < d1.n; start += batch) {
            const std::size_t stop = std::min(start + batch, d1.n);
            double batch_loss = 0.0;
            for (auto& slot : slots) slot.grads.zero();
            for (std::size_t k = start; k < stop; ++k) {
                const std::size_t i = order[k];
                const std::span<const double> x{xs.data() + i * d1.p, d1.p};
                for (auto& slot : slots) {
                    const auto& pred = net_forward(*slot.net, x, scratch);
                    const double u = ys[i * d1.q + slot.dim] - pred[0];
                    batch_loss += pinball(u, slot.tau);
                    upstream[0] = pinball_grad_f(u, slot.tau);
                    net_backward(*slot.net, scratch, {upstream, 1}, slot.grads);
                }
            }
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("train_quantile_nets: loss diverged at epoch " +
                                         std::to_string(epoch));
            const double inv = 1.0 / static_cast<double>(stop - start);
            for (const auto& view : views) kernels::active().scal(inv, view.grads, view.n);
            if (!opt.step(views))
                throw std::runtime_error("train_quantile_nets: " + opt.last_error());
            epoch_loss += batch_loss;
        }
        out.loss_trace.push_back(epoch_loss / static_cast<double>(d1.n));
    }
    return out;
}

void quantile_eval(const QuantilePair& nets, std::span<const double> x,
                   std::span<double> lower_out, std::span<double> upper_out) {
    const std::size_t q = nets.lower.size();
    if (lower_out.size() != q || upper_out.size() != q)
        throw std::invalid_argument("quantile_eval: output span size mismatch");
    std::vector<double> x_std(x.size());
    nets.x_stats.apply(x, x_std);
    NetScratch scratch;
    for (std::size_t j = 0; j < q; ++j) {
        const double lo = net_forward(nets.lower[j], x_std, scratch)[0];
        const double hi = net_forward(nets.upper[j], x_std, scratch)[0];
        if (nets.y_stats.identity()) {
            lower_out[j] = lo;
            upper_out[j] = hi;
        } else {
            lower_out[j] = lo * nets.y_stats.std[j] + nets.y_stats.mean[j];
            upper_out[j] = hi * nets.y_stats.std[j] + nets.y_stats.mean[j];
        }
    }
}

WeightVector uniform_weights(std::size_t q) {
    return {std::vector<double>(q, 1.0), std::vector<double>(q, 1.0)};
}

WeightVector normalize(WeightVector w) {
    double min_w = std::numeric_limits<double>::infinity();
    for (double v : w.lower) min_w = std::min(min_w, v);
    for (double v : w.upper) min_w = std::min(min_w, v);
    if (!(min_w > 0.0)) throw std::invalid_argument("weights must be strictly positive");
    for (double& v : w.lower) v /= min_w;
    for (double& v : w.upper) v /= min_w;
    return w;
}

namespace {

double score_from_quantiles(std::span<const double> lo, std::span<const double> hi,
                            const WeightVector& w, std::span<const double> y) {
    double s = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < y.size(); ++j) {
        s = std::max(s, w.lower[j] * (lo[j] - y[j]));
        s = std::max(s, w.upper[j] * (y[j] - hi[j]));
    }
    return s;
}

}  // namespace

double mcqr_score(const QuantilePair& nets, const WeightVector& w, std::span<const double> x,
                  std::span<const double> y) {
    const std::size_t q = nets.lower.size();
    if (y.size() != q) throw std::invalid_argument("mcqr_score: y dimension mismatch");
    std::vector<double> lo(q), hi(q);
    quantile_eval(nets, x, lo, hi);
    return score_from_quantiles(lo, hi, w, y);
}

McqrThreshold mcqr_calibrate(const QuantilePair& nets, const WeightVector& w,
                             const Dataset& cal, double alpha) {
    if (cal.n == 0) throw std::invalid_argument("mcqr_calibrate: empty calibration set");
    McqrThreshold out;
    out.alpha = alpha;
    out.n2 = cal.n;
    std::vector<double> scores(cal.n);
    for (std::size_t i = 0; i < cal.n; ++i)
        scores[i] = mcqr_score(nets, w, cal.x_row(i), cal.y_row(i));
    const std::size_t k = stats::conformal_rank(cal.n, alpha);
    if (k == 0) {
        out.unbounded = true;
        return out;
    }
    std::nth_element(scores.begin(), scores.begin() + (k - 1), scores.end());
    out.s = scores[k - 1];
    return out;
}

BoxRegion mcqr_region(const QuantilePair& nets, const WeightVector& w, double s,
                      std::span<const double> x) {
    const std::size_t q = nets.lower.size();
    BoxRegion box;
    box.lower.resize(q);
    box.upper.resize(q);
    std::vector<double> lo(q), hi(q);
    quantile_eval(nets, x, lo, hi);
    for (std::size_t j = 0; j < q; ++j) {
        box.lower[j] = lo[j] - s / w.lower[j];
        box.upper[j] = hi[j] + s / w.upper[j];
        if (box.lower[j] > box.upper[j]) box.degenerate = true;
    }
    return box;
}

double box_volume(const BoxRegion& box) {
    if (box.degenerate) return 0.0;
    double v = 1.0;
    for (std::size_t j = 0; j < box.lower.size(); ++j) v *= box.upper[j] - box.lower[j];
    return v;
}

bool box_contains(const BoxRegion& box, std::span<const double> y) {
    if (box.degenerate) return false;
    for (std::size_t j = 0; j < y.size(); ++j)
        if (y[j] < box.lower[j] || y[j] > box.upper[j]) return false;
    return true;
}

WeightVector optimize_weights(const QuantilePair& nets, const Dataset& d2_weights,
                              double alpha) {
    const std::size_t q = nets.lower.size();
    const std::size_t n = d2_weights.n;
    WeightVector w = uniform_weights(q);
    if (n == 0 || stats::conformal_rank(n, alpha) == 0) return w;

    // Quantiles are fixed while w varies; cache them once.
    Matrix lo(n, q), hi(n, q);
    for (std::size_t i = 0; i < n; ++i)
        quantile_eval(nets, d2_weights.x_row(i), {lo.row(i), q}, {hi.row(i), q});

    std::vector<double> scores(n);
    const std::size_t k = stats::conformal_rank(n, alpha);
    const auto objective = [&](const WeightVector& cand) {
        for (std::size_t i = 0; i < n; ++i)
            scores[i] = score_from_quantiles({lo.row(i), q}, {hi.row(i), q}, cand,
                                             d2_weights.y_row(i));
        std::nth_element(scores.begin(), scores.begin() + (k - 1), scores.end());
        const double s = scores[k - 1];
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double vol = 1.0;
            for (std::size_t j = 0; j < q; ++j) {
                const double side =
                    hi(i, j) - lo(i, j) + s / cand.lower[j] + s / cand.upper[j];
                vol *= std::max(0.0, side);
            }
            total += vol;
        }
        return total / static_cast<double>(n);
    };

    const double baseline = objective(w);
    if (!std::isfinite(baseline)) return w;
    double best = baseline;
    // A candidate must clear a relative margin; percent-level "improvements"
    // on the weight half are finite-sample adaptivity, not structure, and
    // accepting them drifts the weights off the population optimum.
    const auto accept_below = [&] { return best - std::max(1e-12, 1e-2 * std::fabs(best)); };
    static constexpr double kSteps[] = {2.0, 0.5, 1.25, 0.8};
    const std::size_t max_sweeps = 50;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        bool improved = false;
        for (std::size_t c = 0; c < 2 * q; ++c) {
            double* slot = c < q ? &w.lower[c] : &w.upper[c - q];
            const double original = *slot;
            double best_value = original;
            for (double step : kSteps) {
                *slot = original * step;
                const double obj = objective(w);
                if (std::isfinite(obj) && obj < accept_below()) {
                    best = obj;
                    best_value = *slot;
                    improved = true;
                }
            }
            *slot = best_value;
        }
        if (!improved) break;
    }
    return normalize(std::move(w));
}

McqrPredictor mcqr_calibrate_predictor(QuantilePair nets, const Dataset& d2, double alpha,
                                       bool optimize) {
    McqrPredictor pred;
    pred.nets = std::move(nets);
    if (optimize && d2.n >= 4) {
        const std::size_t half = d2.n / 2;
        std::vector<std::size_t> first(half), second(d2.n - half);
        for (std::size_t i = 0; i < half; ++i) first[i] = i;
        for (std::size_t i = half; i < d2.n; ++i) second[i - half] = i;
        pred.w = optimize_weights(pred.nets, d2.subset(first), alpha);
        pred.threshold = mcqr_calibrate(pred.nets, pred.w, d2.subset(second), alpha);
    } else {
        pred.w = uniform_weights(pred.nets.lower.size());
        pred.threshold = mcqr_calibrate(pred.nets, pred.w, d2, alpha);
    }
    return pred;
}

McqrPredictor mcqr_fit(const Dataset& d1, const Dataset& d2, double alpha,
                       const QuantileNetConfig& cfg, bool optimize) {
    return mcqr_calibrate_predictor(train_quantile_nets(d1, alpha, cfg), d2, alpha, optimize);
}

bool mcqr_contains(const McqrPredictor& pred, std::span<const double> x,
                   std::span<const double> y) {
    if (pred.threshold.unbounded) return true;
    return mcqr_score(pred.nets, pred.w, x, y) <= pred.threshold.s;
}

BoxRegion mcqr_predict_region(const McqrPredictor& pred, std::span<const double> x) {
    if (pred.threshold.unbounded)
        throw std::domain_error("mcqr: unbounded threshold has no box region");
    return mcqr_region(pred.nets, pred.w, pred.threshold.s, x);
}

}  // namespace contra

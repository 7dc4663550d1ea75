#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <limits>
#include <numbers>

#include "contra/flow.hpp"
#include "contra/kernels.hpp"
#include "test_helpers.hpp"

using namespace contra;
using namespace contra::testing;

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Dataset gaussian_pairs(std::size_t n, std::size_t p, std::size_t q, std::uint64_t seed) {
    Dataset ds;
    ds.n = n;
    ds.p = p;
    ds.q = q;
    ds.x.resize(n * p);
    ds.y.resize(n * q);
    Rng rng(seed);
    for (double& v : ds.x) v = rng.normal();
    for (double& v : ds.y) v = rng.normal();
    return ds;
}

}  // namespace

TEST_CASE("identity coupling layer is the identity with zero log-det") {
    FlowModel model = make_identity_flow(0, 2, tiny_config(1));
    CouplingWork work;
    std::vector<double> out(2);
    double logdet = 0.0;
    coupling_forward(model.layers[0], std::vector<double>{1.0, 3.0}, {}, out, logdet, work);
    CHECK(out[0] == 1.0);
    CHECK(out[1] == 3.0);
    CHECK(logdet == 0.0);
}

TEST_CASE("coupling layer evaluates the affine form by hand") {
    // Pass coord 0, transform coord 1, scale output 0.5, shift 1.0.
    FlowModel model = make_identity_flow(0, 2, tiny_config(1));
    set_net_constant(model.layers[0].scale_net, bias_for_clamped(0.5, 5.0));
    set_net_constant(model.layers[0].shift_net, 1.0);
    CouplingWork work;
    std::vector<double> out(2), back(2);
    double logdet = 0.0;
    coupling_forward(model.layers[0], std::vector<double>{1.0, 3.0}, {}, out, logdet, work);
    CHECK(out[0] == doctest::Approx(1.0));
    CHECK(out[1] == doctest::Approx(3.0 * std::exp(0.5) + 1.0).epsilon(1e-12));
    CHECK(logdet == doctest::Approx(0.5).epsilon(1e-12));

    double inv_logdet = 0.0;
    coupling_inverse(model.layers[0], out, {}, back, inv_logdet, work);
    CHECK(back[0] == doctest::Approx(1.0));
    CHECK(back[1] == doctest::Approx(3.0).epsilon(1e-11));
    CHECK(inv_logdet == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("constant scale across two alternating layers sums log-dets") {
    FlowModel model = constant_scale_flow(0, 2, 2, 2.0);
    const FlowEval eval = flow_forward(model, std::vector<double>{1.0, 1.0}, {});
    CHECK(eval.logdet == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
    CHECK(eval.point[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(eval.point[1] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("zero-initialized flow is the identity") {
    FlowModel model = make_identity_flow(3, 2, tiny_config(6));
    std::vector<double> x{0.5, -1.0, 2.0};
    const FlowEval eval = flow_forward(model, std::vector<double>{0.7, -0.3}, x);
    CHECK(eval.point[0] == 0.7);
    CHECK(eval.point[1] == -0.3);
    CHECK(eval.logdet == 0.0);
}

TEST_CASE("random coupling layers invert exactly") {
    FlowModel model = random_flow(2, 2, 4, 8, 99);
    Rng rng(7);
    CouplingWork work;
    std::vector<double> x{0.3, -0.8}, out(2), back(2);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> z{rng.normal(), rng.normal()};
        for (const auto& layer : model.layers) {
            double ld = 0.0, ild = 0.0;
            coupling_forward(layer, z, x, out, ld, work);
            coupling_inverse(layer, out, x, back, ild, work);
            CHECK(std::fabs(back[0] - z[0]) < 1e-12);
            CHECK(std::fabs(back[1] - z[1]) < 1e-12);
            CHECK(std::fabs(ld + ild) < 1e-12);
        }
    }
}

TEST_CASE("flow roundtrip error stays below 1e-9 over random points") {
    for (std::size_t q : {1, 2, 3}) {
        FlowModel model = random_flow(2, q, 10, 16, 1000 + q);
        FlowEvaluator eval(model);
        Rng rng(55);
        std::vector<double> z(q), y(q), back(q), x(2);
        double worst = 0.0;
        for (int i = 0; i < 200; ++i) {
            for (double& v : x) v = rng.normal();
            for (double& v : z) v = rng.normal();
            eval.condition(x);
            const double fwd = eval.forward(z, y);
            const double inv = eval.inverse(y, back);
            for (std::size_t j = 0; j < q; ++j)
                worst = std::max(worst, std::fabs(back[j] - z[j]));
            CHECK(std::fabs(fwd + inv) < 1e-9);
        }
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("analytic log-det matches a finite-difference Jacobian") {
    for (std::size_t q : {2, 3}) {
        FlowModel model = random_flow(2, q, 4, 8, 17 + q);
        FlowEvaluator eval(model);
        std::vector<double> x{0.2, -0.5};
        eval.condition(x);
        Rng rng(3);
        std::vector<double> y(q), z(q);
        for (double& v : y) v = rng.normal();
        const double analytic = eval.inverse(y, z);

        // Jacobian dz/dy by central differences.
        const double h = 1e-5;
        Matrix jac(q, q);
        std::vector<double> yp(y), zp(q), zm(q);
        for (std::size_t j = 0; j < q; ++j) {
            yp = y;
            yp[j] += h;
            eval.inverse(yp, zp);
            yp[j] -= 2 * h;
            eval.inverse(yp, zm);
            for (std::size_t i = 0; i < q; ++i) jac(i, j) = (zp[i] - zm[i]) / (2 * h);
        }
        double det = 0.0;
        if (q == 2) {
            det = jac(0, 0) * jac(1, 1) - jac(0, 1) * jac(1, 0);
        } else {
            det = jac(0, 0) * (jac(1, 1) * jac(2, 2) - jac(1, 2) * jac(2, 1)) -
                  jac(0, 1) * (jac(1, 0) * jac(2, 2) - jac(1, 2) * jac(2, 0)) +
                  jac(0, 2) * (jac(1, 0) * jac(2, 1) - jac(1, 1) * jac(2, 0));
        }
        CHECK(std::fabs(std::log(std::fabs(det)) - analytic) /
                  std::max(1.0, std::fabs(analytic)) <
              1e-5);
    }
}

TEST_CASE("NLL of the identity model is the standard Gaussian value") {
    {
        FlowModel model = make_identity_flow(1, 2, tiny_config(2));
        Dataset ds;
        ds.n = 1; ds.p = 1; ds.q = 2;
        ds.x = {0.3};
        ds.y = {0.0, 0.0};
        CHECK(flow_nll(model, ds) == doctest::Approx(kLog2Pi).epsilon(1e-12));
    }
    {
        FlowModel model = make_identity_flow(1, 1, tiny_config(2));
        Dataset ds;
        ds.n = 1; ds.p = 1; ds.q = 1;
        ds.x = {0.3};
        ds.y = {1.0};
        CHECK(flow_nll(model, ds) == doctest::Approx(0.5 * kLog2Pi + 0.5).epsilon(1e-12));
    }
}

TEST_CASE("constant-scale layer shifts NLL by log 2 per dimension") {
    FlowModel model = constant_scale_flow(1, 1, 1, 2.0);
    Dataset ds;
    ds.n = 1; ds.p = 1; ds.q = 1;
    ds.x = {0.0};
    ds.y = {1.4};
    const double latent = ds.y[0] / 2.0;
    const double expected = 0.5 * kLog2Pi + 0.5 * latent * latent + std::log(2.0);
    CHECK(flow_nll(model, ds) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("empty batch is rejected") {
    FlowModel model = make_identity_flow(1, 1, tiny_config(1));
    Dataset ds;
    ds.p = 1; ds.q = 1;
    CHECK_THROWS_AS(flow_nll(model, ds), std::invalid_argument);
}

TEST_CASE("NLL gradient matches finite differences on a 4-point batch") {
    FlowModel model = random_flow(2, 2, 2, 4, 5);
    randomize_flow_biases(model, 51);
    const Dataset ds = gaussian_pairs(4, 2, 2, 6);
    FlowGrads grads = make_grads(model);
    grads.zero();
    const double base = flow_nll_grad(model, ds.x, ds.y, ds.n, grads);
    CHECK(std::isfinite(base));
    auto views = collect_params(model, grads);
    const double h = 1e-5;
    std::size_t checked = 0;
    FlowGrads scratch = make_grads(model);
    for (auto& view : views) {
        for (std::size_t i = 0; i < view.n; ++i) {
            const double saved = view.params[i];
            view.params[i] = saved + h;
            scratch.zero();
            const double up = flow_nll_grad(model, ds.x, ds.y, ds.n, scratch);
            view.params[i] = saved - h;
            scratch.zero();
            const double down = flow_nll_grad(model, ds.x, ds.y, ds.n, scratch);
            view.params[i] = saved;
            const double fd = (up - down) / (2 * h);
            const double analytic = view.grads[i];
            const double denom = std::max({std::fabs(fd), std::fabs(analytic), 1e-5});
            CHECK(std::fabs(fd - analytic) / denom < 1e-4);
            ++checked;
        }
    }
    CHECK(checked > 100);
}

TEST_CASE("adjacent layer pairs transform every coordinate") {
    for (std::size_t q : {1, 2, 3, 5}) {
        FlowModel model = random_flow(2, q, 6, 4, q);
        for (std::size_t l = 0; l + 1 < model.layers.size(); l += 2) {
            std::vector<bool> touched(q, false);
            for (std::uint32_t t : model.layers[l].trans_idx) touched[t] = true;
            for (std::uint32_t t : model.layers[l + 1].trans_idx) touched[t] = true;
            for (std::size_t j = 0; j < q; ++j) CHECK(touched[j]);
        }
    }
}

TEST_CASE("training matches the true Gaussian likelihood of the data") {
    // y | x ~ N(0, I2), independent of x.
    const Dataset train = gaussian_pairs(4000, 2, 2, 31);
    FlowConfig cfg;
    cfg.layers = 4;
    cfg.hidden = 16;
    cfg.epochs = 100;
    cfg.batch = 256;
    cfg.seed = 77;
    const FlowModel model = train_flow(train, cfg);
    REQUIRE_FALSE(model.aborted_divergent);
    REQUIRE(model.loss_trace.size() == cfg.epochs);

    // Oracle: the empirical NLL of the true density on the same points.
    double truth = 0.0;
    for (std::size_t i = 0; i < train.n; ++i) {
        const auto y = train.y_row(i);
        truth += kLog2Pi + 0.5 * (y[0] * y[0] + y[1] * y[1]);
    }
    truth /= static_cast<double>(train.n);
    CHECK(std::fabs(flow_nll(model, train) - truth) < 0.05);

    // Loss trace decreases on average.
    const std::size_t third = cfg.epochs / 3;
    double head = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < third; ++i) head += model.loss_trace[i];
    for (std::size_t i = cfg.epochs - third; i < cfg.epochs; ++i) tail += model.loss_trace[i];
    CHECK(tail < head);
}

TEST_CASE("training is deterministic in the seed") {
    const Dataset train = gaussian_pairs(200, 2, 2, 8);
    FlowConfig cfg = tiny_config(2, 8, 3);
    cfg.standardize_y = true;
    cfg.seed = 123;
    const FlowModel a = train_flow(train, cfg);
    const FlowModel b = train_flow(train, cfg);
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        CHECK(a.layers[l].scale_net.layers[0].w.a == b.layers[l].scale_net.layers[0].w.a);
        CHECK(a.layers[l].shift_net.layers.back().b == b.layers[l].shift_net.layers.back().b);
    }
    CHECK(a.loss_trace == b.loss_trace);
}

TEST_CASE("divergent loss restores the last finite checkpoint") {
    const Dataset train = gaussian_pairs(50, 1, 2, 9);
    FlowModel model = make_identity_flow(1, 2, tiny_config(2, 8, 5));
    model.layers[0].shift_net.layers.back().b[0] = 1e308;  // forces inf immediately
    const std::vector<double> before = model.layers[0].shift_net.layers.back().b;
    const FlowModel out = train_flow(std::move(model), train);
    CHECK(out.aborted_divergent);
    CHECK(out.loss_trace.empty());
    CHECK(out.layers[0].shift_net.layers.back().b == before);
}

TEST_CASE("sampling: identity model reproduces its latent draws, shift model is centered") {
    FlowModel identity = make_identity_flow(1, 2, tiny_config(2));
    std::vector<double> x{0.0};
    const auto draws = sample(identity, x, 16, 99);
    Rng rng(99);
    for (const auto& draw : draws) {
        CHECK(draw[0] == rng.normal());
        CHECK(draw[1] == rng.normal());
    }
    const auto again = sample(identity, x, 16, 99);
    CHECK(draws == again);

    FlowModel shifted = constant_shift_flow(1, 2, 2, {3.0, -1.0});
    const std::size_t n = 10000;
    const auto s = sample(shifted, x, n, 5);
    double m0 = 0.0, m1 = 0.0;
    for (const auto& draw : s) {
        m0 += draw[0];
        m1 += draw[1];
    }
    m0 /= n;
    m1 /= n;
    const double bound = 4.0 / std::sqrt(static_cast<double>(n));
    CHECK(std::fabs(m0 - 3.0) < bound);
    CHECK(std::fabs(m1 + 1.0) < bound);
}

TEST_CASE("non-finite inputs are rejected, non-finite intermediates name the layer") {
    FlowModel model = make_identity_flow(1, 2, tiny_config(2));
    FlowEvaluator eval(model);
    eval.condition(std::vector<double>{0.0});
    std::vector<double> out(2);
    CHECK_THROWS_AS(eval.forward(std::vector<double>{std::nan(""), 0.0}, out),
                    std::invalid_argument);
    FlowModel broken = make_identity_flow(1, 2, tiny_config(2));
    broken.layers[1].shift_net.layers.back().b[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_WITH_AS(flow_forward(broken, std::vector<double>{0.0, 0.0},
                                      std::vector<double>{0.0}),
                         doctest::Contains("layer 1"), std::runtime_error);
}

TEST_CASE("change-of-variable density integrates to one on a grid") {
    FlowConfig cfg = tiny_config(4, 16, 25);
    cfg.standardize_y = true;
    cfg.seed = 4242;
    const FlowModel model = train_flow(gaussian_pairs(600, 1, 2, 4242), cfg);
    std::vector<double> x{0.4};

    // Bounding box of the forward image of the |z| = 6 circle.
    FlowEvaluator eval(model);
    eval.condition(x);
    double lo0 = 1e300, hi0 = -1e300, lo1 = 1e300, hi1 = -1e300;
    std::vector<double> z(2), y(2);
    for (int i = 0; i < 256; ++i) {
        const double a = 2.0 * std::numbers::pi * i / 256.0;
        z = {6.0 * std::cos(a), 6.0 * std::sin(a)};
        eval.forward(z, y);
        lo0 = std::min(lo0, y[0]); hi0 = std::max(hi0, y[0]);
        lo1 = std::min(lo1, y[1]); hi1 = std::max(hi1, y[1]);
    }
    const double pad0 = 0.05 * (hi0 - lo0), pad1 = 0.05 * (hi1 - lo1);
    lo0 -= pad0; hi0 += pad0; lo1 -= pad1; hi1 += pad1;

    const int grid = 400;
    const double dx = (hi0 - lo0) / grid, dy = (hi1 - lo1) / grid;
    double mass = 0.0;
    for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < grid; ++j) {
            y = {lo0 + (i + 0.5) * dx, lo1 + (j + 0.5) * dy};
            const double logdet = eval.inverse(y, z);
            const double logp =
                -kLog2Pi - 0.5 * (z[0] * z[0] + z[1] * z[1]) + logdet;
            mass += std::exp(logp);
        }
    }
    mass *= dx * dy;
    CHECK(mass > 0.97);
    CHECK(mass < 1.01);
}

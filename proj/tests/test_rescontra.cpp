#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "contra/rescontra.hpp"
#include "contra/stats.hpp"
#include "test_helpers.hpp"

using namespace contra;
using namespace contra::testing;

namespace {

// y = A x + b + noise_sd * g, a linear truth the ridge can interpolate.
Dataset linear_data(std::size_t n, std::uint64_t seed, double noise_sd) {
    Dataset ds;
    ds.n = n;
    ds.p = 2;
    ds.q = 2;
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const double x1 = rng.uniform(-2.0, 2.0), x2 = rng.uniform(-2.0, 2.0);
        ds.x.push_back(x1);
        ds.x.push_back(x2);
        ds.y.push_back(2.0 * x1 - x2 + 1.0 + noise_sd * rng.normal());
        ds.y.push_back(x1 + 0.5 * x2 - 3.0 + noise_sd * rng.normal());
    }
    return ds;
}

struct TruePredictor final : PointPredictor {
    void fit(const Dataset&) override {}
    std::vector<double> predict(std::span<const double> x) const override {
        return {2.0 * x[0] - x[1] + 1.0, x[0] + 0.5 * x[1] - 3.0};
    }
    std::size_t output_dim() const override { return 2; }
};

struct ZeroPredictor final : PointPredictor {
    std::size_t q_ = 0;
    void fit(const Dataset& ds) override { q_ = ds.q; }
    std::vector<double> predict(std::span<const double>) const override {
        return std::vector<double>(q_, 0.0);
    }
    std::size_t output_dim() const override { return q_; }
};

}  // namespace

TEST_CASE("kernel ridge interpolates clean data at tiny ridge") {
    const Dataset ds = linear_data(40, 5, 0.0);
    KernelRidge kr({0.6, 1e-9});
    kr.fit(ds);
    for (std::size_t i = 0; i < ds.n; ++i) {
        const auto pred = kr.predict(ds.x_row(i));
        CHECK(std::fabs(pred[0] - ds.y[2 * i]) < 1e-6);
        CHECK(std::fabs(pred[1] - ds.y[2 * i + 1]) < 1e-6);
    }
}

TEST_CASE("kernel ridge on constant targets predicts the constant") {
    Dataset ds = linear_data(30, 6, 0.0);
    for (std::size_t i = 0; i < ds.n; ++i) {
        ds.y[2 * i] = 4.5;
        ds.y[2 * i + 1] = -1.25;
    }
    KernelRidge kr({0.0, 1e-3});
    kr.fit(ds);
    const auto pred = kr.predict(std::vector<double>{0.3, 0.9});
    CHECK(pred[0] == doctest::Approx(4.5).epsilon(1e-9));
    CHECK(pred[1] == doctest::Approx(-1.25).epsilon(1e-9));
}

TEST_CASE("kernel ridge refit is deterministic") {
    const Dataset ds = linear_data(50, 7, 0.1);
    KernelRidge a({0.0, 1e-3}), b({0.0, 1e-3});
    a.fit(ds);
    b.fit(ds);
    CHECK(a.fitted_bandwidth() == b.fitted_bandwidth());
    const auto pa = a.predict(std::vector<double>{0.2, -0.4});
    const auto pb = b.predict(std::vector<double>{0.2, -0.4});
    CHECK(pa == pb);
}

TEST_CASE("kernel ridge is equivariant under constant target shifts") {
    const Dataset ds = linear_data(60, 8, 0.2);
    Dataset shifted = ds;
    const double c0 = 11.0, c1 = -7.0;
    for (std::size_t i = 0; i < ds.n; ++i) {
        shifted.y[2 * i] += c0;
        shifted.y[2 * i + 1] += c1;
    }
    KernelRidge a({0.0, 1e-3}), b({0.0, 1e-3});
    a.fit(ds);
    b.fit(shifted);
    const std::vector<double> x{0.7, 0.1};
    const auto pa = a.predict(x);
    const auto pb = b.predict(x);
    CHECK(pb[0] - pa[0] == doctest::Approx(c0).epsilon(1e-10));
    CHECK(pb[1] - pa[1] == doctest::Approx(c1).epsilon(1e-10));
}

TEST_CASE("perfect predictor leaves chi-2 residual norms for calibration") {
    const std::size_t n = 2400;
    const Dataset ds = linear_data(n, 9, 1.0);  // residuals are N(0, I2)
    std::vector<std::size_t> d1, d2, d3;
    for (std::size_t i = 0; i < 200; ++i) d1.push_back(i);
    for (std::size_t i = 200; i < 1400; ++i) d2.push_back(i);
    for (std::size_t i = 1400; i < 2400; ++i) d3.push_back(i);  // n3 = 1000

    ResContraConfig cfg;
    cfg.flow.layers = 4;
    cfg.flow.hidden = 32;
    cfg.flow.epochs = 40;
    cfg.flow.seed = 11;
    const ResContraBundle bundle =
        rescontra_fit(ds, d1, d2, d3, 0.1, cfg, std::make_shared<TruePredictor>());
    REQUIRE_FALSE(bundle.ball.unbounded);
    const double chi2_90 = stats::chi_quantile(2.0, 0.9);  // 2.1459...
    CHECK(std::fabs(bundle.ball.radius - chi2_90) / chi2_90 < 0.10);

    // Center point is always contained.
    const std::vector<double> x{0.1, 0.2};
    const auto center = bundle.predictor->predict(x);
    CHECK(rescontra_contains(bundle, x, center));
}

TEST_CASE("zero predictor reduces ResCONTRA to plain CONTRA") {
    const Dataset ds = linear_data(900, 10, 1.0);
    std::vector<std::size_t> d1, d2, d3;
    for (std::size_t i = 0; i < 100; ++i) d1.push_back(i);
    for (std::size_t i = 100; i < 500; ++i) d2.push_back(i);
    for (std::size_t i = 500; i < 900; ++i) d3.push_back(i);

    ResContraConfig cfg;
    cfg.flow = tiny_config(4, 16, 10);
    cfg.flow.standardize_y = true;
    cfg.flow.seed = 21;
    const ResContraBundle bundle =
        rescontra_fit(ds, d1, d2, d3, 0.1, cfg, std::make_shared<ZeroPredictor>());

    const FlowModel plain = train_flow(ds.subset(d2), cfg.flow);
    const LatentCalibration cal = calibrate(plain, ds.subset(d3));
    const ConformalBall ball = conformal_radius(cal, 0.1);
    CHECK(bundle.ball.radius == ball.radius);
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        const std::vector<double> x{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        const std::vector<double> y{rng.uniform(-8.0, 8.0), rng.uniform(-8.0, 8.0)};
        CHECK(rescontra_contains(bundle, x, y) == region_contains(plain, ball, x, y));
    }
}

TEST_CASE("boundary points have residual latent norm r") {
    const Dataset ds = linear_data(800, 12, 1.0);
    std::vector<std::size_t> d1, d2, d3;
    for (std::size_t i = 0; i < 200; ++i) d1.push_back(i);
    for (std::size_t i = 200; i < 600; ++i) d2.push_back(i);
    for (std::size_t i = 600; i < 800; ++i) d3.push_back(i);
    ResContraConfig cfg;
    cfg.flow = tiny_config(4, 16, 10);
    cfg.flow.standardize_y = true;
    cfg.flow.seed = 31;
    const ResContraBundle bundle = rescontra_fit(ds, d1, d2, d3, 0.1, cfg);

    const std::vector<double> x{0.4, -0.6};
    const RegionBoundary boundary = rescontra_boundary(bundle, x, 64, 5);
    const auto center = bundle.predictor->predict(x);
    FlowEvaluator eval(bundle.residual_flow);
    eval.condition(x);
    for (std::size_t i = 0; i < boundary.points.rows; ++i) {
        const std::vector<double> residual{boundary.points(i, 0) - center[0],
                                           boundary.points(i, 1) - center[1]};
        CHECK(std::fabs(eval.latent_norm(residual) - bundle.ball.radius) < 1e-6);
    }
}

TEST_CASE("translating the targets translates the region, volume unchanged") {
    const Dataset ds = linear_data(700, 13, 0.8);
    Dataset shifted = ds;
    const double c0 = 25.0, c1 = -13.0;
    for (std::size_t i = 0; i < ds.n; ++i) {
        shifted.y[2 * i] += c0;
        shifted.y[2 * i + 1] += c1;
    }
    std::vector<std::size_t> d1, d2, d3;
    for (std::size_t i = 0; i < 200; ++i) d1.push_back(i);
    for (std::size_t i = 200; i < 500; ++i) d2.push_back(i);
    for (std::size_t i = 500; i < 700; ++i) d3.push_back(i);
    ResContraConfig cfg;
    cfg.flow = tiny_config(2, 8, 5);
    cfg.flow.standardize_y = true;
    cfg.flow.seed = 41;
    const ResContraBundle a = rescontra_fit(ds, d1, d2, d3, 0.1, cfg);
    const ResContraBundle b = rescontra_fit(shifted, d1, d2, d3, 0.1, cfg);

    const std::vector<double> x{0.5, 0.5};
    const RegionBoundary ba = rescontra_boundary(a, x, 16, 9);
    const RegionBoundary bb = rescontra_boundary(b, x, 16, 9);
    for (std::size_t i = 0; i < ba.points.rows; ++i) {
        CHECK(bb.points(i, 0) - ba.points(i, 0) == doctest::Approx(c0).epsilon(1e-8));
        CHECK(bb.points(i, 1) - ba.points(i, 1) == doctest::Approx(c1).epsilon(1e-8));
    }
    // Retraining on translated targets perturbs the residual flow only at
    // float precision; volumes agree to that level.
    CHECK(rescontra_volume(a, x, 500, 3).estimate ==
          doctest::Approx(rescontra_volume(b, x, 500, 3).estimate).epsilon(1e-6));
}

TEST_CASE("volume is independent of the point predictor for a fixed residual flow") {
    struct Shifted final : PointPredictor {
        std::shared_ptr<PointPredictor> base;
        void fit(const Dataset&) override {}
        std::vector<double> predict(std::span<const double> x) const override {
            auto out = base->predict(x);
            for (double& v : out) v += 100.0;
            return out;
        }
        std::size_t output_dim() const override { return base->output_dim(); }
    };

    const Dataset ds = linear_data(500, 15, 0.8);
    std::vector<std::size_t> d1, d2, d3;
    for (std::size_t i = 0; i < 100; ++i) d1.push_back(i);
    for (std::size_t i = 100; i < 350; ++i) d2.push_back(i);
    for (std::size_t i = 350; i < 500; ++i) d3.push_back(i);
    ResContraConfig cfg;
    cfg.flow = tiny_config(2, 8, 5);
    cfg.flow.standardize_y = true;
    cfg.flow.seed = 43;
    const ResContraBundle a = rescontra_fit(ds, d1, d2, d3, 0.1, cfg);

    auto shifted = std::make_shared<Shifted>();
    shifted->base = a.predictor;
    ResContraBundle c;
    c.predictor = shifted;
    c.residual_flow = a.residual_flow;
    c.ball = a.ball;
    c.calibration = a.calibration;

    const std::vector<double> x{0.3, -0.3};
    CHECK(rescontra_volume(a, x, 500, 9).estimate ==
          rescontra_volume(c, x, 500, 9).estimate);
}

TEST_CASE("overlapping subsets abort the fit") {
    const Dataset ds = linear_data(30, 14, 0.5);
    std::vector<std::size_t> d1{0, 1, 2, 3, 4, 5, 6, 7};
    std::vector<std::size_t> d2{8, 9, 10, 11, 12, 13};
    std::vector<std::size_t> d3{13, 14, 15, 16, 17};  // 13 appears twice
    ResContraConfig cfg;
    cfg.flow = tiny_config(2, 4, 1);
    CHECK_THROWS_AS(rescontra_fit(ds, d1, d2, d3, 0.5, cfg), std::invalid_argument);
}

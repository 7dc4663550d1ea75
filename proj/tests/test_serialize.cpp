#include <doctest.h>

#include <filesystem>

#include "contra/serialize.hpp"
#include "test_helpers.hpp"

using namespace contra;
using namespace contra::testing;

namespace {

Dataset small_data(std::size_t n, std::uint64_t seed) {
    Dataset ds;
    ds.n = n;
    ds.p = 2;
    ds.q = 2;
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        ds.x.push_back(rng.normal());
        ds.x.push_back(rng.normal());
        ds.y.push_back(rng.normal() * 2.0 + 1.0);
        ds.y.push_back(rng.normal() * 0.5 - 2.0);
    }
    return ds;
}

}  // namespace

TEST_CASE("flow documents reload bit-identically") {
    FlowConfig cfg = tiny_config(4, 8, 3);
    cfg.standardize_y = true;
    cfg.seed = 5;
    const Dataset train = small_data(120, 9);
    const FlowModel model = train_flow(train, cfg);

    const auto doc = to_json(model);
    const FlowModel back = flow_from_json(doc);

    REQUIRE(back.layers.size() == model.layers.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        CHECK(back.layers[l].pass_idx == model.layers[l].pass_idx);
        for (std::size_t k = 0; k < model.layers[l].scale_net.layers.size(); ++k) {
            CHECK(back.layers[l].scale_net.layers[k].w.a ==
                  model.layers[l].scale_net.layers[k].w.a);
            CHECK(back.layers[l].shift_net.layers[k].b ==
                  model.layers[l].shift_net.layers[k].b);
        }
    }
    CHECK(back.y_stats.mean == model.y_stats.mean);
    CHECK(back.y_stats.std == model.y_stats.std);

    // The reloaded model evaluates bit-identically.
    Rng rng(3);
    std::vector<double> x(2), z(2);
    for (int i = 0; i < 20; ++i) {
        x = {rng.normal(), rng.normal()};
        z = {rng.normal(), rng.normal()};
        const FlowEval a = flow_forward(model, z, x);
        const FlowEval b = flow_forward(back, z, x);
        CHECK(a.point == b.point);
        CHECK(a.logdet == b.logdet);
    }

    // Serialization is stable through a string round trip too.
    const auto reparsed = nlohmann::json::parse(doc.dump());
    const FlowModel back2 = flow_from_json(reparsed);
    const FlowEval a = flow_forward(model, z, x);
    const FlowEval b = flow_forward(back2, z, x);
    CHECK(a.point == b.point);
}

TEST_CASE("contra predictor document round trips") {
    FlowConfig cfg = tiny_config(2, 8, 2);
    cfg.standardize_y = true;
    const Dataset train = small_data(80, 10);
    ContraPredictor pred{train_flow(train, cfg), {}, {}};
    const Dataset cal = small_data(40, 11);
    pred.calibration = calibrate(pred.flow, cal);
    pred.ball = conformal_radius(pred.calibration, 0.1);

    const ContraPredictor back = contra_predictor_from_json(to_json(pred));
    CHECK(back.ball.radius == pred.ball.radius);
    CHECK(back.ball.unbounded == pred.ball.unbounded);
    CHECK(back.calibration.sorted_norms == pred.calibration.sorted_norms);
    CHECK(back.calibration.z.a == pred.calibration.z.a);
}

TEST_CASE("kernel ridge and rcp documents round trip") {
    const Dataset train = small_data(60, 12);
    RcpPredictor pred = rcp_fit(train, {0.0, 1e-2});
    rcp_calibrate(pred, small_data(50, 13), 0.1);
    const RcpPredictor back = rcp_from_json(to_json(pred));
    CHECK(back.radius == pred.radius);
    CHECK(back.covariance.a == pred.covariance.a);
    CHECK(back.log_det == pred.log_det);
    const std::vector<double> x{0.3, -0.8};
    CHECK(back.center.predict(x) == pred.center.predict(x));
    CHECK(rcp_score(back, x, std::vector<double>{1.0, 1.0}) ==
          rcp_score(pred, x, std::vector<double>{1.0, 1.0}));
}

TEST_CASE("mcqr predictor document round trips") {
    QuantileNetConfig cfg;
    cfg.hidden = 8;
    cfg.epochs = 3;
    const Dataset d1 = small_data(100, 14);
    const Dataset d2 = small_data(60, 15);
    const McqrPredictor pred = mcqr_fit(d1, d2, 0.1, cfg);
    const McqrPredictor back = mcqr_from_json(to_json(pred));
    CHECK(back.threshold.s == pred.threshold.s);
    CHECK(back.w.lower == pred.w.lower);
    const std::vector<double> x{0.1, 0.2};
    const BoxRegion ba = mcqr_predict_region(back, x);
    const BoxRegion bb = mcqr_predict_region(pred, x);
    CHECK(ba.lower == bb.lower);
    CHECK(ba.upper == bb.upper);
}

TEST_CASE("pcp and rescontra documents round trip") {
    FlowConfig cfg = tiny_config(2, 8, 2);
    cfg.standardize_y = true;
    const Dataset train = small_data(80, 16);
    auto flow = std::make_shared<const FlowModel>(train_flow(train, cfg));
    const PcpPredictor pcp = pcp_calibrate(flow, small_data(50, 17), 3, 0.1, 1234);
    const PcpPredictor pcp_back = pcp_from_json(to_json(pcp));
    CHECK(pcp_back.radius == pcp.radius);
    CHECK(pcp_back.k == pcp.k);
    CHECK(pcp_back.seed == pcp.seed);
    const std::vector<double> x{0.5, 0.5};
    const std::vector<double> y{1.0, 1.0};
    CHECK(pcp_contains(pcp_back, x, y) == pcp_contains(pcp, x, y));

    const Dataset ds = small_data(300, 18);
    std::vector<std::size_t> d1, d2, d3;
    for (std::size_t i = 0; i < 80; ++i) d1.push_back(i);
    for (std::size_t i = 80; i < 200; ++i) d2.push_back(i);
    for (std::size_t i = 200; i < 300; ++i) d3.push_back(i);
    ResContraConfig rc;
    rc.flow = cfg;
    const ResContraBundle bundle = rescontra_fit(ds, d1, d2, d3, 0.1, rc);
    const ResContraBundle back = rescontra_from_json(to_json(bundle));
    CHECK(back.ball.radius == bundle.ball.radius);
    CHECK(back.predictor->predict(x) == bundle.predictor->predict(x));
    CHECK(rescontra_contains(back, x, y) == rescontra_contains(bundle, x, y));
}

TEST_CASE("document header validation") {
    nlohmann::json j;
    CHECK_THROWS(document_kind(j));
    j["version"] = 99;
    j["kind"] = "flow_model";
    CHECK_THROWS(document_kind(j));
    j["version"] = kDocVersion;
    CHECK(document_kind(j) == "flow_model");
    CHECK_THROWS(flow_from_json(nlohmann::json{{"version", kDocVersion}, {"kind", "other"}}));
}

TEST_CASE("save and load through a file") {
    FlowModel model = make_identity_flow(1, 2, tiny_config(2));
    const auto path =
        (std::filesystem::temp_directory_path() / "contra_test_model.json").string();
    save_json(to_json(model), path);
    const FlowModel back = flow_from_json(load_json(path));
    CHECK(back.q == 2);
    std::filesystem::remove(path);
    CHECK_THROWS(load_json(path));
}

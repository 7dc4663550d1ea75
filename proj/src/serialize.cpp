#include "contra/serialize.hpp"

#include <fstream>
#include <stdexcept>

namespace contra {

using nlohmann::json;

namespace {

json doc_header(const char* kind) {
    json j;
    j["version"] = kDocVersion;
    j["kind"] = kind;
    return j;
}

void check_kind(const json& j, const char* kind) {
    if (document_kind(j) != kind)
        throw std::runtime_error(std::string("expected document kind '") + kind + "', got '" +
                                 document_kind(j) + "'");
}

}  // namespace

std::string document_kind(const json& j) {
    if (!j.contains("version") || !j["version"].is_number_integer())
        throw std::runtime_error("document missing integer 'version'");
    if (j["version"].get<int>() != kDocVersion)
        throw std::runtime_error("unsupported document version " +
                                 std::to_string(j["version"].get<int>()));
    if (!j.contains("kind") || !j["kind"].is_string())
        throw std::runtime_error("document missing 'kind'");
    return j["kind"].get<std::string>();
}

json to_json(const Matrix& m) {
    return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.a}};
}

Matrix matrix_from_json(const json& j) {
    Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    m.a = j.at("data").get<std::vector<double>>();
    if (m.a.size() != m.rows * m.cols) throw std::runtime_error("matrix data size mismatch");
    return m;
}

json to_json(const StandardizeStats& s) {
    return json{{"mean", s.mean}, {"std", s.std}};
}

StandardizeStats stats_from_json(const json& j) {
    StandardizeStats s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.std = j.at("std").get<std::vector<double>>();
    return s;
}

json to_json(const DenseNet& net) {
    json layers = json::array();
    for (const auto& l : net.layers)
        layers.push_back(json{{"w", to_json(l.w)}, {"b", l.b}});
    return json{{"layers", layers}};
}

DenseNet net_from_json(const json& j) {
    DenseNet net;
    for (const auto& l : j.at("layers")) {
        NetLayer layer;
        layer.w = matrix_from_json(l.at("w"));
        layer.b = l.at("b").get<std::vector<double>>();
        net.layers.push_back(std::move(layer));
    }
    if (net.layers.empty()) throw std::runtime_error("net document has no layers");
    return net;
}

namespace {

json config_to_json(const FlowConfig& cfg) {
    return json{{"layers", cfg.layers},   {"hidden", cfg.hidden},
                {"hidden_layers", cfg.hidden_layers}, {"epochs", cfg.epochs},
                {"batch", cfg.batch},     {"lr", cfg.lr},
                {"lr_floor", cfg.lr_floor}, {"clamp", cfg.clamp},
                {"seed", cfg.seed},       {"standardize_y", cfg.standardize_y}};
}

FlowConfig config_from_json(const json& j) {
    FlowConfig cfg;
    cfg.layers = j.at("layers").get<std::size_t>();
    cfg.hidden = j.at("hidden").get<std::size_t>();
    cfg.hidden_layers = j.at("hidden_layers").get<std::size_t>();
    cfg.epochs = j.at("epochs").get<std::size_t>();
    cfg.batch = j.at("batch").get<std::size_t>();
    cfg.lr = j.at("lr").get<double>();
    cfg.lr_floor = j.at("lr_floor").get<double>();
    cfg.clamp = j.at("clamp").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.standardize_y = j.at("standardize_y").get<bool>();
    return cfg;
}

}  // namespace

json to_json(const FlowModel& model) {
    json j = doc_header("flow_model");
    j["p"] = model.p;
    j["q"] = model.q;
    j["config"] = config_to_json(model.config);
    j["x_stats"] = to_json(model.x_stats);
    j["y_stats"] = to_json(model.y_stats);
    j["loss_trace"] = model.loss_trace;
    j["aborted_divergent"] = model.aborted_divergent;
    json layers = json::array();
    for (const auto& l : model.layers) {
        layers.push_back(json{{"pass", l.pass_idx},
                              {"trans", l.trans_idx},
                              {"clamp", l.clamp},
                              {"scale_net", to_json(l.scale_net)},
                              {"shift_net", to_json(l.shift_net)}});
    }
    j["coupling_layers"] = layers;
    return j;
}

FlowModel flow_from_json(const json& j) {
    check_kind(j, "flow_model");
    FlowModel model;
    model.p = j.at("p").get<std::size_t>();
    model.q = j.at("q").get<std::size_t>();
    model.config = config_from_json(j.at("config"));
    model.x_stats = stats_from_json(j.at("x_stats"));
    model.y_stats = stats_from_json(j.at("y_stats"));
    model.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    model.aborted_divergent = j.at("aborted_divergent").get<bool>();
    for (const auto& l : j.at("coupling_layers")) {
        CouplingLayer layer;
        layer.pass_idx = l.at("pass").get<std::vector<std::uint32_t>>();
        layer.trans_idx = l.at("trans").get<std::vector<std::uint32_t>>();
        layer.clamp = l.at("clamp").get<double>();
        layer.scale_net = net_from_json(l.at("scale_net"));
        layer.shift_net = net_from_json(l.at("shift_net"));
        model.layers.push_back(std::move(layer));
    }
    if (model.layers.empty()) throw std::runtime_error("flow document has no layers");
    return model;
}

json to_json(const LatentCalibration& cal) {
    return json{{"z", to_json(cal.z)}, {"sorted_norms", cal.sorted_norms},
                {"n2", cal.n2},        {"q", cal.q}};
}

LatentCalibration calibration_from_json(const json& j) {
    LatentCalibration cal;
    cal.z = matrix_from_json(j.at("z"));
    cal.sorted_norms = j.at("sorted_norms").get<std::vector<double>>();
    cal.n2 = j.at("n2").get<std::size_t>();
    cal.q = j.at("q").get<std::size_t>();
    return cal;
}

json to_json(const ConformalBall& ball) {
    return json{{"radius", ball.radius},
                {"unbounded", ball.unbounded},
                {"alpha", ball.alpha},
                {"n2", ball.n2}};
}

ConformalBall ball_from_json(const json& j) {
    ConformalBall ball;
    ball.radius = j.at("radius").get<double>();
    ball.unbounded = j.at("unbounded").get<bool>();
    ball.alpha = j.at("alpha").get<double>();
    ball.n2 = j.at("n2").get<std::size_t>();
    return ball;
}

json to_json(const KernelRidge& kr) {
    return json{{"centers", kr.centers()},       {"dual", to_json(kr.dual())},
                {"intercept", kr.intercept()},   {"p", kr.input_dim()},
                {"bandwidth", kr.fitted_bandwidth()}, {"ridge", kr.fitted_ridge()}};
}

KernelRidge kernel_ridge_from_json(const json& j) {
    KernelRidge kr;
    kr.restore(j.at("centers").get<std::vector<double>>(), matrix_from_json(j.at("dual")),
               j.at("intercept").get<std::vector<double>>(), j.at("p").get<std::size_t>(),
               j.at("bandwidth").get<double>(), j.at("ridge").get<double>());
    return kr;
}

json to_json(const QuantilePair& nets) {
    json lower = json::array(), upper = json::array();
    for (const auto& net : nets.lower) lower.push_back(to_json(net));
    for (const auto& net : nets.upper) upper.push_back(to_json(net));
    return json{{"lower_nets", lower},
                {"upper_nets", upper},
                {"alpha", nets.alpha},
                {"x_stats", to_json(nets.x_stats)},
                {"y_stats", to_json(nets.y_stats)},
                {"loss_trace", nets.loss_trace}};
}

QuantilePair quantile_pair_from_json(const json& j) {
    QuantilePair nets;
    for (const auto& net : j.at("lower_nets")) nets.lower.push_back(net_from_json(net));
    for (const auto& net : j.at("upper_nets")) nets.upper.push_back(net_from_json(net));
    nets.alpha = j.at("alpha").get<double>();
    nets.x_stats = stats_from_json(j.at("x_stats"));
    nets.y_stats = stats_from_json(j.at("y_stats"));
    nets.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    return nets;
}

json to_json(const McqrPredictor& pred) {
    json j = doc_header("mcqr_predictor");
    j["nets"] = to_json(pred.nets);
    j["w_lower"] = pred.w.lower;
    j["w_upper"] = pred.w.upper;
    j["threshold"] = json{{"s", pred.threshold.s},
                          {"unbounded", pred.threshold.unbounded},
                          {"alpha", pred.threshold.alpha},
                          {"n2", pred.threshold.n2}};
    return j;
}

McqrPredictor mcqr_from_json(const json& j) {
    check_kind(j, "mcqr_predictor");
    McqrPredictor pred;
    pred.nets = quantile_pair_from_json(j.at("nets"));
    pred.w.lower = j.at("w_lower").get<std::vector<double>>();
    pred.w.upper = j.at("w_upper").get<std::vector<double>>();
    const auto& t = j.at("threshold");
    pred.threshold.s = t.at("s").get<double>();
    pred.threshold.unbounded = t.at("unbounded").get<bool>();
    pred.threshold.alpha = t.at("alpha").get<double>();
    pred.threshold.n2 = t.at("n2").get<std::size_t>();
    return pred;
}

json to_json(const ContraPredictor& pred) {
    json j = doc_header("contra_predictor");
    j["flow"] = to_json(pred.flow);
    j["calibration"] = to_json(pred.calibration);
    j["ball"] = to_json(pred.ball);
    return j;
}

ContraPredictor contra_predictor_from_json(const json& j) {
    check_kind(j, "contra_predictor");
    ContraPredictor pred;
    pred.flow = flow_from_json(j.at("flow"));
    pred.calibration = calibration_from_json(j.at("calibration"));
    pred.ball = ball_from_json(j.at("ball"));
    return pred;
}

json to_json(const PcpPredictor& pred) {
    json j = doc_header("pcp_predictor");
    if (!pred.model) throw std::runtime_error("pcp predictor has no model to serialize");
    j["flow"] = to_json(*pred.model);
    j["k"] = pred.k;
    j["radius"] = pred.radius;
    j["unbounded"] = pred.unbounded;
    j["alpha"] = pred.alpha;
    j["seed"] = pred.seed;
    return j;
}

PcpPredictor pcp_from_json(const json& j) {
    check_kind(j, "pcp_predictor");
    PcpPredictor pred;
    pred.model = std::make_shared<const FlowModel>(flow_from_json(j.at("flow")));
    pred.k = j.at("k").get<std::size_t>();
    pred.radius = j.at("radius").get<double>();
    pred.unbounded = j.at("unbounded").get<bool>();
    pred.alpha = j.at("alpha").get<double>();
    pred.seed = j.at("seed").get<std::uint64_t>();
    return pred;
}

json to_json(const RcpPredictor& pred) {
    json j = doc_header("rcp_predictor");
    j["center"] = to_json(pred.center);
    j["covariance"] = to_json(pred.covariance);
    j["chol"] = to_json(pred.chol);
    j["log_det"] = pred.log_det;
    j["radius"] = pred.radius;
    j["unbounded"] = pred.unbounded;
    j["alpha"] = pred.alpha;
    return j;
}

RcpPredictor rcp_from_json(const json& j) {
    check_kind(j, "rcp_predictor");
    RcpPredictor pred;
    pred.center = kernel_ridge_from_json(j.at("center"));
    pred.covariance = matrix_from_json(j.at("covariance"));
    pred.chol = matrix_from_json(j.at("chol"));
    pred.log_det = j.at("log_det").get<double>();
    pred.radius = j.at("radius").get<double>();
    pred.unbounded = j.at("unbounded").get<bool>();
    pred.alpha = j.at("alpha").get<double>();
    return pred;
}

json to_json(const ResContraBundle& bundle) {
    json j = doc_header("rescontra_predictor");
    const auto* ridge = dynamic_cast<const KernelRidge*>(bundle.predictor.get());
    if (!ridge)
        throw std::runtime_error(
            "only the built-in kernel-ridge predictor can be serialized");
    j["predictor"] = to_json(*ridge);
    j["residual_flow"] = to_json(bundle.residual_flow);
    j["ball"] = to_json(bundle.ball);
    j["calibration"] = to_json(bundle.calibration);
    j["n1"] = bundle.n1;
    j["n2"] = bundle.n2;
    j["n3"] = bundle.n3;
    return j;
}

ResContraBundle rescontra_from_json(const json& j) {
    check_kind(j, "rescontra_predictor");
    ResContraBundle bundle;
    bundle.predictor = std::make_shared<KernelRidge>(kernel_ridge_from_json(j.at("predictor")));
    bundle.residual_flow = flow_from_json(j.at("residual_flow"));
    bundle.ball = ball_from_json(j.at("ball"));
    bundle.calibration = calibration_from_json(j.at("calibration"));
    bundle.n1 = j.at("n1").get<std::size_t>();
    bundle.n2 = j.at("n2").get<std::size_t>();
    bundle.n3 = j.at("n3").get<std::size_t>();
    return bundle;
}

void save_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << j.dump(1) << "\n";
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    json j;
    in >> j;
    return j;
}

}  // namespace contra

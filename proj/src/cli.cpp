#include "contra/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "contra/data.hpp"
#include "contra/eval.hpp"
#include "contra/serialize.hpp"
#include "contra/svg.hpp"

namespace contra::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& ctx) {
    if (!j.is_object()) throw ConfigError("config section '" + ctx + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError("unknown key '" + key + "' in " + ctx);
    }
}

struct DatasetSpec {
    std::string generator;  // empty when reading a CSV
    std::size_t n = 0;
    std::uint64_t seed = 0;
    double r_inner = 1.0, r_outer = 2.0;
    std::string csv;
    std::size_t p = 0, q = 0;
    bool header = true;
};

struct PredictOptions {
    std::vector<double> levels{0.5, 0.7, 0.9};
    std::size_t boundary_points = 256;
    std::size_t volume_b = 10000;
    bool svg = true;
    std::size_t samples = 0;
};

struct RunConfig {
    std::uint64_t seed = 1;
    double alpha = 0.1;
    std::optional<DatasetSpec> dataset;
    std::optional<SplitSpec> split;
    std::string method = "contra";
    FlowConfig flow;
    QuantileNetConfig quantile;
    KernelRidgeConfig ridge;
    std::size_t pcp_k = 40;
    double rescontra_fraction = 0.6;
    std::vector<std::string> eval_methods{"contra"};
    std::size_t replications = 10;
    std::size_t eval_volume_b = 500;
    std::size_t eval_volume_points = 200;
    unsigned eval_threads = 0;
    PredictOptions predict;
};

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

DatasetSpec parse_dataset(const json& j, std::uint64_t root_seed) {
    check_keys(j, {"generator", "n", "seed", "r_inner", "r_outer", "csv", "p", "q", "header"},
               "dataset");
    DatasetSpec spec;
    if (j.contains("generator") == j.contains("csv"))
        throw ConfigError("dataset needs exactly one of 'generator' or 'csv'");
    if (j.contains("generator")) {
        spec.generator = j.at("generator").get<std::string>();
        if (spec.generator != "mixture" && spec.generator != "spiral" &&
            spec.generator != "moon" && spec.generator != "ring" &&
            spec.generator != "complex")
            throw ConfigError("unknown generator '" + spec.generator + "'");
        if (!j.contains("n")) throw ConfigError("dataset.n is required for generators");
        spec.n = j.at("n").get<std::size_t>();
        spec.seed = get_or<std::uint64_t>(j, "seed", Rng::hash_combine(root_seed, 0xda7a));
        spec.r_inner = get_or<double>(j, "r_inner", 1.0);
        spec.r_outer = get_or<double>(j, "r_outer", 2.0);
    } else {
        spec.csv = j.at("csv").get<std::string>();
        if (!j.contains("p") || !j.contains("q"))
            throw ConfigError("dataset.p and dataset.q are required for CSV input");
        spec.p = j.at("p").get<std::size_t>();
        spec.q = j.at("q").get<std::size_t>();
        spec.header = get_or<bool>(j, "header", true);
    }
    return spec;
}

SplitSpec parse_split(const json& j, std::uint64_t root_seed) {
    check_keys(j, {"train", "cal", "test", "ratios", "seed"}, "split");
    SplitSpec spec;
    spec.train = get_or<std::size_t>(j, "train", 0);
    spec.cal = get_or<std::size_t>(j, "cal", 0);
    spec.test = get_or<std::size_t>(j, "test", 0);
    if (j.contains("ratios")) spec.ratios = j.at("ratios").get<std::vector<double>>();
    spec.seed = get_or<std::uint64_t>(j, "seed", Rng::hash_combine(root_seed, 0x5b17));
    return spec;
}

RunConfig parse_config(const std::string& path) {
    json j;
    {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open config file: " + path);
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw ConfigError("config parse error in " + path + ": " + e.what());
        }
    }
    try {
        check_keys(j,
                   {"version", "seed", "alpha", "dataset", "split", "method", "flow",
                    "quantile", "ridge", "pcp", "rescontra", "eval", "predict"},
                   "config");
        if (!j.contains("version") || j.at("version").get<int>() != 1)
            throw ConfigError("config must declare \"version\": 1");
        RunConfig cfg;
        cfg.seed = get_or<std::uint64_t>(j, "seed", 1);
        cfg.alpha = get_or<double>(j, "alpha", 0.1);
        if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
            throw ConfigError("alpha must be in (0,1)");
        if (j.contains("dataset")) cfg.dataset = parse_dataset(j.at("dataset"), cfg.seed);
        if (j.contains("split")) cfg.split = parse_split(j.at("split"), cfg.seed);
        cfg.method = get_or<std::string>(j, "method", "contra");
        method_from_string(cfg.method);  // validates

        cfg.flow.seed = Rng::hash_combine(cfg.seed, 0xf10);
        if (j.contains("flow")) {
            const json& f = j.at("flow");
            check_keys(f,
                       {"layers", "hidden", "hidden_layers", "epochs", "batch", "lr",
                        "lr_floor", "clamp", "seed", "standardize_y"},
                       "flow");
            cfg.flow.layers = get_or<std::size_t>(f, "layers", cfg.flow.layers);
            cfg.flow.hidden = get_or<std::size_t>(f, "hidden", cfg.flow.hidden);
            cfg.flow.hidden_layers =
                get_or<std::size_t>(f, "hidden_layers", cfg.flow.hidden_layers);
            cfg.flow.epochs = get_or<std::size_t>(f, "epochs", cfg.flow.epochs);
            cfg.flow.batch = get_or<std::size_t>(f, "batch", cfg.flow.batch);
            cfg.flow.lr = get_or<double>(f, "lr", cfg.flow.lr);
            cfg.flow.lr_floor = get_or<double>(f, "lr_floor", cfg.flow.lr_floor);
            cfg.flow.clamp = get_or<double>(f, "clamp", cfg.flow.clamp);
            cfg.flow.seed = get_or<std::uint64_t>(f, "seed", cfg.flow.seed);
            cfg.flow.standardize_y = get_or<bool>(f, "standardize_y", true);
        }
        cfg.quantile.seed = Rng::hash_combine(cfg.seed, 0x9a1);
        if (j.contains("quantile")) {
            const json& f = j.at("quantile");
            check_keys(f, {"hidden", "hidden_layers", "epochs", "batch", "lr", "seed"},
                       "quantile");
            cfg.quantile.hidden = get_or<std::size_t>(f, "hidden", cfg.quantile.hidden);
            cfg.quantile.hidden_layers =
                get_or<std::size_t>(f, "hidden_layers", cfg.quantile.hidden_layers);
            cfg.quantile.epochs = get_or<std::size_t>(f, "epochs", cfg.quantile.epochs);
            cfg.quantile.batch = get_or<std::size_t>(f, "batch", cfg.quantile.batch);
            cfg.quantile.lr = get_or<double>(f, "lr", cfg.quantile.lr);
            cfg.quantile.seed = get_or<std::uint64_t>(f, "seed", cfg.quantile.seed);
        }
        if (j.contains("ridge")) {
            const json& f = j.at("ridge");
            check_keys(f, {"bandwidth", "ridge"}, "ridge");
            cfg.ridge.bandwidth = get_or<double>(f, "bandwidth", 0.0);
            cfg.ridge.ridge = get_or<double>(f, "ridge", 1e-3);
        }
        if (j.contains("pcp")) {
            check_keys(j.at("pcp"), {"k"}, "pcp");
            cfg.pcp_k = get_or<std::size_t>(j.at("pcp"), "k", 40);
            if (cfg.pcp_k < 1) throw ConfigError("pcp.k must be >= 1");
        }
        if (j.contains("rescontra")) {
            check_keys(j.at("rescontra"), {"train_fraction"}, "rescontra");
            cfg.rescontra_fraction = get_or<double>(j.at("rescontra"), "train_fraction", 0.6);
        }
        if (j.contains("eval")) {
            const json& f = j.at("eval");
            check_keys(f, {"methods", "replications", "volume_b", "volume_points", "threads"},
                       "eval");
            if (f.contains("methods"))
                cfg.eval_methods = f.at("methods").get<std::vector<std::string>>();
            cfg.replications = get_or<std::size_t>(f, "replications", 10);
            cfg.eval_volume_b = get_or<std::size_t>(f, "volume_b", 500);
            cfg.eval_volume_points = get_or<std::size_t>(f, "volume_points", 200);
            cfg.eval_threads = get_or<unsigned>(f, "threads", 0);
        }
        if (j.contains("predict")) {
            const json& f = j.at("predict");
            check_keys(f, {"levels", "boundary_points", "volume_b", "svg", "samples"},
                       "predict");
            if (f.contains("levels"))
                cfg.predict.levels = f.at("levels").get<std::vector<double>>();
            cfg.predict.boundary_points = get_or<std::size_t>(f, "boundary_points", 256);
            cfg.predict.volume_b = get_or<std::size_t>(f, "volume_b", 10000);
            cfg.predict.svg = get_or<bool>(f, "svg", true);
            cfg.predict.samples = get_or<std::size_t>(f, "samples", 0);
        }
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError("config error in " + path + ": " + e.what());
    }
}

Dataset realize_dataset(const DatasetSpec& spec) {
    if (!spec.generator.empty()) {
        if (spec.generator == "mixture") return gen_mixture(spec.n, spec.seed);
        if (spec.generator == "spiral") return gen_spiral(spec.n, spec.seed);
        if (spec.generator == "moon") return gen_moon(spec.n, spec.seed);
        if (spec.generator == "complex") return gen_complex(spec.n, spec.seed);
        return gen_ring(spec.n, spec.seed, spec.r_inner, spec.r_outer);
    }
    try {
        return load_csv(spec.csv, spec.p, spec.q, spec.header);
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
}

const DatasetSpec& need_dataset(const RunConfig& cfg) {
    if (!cfg.dataset) throw ConfigError("this command requires a 'dataset' config section");
    return *cfg.dataset;
}

const SplitSpec& need_split(const RunConfig& cfg) {
    if (!cfg.split) throw ConfigError("this command requires a 'split' config section");
    return *cfg.split;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << text;
}

void write_boundary_csv(const RegionBoundary& boundary, const std::string& path) {
    std::ostringstream os;
    char buf[40];
    for (std::size_t j = 0; j < boundary.points.cols; ++j) os << (j ? ",y" : "y") << (j + 1);
    os << "\n";
    for (std::size_t i = 0; i < boundary.points.rows; ++i) {
        for (std::size_t j = 0; j < boundary.points.cols; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", boundary.points(i, j));
            os << (j ? "," : "") << buf;
        }
        os << "\n";
    }
    write_text(path, os.str());
}

json volume_json(std::span<const double> x, double r, double alpha,
                 const VolumeEstimate& vol) {
    return json{{"x", std::vector<double>(x.begin(), x.end())},
                {"r", r},
                {"alpha", alpha},
                {"estimate", vol.estimate},
                {"stderr", vol.std_error},
                {"B", vol.samples},
                {"seed", vol.seed}};
}

json diagnostics_json(const LatentDiagnostics& d) {
    json cov = json::array();
    for (std::size_t r = 0; r < d.covariance.rows; ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < d.covariance.cols; ++c) row.push_back(d.covariance(r, c));
        cov.push_back(row);
    }
    return json{{"flag", to_string(d.flag)},
                {"median_norm", d.median_norm},
                {"chi_median", d.chi_median},
                {"factor", d.factor},
                {"mean", d.mean},
                {"covariance", cov},
                {"probs", d.probs},
                {"norm_quantile_ratio", d.norm_quantile_ratio}};
}

void write_loss_trace(const std::vector<double>& trace, const std::string& path) {
    std::ostringstream os;
    os << "epoch,loss\n";
    char buf[40];
    for (std::size_t i = 0; i < trace.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", trace[i]);
        os << i << "," << buf << "\n";
    }
    write_text(path, os.str());
}

// --- commands -------------------------------------------------------------

int cmd_generate(const RunConfig& cfg, const std::string& out) {
    const DatasetSpec& spec = need_dataset(cfg);
    if (spec.generator.empty())
        throw ConfigError("generate requires a generator dataset, not a CSV source");
    const Dataset ds = realize_dataset(spec);
    try {
        save_csv(ds, out);
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
    std::cout << "wrote " << ds.n << " rows to " << out << "\n";
    return kExitOk;
}

int cmd_train(const RunConfig& cfg, const std::string& out) {
    const Dataset ds = realize_dataset(need_dataset(cfg));
    const SplitIndices split = make_split(ds.n, need_split(cfg));
    const Dataset train = ds.subset(split.train);
    const Method method = method_from_string(cfg.method);
    try {
        if (method == Method::Contra || method == Method::Pcp) {
            const FlowModel model = train_flow(train, cfg.flow);
            save_json(to_json(model), out);
            write_loss_trace(model.loss_trace, out + ".loss.csv");
            if (model.aborted_divergent)
                throw NumericError(
                    "flow training diverged; last finite checkpoint saved to " + out);
            std::cout << "trained flow (" << model.layers.size() << " layers), final NLL "
                      << (model.loss_trace.empty() ? 0.0 : model.loss_trace.back()) << "\n";
        } else if (method == Method::Mcqr) {
            const QuantilePair nets = train_quantile_nets(train, cfg.alpha, cfg.quantile);
            json doc;
            doc["version"] = kDocVersion;
            doc["kind"] = "mcqr_model";
            doc["nets"] = to_json(nets);
            save_json(doc, out);
            write_loss_trace(nets.loss_trace, out + ".loss.csv");
            std::cout << "trained " << nets.lower.size() * 2 << " quantile nets\n";
        } else if (method == Method::ResContra) {
            const auto [d1, d2] = split_fraction(split.train, cfg.rescontra_fraction,
                                                 Rng::hash_combine(cfg.seed, 0x5e5));
            auto predictor = std::make_shared<KernelRidge>(cfg.ridge);
            predictor->fit(ds.subset(d1));
            const Dataset d2_res = residual_dataset(ds, d2, *predictor);
            const FlowModel flow = train_flow(d2_res, cfg.flow);
            json doc;
            doc["version"] = kDocVersion;
            doc["kind"] = "rescontra_model";
            doc["predictor"] = to_json(*predictor);
            doc["residual_flow"] = to_json(flow);
            doc["n1"] = d1.size();
            doc["n2"] = d2.size();
            save_json(doc, out);
            write_loss_trace(flow.loss_trace, out + ".loss.csv");
            if (flow.aborted_divergent)
                throw NumericError(
                    "residual flow training diverged; checkpoint saved to " + out);
            std::cout << "trained kernel-ridge predictor (" << d1.size()
                      << " pts) + residual flow (" << d2.size() << " pts)\n";
        } else if (method == Method::Rcp) {
            const RcpPredictor pred = rcp_fit(train, cfg.ridge);
            json doc = to_json(pred);
            doc["kind"] = "rcp_model";
            save_json(doc, out);
            std::cout << "fitted RCP center + global covariance on " << train.n << " pts\n";
        }
    } catch (const NumericError&) {
        throw;
    } catch (const std::exception& e) {
        throw NumericError(e.what());
    }
    return kExitOk;
}

int cmd_calibrate(const RunConfig& cfg, const std::string& model_path, const std::string& out,
                  std::string diag_path) {
    const Dataset ds = realize_dataset(need_dataset(cfg));
    const SplitIndices split = make_split(ds.n, need_split(cfg));
    const Dataset cal = ds.subset(split.cal);
    json doc;
    try {
        doc = load_json(model_path);
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
    if (diag_path.empty()) diag_path = out + ".diagnostics.json";
    const std::string kind = document_kind(doc);
    try {
        if (kind == "flow_model") {
            auto flow = std::make_shared<const FlowModel>(flow_from_json(doc));
            if (method_from_string(cfg.method) == Method::Pcp) {
                const PcpPredictor pred = pcp_calibrate(
                    flow, cal, cfg.pcp_k, cfg.alpha, Rng::hash_combine(cfg.seed, 0x9c9));
                save_json(to_json(pred), out);
                std::cout << "PCP radius " << pred.radius << " from " << cal.n << " pts\n";
            } else {
                ContraPredictor pred{*flow, calibrate(*flow, cal), {}};
                pred.ball = conformal_radius(pred.calibration, cfg.alpha);
                save_json(to_json(pred), out);
                if (pred.calibration.n2 >= 20)
                    save_json(diagnostics_json(latent_diagnostics(pred.calibration)),
                              diag_path);
                else
                    save_json(json{{"skipped", "calibration set smaller than 20"}},
                              diag_path);
                std::cout << "conformal radius " << pred.ball.radius << " (alpha "
                          << cfg.alpha << ", n2 " << pred.calibration.n2 << ")\n";
            }
        } else if (kind == "mcqr_model") {
            const McqrPredictor pred =
                mcqr_calibrate_predictor(quantile_pair_from_json(doc.at("nets")), cal,
                                         cfg.alpha);
            save_json(to_json(pred), out);
            std::cout << "MCQR threshold " << pred.threshold.s << "\n";
        } else if (kind == "rescontra_model") {
            ResContraBundle bundle;
            bundle.predictor =
                std::make_shared<KernelRidge>(kernel_ridge_from_json(doc.at("predictor")));
            bundle.residual_flow = flow_from_json(doc.at("residual_flow"));
            bundle.n1 = doc.at("n1").get<std::size_t>();
            bundle.n2 = doc.at("n2").get<std::size_t>();
            bundle.n3 = split.cal.size();
            const Dataset cal_res = residual_dataset(ds, split.cal, *bundle.predictor);
            bundle.calibration = calibrate(bundle.residual_flow, cal_res);
            bundle.ball = conformal_radius(bundle.calibration, cfg.alpha);
            save_json(to_json(bundle), out);
            if (bundle.calibration.n2 >= 20)
                save_json(diagnostics_json(latent_diagnostics(bundle.calibration)),
                          diag_path);
            std::cout << "ResCONTRA radius " << bundle.ball.radius << "\n";
        } else if (kind == "rcp_model") {
            doc["kind"] = "rcp_predictor";
            RcpPredictor pred = rcp_from_json(doc);
            rcp_calibrate(pred, cal, cfg.alpha);
            save_json(to_json(pred), out);
            std::cout << "RCP Mahalanobis radius " << pred.radius << "\n";
        } else {
            throw ConfigError("cannot calibrate document kind '" + kind + "'");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw NumericError(e.what());
    }
    return kExitOk;
}

std::vector<std::vector<double>> parse_points(const std::string& inline_csv,
                                              const std::string& file, std::size_t dim,
                                              const char* what) {
    const auto parse_row = [&](const std::string& row) {
        std::vector<double> point;
        std::stringstream ss(row);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                point.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw DataError(std::string("non-numeric ") + what + " value: " + cell);
            }
        }
        return point;
    };
    std::vector<std::vector<double>> points;
    if (!inline_csv.empty()) points.push_back(parse_row(inline_csv));
    if (!file.empty()) {
        std::ifstream in(file);
        if (!in) throw DataError(std::string("cannot open ") + what + " file: " + file);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            points.push_back(parse_row(line));
        }
    }
    if (points.empty())
        throw ConfigError(std::string("predict needs --") + what + " or --" + what + "-file");
    for (const auto& point : points)
        if (point.size() != dim)
            throw DataError(std::string(what) + " has " + std::to_string(point.size()) +
                            " coordinates, expected " + std::to_string(dim));
    return points;
}

// Boundaries at the requested coverage levels, radii read off the stored
// calibration norms.
std::vector<SvgLevel> level_boundaries(const FlowModel& flow, const LatentCalibration& cal,
                                       const PredictOptions& opt, std::span<const double> x,
                                       std::uint64_t seed) {
    std::vector<SvgLevel> levels;
    for (double level : opt.levels) {
        if (!(level > 0.0 && level < 1.0))
            throw ConfigError("predict.levels entries must be in (0,1)");
        const ConformalBall ball = conformal_radius(cal, 1.0 - level);
        if (ball.unbounded) continue;
        char label[32];
        std::snprintf(label, sizeof label, "%.0f%%", level * 100.0);
        levels.push_back(
            {region_boundary(flow, ball, x, opt.boundary_points, seed), label});
    }
    return levels;
}

int cmd_predict(const RunConfig& cfg, const std::string& pred_path, const std::string& x_arg,
                const std::string& x_file, const std::string& y_arg,
                const std::string& y_file, const std::string& outdir) {
    json doc;
    try {
        doc = load_json(pred_path);
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
    fs::create_directories(outdir);
    const std::string kind = document_kind(doc);
    const PredictOptions& opt = cfg.predict;

    auto out_path = [&](const char* stem, std::size_t i, const char* ext) {
        return outdir + "/" + stem + "_" + std::to_string(i) + ext;
    };

    try {
        if (kind == "contra_predictor" || kind == "rescontra_predictor") {
            const bool residual = (kind == "rescontra_predictor");
            ContraPredictor contra;
            ResContraBundle bundle;
            const FlowModel* flow = nullptr;
            const LatentCalibration* calref = nullptr;
            const ConformalBall* ball = nullptr;
            if (residual) {
                bundle = rescontra_from_json(doc);
                flow = &bundle.residual_flow;
                calref = &bundle.calibration;
                ball = &bundle.ball;
            } else {
                contra = contra_predictor_from_json(doc);
                flow = &contra.flow;
                calref = &contra.calibration;
                ball = &contra.ball;
            }
            const auto xs = parse_points(x_arg, x_file, flow->p, "x");
            std::vector<std::vector<double>> ys;
            if (!y_arg.empty() || !y_file.empty()) {
                ys = parse_points(y_arg, y_file, flow->q, "y");
                if (ys.size() != xs.size())
                    throw DataError("need as many y points as x points");
            }
            for (std::size_t i = 0; i < xs.size(); ++i) {
                const auto& x = xs[i];
                const std::uint64_t seed_b = Rng::hash_combine(cfg.seed, 0xb0 + i);
                const std::uint64_t seed_v = Rng::hash_combine(cfg.seed, 0x70 + i);
                RegionBoundary boundary =
                    residual ? rescontra_boundary(bundle, x, opt.boundary_points, seed_b)
                             : region_boundary(*flow, *ball, x, opt.boundary_points, seed_b);
                write_boundary_csv(boundary, out_path("boundary", i, ".csv"));
                const VolumeEstimate vol =
                    residual ? rescontra_volume(bundle, x, opt.volume_b, seed_v)
                             : region_volume(*flow, *ball, x, opt.volume_b, seed_v);
                save_json(volume_json(x, ball->radius, ball->alpha, vol),
                          out_path("volume", i, ".json"));
                if (!ys.empty()) {
                    const bool inside = residual ? rescontra_contains(bundle, x, ys[i])
                                                 : region_contains(*flow, *ball, x, ys[i]);
                    save_json(json{{"x", x}, {"y", ys[i]}, {"contained", inside}},
                              out_path("membership", i, ".json"));
                    std::cout << "point " << i << (inside ? ": inside" : ": outside")
                              << "\n";
                }
                if (opt.svg && flow->q == 2) {
                    auto levels = level_boundaries(*flow, *calref, opt, x, seed_b);
                    std::vector<std::vector<double>> scatter;
                    if (opt.samples > 0) {
                        scatter = sample(*flow, x, opt.samples,
                                         Rng::hash_combine(cfg.seed, 0x5ca7 + i));
                        if (residual) {
                            const auto center = bundle.predictor->predict(x);
                            for (auto& pt : scatter)
                                for (std::size_t jj = 0; jj < pt.size(); ++jj)
                                    pt[jj] += center[jj];
                        }
                    }
                    if (residual) {
                        const auto center = bundle.predictor->predict(x);
                        for (auto& lvl : levels)
                            for (std::size_t r = 0; r < lvl.boundary.points.rows; ++r)
                                for (std::size_t jj = 0; jj < 2; ++jj)
                                    lvl.boundary.points(r, jj) += center[jj];
                    }
                    write_text(out_path("region", i, ".svg"), region_svg(levels, scatter));
                }
            }
        } else if (kind == "mcqr_predictor") {
            const McqrPredictor pred = mcqr_from_json(doc);
            const std::size_t p = pred.nets.x_stats.mean.size();
            const auto xs = parse_points(x_arg, x_file, p, "x");
            for (std::size_t i = 0; i < xs.size(); ++i) {
                const BoxRegion box = mcqr_predict_region(pred, xs[i]);
                save_json(json{{"x", xs[i]},
                               {"lower", box.lower},
                               {"upper", box.upper},
                               {"degenerate", box.degenerate},
                               {"volume", box_volume(box)}},
                          out_path("region", i, ".json"));
            }
        } else if (kind == "pcp_predictor") {
            const PcpPredictor pred = pcp_from_json(doc);
            const auto xs = parse_points(x_arg, x_file, pred.model->p, "x");
            for (std::size_t i = 0; i < xs.size(); ++i) {
                const VolumeEstimate vol = pcp_volume(pred, xs[i], opt.volume_b,
                                                      Rng::hash_combine(cfg.seed, 0x70 + i));
                save_json(volume_json(xs[i], pred.radius, pred.alpha, vol),
                          out_path("volume", i, ".json"));
            }
        } else if (kind == "rcp_predictor") {
            const RcpPredictor pred = rcp_from_json(doc);
            const auto xs = parse_points(x_arg, x_file, pred.center.input_dim(), "x");
            const std::size_t q = pred.covariance.rows;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                VolumeEstimate vol;
                vol.estimate = rcp_volume(pred);
                save_json(volume_json(xs[i], pred.radius, pred.alpha, vol),
                          out_path("volume", i, ".json"));
                if (q == 2) {
                    // Ellipse boundary: center + rho * L * (cos t, sin t).
                    const auto center = pred.center.predict(xs[i]);
                    RegionBoundary boundary;
                    boundary.x.assign(xs[i].begin(), xs[i].end());
                    boundary.closed = true;
                    boundary.points = Matrix(opt.boundary_points, 2);
                    for (std::size_t t = 0; t < opt.boundary_points; ++t) {
                        const double a = 2.0 * std::numbers::pi *
                                         static_cast<double>(t) /
                                         static_cast<double>(opt.boundary_points);
                        const double u0 = std::cos(a), u1 = std::sin(a);
                        boundary.points(t, 0) =
                            center[0] + pred.radius * pred.chol(0, 0) * u0;
                        boundary.points(t, 1) =
                            center[1] + pred.radius *
                                            (pred.chol(1, 0) * u0 + pred.chol(1, 1) * u1);
                    }
                    write_boundary_csv(boundary, out_path("boundary", i, ".csv"));
                }
            }
        } else {
            throw ConfigError("cannot predict with document kind '" + kind + "'");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const DataError&) {
        throw;
    } catch (const std::exception& e) {
        throw NumericError(e.what());
    }
    return kExitOk;
}

int cmd_eval(const RunConfig& cfg, const std::string& outdir) {
    const Dataset ds = realize_dataset(need_dataset(cfg));
    EvalConfig ec;
    ec.methods.clear();
    for (const auto& name : cfg.eval_methods) ec.methods.push_back(method_from_string(name));
    if (ec.methods.empty()) throw ConfigError("eval.methods must not be empty");
    ec.alpha = cfg.alpha;
    ec.replications = cfg.replications;
    ec.root_seed = cfg.seed;
    ec.flow = cfg.flow;
    ec.quantile = cfg.quantile;
    ec.ridge = cfg.ridge;
    ec.pcp_k = cfg.pcp_k;
    ec.rescontra_train_fraction = cfg.rescontra_fraction;
    ec.volume_b = cfg.eval_volume_b;
    ec.volume_points = cfg.eval_volume_points;
    ec.threads = cfg.eval_threads;

    fs::create_directories(outdir);
    const MetricsReport report = run_experiment(
        ds, need_split(cfg), ec, [](const std::string& line) { std::cerr << line << "\n"; });

    // Per-replication CSV.
    {
        std::ostringstream os;
        os << "replication,method,coverage,volume\n";
        char buf[40];
        for (const auto& row : report.rows) {
            os << row.replication << "," << to_string(row.method) << ",";
            std::snprintf(buf, sizeof buf, "%.17g", row.coverage);
            os << buf << ",";
            std::snprintf(buf, sizeof buf, "%.17g", row.volume);
            os << buf << "\n";
        }
        write_text(outdir + "/replications.csv", os.str());
    }
    // JSON summary.
    {
        json j;
        j["alpha"] = report.alpha;
        j["methods"] = json::array();
        for (const auto& s : report.summaries)
            j["methods"].push_back(json{{"method", to_string(s.method)},
                                        {"coverage_mean", s.coverage.mean},
                                        {"coverage_se", s.coverage.se},
                                        {"volume_mean", s.volume.mean},
                                        {"volume_se", s.volume.se},
                                        {"replications", s.replications}});
        if (!report.error.empty()) j["error"] = report.error;
        save_json(j, outdir + "/summary.json");
    }
    write_text(outdir + "/table.txt", render_table(report));
    std::cout << render_table(report);
    std::cout << "runtime: " << report.runtime_seconds << " s\n";
    if (!report.error.empty())
        throw NumericError("replication failed (partial results saved): " + report.error);
    return kExitOk;
}

int cmd_diagnose(const std::string& pred_path, const std::string& out) {
    json doc;
    try {
        doc = load_json(pred_path);
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
    const std::string kind = document_kind(doc);
    LatentCalibration cal;
    if (kind == "contra_predictor")
        cal = calibration_from_json(doc.at("calibration"));
    else if (kind == "rescontra_predictor")
        cal = calibration_from_json(doc.at("calibration"));
    else
        throw ConfigError("diagnose requires a contra or rescontra predictor document");
    try {
        const LatentDiagnostics diag = latent_diagnostics(cal);
        save_json(diagnostics_json(diag), out);
        std::cout << "latent dispersion: " << to_string(diag.flag) << "\n";
    } catch (const std::exception& e) {
        throw NumericError(e.what());
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Conformal prediction regions for multi-output regression via "
                 "conditional normalizing flows"};
    app.require_subcommand(1);

    std::string config_path, out, model_path, pred_path;
    std::string x_arg, x_file, y_arg, y_file, diag_path;

    auto* generate = app.add_subcommand("generate", "emit a synthetic dataset as CSV");
    generate->add_option("-c,--config", config_path, "run config (JSON)")->required();
    generate->add_option("-o,--out", out, "output CSV path")->required();

    auto* train = app.add_subcommand("train", "train the configured method's model");
    train->add_option("-c,--config", config_path)->required();
    train->add_option("-o,--out", out, "output model document")->required();

    auto* calibrate = app.add_subcommand("calibrate", "conformal calibration of a model");
    calibrate->add_option("-c,--config", config_path)->required();
    calibrate->add_option("-m,--model", model_path, "model document from train")->required();
    calibrate->add_option("-o,--out", out, "output predictor document")->required();
    calibrate->add_option("-d,--diagnostics", diag_path, "latent diagnostics report path");

    auto* predict = app.add_subcommand("predict", "emit region files for given x");
    predict->add_option("-c,--config", config_path)->required();
    predict->add_option("-P,--predictor", pred_path)->required();
    predict->add_option("-x,--x", x_arg, "conditioning point, comma separated");
    predict->add_option("--x-file", x_file, "CSV of conditioning points");
    predict->add_option("-y,--y", y_arg, "optional output point for a membership check");
    predict->add_option("--y-file", y_file, "CSV of output points");
    predict->add_option("-o,--out", out, "output directory")->required();

    auto* eval = app.add_subcommand("eval", "repeated-split coverage/volume experiment");
    eval->add_option("-c,--config", config_path)->required();
    eval->add_option("-o,--out", out, "output directory")->required();

    auto* diagnose = app.add_subcommand("diagnose", "latent diagnostics of a predictor");
    diagnose->add_option("-P,--predictor", pred_path)->required();
    diagnose->add_option("-o,--out", out, "output JSON path")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*diagnose) return cmd_diagnose(pred_path, out);
        const RunConfig cfg = parse_config(config_path);
        if (*generate) return cmd_generate(cfg, out);
        if (*train) return cmd_train(cfg, out);
        if (*calibrate) return cmd_calibrate(cfg, model_path, out, diag_path);
        if (*predict) return cmd_predict(cfg, pred_path, x_arg, x_file, y_arg, y_file, out);
        if (*eval) return cmd_eval(cfg, out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitConfig;
}

}  // namespace contra::cli

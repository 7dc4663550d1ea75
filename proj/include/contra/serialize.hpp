#pragma once

#include <string>

#include <json.hpp>

#include "contra/baselines.hpp"
#include "contra/conformal.hpp"
#include "contra/flow.hpp"
#include "contra/mcqr.hpp"
#include "contra/rescontra.hpp"

namespace contra {

// Versioned JSON documents. Doubles rely on the library's shortest
// round-trip rendering; bit-exact reload is covered by tests.

inline constexpr int kDocVersion = 1;

nlohmann::json to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

nlohmann::json to_json(const StandardizeStats& s);
StandardizeStats stats_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DenseNet& net);
DenseNet net_from_json(const nlohmann::json& j);

nlohmann::json to_json(const FlowModel& model);
FlowModel flow_from_json(const nlohmann::json& j);

nlohmann::json to_json(const LatentCalibration& cal);
LatentCalibration calibration_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ConformalBall& ball);
ConformalBall ball_from_json(const nlohmann::json& j);

nlohmann::json to_json(const KernelRidge& kr);
KernelRidge kernel_ridge_from_json(const nlohmann::json& j);

nlohmann::json to_json(const QuantilePair& nets);
QuantilePair quantile_pair_from_json(const nlohmann::json& j);

nlohmann::json to_json(const McqrPredictor& pred);
McqrPredictor mcqr_from_json(const nlohmann::json& j);

// CONTRA predictor: flow + calibration latents + ball.
struct ContraPredictor {
    FlowModel flow;
    LatentCalibration calibration;
    ConformalBall ball;
};
nlohmann::json to_json(const ContraPredictor& pred);
ContraPredictor contra_predictor_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PcpPredictor& pred);
PcpPredictor pcp_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RcpPredictor& pred);
RcpPredictor rcp_from_json(const nlohmann::json& j);

// Serializes the built-in kernel-ridge predictor only; a user-supplied
// PointPredictor cannot round-trip through a document.
nlohmann::json to_json(const ResContraBundle& bundle);
ResContraBundle rescontra_from_json(const nlohmann::json& j);

void save_json(const nlohmann::json& j, const std::string& path);
nlohmann::json load_json(const std::string& path);

// Checks {"version", "kind"} and returns the kind string.
std::string document_kind(const nlohmann::json& j);

}  // namespace contra

#pragma once

#include <memory>
#include <span>
#include <vector>

#include "contra/conformal.hpp"
#include "contra/data.hpp"
#include "contra/flow.hpp"

namespace contra {

// Pluggable point predictor: fit on pairs, then deterministic predict.
class PointPredictor {
public:
    virtual ~PointPredictor() = default;
    virtual void fit(const Dataset& train) = 0;
    virtual std::vector<double> predict(std::span<const double> x) const = 0;
    virtual std::size_t output_dim() const = 0;
};

struct KernelRidgeConfig {
    double bandwidth = 0.0;  // 0 = median pairwise-distance heuristic
    double ridge = 1e-3;
};

// Gaussian-kernel ridge regression with an explicit intercept, solved in
// closed form per output coordinate: (K + ridge I) a_j = y_j - mean(y_j).
// The intercept makes predictions exactly equivariant under constant shifts
// of the targets.
class KernelRidge final : public PointPredictor {
public:
    KernelRidge() = default;
    explicit KernelRidge(KernelRidgeConfig cfg) : cfg_(cfg) {}

    void fit(const Dataset& train) override;
    std::vector<double> predict(std::span<const double> x) const override;
    std::size_t output_dim() const override { return intercept_.size(); }

    const KernelRidgeConfig& config() const { return cfg_; }
    double fitted_bandwidth() const { return bandwidth_; }
    double fitted_ridge() const { return ridge_; }
    bool ridge_was_raised() const { return ridge_raised_; }

    // Exposed for serialization.
    const std::vector<double>& centers() const { return centers_; }
    const Matrix& dual() const { return dual_; }
    const std::vector<double>& intercept() const { return intercept_; }
    std::size_t input_dim() const { return p_; }
    void restore(std::vector<double> centers, Matrix dual, std::vector<double> intercept,
                 std::size_t p, double bandwidth, double ridge);

private:
    KernelRidgeConfig cfg_;
    std::size_t p_ = 0;
    double bandwidth_ = 1.0;
    double ridge_ = 1e-3;
    bool ridge_raised_ = false;
    std::vector<double> centers_;  // n x p
    Matrix dual_;                  // n x q
    std::vector<double> intercept_;
};

struct ResContraConfig {
    KernelRidgeConfig ridge;
    FlowConfig flow;
};

// f_hat from D1, residual flow from D2 residuals, ball from D3 residuals.
// The region at x is f_hat(x) + t*(E*, x).
struct ResContraBundle {
    std::shared_ptr<PointPredictor> predictor;
    FlowModel residual_flow;
    ConformalBall ball;
    LatentCalibration calibration;
    std::size_t n1 = 0, n2 = 0, n3 = 0;
};

ResContraBundle rescontra_fit(const Dataset& ds, std::span<const std::size_t> d1,
                              std::span<const std::size_t> d2, std::span<const std::size_t> d3,
                              double alpha, const ResContraConfig& cfg,
                              std::shared_ptr<PointPredictor> predictor = nullptr);

// (x_i, y_i - f_hat(x_i)) over the selected rows.
Dataset residual_dataset(const Dataset& ds, std::span<const std::size_t> idx,
                         const PointPredictor& predictor);

bool rescontra_contains(const ResContraBundle& bundle, std::span<const double> x,
                        std::span<const double> y);
RegionBoundary rescontra_boundary(const ResContraBundle& bundle, std::span<const double> x,
                                  std::size_t m_points, std::uint64_t seed);
// Translation-invariant: equals the residual-region volume at x.
VolumeEstimate rescontra_volume(const ResContraBundle& bundle, std::span<const double> x,
                                std::size_t b, std::uint64_t seed);

}  // namespace contra

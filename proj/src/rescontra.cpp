#include "contra/rescontra.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "contra/kernels.hpp"

namespace contra {

namespace {

double sq_dist(const double* a, const double* b, std::size_t p) {
    double s = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        const double d = a[j] - b[j];
        s += d * d;
    }
    return s;
}

double median_pairwise_distance(const std::vector<double>& xs, std::size_t n, std::size_t p) {
    // Deterministic stride subsample, at most 256 points.
    const std::size_t cap = 256;
    const std::size_t stride = n <= cap ? 1 : (n + cap - 1) / cap;
    std::vector<const double*> pts;
    for (std::size_t i = 0; i < n; i += stride) pts.push_back(xs.data() + i * p);
    std::vector<double> dists;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const double d = std::sqrt(sq_dist(pts[i], pts[j], p));
            if (d > 0.0) dists.push_back(d);
        }
    if (dists.empty()) return 1.0;
    const std::size_t mid = dists.size() / 2;
    std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
    return dists[mid];
}

}  // namespace

void KernelRidge::fit(const Dataset& train) {
    if (train.n == 0) throw std::invalid_argument("kernel ridge: empty training set");
    p_ = train.p;
    centers_ = train.x;
    const std::size_t n = train.n;
    bandwidth_ = cfg_.bandwidth > 0.0 ? cfg_.bandwidth
                                      : median_pairwise_distance(train.x, n, train.p);
    ridge_ = cfg_.ridge > 0.0 ? cfg_.ridge : 1e-8;
    ridge_raised_ = false;

    intercept_.assign(train.q, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < train.q; ++j) intercept_[j] += train.y[i * train.q + j];
    for (double& v : intercept_) v /= static_cast<double>(n);

    Matrix gram(n, n);
    const double inv2h2 = 1.0 / (2.0 * bandwidth_ * bandwidth_);
    for (std::size_t i = 0; i < n; ++i) {
        gram(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double k = std::exp(-sq_dist(train.x.data() + i * train.p,
                                               train.x.data() + j * train.p, train.p) *
                                      inv2h2);
            gram(i, j) = k;
            gram(j, i) = k;
        }
    }

    Matrix factor;
    for (int attempt = 0;; ++attempt) {
        factor = gram;
        for (std::size_t i = 0; i < n; ++i) factor(i, i) += ridge_;
        if (cholesky_in_place(factor)) break;
        if (attempt >= 8) throw std::runtime_error("kernel ridge: system stayed singular");
        ridge_ *= 10.0;
        ridge_raised_ = true;
    }

    dual_ = Matrix(n, train.q);
    std::vector<double> rhs(n), sol(n);
    for (std::size_t j = 0; j < train.q; ++j) {
        for (std::size_t i = 0; i < n; ++i) rhs[i] = train.y[i * train.q + j] - intercept_[j];
        cholesky_solve(factor, rhs.data(), sol.data());
        for (std::size_t i = 0; i < n; ++i) dual_(i, j) = sol[i];
    }
}

std::vector<double> KernelRidge::predict(std::span<const double> x) const {
    if (x.size() != p_) throw std::invalid_argument("kernel ridge: input dimension mismatch");
    const std::size_t n = dual_.rows;
    const std::size_t q = intercept_.size();
    std::vector<double> out(intercept_);
    const double inv2h2 = 1.0 / (2.0 * bandwidth_ * bandwidth_);
    for (std::size_t i = 0; i < n; ++i) {
        const double k = std::exp(-sq_dist(centers_.data() + i * p_, x.data(), p_) * inv2h2);
        for (std::size_t j = 0; j < q; ++j) out[j] += k * dual_(i, j);
    }
    return out;
}

void KernelRidge::restore(std::vector<double> centers, Matrix dual,
                          std::vector<double> intercept, std::size_t p, double bandwidth,
                          double ridge) {
    centers_ = std::move(centers);
    dual_ = std::move(dual);
    intercept_ = std::move(intercept);
    p_ = p;
    bandwidth_ = bandwidth;
    ridge_ = ridge;
}

namespace {

void require_disjoint(std::span<const std::size_t> a, std::span<const std::size_t> b,
                      const char* what) {
    std::unordered_set<std::size_t> seen(a.begin(), a.end());
    for (std::size_t i : b)
        if (seen.count(i))
            throw std::invalid_argument(std::string("rescontra: index ") + std::to_string(i) +
                                        " appears in two subsets (" + what + ")");
}

}  // namespace

Dataset residual_dataset(const Dataset& ds, std::span<const std::size_t> idx,
                         const PointPredictor& predictor) {
    Dataset out;
    out.n = idx.size();
    out.p = ds.p;
    out.q = ds.q;
    out.provenance = ds.provenance + ":residuals";
    out.x.reserve(out.n * ds.p);
    out.y.reserve(out.n * ds.q);
    for (std::size_t i : idx) {
        const auto x = ds.x_row(i);
        out.x.insert(out.x.end(), x.begin(), x.end());
        const auto pred = predictor.predict(x);
        const auto y = ds.y_row(i);
        for (std::size_t j = 0; j < ds.q; ++j) out.y.push_back(y[j] - pred[j]);
    }
    return out;
}

ResContraBundle rescontra_fit(const Dataset& ds, std::span<const std::size_t> d1,
                              std::span<const std::size_t> d2, std::span<const std::size_t> d3,
                              double alpha, const ResContraConfig& cfg,
                              std::shared_ptr<PointPredictor> predictor) {
    if (d1.empty() || d2.empty() || d3.empty())
        throw std::invalid_argument("rescontra: all three subsets must be nonempty");
    require_disjoint(d1, d2, "D1/D2");
    require_disjoint(d1, d3, "D1/D3");
    require_disjoint(d2, d3, "D2/D3");

    ResContraBundle bundle;
    bundle.n1 = d1.size();
    bundle.n2 = d2.size();
    bundle.n3 = d3.size();
    bundle.predictor = predictor ? std::move(predictor)
                                 : std::make_shared<KernelRidge>(cfg.ridge);
    bundle.predictor->fit(ds.subset(d1));

    const Dataset d2_res = residual_dataset(ds, d2, *bundle.predictor);
    bundle.residual_flow = train_flow(d2_res, cfg.flow);

    const Dataset d3_res = residual_dataset(ds, d3, *bundle.predictor);
    bundle.calibration = calibrate(bundle.residual_flow, d3_res);
    bundle.ball = conformal_radius(bundle.calibration, alpha);
    return bundle;
}

bool rescontra_contains(const ResContraBundle& bundle, std::span<const double> x,
                        std::span<const double> y) {
    if (bundle.ball.unbounded) return true;
    const auto center = bundle.predictor->predict(x);
    std::vector<double> residual(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) residual[j] = y[j] - center[j];
    return region_contains(bundle.residual_flow, bundle.ball, x, residual);
}

RegionBoundary rescontra_boundary(const ResContraBundle& bundle, std::span<const double> x,
                                  std::size_t m_points, std::uint64_t seed) {
    RegionBoundary boundary =
        region_boundary(bundle.residual_flow, bundle.ball, x, m_points, seed);
    const auto center = bundle.predictor->predict(x);
    for (std::size_t i = 0; i < boundary.points.rows; ++i)
        for (std::size_t j = 0; j < boundary.points.cols; ++j)
            boundary.points(i, j) += center[j];
    return boundary;
}

VolumeEstimate rescontra_volume(const ResContraBundle& bundle, std::span<const double> x,
                                std::size_t b, std::uint64_t seed) {
    // Translating a region does not change its volume.
    return region_volume(bundle.residual_flow, bundle.ball, x, b, seed);
}

}  // namespace contra

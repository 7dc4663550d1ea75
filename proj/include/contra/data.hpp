#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "contra/dataset.hpp"

namespace contra {

// Synthetic generators. Each is deterministic in (n, seed).

// Two cubic-polynomial outputs over x ~ N([-2, -1.5], I2) with a 3-component
// mixture-Gaussian error. The second mixture covariance, 1.5(I2 - J2) as
// written, is not positive semidefinite; sampling uses its PSD part
// (eigenvalues clamped at zero), which degenerates to a Gaussian on a line.
Dataset gen_mixture(std::size_t n, std::uint64_t seed);

// Same input law, different polynomials, error on a noisy spiral
// (theta cos theta, theta sin theta) with theta ~ U(0, 2pi).
Dataset gen_spiral(std::size_t n, std::uint64_t seed, double sd1 = 0.2, double sd2 = 0.1);

// Error on the upper half unit circle with isotropic sd 0.1.
Dataset gen_moon(std::size_t n, std::uint64_t seed, double sd = 0.1);

// Error uniform on an annulus: r^2 ~ U(r_inner^2, r_outer^2), theta ~ U(0, 2pi).
Dataset gen_ring(std::size_t n, std::uint64_t seed, double r_inner, double r_outer);

// Ten-input model with a deliberately intricate conditional mean; the noise
// pair (e1, e2) ~ N(0, I2) enters multiplicatively inside the mean terms, so
// there is no separate additive error. Component means of x are drawn once
// from U(-10, 10) using the same seed.
Dataset gen_complex(std::size_t n, std::uint64_t seed);

// Mean polynomials, exposed so tests can reconstruct the error terms.
std::array<double, 2> mixture_poly(double x1, double x2);
std::array<double, 2> spiral_poly(double x1, double x2);

// CSV with columns x1..xp, y1..yq. Errors carry row/column positions.
Dataset load_csv(const std::string& path, std::size_t p, std::size_t q, bool has_header);
void save_csv(const Dataset& ds, const std::string& path, bool header = true);

struct SplitSpec {
    // Either absolute counts (must sum to n) or three ratios (must sum to 1).
    std::size_t train = 0, cal = 0, test = 0;
    std::vector<double> ratios;
    std::uint64_t seed = 0;
};

struct SplitIndices {
    std::vector<std::size_t> train, cal, test;
};

SplitIndices make_split(std::size_t n, const SplitSpec& spec);

// Second-level split of an index set (ResCONTRA: predictor vs residual flow).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_fraction(
    std::span<const std::size_t> idx, double first_fraction, std::uint64_t seed);

// Stats fitted on `fit_rows` only, applied to every row of a copy.
struct StandardizedDataset {
    Dataset data;
    StandardizeStats x_stats;
    StandardizeStats y_stats;
};
StandardizedDataset standardize(const Dataset& ds, std::span<const std::size_t> fit_rows,
                                bool include_y = true);

}  // namespace contra

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace contra {

// Per-column affine standardization. Empty vectors mean identity.
struct StandardizeStats {
    std::vector<double> mean;
    std::vector<double> std;

    bool identity() const { return mean.empty(); }

    void apply(std::span<const double> raw, std::span<double> out) const {
        if (identity()) {
            for (std::size_t j = 0; j < raw.size(); ++j) out[j] = raw[j];
            return;
        }
        for (std::size_t j = 0; j < raw.size(); ++j) out[j] = (raw[j] - mean[j]) / std[j];
    }

    void invert(std::span<const double> standardized, std::span<double> out) const {
        if (identity()) {
            for (std::size_t j = 0; j < standardized.size(); ++j) out[j] = standardized[j];
            return;
        }
        for (std::size_t j = 0; j < standardized.size(); ++j)
            out[j] = standardized[j] * std[j] + mean[j];
    }
};

// Paired (x, y) records, row-major.
struct Dataset {
    std::size_t n = 0;
    std::size_t p = 0;
    std::size_t q = 0;
    std::vector<double> x;  // n x p
    std::vector<double> y;  // n x q
    std::string provenance;

    std::span<const double> x_row(std::size_t i) const { return {x.data() + i * p, p}; }
    std::span<const double> y_row(std::size_t i) const { return {y.data() + i * q, q}; }

    Dataset subset(std::span<const std::size_t> idx) const;
};

// Population mean/sd per column over the given rows only (no leakage from
// other rows). Throws on a zero-variance column, naming its index.
StandardizeStats compute_stats(const std::vector<double>& values, std::size_t width,
                               std::span<const std::size_t> rows, const char* what);

}  // namespace contra

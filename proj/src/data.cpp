#include "contra/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <stdexcept>

#include "contra/linalg.hpp"
#include "contra/rng.hpp"

namespace contra {

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
    Dataset out;
    out.n = idx.size();
    out.p = p;
    out.q = q;
    out.provenance = provenance;
    out.x.reserve(out.n * p);
    out.y.reserve(out.n * q);
    for (std::size_t i : idx) {
        if (i >= n) throw std::out_of_range("dataset subset index out of range");
        out.x.insert(out.x.end(), x.begin() + i * p, x.begin() + (i + 1) * p);
        out.y.insert(out.y.end(), y.begin() + i * q, y.begin() + (i + 1) * q);
    }
    return out;
}

StandardizeStats compute_stats(const std::vector<double>& values, std::size_t width,
                               std::span<const std::size_t> rows, const char* what) {
    if (rows.empty()) throw std::invalid_argument("compute_stats: no rows to fit on");
    StandardizeStats stats;
    stats.mean.assign(width, 0.0);
    stats.std.assign(width, 0.0);
    const double inv_n = 1.0 / static_cast<double>(rows.size());
    for (std::size_t i : rows)
        for (std::size_t j = 0; j < width; ++j) stats.mean[j] += values[i * width + j];
    for (std::size_t j = 0; j < width; ++j) stats.mean[j] *= inv_n;
    for (std::size_t i : rows)
        for (std::size_t j = 0; j < width; ++j) {
            const double d = values[i * width + j] - stats.mean[j];
            stats.std[j] += d * d;
        }
    for (std::size_t j = 0; j < width; ++j) {
        stats.std[j] = std::sqrt(stats.std[j] * inv_n);
        if (!(stats.std[j] > 0.0))
            throw std::runtime_error(std::string("zero variance in ") + what + " column " +
                                     std::to_string(j));
    }
    return stats;
}

std::array<double, 2> mixture_poly(double x1, double x2) {
    return {3.0 * x1 * x1 * x1 * x2 - 5.0 * x2 * x2 + 4.0 * x1 * x2 - 6.0 * x2 + 7.0,
            x1 * x2 - x2 * x2 * x2 + 3.0 * x1 * x2 * x2 + 8.0};
}

std::array<double, 2> spiral_poly(double x1, double x2) {
    return {2.0 * x1 * x1 * x1 - 3.0 * x2 * x2 + 5.0 * x2 + x1 * x2,
            x1 * x1 * x2 - 4.0 * x2 * x2 + 3.0 * x1 * x1 * x2 + 7.0};
}

namespace {

constexpr double kMuX1 = -2.0;
constexpr double kMuX2 = -1.5;

void draw_x(Rng& rng, double& x1, double& x2) {
    x1 = kMuX1 + rng.normal();
    x2 = kMuX2 + rng.normal();
}

struct MixtureComponent {
    double weight;
    double mean[2];
    double sqrt_cov[2][2];  // symmetric square root of the PSD part
};

// Symmetric square root with negative eigenvalues clamped to zero.
void psd_sqrt_2x2(double a, double b, double c, double out[2][2]) {
    const SymEig2 eig = sym_eig_2x2(a, b, c);
    out[0][0] = out[0][1] = out[1][0] = out[1][1] = 0.0;
    for (int i = 0; i < 2; ++i) {
        if (eig.eigval[i] <= 0.0) continue;
        const double s = std::sqrt(eig.eigval[i]);
        for (int r = 0; r < 2; ++r)
            for (int col = 0; col < 2; ++col)
                out[r][col] += s * eig.eigvec[i][r] * eig.eigvec[i][col];
    }
}

const std::vector<MixtureComponent>& mixture_components() {
    static const std::vector<MixtureComponent> comps = [] {
        std::vector<MixtureComponent> c(3);
        c[0] = {0.3, {0.0, 0.0}, {}};
        psd_sqrt_2x2(1.0, 0.5, 1.0, c[0].sqrt_cov);  // 0.5 (I2 + J2)
        c[1] = {0.4, {5.0, 5.0}, {}};
        psd_sqrt_2x2(0.0, -1.5, 0.0, c[1].sqrt_cov);  // PSD part of 1.5 (I2 - J2)
        c[2] = {0.3, {10.0, 0.0}, {}};
        psd_sqrt_2x2(1.0, 0.0, 1.0, c[2].sqrt_cov);
        return c;
    }();
    return comps;
}

}  // namespace

Dataset gen_mixture(std::size_t n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("gen_mixture: n must be >= 1");
    Dataset ds;
    ds.n = n;
    ds.p = 2;
    ds.q = 2;
    ds.provenance = "mixture(n=" + std::to_string(n) + ",seed=" + std::to_string(seed) + ")";
    ds.x.resize(2 * n);
    ds.y.resize(2 * n);
    Rng rng(seed);
    const auto& comps = mixture_components();
    for (std::size_t i = 0; i < n; ++i) {
        double x1, x2;
        draw_x(rng, x1, x2);
        const double u = rng.uniform();
        const MixtureComponent& c =
            u < comps[0].weight ? comps[0]
                                : (u < comps[0].weight + comps[1].weight ? comps[1] : comps[2]);
        const double g1 = rng.normal();
        const double g2 = rng.normal();
        const double e1 = c.mean[0] + c.sqrt_cov[0][0] * g1 + c.sqrt_cov[0][1] * g2;
        const double e2 = c.mean[1] + c.sqrt_cov[1][0] * g1 + c.sqrt_cov[1][1] * g2;
        const auto mean = mixture_poly(x1, x2);
        ds.x[2 * i] = x1;
        ds.x[2 * i + 1] = x2;
        ds.y[2 * i] = mean[0] + e1;
        ds.y[2 * i + 1] = mean[1] + e2;
    }
    return ds;
}

namespace {

Dataset gen_spiral_family(std::size_t n, std::uint64_t seed, const char* name,
                          const std::function<void(Rng&, double&, double&)>& draw_eps) {
    if (n < 1) throw std::invalid_argument("generator: n must be >= 1");
    Dataset ds;
    ds.n = n;
    ds.p = 2;
    ds.q = 2;
    ds.provenance = std::string(name) + "(n=" + std::to_string(n) + ",seed=" +
                    std::to_string(seed) + ")";
    ds.x.resize(2 * n);
    ds.y.resize(2 * n);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        double x1, x2;
        draw_x(rng, x1, x2);
        double e1, e2;
        draw_eps(rng, e1, e2);
        const auto mean = spiral_poly(x1, x2);
        ds.x[2 * i] = x1;
        ds.x[2 * i + 1] = x2;
        ds.y[2 * i] = mean[0] + e1;
        ds.y[2 * i + 1] = mean[1] + e2;
    }
    return ds;
}

}  // namespace

Dataset gen_spiral(std::size_t n, std::uint64_t seed, double sd1, double sd2) {
    return gen_spiral_family(n, seed, "spiral", [&](Rng& rng, double& e1, double& e2) {
        const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        e1 = theta * std::cos(theta) + sd1 * rng.normal();
        e2 = theta * std::sin(theta) + sd2 * rng.normal();
    });
}

Dataset gen_moon(std::size_t n, std::uint64_t seed, double sd) {
    return gen_spiral_family(n, seed, "moon", [&](Rng& rng, double& e1, double& e2) {
        const double theta = rng.uniform(0.0, std::numbers::pi);
        e1 = std::cos(theta) + sd * rng.normal();
        e2 = std::sin(theta) + sd * rng.normal();
    });
}

Dataset gen_ring(std::size_t n, std::uint64_t seed, double r_inner, double r_outer) {
    if (!(r_inner >= 0.0) || !(r_inner < r_outer))
        throw std::invalid_argument("gen_ring: need 0 <= r_inner < r_outer");
    return gen_spiral_family(n, seed, "ring", [&](Rng& rng, double& e1, double& e2) {
        const double r2 = rng.uniform(r_inner * r_inner, r_outer * r_outer);
        const double r = std::sqrt(r2);
        const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        e1 = r * std::cos(theta);
        e2 = r * std::sin(theta);
    });
}

Dataset gen_complex(std::size_t n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("gen_complex: n must be >= 1");
    Dataset ds;
    ds.n = n;
    ds.p = 10;
    ds.q = 2;
    ds.provenance = "complex(n=" + std::to_string(n) + ",seed=" + std::to_string(seed) + ")";
    ds.x.resize(10 * n);
    ds.y.resize(2 * n);
    Rng rng(seed);
    double mu[10];
    for (double& m : mu) m = rng.uniform(-10.0, 10.0);
    for (std::size_t i = 0; i < n; ++i) {
        double x[10];
        for (int j = 0; j < 10; ++j) {
            x[j] = mu[j] + rng.normal();
            ds.x[10 * i + j] = x[j];
        }
        const double e1 = rng.normal();
        const double e2 = rng.normal();
        ds.y[2 * i] = 2.0 * x[0] * x[0] * e1 * e2 - 3.0 * x[1] + 0.5 * x[2] * x[2] * x[2] +
                      x[3] * x[4] * e2 - 1.5 * x[5] * x[5] + 0.7 * x[6] * x[7] * x[7] -
                      0.3 * x[8] * e1 + std::sin(x[9]) + 5.0;
        ds.y[2 * i + 1] = -x[0] * x[0] * x[0] + 4.0 * x[1] * x[1] - x[2] * x[3] * e2 +
                          0.8 * x[4] * x[4] - 2.0 * x[5] * x[6] * e1 * e2 + 0.6 * x[7] -
                          1.2 * x[8] * x[8] * x[8] * e1 * e1 + std::cos(x[9]) + 7.0;
    }
    return ds;
}

Dataset load_csv(const std::string& path, std::size_t p, std::size_t q, bool has_header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open CSV file: " + path);
    Dataset ds;
    ds.p = p;
    ds.q = q;
    ds.provenance = path;
    std::string line;
    std::size_t lineno = 0;
    bool skipped_header = !has_header;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!skipped_header) {
            skipped_header = true;
            continue;
        }
        std::vector<double> cells;
        cells.reserve(p + q);
        const char* cur = line.data();
        const char* end = line.data() + line.size();
        while (true) {
            const char* cell_end = cur;
            while (cell_end != end && *cell_end != ',') ++cell_end;
            double value = 0.0;
            const auto res = std::from_chars(cur, cell_end, value);
            if (res.ec != std::errc() || res.ptr != cell_end)
                throw std::runtime_error("non-numeric cell at " + path + ":" +
                                         std::to_string(lineno) + " column " +
                                         std::to_string(cells.size() + 1));
            cells.push_back(value);
            if (cell_end == end) break;
            cur = cell_end + 1;
        }
        if (cells.size() != p + q)
            throw std::runtime_error("row " + std::to_string(lineno) + " in " + path + " has " +
                                     std::to_string(cells.size()) + " columns, expected " +
                                     std::to_string(p + q));
        ds.x.insert(ds.x.end(), cells.begin(), cells.begin() + p);
        ds.y.insert(ds.y.end(), cells.begin() + p, cells.end());
        ++ds.n;
    }
    if (ds.n == 0) throw std::runtime_error("CSV file has no data rows: " + path);
    return ds;
}

void save_csv(const Dataset& ds, const std::string& path, bool header) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write CSV file: " + path);
    char buf[40];
    if (header) {
        for (std::size_t j = 0; j < ds.p; ++j) out << (j ? ",x" : "x") << (j + 1);
        for (std::size_t j = 0; j < ds.q; ++j) out << ",y" << (j + 1);
        out << "\n";
    }
    for (std::size_t i = 0; i < ds.n; ++i) {
        for (std::size_t j = 0; j < ds.p; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", ds.x[i * ds.p + j]);
            out << (j ? "," : "") << buf;
        }
        for (std::size_t j = 0; j < ds.q; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", ds.y[i * ds.q + j]);
            out << "," << buf;
        }
        out << "\n";
    }
}

SplitIndices make_split(std::size_t n, const SplitSpec& spec) {
    std::size_t n_train = spec.train, n_cal = spec.cal, n_test = spec.test;
    if (!spec.ratios.empty()) {
        if (spec.ratios.size() != 3)
            throw std::invalid_argument("split ratios must have 3 entries");
        const double sum = spec.ratios[0] + spec.ratios[1] + spec.ratios[2];
        if (std::fabs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("split ratios must sum to 1");
        n_train = static_cast<std::size_t>(std::llround(spec.ratios[0] * static_cast<double>(n)));
        n_cal = static_cast<std::size_t>(std::llround(spec.ratios[1] * static_cast<double>(n)));
        if (n_train + n_cal > n) throw std::invalid_argument("split ratios overflow n");
        n_test = n - n_train - n_cal;
    }
    if (n_train + n_cal + n_test != n)
        throw std::invalid_argument("split counts sum to " +
                                    std::to_string(n_train + n_cal + n_test) + ", expected " +
                                    std::to_string(n));
    if (n_train == 0 || n_cal == 0)
        throw std::invalid_argument("split needs nonempty train and calibration sets");
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(spec.seed);
    rng.shuffle(perm);
    SplitIndices out;
    out.train.assign(perm.begin(), perm.begin() + n_train);
    out.cal.assign(perm.begin() + n_train, perm.begin() + n_train + n_cal);
    out.test.assign(perm.begin() + n_train + n_cal, perm.end());
    return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_fraction(
    std::span<const std::size_t> idx, double first_fraction, std::uint64_t seed) {
    if (!(first_fraction > 0.0 && first_fraction < 1.0))
        throw std::invalid_argument("split_fraction: fraction must be in (0,1)");
    std::vector<std::size_t> perm(idx.begin(), idx.end());
    Rng rng(seed);
    rng.shuffle(perm);
    const auto n_first = static_cast<std::size_t>(
        std::llround(first_fraction * static_cast<double>(perm.size())));
    if (n_first == 0 || n_first >= perm.size())
        throw std::invalid_argument("split_fraction: degenerate split");
    return {std::vector<std::size_t>(perm.begin(), perm.begin() + n_first),
            std::vector<std::size_t>(perm.begin() + n_first, perm.end())};
}

StandardizedDataset standardize(const Dataset& ds, std::span<const std::size_t> fit_rows,
                                bool include_y) {
    StandardizedDataset out;
    out.x_stats = compute_stats(ds.x, ds.p, fit_rows, "x");
    if (include_y) out.y_stats = compute_stats(ds.y, ds.q, fit_rows, "y");
    out.data = ds;
    for (std::size_t i = 0; i < ds.n; ++i) {
        out.x_stats.apply(ds.x_row(i), {out.data.x.data() + i * ds.p, ds.p});
        if (include_y)
            out.y_stats.apply(ds.y_row(i), {out.data.y.data() + i * ds.q, ds.q});
    }
    return out;
}

}  // namespace contra

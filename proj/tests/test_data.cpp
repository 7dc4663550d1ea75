#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "contra/data.hpp"
#include "contra/rng.hpp"

using namespace contra;

namespace {
std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("mixture polynomials at the origin give the constant terms") {
    const auto y = mixture_poly(0.0, 0.0);
    CHECK(y[0] == 7.0);
    CHECK(y[1] == 8.0);
}

TEST_CASE("mixture error mean matches the mixture-mean formula") {
    // 0.3 (0,0) + 0.4 (5,5) + 0.3 (10,0) = (5, 2)
    const std::size_t n = 100000;
    const Dataset ds = gen_mixture(n, 2024);
    double e1 = 0.0, e2 = 0.0, x1 = 0.0, x2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto mean = mixture_poly(ds.x[2 * i], ds.x[2 * i + 1]);
        e1 += ds.y[2 * i] - mean[0];
        e2 += ds.y[2 * i + 1] - mean[1];
        x1 += ds.x[2 * i];
        x2 += ds.x[2 * i + 1];
    }
    CHECK(std::fabs(e1 / n - 5.0) < 0.05);
    CHECK(std::fabs(e2 / n - 2.0) < 0.05);
    CHECK(std::fabs(x1 / n - (-2.0)) < 0.02);
    CHECK(std::fabs(x2 / n - (-1.5)) < 0.02);
}

TEST_CASE("spiral with zero noise traces (theta cos theta, theta sin theta)") {
    const Dataset ds = gen_spiral(500, 5, 0.0, 0.0);
    for (std::size_t i = 0; i < ds.n; ++i) {
        const auto mean = spiral_poly(ds.x[2 * i], ds.x[2 * i + 1]);
        const double e1 = ds.y[2 * i] - mean[0];
        const double e2 = ds.y[2 * i + 1] - mean[1];
        const double theta = std::sqrt(e1 * e1 + e2 * e2);  // ||eps|| = theta
        CHECK(e1 == doctest::Approx(theta * std::cos(theta)).epsilon(1e-9));
        CHECK(e2 == doctest::Approx(theta * std::sin(theta)).epsilon(1e-9));
    }
}

TEST_CASE("moon errors hug the unit upper half-circle") {
    const std::size_t n = 100000;
    const Dataset ds = gen_moon(n, 77);
    std::size_t close = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto mean = spiral_poly(ds.x[2 * i], ds.x[2 * i + 1]);
        const double e1 = ds.y[2 * i] - mean[0];
        const double e2 = ds.y[2 * i + 1] - mean[1];
        if (std::fabs(std::hypot(e1, e2) - 1.0) < 0.5) ++close;
    }
    CHECK(static_cast<double>(close) / n >= 0.9999);
}

TEST_CASE("ring error norm squared is uniform") {
    const std::size_t n = 10000;
    const double r_in = 1.0, r_out = 2.0;
    const Dataset ds = gen_ring(n, 13, r_in, r_out);
    std::vector<double> n2(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto mean = spiral_poly(ds.x[2 * i], ds.x[2 * i + 1]);
        const double e1 = ds.y[2 * i] - mean[0];
        const double e2 = ds.y[2 * i + 1] - mean[1];
        n2[i] = e1 * e1 + e2 * e2;
    }
    std::sort(n2.begin(), n2.end());
    double ks = 0.0;
    const double lo = r_in * r_in, hi = r_out * r_out;
    for (std::size_t i = 0; i < n; ++i) {
        const double cdf = (n2[i] - lo) / (hi - lo);
        REQUIRE(cdf >= 0.0);
        REQUIRE(cdf <= 1.0);
        ks = std::max(ks, std::fabs(cdf - static_cast<double>(i + 1) / n));
        ks = std::max(ks, std::fabs(cdf - static_cast<double>(i) / n));
    }
    CHECK(ks < 0.02);
}

TEST_CASE("ring rejects bad radii") {
    CHECK_THROWS_AS(gen_ring(10, 1, 2.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(gen_ring(10, 1, -1.0, 1.0), std::invalid_argument);
}

TEST_CASE("complex generator has 10 inputs and seeded component means") {
    const Dataset ds = gen_complex(20000, 99);
    CHECK(ds.p == 10);
    CHECK(ds.q == 2);
    // Column means recover the seeded mu ~ U(-10, 10) to sampling accuracy.
    Rng rng(99);
    for (std::size_t j = 0; j < 10; ++j) {
        const double mu = rng.uniform(-10.0, 10.0);
        double mean = 0.0;
        for (std::size_t i = 0; i < ds.n; ++i) mean += ds.x[10 * i + j];
        mean /= static_cast<double>(ds.n);
        CHECK(std::fabs(mean - mu) < 0.05);
    }
    const Dataset again = gen_complex(200, 5);
    CHECK(again.x == gen_complex(200, 5).x);
    CHECK(again.y == gen_complex(200, 5).y);
}

TEST_CASE("generators are deterministic in (n, seed)") {
    const Dataset a = gen_mixture(500, 42);
    const Dataset b = gen_mixture(500, 42);
    const Dataset c = gen_mixture(500, 43);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    CHECK(a.y != c.y);
}

TEST_CASE("csv round trip preserves values exactly") {
    const Dataset ds = gen_mixture(50, 3);
    const std::string path = temp_path("contra_test_roundtrip.csv");
    save_csv(ds, path);
    const Dataset back = load_csv(path, 2, 2, true);
    CHECK(back.n == ds.n);
    CHECK(back.x == ds.x);
    CHECK(back.y == ds.y);
    std::filesystem::remove(path);
}

TEST_CASE("csv loader reports malformed input") {
    const std::string path = temp_path("contra_test_bad.csv");
    {
        std::ofstream out(path);
        out << "1.0,2.0,3.0,4.0\n1.0,oops,3.0,4.0\n";
    }
    CHECK_THROWS_WITH_AS(load_csv(path, 2, 2, false),
                         doctest::Contains("non-numeric cell"), std::runtime_error);
    {
        std::ofstream out(path);
        out << "1.0,2.0,3.0,4.0\n1.0,2.0,3.0\n";
    }
    CHECK_THROWS_WITH_AS(load_csv(path, 2, 2, false), doctest::Contains("columns"),
                         std::runtime_error);
    std::filesystem::remove(path);
    CHECK_THROWS(load_csv(temp_path("contra_no_such_file.csv"), 2, 2, false));
}

TEST_CASE("standardize fits on the designated rows only") {
    Dataset ds = gen_mixture(100, 9);
    std::vector<std::size_t> fit_rows;
    for (std::size_t i = 0; i < 60; ++i) fit_rows.push_back(i);

    const auto first = standardize(ds, fit_rows);
    // Mutate rows outside the fit set; stats must not move.
    for (std::size_t i = 60; i < 100; ++i) ds.y[2 * i] += 1e6;
    const auto second = standardize(ds, fit_rows);
    CHECK(first.x_stats.mean == second.x_stats.mean);
    CHECK(first.y_stats.mean == second.y_stats.mean);
    CHECK(first.y_stats.std == second.y_stats.std);

    // Round trip on a standardized row.
    std::vector<double> raw(2);
    first.y_stats.invert(first.data.y_row(10), raw);
    CHECK(raw[0] == doctest::Approx(ds.y[20]).epsilon(1e-12));
}

TEST_CASE("zero-variance column is reported with its index") {
    Dataset ds;
    ds.n = 3;
    ds.p = 2;
    ds.q = 1;
    ds.x = {1.0, 5.0, 2.0, 5.0, 3.0, 5.0};  // column 1 constant
    ds.y = {1.0, 2.0, 3.0};
    std::vector<std::size_t> rows{0, 1, 2};
    CHECK_THROWS_WITH_AS(standardize(ds, rows), doctest::Contains("zero variance"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(standardize(ds, rows), doctest::Contains("column 1"),
                         std::runtime_error);
}

TEST_CASE("split reproduces the published 60/20/20 sizes") {
    SplitSpec spec;
    spec.ratios = {0.6, 0.2, 0.2};
    spec.seed = 1;
    const SplitIndices idx = make_split(9005, spec);
    CHECK(idx.train.size() == 5403);
    CHECK(idx.cal.size() == 1801);
    CHECK(idx.test.size() == 1801);
}

TEST_CASE("split is disjoint, exhaustive and deterministic") {
    SplitSpec spec;
    spec.train = 30;
    spec.cal = 15;
    spec.test = 5;
    spec.seed = 4;
    const SplitIndices a = make_split(50, spec);
    const SplitIndices b = make_split(50, spec);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    std::vector<std::size_t> all;
    for (auto* part : {&a.train, &a.cal, &a.test})
        all.insert(all.end(), part->begin(), part->end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < 50; ++i) CHECK(all[i] == i);

    spec.test = 6;  // 30 + 15 + 6 != 50
    CHECK_THROWS_AS(make_split(50, spec), std::invalid_argument);
}

TEST_CASE("split_fraction partitions an index set") {
    std::vector<std::size_t> idx{10, 11, 12, 13, 14, 15, 16, 17, 18, 19};
    const auto [first, second] = split_fraction(idx, 0.6, 8);
    CHECK(first.size() == 6);
    CHECK(second.size() == 4);
    std::vector<std::size_t> all(first);
    all.insert(all.end(), second.begin(), second.end());
    std::sort(all.begin(), all.end());
    CHECK(all == idx);
}

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "contra/baselines.hpp"
#include "contra/data.hpp"
#include "contra/mcqr.hpp"
#include "contra/rescontra.hpp"
#include "contra/stats.hpp"

namespace contra {

enum class Method { Contra, ResContra, Pcp, Rcp, Mcqr };

const char* to_string(Method m);
Method method_from_string(const std::string& name);

struct EvalConfig {
    std::vector<Method> methods{Method::Contra};
    double alpha = 0.1;
    std::size_t replications = 10;
    std::uint64_t root_seed = 1;
    FlowConfig flow;
    QuantileNetConfig quantile;
    KernelRidgeConfig ridge;
    std::size_t pcp_k = 40;
    double rescontra_train_fraction = 0.6;
    std::size_t volume_b = 500;       // per-point Monte Carlo budget
    std::size_t volume_points = 200;  // test points used for mean volume; 0 = all
    unsigned threads = 0;             // replication workers; 0 = hardware
};

struct ReplicationRow {
    std::size_t replication = 0;
    Method method = Method::Contra;
    double coverage = 0.0;
    double volume = 0.0;
};

struct MethodSummary {
    Method method = Method::Contra;
    stats::MeanSe coverage;
    stats::MeanSe volume;
    std::size_t replications = 0;
};

struct MetricsReport {
    std::vector<ReplicationRow> rows;
    std::vector<MethodSummary> summaries;
    double alpha = 0.1;
    double runtime_seconds = 0.0;  // console only; report files stay seed-deterministic
    std::string error;             // nonempty when a replication failed; rows hold
                                   // the completed part
};

// Recomputes the summaries from the rows (the reverse direction is tested).
std::vector<MethodSummary> summarize(const std::vector<ReplicationRow>& rows, double alpha);

// The repeated-split protocol: the test set is fixed by `split`; every
// replication reshuffles the remaining pool into train/calibration with a
// seed derived from (root_seed, replication), then fits, calibrates and
// scores every requested method on the fixed test set.
MetricsReport run_experiment(const Dataset& ds, const SplitSpec& split, const EvalConfig& cfg,
                             const std::function<void(const std::string&)>& log = nullptr);

// M independent (calibration, single test) order-statistic trials using an
// exchangeable score generator; the empirical coverage estimates
// P(test <= threshold), which is exactly k/(n2+1) for continuous scores.
stats::MeanSe coverage_bound_trial(std::size_t n2, double alpha, std::size_t m_trials,
                                   std::uint64_t seed,
                                   const std::function<double(Rng&)>& draw_score);

// Table-style text rendering of a report (one row per metric).
std::string render_table(const MetricsReport& report);

}  // namespace contra

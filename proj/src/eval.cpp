#include "contra/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace contra {

const char* to_string(Method m) {
    switch (m) {
        case Method::Contra: return "contra";
        case Method::ResContra: return "rescontra";
        case Method::Pcp: return "pcp";
        case Method::Rcp: return "rcp";
        case Method::Mcqr: return "mcqr";
    }
    return "?";
}

Method method_from_string(const std::string& name) {
    if (name == "contra") return Method::Contra;
    if (name == "rescontra") return Method::ResContra;
    if (name == "pcp") return Method::Pcp;
    if (name == "rcp") return Method::Rcp;
    if (name == "mcqr") return Method::Mcqr;
    throw std::invalid_argument("unknown method: " + name);
}

std::vector<MethodSummary> summarize(const std::vector<ReplicationRow>& rows, double alpha) {
    (void)alpha;
    std::map<Method, std::pair<std::vector<double>, std::vector<double>>> buckets;
    std::vector<Method> order;
    for (const auto& row : rows) {
        if (!buckets.count(row.method)) order.push_back(row.method);
        buckets[row.method].first.push_back(row.coverage);
        buckets[row.method].second.push_back(row.volume);
    }
    std::vector<MethodSummary> out;
    for (Method m : order) {
        MethodSummary s;
        s.method = m;
        const auto& [cov, vol] = buckets[m];
        s.coverage = stats::mean_se(cov.data(), cov.size());
        s.volume = stats::mean_se(vol.data(), vol.size());
        s.replications = cov.size();
        out.push_back(s);
    }
    return out;
}

namespace {

struct FixedTest {
    Dataset test;
    std::vector<std::size_t> volume_rows;  // subset of test rows used for volume
};

// Deterministic evenly-strided subsample for the volume average.
std::vector<std::size_t> pick_volume_rows(std::size_t n_test, std::size_t want) {
    std::vector<std::size_t> rows;
    if (want == 0 || want >= n_test) {
        rows.resize(n_test);
        for (std::size_t i = 0; i < n_test; ++i) rows[i] = i;
        return rows;
    }
    const double stride = static_cast<double>(n_test) / static_cast<double>(want);
    for (std::size_t i = 0; i < want; ++i)
        rows.push_back(static_cast<std::size_t>(static_cast<double>(i) * stride));
    return rows;
}

struct RepContext {
    const Dataset& ds;
    const EvalConfig& cfg;
    const FixedTest& fixed;
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> cal_idx;
    std::uint64_t rep_seed = 0;

    // Contra and PCP share one flow per replication.
    std::shared_ptr<const FlowModel> flow;
    Dataset train_subset;
    Dataset cal_subset;

    const Dataset& train() {
        if (train_subset.n == 0) train_subset = ds.subset(train_idx);
        return train_subset;
    }
    const Dataset& cal() {
        if (cal_subset.n == 0) cal_subset = ds.subset(cal_idx);
        return cal_subset;
    }
    std::shared_ptr<const FlowModel> shared_flow() {
        if (!flow) {
            FlowConfig fc = cfg.flow;
            fc.seed = Rng::hash_combine(rep_seed, 0xf10f);
            auto trained = std::make_shared<FlowModel>(train_flow(train(), fc));
            if (trained->aborted_divergent)
                throw std::runtime_error("flow training diverged in replication");
            flow = trained;
        }
        return flow;
    }
};

ReplicationRow eval_contra(RepContext& ctx) {
    ReplicationRow row;
    const auto flow = ctx.shared_flow();
    const LatentCalibration latents = calibrate(*flow, ctx.cal());
    const ConformalBall ball = conformal_radius(latents, ctx.cfg.alpha);
    const Dataset& test = ctx.fixed.test;
    std::size_t covered = 0;
    for (std::size_t i = 0; i < test.n; ++i)
        covered += region_contains(*flow, ball, test.x_row(i), test.y_row(i)) ? 1 : 0;
    row.coverage = static_cast<double>(covered) / static_cast<double>(test.n);
    if (ball.unbounded) {
        row.volume = std::numeric_limits<double>::infinity();
        return row;
    }
    double vol = 0.0;
    for (std::size_t r : ctx.fixed.volume_rows)
        vol += region_volume(*flow, ball, test.x_row(r), ctx.cfg.volume_b,
                             Rng::hash_combine(ctx.rep_seed, 0xc0 + r))
                   .estimate;
    row.volume = vol / static_cast<double>(ctx.fixed.volume_rows.size());
    return row;
}

ReplicationRow eval_rescontra(RepContext& ctx) {
    ReplicationRow row;
    const auto [d1, d2] = split_fraction(ctx.train_idx, ctx.cfg.rescontra_train_fraction,
                                         Rng::hash_combine(ctx.rep_seed, 0x5e5));
    ResContraConfig rc;
    rc.ridge = ctx.cfg.ridge;
    rc.flow = ctx.cfg.flow;
    rc.flow.seed = Rng::hash_combine(ctx.rep_seed, 0x5e50);
    const ResContraBundle bundle =
        rescontra_fit(ctx.ds, d1, d2, ctx.cal_idx, ctx.cfg.alpha, rc);
    if (bundle.residual_flow.aborted_divergent)
        throw std::runtime_error("residual flow training diverged in replication");
    const Dataset& test = ctx.fixed.test;
    std::size_t covered = 0;
    for (std::size_t i = 0; i < test.n; ++i)
        covered += rescontra_contains(bundle, test.x_row(i), test.y_row(i)) ? 1 : 0;
    row.coverage = static_cast<double>(covered) / static_cast<double>(test.n);
    if (bundle.ball.unbounded) {
        row.volume = std::numeric_limits<double>::infinity();
        return row;
    }
    double vol = 0.0;
    for (std::size_t r : ctx.fixed.volume_rows)
        vol += rescontra_volume(bundle, test.x_row(r), ctx.cfg.volume_b,
                                Rng::hash_combine(ctx.rep_seed, 0x5e500 + r))
                   .estimate;
    row.volume = vol / static_cast<double>(ctx.fixed.volume_rows.size());
    return row;
}

ReplicationRow eval_pcp(RepContext& ctx) {
    ReplicationRow row;
    const PcpPredictor pred =
        pcp_calibrate(ctx.shared_flow(), ctx.cal(), ctx.cfg.pcp_k, ctx.cfg.alpha,
                      Rng::hash_combine(ctx.rep_seed, 0x9c9));
    const Dataset& test = ctx.fixed.test;
    std::size_t covered = 0;
    for (std::size_t i = 0; i < test.n; ++i)
        covered += pcp_contains(pred, test.x_row(i), test.y_row(i)) ? 1 : 0;
    row.coverage = static_cast<double>(covered) / static_cast<double>(test.n);
    if (pred.unbounded) {
        row.volume = std::numeric_limits<double>::infinity();
        return row;
    }
    double vol = 0.0;
    for (std::size_t r : ctx.fixed.volume_rows)
        vol += pcp_volume(pred, test.x_row(r), ctx.cfg.volume_b,
                          Rng::hash_combine(ctx.rep_seed, 0x9c900 + r))
                   .estimate;
    row.volume = vol / static_cast<double>(ctx.fixed.volume_rows.size());
    return row;
}

ReplicationRow eval_rcp(RepContext& ctx) {
    ReplicationRow row;
    RcpPredictor pred = rcp_fit(ctx.train(), ctx.cfg.ridge);
    rcp_calibrate(pred, ctx.cal(), ctx.cfg.alpha);
    const Dataset& test = ctx.fixed.test;
    std::size_t covered = 0;
    for (std::size_t i = 0; i < test.n; ++i)
        covered += rcp_contains(pred, test.x_row(i), test.y_row(i)) ? 1 : 0;
    row.coverage = static_cast<double>(covered) / static_cast<double>(test.n);
    // The ellipsoid volume is the same at every x.
    row.volume = pred.unbounded ? std::numeric_limits<double>::infinity() : rcp_volume(pred);
    return row;
}

ReplicationRow eval_mcqr(RepContext& ctx) {
    ReplicationRow row;
    QuantileNetConfig qc = ctx.cfg.quantile;
    qc.seed = Rng::hash_combine(ctx.rep_seed, 0x3c42);
    const McqrPredictor pred = mcqr_fit(ctx.train(), ctx.cal(), ctx.cfg.alpha, qc);
    const Dataset& test = ctx.fixed.test;
    std::size_t covered = 0;
    for (std::size_t i = 0; i < test.n; ++i)
        covered += mcqr_contains(pred, test.x_row(i), test.y_row(i)) ? 1 : 0;
    row.coverage = static_cast<double>(covered) / static_cast<double>(test.n);
    if (pred.threshold.unbounded) {
        row.volume = std::numeric_limits<double>::infinity();
        return row;
    }
    double vol = 0.0;
    for (std::size_t r : ctx.fixed.volume_rows)
        vol += box_volume(mcqr_predict_region(pred, test.x_row(r)));
    row.volume = vol / static_cast<double>(ctx.fixed.volume_rows.size());
    return row;
}

}  // namespace

MetricsReport run_experiment(const Dataset& ds, const SplitSpec& split, const EvalConfig& cfg,
                             const std::function<void(const std::string&)>& log) {
    const auto t0 = std::chrono::steady_clock::now();
    MetricsReport report;
    report.alpha = cfg.alpha;
    if (cfg.replications < 1) throw std::invalid_argument("run_experiment: need R >= 1");

    const SplitIndices base = make_split(ds.n, split);
    FixedTest fixed;
    fixed.test = ds.subset(base.test);
    fixed.volume_rows = pick_volume_rows(fixed.test.n, cfg.volume_points);

    // The pool reshuffled per replication; the test set never moves.
    std::vector<std::size_t> pool(base.train);
    pool.insert(pool.end(), base.cal.begin(), base.cal.end());
    const std::size_t n_train = base.train.size();

    std::mutex log_mutex;
    const auto run_one = [&](std::size_t rep) {
        const std::uint64_t rep_seed = Rng::hash_combine(cfg.root_seed, rep);
        std::vector<std::size_t> shuffled(pool);
        Rng rng(rep_seed);
        rng.shuffle(shuffled);

        RepContext ctx{ds, cfg, fixed, {}, {}, rep_seed, nullptr, {}, {}};
        ctx.train_idx.assign(shuffled.begin(), shuffled.begin() + n_train);
        ctx.cal_idx.assign(shuffled.begin() + n_train, shuffled.end());

        std::vector<ReplicationRow> rows;
        for (Method m : cfg.methods) {
            ReplicationRow row;
            switch (m) {
                case Method::Contra: row = eval_contra(ctx); break;
                case Method::ResContra: row = eval_rescontra(ctx); break;
                case Method::Pcp: row = eval_pcp(ctx); break;
                case Method::Rcp: row = eval_rcp(ctx); break;
                case Method::Mcqr: row = eval_mcqr(ctx); break;
            }
            row.replication = rep;
            row.method = m;
            rows.push_back(row);
            if (log) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "rep %zu %s: coverage %.4f volume %.4f",
                              rep, to_string(m), row.coverage, row.volume);
                const std::lock_guard<std::mutex> guard(log_mutex);
                log(buf);
            }
        }
        return rows;
    };

    // Replications are independent; run them on a small pool. The report is
    // assembled in replication order, so the result does not depend on
    // scheduling. On failure, rows from replications before the first failed
    // index are kept (same as a sequential abort).
    const std::size_t threads = std::max<std::size_t>(
        1, std::min({cfg.threads ? cfg.threads : std::thread::hardware_concurrency(),
                     static_cast<unsigned>(cfg.replications), 8u}));
    std::vector<std::vector<ReplicationRow>> results(cfg.replications);
    std::vector<std::string> errors(cfg.replications);
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t rep = next.fetch_add(1); rep < cfg.replications;
             rep = next.fetch_add(1)) {
            try {
                results[rep] = run_one(rep);
            } catch (const std::exception& e) {
                errors[rep] = e.what();
                if (errors[rep].empty()) errors[rep] = "unknown failure";
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool_threads;
        for (std::size_t t = 0; t < threads; ++t) pool_threads.emplace_back(worker);
        for (auto& t : pool_threads) t.join();
    }
    for (std::size_t rep = 0; rep < cfg.replications; ++rep) {
        if (!errors[rep].empty()) {
            report.error = errors[rep];
            break;
        }
        report.rows.insert(report.rows.end(), results[rep].begin(), results[rep].end());
    }

    report.summaries = summarize(report.rows, cfg.alpha);
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

stats::MeanSe coverage_bound_trial(std::size_t n2, double alpha, std::size_t m_trials,
                                   std::uint64_t seed,
                                   const std::function<double(Rng&)>& draw_score) {
    if (m_trials == 0) throw std::invalid_argument("coverage_bound_trial: need trials");
    const std::size_t rank = stats::conformal_rank(n2, alpha);
    std::vector<double> scores(n2);
    std::size_t covered = 0;
    for (std::size_t t = 0; t < m_trials; ++t) {
        Rng rng = Rng::derive(seed, t);
        for (std::size_t i = 0; i < n2; ++i) scores[i] = draw_score(rng);
        const double test_score = draw_score(rng);
        if (rank == 0) {
            ++covered;  // whole-space region
            continue;
        }
        std::nth_element(scores.begin(), scores.begin() + (rank - 1), scores.end());
        if (test_score <= scores[rank - 1]) ++covered;
    }
    stats::MeanSe out;
    out.mean = static_cast<double>(covered) / static_cast<double>(m_trials);
    out.se = std::sqrt(out.mean * (1.0 - out.mean) / static_cast<double>(m_trials));
    return out;
}

std::string render_table(const MetricsReport& report) {
    std::ostringstream os;
    char buf[64];
    os << "Method  ";
    for (const auto& s : report.summaries) {
        std::snprintf(buf, sizeof buf, "%12s", to_string(s.method));
        os << buf;
    }
    os << "\nCoverage";
    for (const auto& s : report.summaries) {
        std::snprintf(buf, sizeof buf, " %.3f(%.3f)", s.coverage.mean, s.coverage.se);
        os << buf;
    }
    os << "\nVolume  ";
    for (const auto& s : report.summaries) {
        std::snprintf(buf, sizeof buf, " %.3f(%.3f)", s.volume.mean, s.volume.se);
        os << buf;
    }
    os << "\n";
    return os.str();
}

}  // namespace contra

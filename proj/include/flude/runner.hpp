#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "flude/checkpoint.hpp"
#include "flude/logging.hpp"
#include "flude/metrics.hpp"
#include "flude/round_engine.hpp"
#include "flude/scenario.hpp"

namespace flude {

struct RunPaths {
    std::string dir;
    std::string round_log;
    std::string selection_log;
    std::string curves;
    std::string summary;
    std::string checkpoint;

    static RunPaths in(const std::string& dir) {
        namespace fs = std::filesystem;
        RunPaths p;
        p.dir = dir;
        p.round_log = (fs::path(dir) / "round_log.csv").string();
        p.selection_log = (fs::path(dir) / "selection_trace.csv").string();
        p.curves = (fs::path(dir) / "curves.csv").string();
        p.summary = (fs::path(dir) / "summary.csv").string();
        p.checkpoint = (fs::path(dir) / "checkpoint.bin").string();
        return p;
    }
};

struct RunResult {
    RunSummary summary;
    int64_t rounds_done = 0;
    RunPaths paths;
};

inline Coordinator make_coordinator(const Scenario& s) {
    return Coordinator(s.env, s.task, s.trainer, s.flude, variant_policy(s.variant), s.seed);
}

namespace rundetail {

/// Drive rounds [coord.rounds_done()+1, total_rounds], appending to the
/// run's logs and checkpointing after every round. The summary is always
/// recomputed from the round log file so straight and resumed runs emit
/// identical bytes.
inline RunResult drive(Coordinator& coord, const Scenario& scenario, const RunPaths& paths,
                       int64_t total_rounds, bool append, bool quiet) {
    RoundLogWriter round_log;
    SelectionTraceWriter trace_log;
    CurveWriter curves;
    round_log.open(paths.round_log, append);
    trace_log.open(paths.selection_log, append);
    curves.open(paths.curves, append);

    while (coord.rounds_done() < total_rounds) {
        RoundOutcome out = coord.run_round();
        round_log.write(out.row);
        trace_log.write(out.row.round, out.plan.trace);
        curves.write(out.row);
        save_checkpoint(paths.checkpoint, scenario, coord.snapshot());
        if (!quiet && out.row.round % 50 == 0)
            std::printf("round %lld/%lld acc=%.4f\n",
                        static_cast<long long>(out.row.round),
                        static_cast<long long>(total_rounds), out.row.test_acc);
    }

    RunResult res;
    res.paths = paths;
    res.rounds_done = coord.rounds_done();
    std::vector<RoundLogRow> rows = read_round_log(paths.round_log);
    if (rows.empty()) {
        // Zero-round run: the initial model is the result.
        EvalResult ev = coord.evaluate_global();
        res.summary.final_accuracy = ev.accuracy;
        res.summary.per_class_accuracy = ev.per_class_accuracy;
        res.summary.per_device_participation = coord.participation_counts();
        res.summary.target_accuracy = scenario.flude.target_accuracy;
    } else {
        EvalResult ev = coord.evaluate_global();
        res.summary = compute_summary(rows, coord.participation_counts(),
                                      ev.per_class_accuracy, scenario.flude.target_accuracy);
    }
    write_summary_csv(paths.summary, res.summary);
    return res;
}

} // namespace rundetail

/// Run one scenario to completion into `out_dir`.
inline RunResult run_scenario(const Scenario& scenario, const std::string& out_dir,
                              bool quiet = true,
                              std::optional<int64_t> rounds_override = std::nullopt) {
    std::filesystem::create_directories(out_dir);
    RunPaths paths = RunPaths::in(out_dir);
    Scenario s = scenario;
    if (rounds_override) s.rounds = *rounds_override;
    Coordinator coord = make_coordinator(s);
    return rundetail::drive(coord, s, paths, s.rounds, /*append=*/false, quiet);
}

/// Continue a checkpointed run in place. Existing logs in the checkpoint's
/// directory are appended to, so the final outputs match an uninterrupted
/// run byte for byte.
inline RunResult resume_run(const std::string& checkpoint_path,
                            std::optional<int64_t> rounds_override = std::nullopt,
                            bool quiet = true) {
    LoadedCheckpoint lc = load_checkpoint(checkpoint_path);
    std::string dir = std::filesystem::path(checkpoint_path).parent_path().string();
    if (dir.empty()) dir = ".";
    RunPaths paths = RunPaths::in(dir);
    Scenario s = lc.scenario;
    if (rounds_override) s.rounds = *rounds_override;
    Coordinator coord = make_coordinator(s);
    coord.restore(lc.state);
    return rundetail::drive(coord, s, paths, s.rounds, /*append=*/true, quiet);
}

inline int worker_thread_cap() {
    unsigned hw = std::thread::hardware_concurrency();
    int cap = hw == 0 ? 4 : static_cast<int>(hw);
    if (const char* env = std::getenv("FLUDE_SIM_THREADS")) {
        int v = std::atoi(env);
        if (v >= 1) cap = v;
    }
    return cap;
}

/// The variant matrix: every variant x n_seeds paired runs (seed i is
/// shared across variants). Runs fan out over worker threads; each run is
/// internally deterministic, so the table does not depend on scheduling.
inline std::vector<ComparisonRow> run_compare(const Scenario& base, const std::string& out_dir,
                                              int n_seeds, bool quiet = true) {
    namespace fs = std::filesystem;
    const Variant variants[] = {Variant::flude, Variant::random_selection,
                                Variant::full_distribution, Variant::least_distribution};
    struct Job {
        Variant variant;
        uint64_t seed;
        std::string dir;
    };
    std::vector<Job> jobs;
    for (Variant v : variants)
        for (int i = 0; i < n_seeds; ++i) {
            uint64_t seed = base.seed + static_cast<uint64_t>(i);
            std::string dir =
                (fs::path(out_dir) / to_string(v) / ("seed_" + std::to_string(seed))).string();
            jobs.push_back({v, seed, dir});
        }

    std::vector<ComparisonRow> rows(jobs.size());
    std::atomic<size_t> next{0};
    auto work = [&]() {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            Scenario s = base;
            s.variant = jobs[i].variant;
            s.seed = jobs[i].seed;
            s.env.seed = jobs[i].seed;
            RunResult r = run_scenario(s, jobs[i].dir, /*quiet=*/true);
            rows[i] = {to_string(jobs[i].variant), jobs[i].seed, r.summary};
            if (!quiet)
                std::printf("%s seed %llu: acc=%.4f comm=%lld\n", to_string(jobs[i].variant),
                            static_cast<unsigned long long>(jobs[i].seed),
                            r.summary.final_accuracy,
                            static_cast<long long>(r.summary.total_comm_units));
        }
    };
    int n_threads = std::min<int>(worker_thread_cap(), static_cast<int>(jobs.size()));
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();

    write_comparison_csv((fs::path(out_dir) / "comparison.csv").string(), rows);
    return rows;
}

} // namespace flude

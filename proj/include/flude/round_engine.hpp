#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "flude/cache.hpp"
#include "flude/dependability.hpp"
#include "flude/distributor.hpp"
#include "flude/env.hpp"
#include "flude/model_params.hpp"
#include "flude/selector.hpp"
#include "flude/trainer.hpp"

namespace flude {

enum class SelectionPolicy { adaptive, random };
enum class DistributionPolicy { adaptive, full, least };

struct EnginePolicy {
    SelectionPolicy selection = SelectionPolicy::adaptive;
    DistributionPolicy distribution = DistributionPolicy::adaptive;
};

struct FludeParams {
    double b_max = 100.0;         // per-round budget, model-transfer units
    double round_deadline_s = 120.0; // T
    double sigma = 0.5;
    double lambda = 1.0;
    double mu = 0.5;
    double epsilon0 = 0.9;
    double epsilon_decay = 0.98;
    double epsilon_floor = 0.2;
    double w0 = 5.0;
    double w_min = 1.0;
    double w_max = 50.0;
    double prior_alpha = 2.0;
    double prior_beta = 2.0;
    int max_participants = 50;
    double target_accuracy = 0.5;
};

struct RoundPlan {
    int64_t round = 0;
    std::vector<int> online;      // D
    std::vector<int> selected;    // S, ascending ids
    std::vector<int> distributed; // S_distr, ascending ids
    double avg_dependability = 0.0; // R over S, frozen at acceptance
    double predicted_cost = 0.0;    // B_pred = |S_distr| + |S| * R
    double deadline_s = 0.0;        // T
    int quorum = 0;                 // ceil(|S| * R)
    double w_threshold = 0.0;
    double avg_staleness = 0.0;
    int n_resumed = 0;
    bool shortfall = false;
    std::vector<SelectionEntry> trace; // pick order, for the selection log
};

struct UploadRecord {
    int device_id = 0;
    ModelParams params;
    int n_samples = 0;
    double arrival_s = 0.0;
    double mean_loss = 0.0;
};

struct RoundReport {
    std::vector<UploadRecord> received; // accepted uploads, arrival order
    double duration_s = 0.0;
    int download_count = 0;
    int upload_count = 0;
    std::vector<int> interrupted;
    int late_discarded = 0;
};

struct GlobalModel {
    ModelParams params;
    int64_t version = 0;
};

/// One row of the round log.
struct RoundLogRow {
    int64_t round = 0;
    int n_online = 0;
    int n_selected = 0;
    int n_distributed = 0;
    int n_resumed = 0;
    int n_uploaded = 0;
    int n_interrupted = 0;
    double duration_s = 0.0;
    double w = 0.0;
    double avg_staleness = 0.0;
    double epsilon = 0.0;
    int64_t cum_download = 0;
    int64_t cum_upload = 0;
    double train_loss = 0.0;
    double test_acc = 0.0;
};

struct RoundOutcome {
    RoundPlan plan;
    RoundReport report;
    RoundLogRow row;
};

/// Size-weighted average of the received local models.
inline ModelParams aggregate(const std::vector<UploadRecord>& received,
                             const ModelParams& current) {
    if (received.empty()) return current;
    double total = 0.0;
    for (const auto& u : received) {
        if (!u.params.same_shape(received.front().params) ||
            u.params.dim() != current.dim())
            throw std::invalid_argument("aggregation dimension mismatch");
        total += static_cast<double>(u.n_samples);
    }
    if (!(total > 0.0)) throw std::invalid_argument("aggregation weights sum to zero");

    // Fixed ascending-id order keeps the float result reproducible.
    std::vector<const UploadRecord*> ordered;
    ordered.reserve(received.size());
    for (const auto& u : received) ordered.push_back(&u);
    std::sort(ordered.begin(), ordered.end(),
              [](const UploadRecord* a, const UploadRecord* b) {
                  return a->device_id < b->device_id;
              });

    std::vector<double> acc(current.dim(), 0.0);
    for (const UploadRecord* u : ordered) {
        double w = static_cast<double>(u->n_samples) / total;
        for (size_t j = 0; j < acc.size(); ++j)
            acc[j] += w * static_cast<double>(u->params.values[j]);
    }
    ModelParams out;
    out.shape = current.shape;
    out.values.resize(current.dim());
    for (size_t j = 0; j < acc.size(); ++j) out.values[j] = static_cast<float>(acc[j]);
    return out;
}

/// Serializable engine state; everything a resumed run needs beyond what
/// the scenario regenerates deterministically.
struct EngineState {
    int64_t rounds_done = 0;
    double clock_now = 0.0;
    double epsilon = 0.0;
    double prev_train_loss = 0.0;
    int64_t cum_download = 0;
    int64_t cum_upload = 0;
    std::vector<DependabilityEstimate> estimates;
    std::vector<uint8_t> explored;
    FrequencyState freq;
    DistributionState dist;
    GlobalModel global;
    std::vector<std::pair<int, CacheEntry>> caches;
};

/**
 * Drives one training round end to end: online registration, the
 * budget-constrained participant sizing loop, selection, staleness-aware
 * distribution, simulated local sessions with interruptions, dual-condition
 * round close, estimator updates and aggregation. Single-writer: all state
 * mutation happens here, between per-device session evaluations.
 */
class Coordinator {
public:
    Coordinator(EnvConfig env_cfg, TaskConfig task_cfg, TrainerConfig trainer_cfg,
                FludeParams params, EnginePolicy policy, uint64_t run_seed)
        : params_(params),
          policy_(policy),
          run_seed_(run_seed),
          trainer_cfg_(trainer_cfg),
          population_(Population::generate(env_cfg)),
          task_(generate_synthetic_task(task_cfg, env_cfg.n_devices, run_seed)),
          caches_(static_cast<size_t>(env_cfg.n_devices)),
          explored_(static_cast<size_t>(env_cfg.n_devices), 0) {
        if (params_.b_max < 2.0)
            throw std::invalid_argument("budget must allow at least one download and one upload");
        estimates_.assign(static_cast<size_t>(env_cfg.n_devices),
                          DependabilityEstimate{params_.prior_alpha, params_.prior_beta, 0});
        freq_.population_size = env_cfg.n_devices;
        dist_.w = params_.w0;
        dist_.lambda = params_.lambda;
        dist_.mu = params_.mu;
        dist_.w_min = params_.w_min;
        dist_.w_max = params_.w_max;
        epsilon_ = params_.epsilon0;
        size_t n = param_count(task_cfg.dim, task_cfg.n_classes, trainer_cfg.hidden_width);
        global_.params = ModelParams::zeros(
            param_shape(task_cfg.dim, task_cfg.n_classes, trainer_cfg.hidden_width), n);
        if (trainer_cfg.hidden_width > 0) {
            // Zero init leaves every ReLU unit dead; break the symmetry.
            RngStream g(RngStream::derive(run_seed, "init"));
            double scale = std::sqrt(2.0 / static_cast<double>(task_cfg.dim));
            for (float& v : global_.params.values)
                v = static_cast<float>(g.normal(0.0, scale));
        }
        global_.version = 0;
        prev_train_loss_ = std::log(static_cast<double>(task_cfg.n_classes));
    }

    const Population& population() const { return population_; }
    const SyntheticTask& task() const { return task_; }
    const GlobalModel& global_model() const { return global_; }
    const std::vector<DependabilityEstimate>& estimates() const { return estimates_; }
    const CacheStore& caches() const { return caches_; }
    const DistributionState& distribution_state() const { return dist_; }
    double epsilon() const { return epsilon_; }
    double clock_now() const { return clock_.now; }
    int64_t rounds_done() const { return rounds_done_; }

    std::vector<int64_t> participation_counts() const {
        std::vector<int64_t> out;
        out.reserve(estimates_.size());
        for (const auto& e : estimates_) out.push_back(e.participation);
        return out;
    }

    EvalResult evaluate_global() const {
        return evaluate(global_.params, task_.test, task_.cfg.n_classes,
                        trainer_cfg_.hidden_width);
    }

    RoundOutcome run_round() {
        const int64_t round = rounds_done_ + 1;
        const double round_start = clock_.now;
        const double eps_used = epsilon_;

        RoundPlan plan;
        plan.round = round;
        plan.deadline_s = params_.round_deadline_s;
        plan.online = population_.online_set(round_start);

        RoundReport report;
        if (plan.online.empty()) {
            // Nothing to do; the global model carries forward.
            global_.version = round;
            rounds_done_ = round;
            freq_.round = round;
            return finish_round(plan, report, round_start, 0.0, eps_used);
        }

        SelectionResult sel;
        DistributionPlan dist_plan = size_participants(plan, sel);

        // Commit the accepted plan.
        for (int id : sel.newly_explored) explored_[static_cast<size_t>(id)] = 1;
        for (int id : plan.selected) estimates_[static_cast<size_t>(id)].participation += 1;
        freq_.cumulative_selected += static_cast<int64_t>(plan.selected.size());
        freq_.round = round;
        if (policy_.distribution == DistributionPolicy::adaptive)
            commit_distribution(dist_, dist_plan);

        // Simulate the local sessions.
        std::vector<UploadRecord> uploads;
        std::vector<int> completed_ids;
        for (int id : plan.selected) {
            bool fresh = std::binary_search(plan.distributed.begin(), plan.distributed.end(), id);
            double t = round_start;
            if (fresh)
                t += transfer_seconds(global_.params.byte_size(),
                                      population_.sample_bandwidth(id, static_cast<uint64_t>(round), 0));
            TrainStart start = resume_or_fresh(caches_, id, round, fresh, global_.params);
            InterruptionOutcome itr =
                population_.draw_interruption(id, static_cast<uint64_t>(round));
            uint64_t order_key = RngStream::derive(run_seed_, "shuffle",
                                                   static_cast<uint64_t>(id),
                                                   static_cast<uint64_t>(start.pass_round));
            const DataShard& shard =
                task_.shards[static_cast<size_t>(population_.device(id).shard_index)];
            TrainOutcome out = train_local(start.params, shard, trainer_cfg_, start.offset,
                                           order_key, itr);
            const double ps = population_.per_sample_seconds(id);
            if (out.completed) {
                int work = pass_length(shard, trainer_cfg_) - start.offset;
                t += work * ps;
                t += transfer_seconds(out.params.byte_size(),
                                      population_.sample_bandwidth(id, static_cast<uint64_t>(round), 1));
                uploads.push_back({id, std::move(out.params), out.n_samples, t, out.mean_loss});
                completed_ids.push_back(id);
            } else {
                int remaining = pass_length(shard, trainer_cfg_) - start.offset;
                double worked = itr.fraction * remaining * ps;
                CacheEntry entry = std::move(out.cache);
                entry.cached_round = round;
                entry.pass_round = start.pass_round;
                entry.cached_clock = t + worked;
                caches_.checkpoint(id, std::move(entry));
                report.interrupted.push_back(id);
            }
        }

        // Dual-condition round close: quorum of earliest arrivals, or the
        // deadline. Uploads past the close are discarded and counted as
        // failures.
        std::sort(uploads.begin(), uploads.end(), [](const UploadRecord& a, const UploadRecord& b) {
            if (a.arrival_s != b.arrival_s) return a.arrival_s < b.arrival_s;
            return a.device_id < b.device_id;
        });
        const double deadline = round_start + plan.deadline_s;
        size_t eligible = 0;
        while (eligible < uploads.size() && uploads[eligible].arrival_s <= deadline) ++eligible;

        double close;
        size_t accepted;
        if (eligible >= static_cast<size_t>(plan.quorum)) {
            accepted = static_cast<size_t>(plan.quorum);
            close = accepted > 0 ? uploads[accepted - 1].arrival_s : round_start;
        } else {
            accepted = eligible;
            close = deadline;
        }
        report.late_discarded = static_cast<int>(uploads.size() - accepted);
        uploads.resize(accepted);
        report.received = std::move(uploads);
        report.duration_s = close - round_start;
        report.download_count = static_cast<int>(plan.distributed.size());
        report.upload_count = static_cast<int>(report.received.size());

        // Every selection teaches the estimator. Success means the session
        // completed (the device produced an upload, accepted or not);
        // failure means it was interrupted. Attributing late-but-complete
        // uploads as failures locks the posterior onto the quorum fraction
        // instead of the true completion rate.
        std::vector<uint8_t> completed_mask(estimates_.size(), 0);
        for (int id : completed_ids) completed_mask[static_cast<size_t>(id)] = 1;
        for (int id : plan.selected) {
            auto& est = estimates_[static_cast<size_t>(id)];
            est = completed_mask[static_cast<size_t>(id)] ? update_dependability(est, 1, 0)
                                                          : update_dependability(est, 0, 1);
        }
        // Completion ends the pass whether or not the upload made the cut.
        for (int id : completed_ids) caches_.clear(id);

        global_.params = aggregate(report.received, global_.params);
        global_.version = round;
        rounds_done_ = round;

        if (policy_.selection == SelectionPolicy::adaptive)
            epsilon_ = decay_epsilon(epsilon_, params_.epsilon_decay, params_.epsilon_floor);

        return finish_round(plan, report, round_start, report.duration_s, eps_used);
    }

    EngineState snapshot() const {
        EngineState st;
        st.rounds_done = rounds_done_;
        st.clock_now = clock_.now;
        st.epsilon = epsilon_;
        st.prev_train_loss = prev_train_loss_;
        st.cum_download = cum_download_;
        st.cum_upload = cum_upload_;
        st.estimates = estimates_;
        st.explored = explored_;
        st.freq = freq_;
        st.dist = dist_;
        st.global = global_;
        for (int id : caches_.cached_devices()) st.caches.emplace_back(id, *caches_.find(id));
        return st;
    }

    void restore(const EngineState& st) {
        rounds_done_ = st.rounds_done;
        clock_.now = st.clock_now;
        epsilon_ = st.epsilon;
        prev_train_loss_ = st.prev_train_loss;
        cum_download_ = st.cum_download;
        cum_upload_ = st.cum_upload;
        estimates_ = st.estimates;
        explored_ = st.explored;
        freq_ = st.freq;
        dist_ = st.dist;
        global_ = st.global;
        caches_.reset(explored_.size());
        for (const auto& [id, entry] : st.caches) caches_.checkpoint(id, entry);
    }

private:
    /// Algorithm-2 budget loop. The first selection runs at the starting X;
    /// afterwards X <- max(1, floor(X * B_max / B_pred)) until the predicted
    /// cost fits the budget. Selection side effects stay uncommitted until
    /// the accepted iteration.
    DistributionPlan size_participants(RoundPlan& plan, SelectionResult& sel_out) {
        int x = std::min(params_.max_participants, static_cast<int>(plan.online.size()));
        x = std::max(x, 1);
        DistributionPlan dist_plan;
        const int kMaxIterations = 20;
        for (int iter = 1;; ++iter) {
            SelectionResult sel = select_once(plan.online, x, plan.round, iter);
            std::vector<int> selected = sel.device_ids();

            ParticipantGroups groups = partition_groups(selected, caches_);
            std::vector<int64_t> stale;
            stale.reserve(groups.group_v.size());
            for (int id : groups.group_v) stale.push_back(caches_.staleness(id, plan.round));

            DistributionPlan dp = make_distribution_plan(groups, stale, selected);

            double r_sum = 0.0;
            for (int id : selected) r_sum += estimates_[static_cast<size_t>(id)].mean();
            double r = selected.empty() ? 0.0 : r_sum / static_cast<double>(selected.size());
            double b_pred = static_cast<double>(dp.receive_global.size()) +
                            static_cast<double>(selected.size()) * r;

            if (b_pred <= params_.b_max) {
                plan.selected = std::move(selected);
                plan.distributed = dp.receive_global;
                plan.avg_dependability = r;
                plan.predicted_cost = b_pred;
                plan.quorum = static_cast<int>(
                    std::ceil(static_cast<double>(plan.selected.size()) * r));
                plan.w_threshold = dp.w_new;
                plan.avg_staleness = dp.h_new;
                plan.n_resumed = dp.n_resumed;
                plan.shortfall = sel.shortfall;
                plan.trace = sel.selected;
                sel_out = std::move(sel);
                return dp;
            }
            if (x <= 1 || iter >= kMaxIterations)
                throw std::runtime_error("infeasible budget: B_pred " + std::to_string(b_pred) +
                                         " exceeds B_max " + std::to_string(params_.b_max) +
                                         " at X = " + std::to_string(x));
            x = std::max(1, static_cast<int>(std::floor(x * params_.b_max / b_pred)));
        }
    }

    SelectionResult select_once(const std::vector<int>& online, int x, int64_t round, int iter) {
        if (policy_.selection == SelectionPolicy::random) {
            RngStream g(RngStream::derive(run_seed_, "randsel", static_cast<uint64_t>(round),
                                          static_cast<uint64_t>(iter)));
            std::vector<int> picks =
                sample_without_replacement(online, static_cast<size_t>(x), g);
            SelectionResult res;
            for (int id : picks)
                res.selected.push_back({id, SelectedVia::random,
                                        estimates_[static_cast<size_t>(id)].mean()});
            return res;
        }
        SelectionConfig cfg{x, epsilon_, params_.sigma};
        RngStream g(RngStream::derive(run_seed_, "explore", static_cast<uint64_t>(round),
                                      static_cast<uint64_t>(iter)));
        return select_participants(online, estimates_, explored_, freq_, cfg, g);
    }

    DistributionPlan make_distribution_plan(const ParticipantGroups& groups,
                                            const std::vector<int64_t>& stale,
                                            const std::vector<int>& selected) {
        DistributionPlan dp;
        switch (policy_.distribution) {
            case DistributionPolicy::adaptive:
                dp = plan_distribution(dist_, groups, stale);
                break;
            case DistributionPolicy::full: {
                double h_sum = 0.0;
                for (int64_t s : stale) h_sum += static_cast<double>(s);
                dp.h_new = stale.empty() ? 0.0 : h_sum / static_cast<double>(stale.size());
                dp.w_new = 0.0;
                dp.n_new = static_cast<double>(stale.size());
                dp.receive_global = selected;
                dp.n_resumed = 0;
                break;
            }
            case DistributionPolicy::least: {
                double h_sum = 0.0;
                for (int64_t s : stale) h_sum += static_cast<double>(s);
                dp.h_new = stale.empty() ? 0.0 : h_sum / static_cast<double>(stale.size());
                dp.w_new = std::numeric_limits<double>::infinity();
                dp.n_new = 0.0;
                dp.receive_global = groups.group_u;
                std::sort(dp.receive_global.begin(), dp.receive_global.end());
                dp.n_resumed = static_cast<int>(groups.group_v.size());
                break;
            }
        }
        return dp;
    }

    RoundOutcome finish_round(RoundPlan& plan, RoundReport& report, double round_start,
                              double duration, double eps_used) {
        clock_.now = round_start + duration;
        cum_download_ += report.download_count;
        cum_upload_ += report.upload_count;

        if (!report.received.empty()) {
            double w_total = 0.0, loss_acc = 0.0;
            for (const auto& u : report.received) {
                w_total += static_cast<double>(u.n_samples);
                loss_acc += static_cast<double>(u.n_samples) * u.mean_loss;
            }
            prev_train_loss_ = loss_acc / w_total;
        }

        EvalResult ev = evaluate_global();
        last_per_class_ = ev.per_class_accuracy;

        RoundOutcome out;
        out.row.round = plan.round;
        out.row.n_online = static_cast<int>(plan.online.size());
        out.row.n_selected = static_cast<int>(plan.selected.size());
        out.row.n_distributed = static_cast<int>(plan.distributed.size());
        out.row.n_resumed = plan.n_resumed;
        out.row.n_uploaded = report.upload_count;
        out.row.n_interrupted = static_cast<int>(report.interrupted.size());
        out.row.duration_s = report.duration_s;
        out.row.w = plan.w_threshold;
        out.row.avg_staleness = plan.avg_staleness;
        out.row.epsilon = eps_used;
        out.row.cum_download = cum_download_;
        out.row.cum_upload = cum_upload_;
        out.row.train_loss = prev_train_loss_;
        out.row.test_acc = ev.accuracy;
        out.plan = std::move(plan);
        out.report = std::move(report);
        return out;
    }

public:
    const std::vector<double>& last_per_class_accuracy() const { return last_per_class_; }

private:
    FludeParams params_;
    EnginePolicy policy_;
    uint64_t run_seed_;
    TrainerConfig trainer_cfg_;
    Population population_;
    SyntheticTask task_;
    CacheStore caches_;
    std::vector<uint8_t> explored_;
    std::vector<DependabilityEstimate> estimates_;
    FrequencyState freq_;
    DistributionState dist_;
    GlobalModel global_;
    VirtualClock clock_;
    double epsilon_ = 0.9;
    double prev_train_loss_ = 0.0;
    int64_t cum_download_ = 0;
    int64_t cum_upload_ = 0;
    int64_t rounds_done_ = 0;
    std::vector<double> last_per_class_;
};

} // namespace flude

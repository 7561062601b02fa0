#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "flude/cache.hpp"

namespace flude {

/// Adaptive staleness-threshold state. The threshold reacts to average
/// cache staleness (down when staleness grows) and to distribution volume
/// (up when the distribution count grows).
struct DistributionState {
    double w = 5.0; // current staleness threshold, rounds
    double h_old = 0.0;
    double n_old = 0.0;
    double lambda = 1.0;
    double mu = 0.5;
    double w_min = 1.0;
    double w_max = 50.0;
};

/// Selected devices split by cache status: U has no cache (completed last
/// time or never selected), V holds an interrupted pass.
struct ParticipantGroups {
    std::vector<int> group_u;
    std::vector<int> group_v;
};

inline ParticipantGroups partition_groups(const std::vector<int>& selected,
                                          const CacheStore& caches) {
    ParticipantGroups g;
    for (int id : selected) {
        if (caches.has(id))
            g.group_v.push_back(id);
        else
            g.group_u.push_back(id);
    }
    return g;
}

namespace detail {

inline double staleness_factor(const DistributionState& st, double h_new) {
    // Relative change is treated as 0 when there is no history to compare.
    if (st.h_old <= 0.0) return st.w;
    return st.w * (1.0 - st.lambda * (h_new - st.h_old) / st.h_old);
}

inline double cost_factor(const DistributionState& st, double w_prime, double n_new) {
    if (st.n_old <= 0.0) return w_prime;
    return w_prime * (1.0 + st.mu * (n_new - st.n_old) / st.n_old);
}

} // namespace detail

/// Apply both threshold factors, clamp, and advance the state.
/// n_new is the distribution count the caller measured under the
/// intermediate threshold W'.
inline double update_threshold(DistributionState& st, double h_new, double n_new) {
    double w_prime = detail::staleness_factor(st, h_new);
    double w = std::clamp(detail::cost_factor(st, w_prime, n_new), st.w_min, st.w_max);
    st.h_old = h_new;
    st.n_old = n_new;
    st.w = w;
    return w;
}

/// Everyone in U, plus V devices whose staleness strictly exceeds W.
inline std::vector<int> distribution_set(const ParticipantGroups& groups,
                                         const std::vector<int64_t>& staleness_v,
                                         double w) {
    std::vector<int> out = groups.group_u;
    for (size_t i = 0; i < groups.group_v.size(); ++i)
        if (static_cast<double>(staleness_v[i]) > w) out.push_back(groups.group_v[i]);
    std::sort(out.begin(), out.end());
    return out;
}

/// One round's distribution decision, computed without mutating the state
/// (the round engine commits it only when the budget loop accepts a plan).
struct DistributionPlan {
    double w_new = 0.0;
    double h_new = 0.0;
    double n_new = 0.0;
    std::vector<int> receive_global; // S_distr
    int n_resumed = 0;
};

inline DistributionPlan plan_distribution(const DistributionState& st,
                                          const ParticipantGroups& groups,
                                          const std::vector<int64_t>& staleness_v) {
    DistributionPlan plan;
    double h_sum = 0.0;
    for (int64_t s : staleness_v) h_sum += static_cast<double>(s);
    plan.h_new = staleness_v.empty() ? 0.0 : h_sum / static_cast<double>(staleness_v.size());

    double w_prime = detail::staleness_factor(st, plan.h_new);
    double n_new = 0.0;
    for (int64_t s : staleness_v)
        if (static_cast<double>(s) > w_prime) n_new += 1.0;
    plan.n_new = n_new;
    plan.w_new = std::clamp(detail::cost_factor(st, w_prime, n_new), st.w_min, st.w_max);
    plan.receive_global = distribution_set(groups, staleness_v, plan.w_new);
    plan.n_resumed = static_cast<int>(groups.group_u.size() + groups.group_v.size() -
                                      plan.receive_global.size());
    return plan;
}

inline void commit_distribution(DistributionState& st, const DistributionPlan& plan) {
    st.h_old = plan.h_new;
    st.n_old = plan.n_new;
    st.w = plan.w_new;
}

} // namespace flude

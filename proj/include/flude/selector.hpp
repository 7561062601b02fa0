#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "flude/dependability.hpp"
#include "flude/rng.hpp"

namespace flude {

enum class SelectedVia { exploit, explore, random };

inline const char* to_string(SelectedVia v) {
    switch (v) {
        case SelectedVia::exploit: return "exploit";
        case SelectedVia::explore: return "explore";
        default: return "random";
    }
}

struct SelectionEntry {
    int device_id = 0;
    SelectedVia via = SelectedVia::exploit;
    double priority = 0.0;
};

struct SelectionConfig {
    int target_size = 1;  // X
    double epsilon = 0.0; // exploration fraction
    double sigma = 0.5;   // frequency penalty
};

struct SelectionResult {
    std::vector<SelectionEntry> selected; // exploit picks first, then explores
    std::vector<int> newly_explored;      // to add to the explored set on commit
    double q_threshold = 0.0;
    bool shortfall = false; // pools could not fill the target size

    std::vector<int> device_ids() const {
        std::vector<int> ids;
        ids.reserve(selected.size());
        for (const auto& e : selected) ids.push_back(e.device_id);
        std::sort(ids.begin(), ids.end());
        return ids;
    }
};

/// One round of the adaptive selection: exploit the floor((1-eps)*X)
/// highest-priority explored online devices, explore the remaining slots
/// uniformly without replacement among never-selected online devices.
/// Shortfall in one pool falls back to the other. Ties break on ascending
/// device id. Pure over its snapshot inputs; only `explore_rng` draws.
inline SelectionResult select_participants(const std::vector<int>& online,
                                           const std::vector<DependabilityEstimate>& estimates,
                                           const std::vector<uint8_t>& explored,
                                           const FrequencyState& freq,
                                           const SelectionConfig& cfg,
                                           RngStream& explore_rng) {
    SelectionResult res;
    res.q_threshold = frequency_threshold(freq);

    std::vector<int> known, fresh; // C ∩ D and D − C, ascending ids
    known.reserve(online.size());
    fresh.reserve(online.size());
    for (int id : online) {
        if (explored[static_cast<size_t>(id)])
            known.push_back(id);
        else
            fresh.push_back(id);
    }

    const size_t x = std::min(static_cast<size_t>(std::max(cfg.target_size, 0)), online.size());
    if (static_cast<size_t>(cfg.target_size) > online.size()) res.shortfall = true;

    double eps = std::clamp(cfg.epsilon, 0.0, 1.0);
    size_t exploit_quota = static_cast<size_t>(std::floor((1.0 - eps) * static_cast<double>(x)));
    size_t explore_quota = x - exploit_quota;

    size_t exploit_take = std::min(exploit_quota, known.size());
    size_t explore_take = std::min(explore_quota, fresh.size());
    size_t deficit = x - exploit_take - explore_take;
    size_t spill = std::min(deficit, known.size() - exploit_take);
    exploit_take += spill;
    deficit -= spill;
    spill = std::min(deficit, fresh.size() - explore_take);
    explore_take += spill;
    deficit -= spill;
    if (deficit > 0) res.shortfall = true;

    // Exploitation: top priorities among explored online devices.
    std::vector<std::pair<double, int>> ranked;
    ranked.reserve(known.size());
    for (int id : known)
        ranked.emplace_back(priority(estimates[static_cast<size_t>(id)], res.q_threshold, cfg.sigma), id);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (size_t i = 0; i < exploit_take; ++i)
        res.selected.push_back({ranked[i].second, SelectedVia::exploit, ranked[i].first});

    // Exploration: uniform without replacement over the never-selected pool.
    std::vector<int> picks = sample_without_replacement(fresh, explore_take, explore_rng);
    for (int id : picks) {
        res.selected.push_back({id, SelectedVia::explore,
                                estimates[static_cast<size_t>(id)].mean()});
        res.newly_explored.push_back(id);
    }
    std::sort(res.newly_explored.begin(), res.newly_explored.end());
    return res;
}

/// Multiplicative decay toward the exploration floor.
inline double decay_epsilon(double epsilon, double decay = 0.98, double floor_value = 0.2) {
    if (epsilon > floor_value) return std::max(floor_value, epsilon * decay);
    return epsilon;
}

} // namespace flude

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flude/round_engine.hpp"

namespace flude {

/// Headline numbers for one completed run.
struct RunSummary {
    std::optional<double> time_to_accuracy_s; // absent if the target was never hit
    double final_accuracy = 0.0;              // mean test accuracy, last 20 rounds
    int64_t total_comm_units = 0;             // downloads + uploads, model transfers
    std::vector<int64_t> per_device_participation;
    std::vector<double> per_class_accuracy;
    double gini_participation = 0.0;
    double target_accuracy = 0.0;
    int64_t rounds = 0;
};

/// Gini coefficient of a count histogram; 0 for a uniform one.
inline double gini_coefficient(const std::vector<int64_t>& counts) {
    if (counts.empty()) return 0.0;
    std::vector<int64_t> sorted = counts;
    std::sort(sorted.begin(), sorted.end());
    double total = 0.0, weighted = 0.0;
    const double n = static_cast<double>(sorted.size());
    for (size_t i = 0; i < sorted.size(); ++i) {
        total += static_cast<double>(sorted[i]);
        weighted += (2.0 * static_cast<double>(i + 1) - n - 1.0) * static_cast<double>(sorted[i]);
    }
    if (total <= 0.0) return 0.0;
    return weighted / (n * total);
}

/// One-sided sign-test tail: P(X >= k) for X ~ Binomial(n, 1/2).
inline double sign_test_p_ge(int k, int n) {
    double p = 0.0;
    for (int i = std::max(k, 0); i <= n; ++i) {
        double c = 1.0;
        for (int j = 0; j < i; ++j) c = c * (n - j) / (j + 1);
        p += c;
    }
    return p / std::pow(2.0, n);
}

inline constexpr int kFinalAccuracyWindow = 20;

inline RunSummary compute_summary(const std::vector<RoundLogRow>& rows,
                                  std::vector<int64_t> participation,
                                  std::vector<double> per_class, double target_accuracy) {
    if (rows.empty()) throw std::invalid_argument("empty round log");
    RunSummary s;
    s.target_accuracy = target_accuracy;
    s.rounds = static_cast<int64_t>(rows.size());

    double clock = 0.0;
    for (const auto& r : rows) {
        clock += r.duration_s;
        if (!s.time_to_accuracy_s && r.test_acc >= target_accuracy)
            s.time_to_accuracy_s = clock;
    }

    size_t window = std::min<size_t>(kFinalAccuracyWindow, rows.size());
    double acc = 0.0;
    for (size_t i = rows.size() - window; i < rows.size(); ++i) acc += rows[i].test_acc;
    s.final_accuracy = acc / static_cast<double>(window);

    s.total_comm_units = rows.back().cum_download + rows.back().cum_upload;
    s.per_device_participation = std::move(participation);
    s.per_class_accuracy = std::move(per_class);
    s.gini_participation = gini_coefficient(s.per_device_participation);
    return s;
}

/// The ablation variants plus the full system.
enum class Variant { flude, random_selection, full_distribution, least_distribution };

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::flude: return "flude";
        case Variant::random_selection: return "random_selection";
        case Variant::full_distribution: return "full_distribution";
        default: return "least_distribution";
    }
}

inline std::optional<Variant> parse_variant(const std::string& name) {
    if (name == "flude") return Variant::flude;
    if (name == "random_selection") return Variant::random_selection;
    if (name == "full_distribution") return Variant::full_distribution;
    if (name == "least_distribution") return Variant::least_distribution;
    return std::nullopt;
}

inline EnginePolicy variant_policy(Variant v) {
    switch (v) {
        case Variant::flude:
            return {SelectionPolicy::adaptive, DistributionPolicy::adaptive};
        case Variant::random_selection:
            return {SelectionPolicy::random, DistributionPolicy::adaptive};
        case Variant::full_distribution:
            return {SelectionPolicy::adaptive, DistributionPolicy::full};
        default:
            return {SelectionPolicy::adaptive, DistributionPolicy::least};
    }
}

} // namespace flude

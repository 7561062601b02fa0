#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace flude {

/// Beta posterior over a device's probability of completing a training
/// session, plus its participation count.
struct DependabilityEstimate {
    double alpha = 2.0;
    double beta = 2.0;
    int64_t participation = 0; // q_i: rounds this device has been selected

    double mean() const { return alpha / (alpha + beta); }
};

/// Fold s successes and f failures into the posterior.
inline DependabilityEstimate update_dependability(DependabilityEstimate est,
                                                  int64_t s, int64_t f) {
    if (s < 0 || f < 0)
        throw std::invalid_argument("success/failure counts must be non-negative");
    est.alpha += static_cast<double>(s);
    est.beta += static_cast<double>(f);
    return est;
}

struct FrequencyState {
    int64_t round = 0;               // K
    int64_t cumulative_selected = 0; // sum over rounds of |S_k|
    int64_t population_size = 0;     // |A|
};

/// Average per-device frequency under uniform random selection.
inline double frequency_threshold(const FrequencyState& st) {
    if (st.population_size < 1)
        throw std::invalid_argument("population size must be >= 1");
    return static_cast<double>(st.cumulative_selected) /
           static_cast<double>(st.population_size);
}

/// Selection priority: posterior mean, penalized when the device's
/// participation count strictly exceeds the frequency threshold.
inline double priority_value(double posterior_mean, int64_t participation,
                             double q_threshold, double sigma) {
    double p = posterior_mean;
    if (q_threshold < static_cast<double>(participation))
        p *= std::pow(q_threshold / static_cast<double>(participation), sigma);
    return p;
}

inline double priority(const DependabilityEstimate& est, double q_threshold,
                       double sigma) {
    return priority_value(est.mean(), est.participation, q_threshold, sigma);
}

} // namespace flude

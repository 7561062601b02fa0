#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "flude/rng.hpp"

namespace flude {

enum class CapabilityClass { high = 0, medium = 1, low = 2 };

inline const char* to_string(CapabilityClass c) {
    switch (c) {
        case CapabilityClass::high: return "high";
        case CapabilityClass::medium: return "medium";
        default: return "low";
    }
}

struct BandwidthRange {
    double min_mbps = 1.0;
    double max_mbps = 30.0;
};

/// Static identity and stochastic behavior of one simulated device.
struct DeviceProfile {
    int device_id = 0;
    CapabilityClass capability = CapabilityClass::high;
    double undependability_rate = 0.0; // P(session interrupted)
    double online_rate = 0.5;
    BandwidthRange bandwidth;
    int group = 0;       // index into the generator's group means
    int shard_index = 0; // handle to this device's data shard
};

struct EnvConfig {
    int n_devices = 250;
    std::vector<double> group_means = {0.2, 0.4, 0.6};
    double group_variance = 0.04;
    double online_interval_s = 600.0;
    BandwidthRange bandwidth_range;
    double per_sample_seconds[3] = {0.002, 0.004, 0.008}; // high, medium, low
    uint64_t seed = 0;
};

/// Virtual seconds since run start. Monotonically non-decreasing.
struct VirtualClock {
    double now = 0.0;

    void advance(double dt) {
        if (dt < 0.0) throw std::invalid_argument("clock cannot move backwards");
        now += dt;
    }
};

struct InterruptionOutcome {
    bool interrupted = false;
    double fraction = 0.0; // in (0,1) when interrupted
};

// Undependability rates are clamped away from {0,1} so Bernoulli draws and
// Beta updates stay well-defined.
inline constexpr double kRateClampLo = 0.01;
inline constexpr double kRateClampHi = 0.99;

/**
 * The simulated device population: the single source of randomness for
 * device behavior. Online state, bandwidth and interruption draws are pure
 * functions of (seed, device, context), so per-device evaluation order
 * never matters.
 */
class Population {
public:
    static Population generate(const EnvConfig& cfg) {
        if (cfg.n_devices < 1)
            throw std::invalid_argument("n_devices must be >= 1");
        if (cfg.group_means.empty())
            throw std::invalid_argument("at least one group mean required");
        for (double m : cfg.group_means)
            if (!(m >= 0.0 && m < 1.0))
                throw std::invalid_argument("group mean must lie in [0,1)");
        if (!(cfg.group_variance > 0.0))
            throw std::invalid_argument("group variance must be > 0");
        if (!(cfg.online_interval_s > 0.0))
            throw std::invalid_argument("online interval must be > 0");
        if (!(cfg.bandwidth_range.min_mbps > 0.0) ||
            cfg.bandwidth_range.max_mbps < cfg.bandwidth_range.min_mbps)
            throw std::invalid_argument("bad bandwidth range");

        Population pop;
        pop.cfg_ = cfg;
        pop.devices_.reserve(static_cast<size_t>(cfg.n_devices));
        const int n_groups = static_cast<int>(cfg.group_means.size());
        const double sd = std::sqrt(cfg.group_variance);
        for (int i = 0; i < cfg.n_devices; ++i) {
            RngStream g(RngStream::derive(cfg.seed, "population", static_cast<uint64_t>(i)));
            DeviceProfile d;
            d.device_id = i;
            d.group = i % n_groups;
            d.capability = static_cast<CapabilityClass>(i % 3);
            d.undependability_rate =
                std::clamp(g.normal(cfg.group_means[static_cast<size_t>(d.group)], sd),
                           kRateClampLo, kRateClampHi);
            d.online_rate = g.uniform(0.2, 0.8);
            d.bandwidth = cfg.bandwidth_range;
            d.shard_index = i;
            pop.devices_.push_back(d);
        }
        return pop;
    }

    const EnvConfig& config() const { return cfg_; }
    const std::vector<DeviceProfile>& devices() const { return devices_; }
    const DeviceProfile& device(int id) const { return devices_.at(static_cast<size_t>(id)); }
    int size() const { return static_cast<int>(devices_.size()); }

    /// States redraw at every multiple of the interval and hold in between.
    bool online(int device_id, double now) const {
        const auto& d = device(device_id);
        uint64_t tick = static_cast<uint64_t>(std::floor(now / cfg_.online_interval_s));
        RngStream g(RngStream::derive(cfg_.seed, "online", static_cast<uint64_t>(device_id), tick));
        return g.next_double() <= d.online_rate;
    }

    std::vector<int> online_set(double now) const {
        std::vector<int> out;
        out.reserve(devices_.size());
        for (const auto& d : devices_)
            if (online(d.device_id, now)) out.push_back(d.device_id);
        return out;
    }

    /// One fresh uniform draw from the device's range per transfer.
    double sample_bandwidth(int device_id, uint64_t round, uint64_t transfer) const {
        const auto& d = device(device_id);
        RngStream g(RngStream::derive(cfg_.seed, "bandwidth", static_cast<uint64_t>(device_id),
                                      round, transfer));
        return g.uniform(d.bandwidth.min_mbps, d.bandwidth.max_mbps);
    }

    InterruptionOutcome draw_interruption(int device_id, uint64_t round) const {
        const auto& d = device(device_id);
        RngStream g(RngStream::derive(cfg_.seed, "interrupt", static_cast<uint64_t>(device_id),
                                      round));
        InterruptionOutcome out;
        out.interrupted = g.bernoulli(d.undependability_rate);
        if (out.interrupted) {
            double f;
            do {
                f = g.next_double();
            } while (f == 0.0);
            out.fraction = f;
        }
        return out;
    }

    double per_sample_seconds(int device_id) const {
        return cfg_.per_sample_seconds[static_cast<int>(device(device_id).capability)];
    }

private:
    EnvConfig cfg_;
    std::vector<DeviceProfile> devices_;
};

/// Virtual seconds to move `bytes` at `mbps`.
inline double transfer_seconds(size_t bytes, double mbps) {
    if (!(mbps > 0.0)) throw std::invalid_argument("bandwidth must be > 0");
    return static_cast<double>(bytes) * 8.0 / (mbps * 1e6);
}

} // namespace flude

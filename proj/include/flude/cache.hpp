#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "flude/model_params.hpp"

namespace flude {

/// One device's rolling checkpoint: the minimum state for exact resume.
struct CacheEntry {
    ModelParams params;
    int processed_samples = 0; // offset into the current local pass
    int total_samples = 0;     // pass length
    double learning_rate = 0.0;
    int64_t cached_round = 0; // round when this snapshot was taken
    int64_t pass_round = 0;   // round when the pass started; keys the sample order
    double cached_clock = 0.0;
};

/// Per-device rolling cache: at most one entry per device, newest wins.
class CacheStore {
public:
    CacheStore() = default;
    explicit CacheStore(size_t n_devices) : slots_(n_devices) {}

    void reset(size_t n_devices) {
        slots_.assign(n_devices, std::nullopt);
        count_ = 0;
    }

    void checkpoint(int device_id, CacheEntry entry) {
        auto& slot = slots_.at(static_cast<size_t>(device_id));
        if (!slot) ++count_;
        slot = std::move(entry); // older entry is discarded
    }

    bool has(int device_id) const { return slots_.at(static_cast<size_t>(device_id)).has_value(); }

    const CacheEntry* find(int device_id) const {
        const auto& slot = slots_.at(static_cast<size_t>(device_id));
        return slot ? &*slot : nullptr;
    }

    void clear(int device_id) {
        auto& slot = slots_.at(static_cast<size_t>(device_id));
        if (slot) {
            slot.reset();
            --count_;
        }
    }

    /// Rounds behind: current round minus the caching round.
    int64_t staleness(int device_id, int64_t current_round) const {
        const CacheEntry* e = find(device_id);
        if (!e) throw std::logic_error("staleness queried for a device with no cache");
        return current_round - e->cached_round;
    }

    size_t count() const { return count_; }
    size_t capacity() const { return slots_.size(); }

    std::vector<int> cached_devices() const {
        std::vector<int> ids;
        for (size_t i = 0; i < slots_.size(); ++i)
            if (slots_[i]) ids.push_back(static_cast<int>(i));
        return ids;
    }

private:
    std::vector<std::optional<CacheEntry>> slots_;
    size_t count_ = 0;
};

/// Where a selected device starts training this round.
struct TrainStart {
    ModelParams params;
    int offset = 0;
    int64_t pass_round = 0;
    bool fresh = false;
};

/// Fresh global -> start a new pass and drop the cache. Otherwise the
/// device must hold a cache (the distributor guarantees it) and continues
/// the interrupted pass.
inline TrainStart resume_or_fresh(CacheStore& store, int device_id, int64_t round,
                                  bool received_fresh_global, const ModelParams& global) {
    TrainStart start;
    if (received_fresh_global) {
        store.clear(device_id);
        start.params = global;
        start.offset = 0;
        start.pass_round = round;
        start.fresh = true;
        return start;
    }
    const CacheEntry* e = store.find(device_id);
    if (!e)
        throw std::logic_error("protocol violation: no fresh global and no cached state");
    start.params = e->params;
    start.offset = e->processed_samples;
    start.pass_round = e->pass_round;
    start.fresh = false;
    return start;
}

/// Adaptive caching interval: the product of the battery and network
/// stability proxies maps linearly onto [0.5, 5.0] times the base interval.
/// Low proxies cache more often (30 s at a 60 s base), high proxies less
/// (5 min at a 60 s base).
inline double caching_interval(double battery_proxy, double network_stability_proxy,
                               double base_interval_s) {
    if (!(base_interval_s > 0.0))
        throw std::invalid_argument("base interval must be > 0");
    double b = std::clamp(battery_proxy, 0.0, 1.0);
    double n = std::clamp(network_stability_proxy, 0.0, 1.0);
    double factor = 0.5 + 4.5 * (b * n);
    return base_interval_s * factor;
}

} // namespace flude

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "flude/cache.hpp"
#include "flude/env.hpp"
#include "flude/model_params.hpp"
#include "flude/rng.hpp"

#ifndef FLUDE_PARANOID
#define FLUDE_PARANOID 0
#endif

namespace flude {

struct TrainerConfig {
    int batch_size = 32;
    double learning_rate = 0.04;
    double local_pass_fraction = 1.0; // fraction of the shard trained per round
    int hidden_width = 0;             // 0 = multinomial logistic regression
    int checkpoint_ticks = 10;        // cache snapshots per pass
};

struct TaskConfig {
    int n_classes = 10;
    int dim = 20;
    int samples_per_device = 200;
    int classes_per_device = 4;
    double mean_separation = 3.0;
    // Std-dev of a per-(device, class) sub-cluster offset. 0 keeps classes
    // pure Gaussians; > 0 gives each holder device its own pocket of the
    // class, so data lost with a device is data the model never sees.
    double device_spread = 0.0;
    // Fraction of training labels resampled uniformly at random. The test
    // set stays clean. Local models fit their own noise; averaging many of
    // them cancels it, so aggregate volume matters the way it does on real
    // data.
    double label_noise = 0.0;
    int test_samples_per_class = 200;
};

/// One device's local data. Features are row-major n x dim.
struct DataShard {
    int n = 0;
    int dim = 0;
    std::vector<float> features;
    std::vector<int> labels;
    std::vector<int> class_set;

    const float* row(int i) const { return features.data() + static_cast<size_t>(i) * dim; }
};

struct SyntheticTask {
    TaskConfig cfg;
    std::vector<DataShard> shards;
    DataShard test;
    std::vector<float> centers; // n_classes x dim
};

// ---------------------------------------------------------------------------
// Model core. Templated on the scalar so the float training path and the
// double gradient-check path share one implementation.
//
// Parameter layout, logistic:      [W (C*d), b (C)]
// Parameter layout, one hidden:    [W1 (h*d), b1 (h), W2 (C*h), b2 (C)]
// ---------------------------------------------------------------------------

inline size_t param_count(int dim, int n_classes, int hidden_width) {
    if (hidden_width <= 0)
        return static_cast<size_t>(n_classes) * dim + n_classes;
    return static_cast<size_t>(hidden_width) * dim + hidden_width +
           static_cast<size_t>(n_classes) * hidden_width + n_classes;
}

inline std::vector<int> param_shape(int dim, int n_classes, int hidden_width) {
    if (hidden_width <= 0) return {dim, n_classes};
    return {dim, hidden_width, n_classes};
}

namespace netdetail {

template <typename T>
void softmax_inplace(std::vector<T>& z) {
    T m = z[0];
    for (T v : z) m = std::max(m, v);
    T sum = T(0);
    for (T& v : z) {
        v = std::exp(v - m);
        sum += v;
    }
    for (T& v : z) v /= sum;
}

/// Forward + backward for one sample. Adds the gradient into `grad` and
/// returns the cross-entropy loss.
template <typename T>
T sample_loss_grad(const T* p, const float* x, int y, int d, int c, int h, T* grad) {
    if (h <= 0) {
        std::vector<T> z(static_cast<size_t>(c));
        for (int k = 0; k < c; ++k) {
            T acc = p[static_cast<size_t>(c) * d + k]; // bias
            const T* wrow = p + static_cast<size_t>(k) * d;
            for (int j = 0; j < d; ++j) acc += wrow[j] * static_cast<T>(x[j]);
            z[static_cast<size_t>(k)] = acc;
        }
        std::vector<T> prob = z;
        softmax_inplace(prob);
        T loss = -std::log(std::max(prob[static_cast<size_t>(y)], T(1e-30)));
        for (int k = 0; k < c; ++k) {
            T dz = prob[static_cast<size_t>(k)] - (k == y ? T(1) : T(0));
            T* gw = grad + static_cast<size_t>(k) * d;
            for (int j = 0; j < d; ++j) gw[j] += dz * static_cast<T>(x[j]);
            grad[static_cast<size_t>(c) * d + k] += dz;
        }
        return loss;
    }

    const size_t w1 = 0;
    const size_t b1 = static_cast<size_t>(h) * d;
    const size_t w2 = b1 + static_cast<size_t>(h);
    const size_t b2 = w2 + static_cast<size_t>(c) * h;

    std::vector<T> hidden(static_cast<size_t>(h));
    for (int i = 0; i < h; ++i) {
        T acc = p[b1 + static_cast<size_t>(i)];
        const T* wrow = p + w1 + static_cast<size_t>(i) * d;
        for (int j = 0; j < d; ++j) acc += wrow[j] * static_cast<T>(x[j]);
        hidden[static_cast<size_t>(i)] = acc > T(0) ? acc : T(0); // ReLU
    }
    std::vector<T> z(static_cast<size_t>(c));
    for (int k = 0; k < c; ++k) {
        T acc = p[b2 + static_cast<size_t>(k)];
        const T* wrow = p + w2 + static_cast<size_t>(k) * h;
        for (int i = 0; i < h; ++i) acc += wrow[i] * hidden[static_cast<size_t>(i)];
        z[static_cast<size_t>(k)] = acc;
    }
    std::vector<T> prob = z;
    softmax_inplace(prob);
    T loss = -std::log(std::max(prob[static_cast<size_t>(y)], T(1e-30)));

    std::vector<T> dhidden(static_cast<size_t>(h), T(0));
    for (int k = 0; k < c; ++k) {
        T dz = prob[static_cast<size_t>(k)] - (k == y ? T(1) : T(0));
        T* gw = grad + w2 + static_cast<size_t>(k) * h;
        for (int i = 0; i < h; ++i) {
            gw[i] += dz * hidden[static_cast<size_t>(i)];
            dhidden[static_cast<size_t>(i)] += dz * p[w2 + static_cast<size_t>(k) * h + i];
        }
        grad[b2 + static_cast<size_t>(k)] += dz;
    }
    for (int i = 0; i < h; ++i) {
        if (hidden[static_cast<size_t>(i)] <= T(0)) continue;
        T dh = dhidden[static_cast<size_t>(i)];
        T* gw = grad + w1 + static_cast<size_t>(i) * d;
        for (int j = 0; j < d; ++j) gw[j] += dh * static_cast<T>(x[j]);
        grad[b1 + static_cast<size_t>(i)] += dh;
    }
    return loss;
}

template <typename T>
T sample_loss(const T* p, const float* x, int y, int d, int c, int h) {
    std::vector<T> scratch(param_count(d, c, h), T(0));
    return sample_loss_grad(p, x, y, d, c, h, scratch.data());
}

template <typename T>
int predict(const T* p, const float* x, int d, int c, int h) {
    std::vector<T> z(static_cast<size_t>(c));
    if (h <= 0) {
        for (int k = 0; k < c; ++k) {
            T acc = p[static_cast<size_t>(c) * d + k];
            const T* wrow = p + static_cast<size_t>(k) * d;
            for (int j = 0; j < d; ++j) acc += wrow[j] * static_cast<T>(x[j]);
            z[static_cast<size_t>(k)] = acc;
        }
    } else {
        const size_t b1 = static_cast<size_t>(h) * d;
        const size_t w2 = b1 + static_cast<size_t>(h);
        const size_t b2 = w2 + static_cast<size_t>(c) * h;
        std::vector<T> hidden(static_cast<size_t>(h));
        for (int i = 0; i < h; ++i) {
            T acc = p[b1 + static_cast<size_t>(i)];
            const T* wrow = p + static_cast<size_t>(i) * d;
            for (int j = 0; j < d; ++j) acc += wrow[j] * static_cast<T>(x[j]);
            hidden[static_cast<size_t>(i)] = acc > T(0) ? acc : T(0);
        }
        for (int k = 0; k < c; ++k) {
            T acc = p[b2 + static_cast<size_t>(k)];
            const T* wrow = p + w2 + static_cast<size_t>(k) * h;
            for (int i = 0; i < h; ++i) acc += wrow[i] * hidden[static_cast<size_t>(i)];
            z[static_cast<size_t>(k)] = acc;
        }
    }
    int best = 0;
    for (int k = 1; k < c; ++k)
        if (z[static_cast<size_t>(k)] > z[static_cast<size_t>(best)]) best = k;
    return best;
}

} // namespace netdetail

// ---------------------------------------------------------------------------
// Synthetic non-IID task
// ---------------------------------------------------------------------------

/// Class-conditional Gaussian clusters with unit covariance. Each class
/// center sits `mean_separation` from the origin along its own orthogonal
/// axis when dim >= n_classes, otherwise along a random unit direction.
/// Device shards draw only from their assigned class subset; the global
/// test set is stratified uniformly over all classes.
inline SyntheticTask generate_synthetic_task(const TaskConfig& cfg, int n_devices,
                                             uint64_t seed) {
    if (cfg.classes_per_device > cfg.n_classes)
        throw std::invalid_argument("classes_per_device exceeds n_classes");
    if (cfg.classes_per_device < 1 || cfg.n_classes < 2 || cfg.dim < 1 ||
        cfg.samples_per_device < 1 || n_devices < 1)
        throw std::invalid_argument("bad synthetic task parameters");

    SyntheticTask task;
    task.cfg = cfg;
    task.centers.assign(static_cast<size_t>(cfg.n_classes) * cfg.dim, 0.0f);
    if (cfg.dim >= cfg.n_classes) {
        for (int c = 0; c < cfg.n_classes; ++c)
            task.centers[static_cast<size_t>(c) * cfg.dim + c] =
                static_cast<float>(cfg.mean_separation);
    } else {
        RngStream g(RngStream::derive(seed, "task.centers"));
        for (int c = 0; c < cfg.n_classes; ++c) {
            double norm2 = 0.0;
            std::vector<double> dir(static_cast<size_t>(cfg.dim));
            for (int j = 0; j < cfg.dim; ++j) {
                dir[static_cast<size_t>(j)] = g.normal(0.0, 1.0);
                norm2 += dir[static_cast<size_t>(j)] * dir[static_cast<size_t>(j)];
            }
            double scale = cfg.mean_separation / std::sqrt(std::max(norm2, 1e-12));
            for (int j = 0; j < cfg.dim; ++j)
                task.centers[static_cast<size_t>(c) * cfg.dim + j] =
                    static_cast<float>(dir[static_cast<size_t>(j)] * scale);
        }
    }

    // Per-(device, class) sub-cluster offsets; all-zero at spread 0.
    auto holder_offset = [&](int dev, int cls) {
        std::vector<float> off(static_cast<size_t>(cfg.dim), 0.0f);
        if (cfg.device_spread > 0.0) {
            RngStream g(RngStream::derive(seed, "task.offset", static_cast<uint64_t>(dev),
                                          static_cast<uint64_t>(cls)));
            for (int j = 0; j < cfg.dim; ++j)
                off[static_cast<size_t>(j)] = static_cast<float>(g.normal(0.0, cfg.device_spread));
        }
        return off;
    };

    auto fill_sample = [&](DataShard& shard, int row, int cls, const std::vector<float>& off,
                           RngStream& g) {
        float* dst = shard.features.data() + static_cast<size_t>(row) * cfg.dim;
        const float* ctr = task.centers.data() + static_cast<size_t>(cls) * cfg.dim;
        for (int j = 0; j < cfg.dim; ++j)
            dst[j] = ctr[j] + off[static_cast<size_t>(j)] + static_cast<float>(g.normal(0.0, 1.0));
        shard.labels[static_cast<size_t>(row)] = cls;
    };

    task.shards.resize(static_cast<size_t>(n_devices));
    std::vector<std::vector<int>> holders(static_cast<size_t>(cfg.n_classes));
    for (int dev = 0; dev < n_devices; ++dev) {
        DataShard& shard = task.shards[static_cast<size_t>(dev)];
        shard.n = cfg.samples_per_device;
        shard.dim = cfg.dim;
        shard.features.assign(static_cast<size_t>(shard.n) * cfg.dim, 0.0f);
        shard.labels.assign(static_cast<size_t>(shard.n), 0);

        RngStream cg(RngStream::derive(seed, "task.classes", static_cast<uint64_t>(dev)));
        std::vector<int> all(static_cast<size_t>(cfg.n_classes));
        for (int c = 0; c < cfg.n_classes; ++c) all[static_cast<size_t>(c)] = c;
        shard.class_set = sample_without_replacement(all, static_cast<size_t>(cfg.classes_per_device), cg);
        std::sort(shard.class_set.begin(), shard.class_set.end());
        for (int c : shard.class_set) holders[static_cast<size_t>(c)].push_back(dev);

        std::vector<std::vector<float>> offsets;
        for (int c : shard.class_set) offsets.push_back(holder_offset(dev, c));

        RngStream g(RngStream::derive(seed, "task.shard", static_cast<uint64_t>(dev)));
        for (int i = 0; i < shard.n; ++i) {
            size_t slot = static_cast<size_t>(i) % shard.class_set.size();
            fill_sample(shard, i, shard.class_set[slot], offsets[slot], g);
        }
        if (cfg.label_noise > 0.0) {
            RngStream ng(RngStream::derive(seed, "task.noise", static_cast<uint64_t>(dev)));
            for (int i = 0; i < shard.n; ++i)
                if (ng.bernoulli(cfg.label_noise))
                    shard.labels[static_cast<size_t>(i)] =
                        static_cast<int>(ng.below(static_cast<uint64_t>(cfg.n_classes)));
        }
    }

    // Test set: stratified uniformly over classes; within a class, samples
    // come from the same holder mixture the shards draw from.
    task.test.n = cfg.n_classes * cfg.test_samples_per_class;
    task.test.dim = cfg.dim;
    task.test.features.assign(static_cast<size_t>(task.test.n) * cfg.dim, 0.0f);
    task.test.labels.assign(static_cast<size_t>(task.test.n), 0);
    for (int c = 0; c < cfg.n_classes; ++c) task.test.class_set.push_back(c);
    RngStream tg(RngStream::derive(seed, "task.test"));
    const std::vector<float> zero_offset(static_cast<size_t>(cfg.dim), 0.0f);
    int row = 0;
    for (int c = 0; c < cfg.n_classes; ++c) {
        const auto& h = holders[static_cast<size_t>(c)];
        for (int i = 0; i < cfg.test_samples_per_class; ++i) {
            if (cfg.device_spread > 0.0 && !h.empty()) {
                int dev = h[static_cast<size_t>(tg.below(h.size()))];
                fill_sample(task.test, row++, c, holder_offset(dev, c), tg);
            } else {
                fill_sample(task.test, row++, c, zero_offset, tg);
            }
        }
    }
    return task;
}

// ---------------------------------------------------------------------------
// Local training
// ---------------------------------------------------------------------------

struct TrainOutcome {
    bool completed = false;
    ModelParams params;     // final parameters when completed
    int n_samples = 0;      // aggregation weight (shard size)
    double mean_loss = 0.0; // mean batch loss over this session
    CacheEntry cache;       // snapshot at the last tick when interrupted
    int processed_end = 0;  // absolute pass position reached (persisted)
};

inline int pass_length(const DataShard& shard, const TrainerConfig& cfg) {
    double frac = std::clamp(cfg.local_pass_fraction, 0.0, 1.0);
    return std::max(1, static_cast<int>(std::llround(frac * shard.n)));
}

/**
 * Mini-batch SGD over one local pass, interruptible and exactly resumable.
 *
 * The sample order is a shuffle keyed by `order_key`, fixed for the whole
 * pass, so resuming from a cached offset replays the identical batch
 * sequence a straight run would have executed. Cache snapshots are taken
 * at batch boundaries crossing multiples of pass/`checkpoint_ticks`
 * samples; an interruption at fraction f of the session keeps the last
 * snapshot at or before the interruption point and loses the tail.
 */
inline TrainOutcome train_local(const ModelParams& start, const DataShard& shard,
                                const TrainerConfig& cfg, int resume_offset,
                                uint64_t order_key, const InterruptionOutcome& interruption,
                                const std::function<void(const CacheEntry&)>& tick_hook = {}) {
    const int pass = pass_length(shard, cfg);
    if (resume_offset < 0 || resume_offset >= pass)
        throw std::invalid_argument("resume offset outside the current pass");
    if (cfg.batch_size < 1 || !(cfg.learning_rate > 0.0))
        throw std::invalid_argument("bad trainer config");

    const int d = shard.dim;
    const int c_from_shape = start.shape.back();
    const int h = cfg.hidden_width;
    if (start.values.size() != param_count(d, c_from_shape, h))
        throw std::invalid_argument("start parameters do not match model dimensions");

    RngStream order_rng(order_key);
    std::vector<uint32_t> order = random_permutation(static_cast<size_t>(shard.n), order_rng);

    const int tick = std::max(1, (pass + cfg.checkpoint_ticks - 1) / cfg.checkpoint_ticks);
    int interrupt_at = pass + 1; // beyond the pass: never
    if (interruption.interrupted) {
        int remaining = pass - resume_offset;
        interrupt_at = resume_offset +
                       static_cast<int>(std::floor(interruption.fraction * remaining));
    }

    std::vector<float> params = start.values;
    std::vector<float> grad(params.size(), 0.0f);
    const float lr = static_cast<float>(cfg.learning_rate);

    auto make_entry = [&](const std::vector<float>& vals, int processed) {
        CacheEntry e;
        e.params.values = vals;
        e.params.shape = start.shape;
        e.processed_samples = processed;
        e.total_samples = pass;
        e.learning_rate = cfg.learning_rate;
        return e;
    };

    CacheEntry last_tick = make_entry(start.values, resume_offset);
    int next_tick = (resume_offset / tick + 1) * tick;

    double loss_sum = 0.0;
    int batches = 0;
    int i = resume_offset;
    while (i < pass) {
        int batch_end = std::min(i + cfg.batch_size, pass);
        if (batch_end > interrupt_at)
            return {false, {}, 0, 0.0, std::move(last_tick), last_tick.processed_samples};

        std::fill(grad.begin(), grad.end(), 0.0f);
        float batch_loss = 0.0f;
        for (int s = i; s < batch_end; ++s) {
            int idx = static_cast<int>(order[static_cast<size_t>(s)]);
            batch_loss += netdetail::sample_loss_grad<float>(
                params.data(), shard.row(idx), shard.labels[static_cast<size_t>(idx)], d,
                c_from_shape, h, grad.data());
        }
        const float inv = 1.0f / static_cast<float>(batch_end - i);
        for (size_t j = 0; j < params.size(); ++j) params[j] -= lr * grad[j] * inv;
        loss_sum += static_cast<double>(batch_loss) * inv;
        ++batches;
        i = batch_end;

#if FLUDE_PARANOID
        for (float v : params)
            if (!std::isfinite(v)) throw std::runtime_error("non-finite parameter after update");
#endif

        if (i >= next_tick && i < pass) {
            last_tick = make_entry(params, i);
            if (tick_hook) tick_hook(last_tick);
            next_tick = (i / tick + 1) * tick;
        }
    }

    TrainOutcome out;
    out.completed = true;
    out.params.values = std::move(params);
    out.params.shape = start.shape;
    out.n_samples = shard.n;
    out.mean_loss = batches > 0 ? loss_sum / batches : 0.0;
    out.processed_end = pass;
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<double> per_class_accuracy;
    std::vector<int64_t> per_class_counts;
};

inline EvalResult evaluate(const ModelParams& params, const DataShard& data, int n_classes,
                           int hidden_width) {
    if (data.n < 1) throw std::invalid_argument("empty evaluation set");
    if (params.values.size() != param_count(data.dim, n_classes, hidden_width))
        throw std::invalid_argument("parameters do not match evaluation dimensions");

    EvalResult r;
    r.per_class_accuracy.assign(static_cast<size_t>(n_classes), 0.0);
    r.per_class_counts.assign(static_cast<size_t>(n_classes), 0);
    std::vector<int64_t> correct(static_cast<size_t>(n_classes), 0);

    double loss_sum = 0.0;
    for (int i = 0; i < data.n; ++i) {
        int y = data.labels[static_cast<size_t>(i)];
        loss_sum += static_cast<double>(netdetail::sample_loss<float>(
            params.values.data(), data.row(i), y, data.dim, n_classes, hidden_width));
        int pred = netdetail::predict<float>(params.values.data(), data.row(i), data.dim,
                                             n_classes, hidden_width);
        r.per_class_counts[static_cast<size_t>(y)] += 1;
        if (pred == y) correct[static_cast<size_t>(y)] += 1;
    }
    int64_t total_correct = 0;
    for (int c = 0; c < n_classes; ++c) {
        total_correct += correct[static_cast<size_t>(c)];
        if (r.per_class_counts[static_cast<size_t>(c)] > 0)
            r.per_class_accuracy[static_cast<size_t>(c)] =
                static_cast<double>(correct[static_cast<size_t>(c)]) /
                static_cast<double>(r.per_class_counts[static_cast<size_t>(c)]);
    }
    r.loss = loss_sum / data.n;
    r.accuracy = static_cast<double>(total_correct) / static_cast<double>(data.n);
    return r;
}

/// Analytic gradient in double precision; used by finite-difference checks.
template <typename T>
std::vector<T> analytic_gradient(const std::vector<T>& params, const DataShard& shard,
                                 int n_classes, int hidden_width) {
    std::vector<T> grad(params.size(), T(0));
    for (int i = 0; i < shard.n; ++i)
        netdetail::sample_loss_grad<T>(params.data(), shard.row(i),
                                       shard.labels[static_cast<size_t>(i)], shard.dim,
                                       n_classes, hidden_width, grad.data());
    for (T& g : grad) g /= static_cast<T>(shard.n);
    return grad;
}

/// Mean loss over a shard at the given parameters.
template <typename T>
T dataset_loss(const std::vector<T>& params, const DataShard& shard, int n_classes,
               int hidden_width) {
    T sum = T(0);
    for (int i = 0; i < shard.n; ++i)
        sum += netdetail::sample_loss<T>(params.data(), shard.row(i),
                                         shard.labels[static_cast<size_t>(i)], shard.dim,
                                         n_classes, hidden_width);
    return sum / static_cast<T>(shard.n);
}

} // namespace flude

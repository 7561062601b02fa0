#pragma once

#include <cmath>
#include <cstddef>
#include <cstring>
#include <stdexcept>
#include <vector>

namespace flude {

/// Flat 32-bit parameter vector with layer-dimension metadata. The unit of
/// distribution, caching, upload and aggregation.
struct ModelParams {
    std::vector<float> values;
    std::vector<int> shape; // layer dims, e.g. {d, c} or {d, h, c}

    size_t dim() const { return values.size(); }
    size_t byte_size() const { return values.size() * sizeof(float); }

    bool same_shape(const ModelParams& o) const {
        return shape == o.shape && values.size() == o.values.size();
    }

    bool bitwise_equal(const ModelParams& o) const {
        if (values.size() != o.values.size()) return false;
        if (values.empty()) return true;
        return std::memcmp(values.data(), o.values.data(), byte_size()) == 0;
    }

    bool all_finite() const {
        for (float v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }

    static ModelParams zeros(std::vector<int> shape_dims, size_t n) {
        ModelParams p;
        p.shape = std::move(shape_dims);
        p.values.assign(n, 0.0f);
        return p;
    }
};

inline void require_same_shape(const ModelParams& a, const ModelParams& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("model parameter shape mismatch");
}

} // namespace flude

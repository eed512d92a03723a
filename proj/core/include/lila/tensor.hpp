#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "lila/common.hpp"

namespace lila::ad {

// Dense row-major tensor; canonical network activations are [B, C, M].
// `node` links the tensor to a tape record (-1 for constants).
template <typename T>
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<T> values;
    int node = -1;

    Tensor() = default;
    Tensor(std::vector<std::int64_t> shape_, std::vector<T> values_)
        : shape(std::move(shape_)), values(std::move(values_)) {
        if (values.size() != numel())
            throw ConfigError("tensor value count does not match shape");
    }

    std::size_t numel() const {
        std::int64_t n = 1;
        for (auto d : shape) n *= d;
        return static_cast<std::size_t>(n);
    }

    std::int64_t dim(std::size_t i) const { return shape.at(i); }
    bool is_scalar() const { return numel() == 1; }

    // [B, C, M] indexing.
    T& at(std::int64_t b, std::int64_t c, std::int64_t m) {
        return values[static_cast<std::size_t>((b * shape[1] + c) * shape[2] + m)];
    }
    const T& at(std::int64_t b, std::int64_t c, std::int64_t m) const {
        return values[static_cast<std::size_t>((b * shape[1] + c) * shape[2] + m)];
    }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

template <typename T>
Tensor<T> zeros(std::vector<std::int64_t> shape) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return Tensor<T>(std::move(shape), std::vector<T>(static_cast<std::size_t>(n), T(0)));
}

}  // namespace lila::ad

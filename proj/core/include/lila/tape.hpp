#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "lila/tensor.hpp"

namespace lila::ad {

// Reverse-mode tape. Records are appended in forward order, so inputs always
// precede their consumers and the reverse sweep needs no sorting. One tape
// serves one forward/backward pass; rebuild per training step.
template <typename T>
class Tape {
public:
    // fn(upstream_grad, tape) accumulates into the grad buffers of the
    // record's inputs.
    using BackwardFn = std::function<void(const std::vector<T>&, Tape<T>&)>;

    int add_record(std::size_t numel, std::vector<int> inputs, BackwardFn fn) {
        const int id = static_cast<int>(records_.size());
        for (int in : inputs)
            if (in >= id) throw RuntimeError("tape record input does not precede it");
        records_.push_back({numel, std::move(inputs), std::move(fn)});
        return id;
    }

    // Registers a differentiable input (parameter or data).
    Tensor<T> leaf(Tensor<T> tensor) {
        tensor.node = add_record(tensor.numel(), {}, nullptr);
        return tensor;
    }

    void backward(const Tensor<T>& loss) {
        if (!loss.is_scalar()) throw RuntimeError("backward requires a scalar loss");
        if (loss.node < 0) throw RuntimeError("loss is not attached to this tape");
        grads_.assign(records_.size(), {});
        grad_buffer(loss.node)[0] = T(1);
        for (int i = loss.node; i >= 0; --i) {
            if (grads_[static_cast<std::size_t>(i)].empty()) continue;  // unreached node
            const Record& rec = records_[static_cast<std::size_t>(i)];
            if (rec.fn) rec.fn(grads_[static_cast<std::size_t>(i)], *this);
        }
    }

    // Zero-initialized on first touch.
    std::vector<T>& grad_buffer(int node) {
        auto& g = grads_.at(static_cast<std::size_t>(node));
        if (g.empty()) g.assign(records_[static_cast<std::size_t>(node)].numel, T(0));
        return g;
    }

    const std::vector<T>& grad(const Tensor<T>& t) {
        if (t.node < 0) throw RuntimeError("gradient of a constant tensor");
        return grad_buffer(t.node);
    }

    std::size_t size() const { return records_.size(); }

    // Rolling hash over branch decisions (ReLU masks, argmax and
    // nearest-neighbor indices). Finite-difference checks compare signatures
    // to discard probes that crossed a kink.
    void mix_pattern(std::uint64_t v) {
        pattern_ ^= v + 0x9E3779B97F4A7C15ULL + (pattern_ << 6) + (pattern_ >> 2);
    }
    std::uint64_t pattern_signature() const { return pattern_; }

    // NaN/Inf guard run by every op on its output.
    static void check_finite(const std::vector<T>& values, const char* op) {
        for (const T v : values)
            if (!std::isfinite(static_cast<double>(v)))
                throw NumericError(std::string(op) + " produced a non-finite value");
    }

private:
    struct Record {
        std::size_t numel;
        std::vector<int> inputs;
        BackwardFn fn;
    };

    std::vector<Record> records_;
    std::vector<std::vector<T>> grads_;
    std::uint64_t pattern_ = 0;
};

}  // namespace lila::ad

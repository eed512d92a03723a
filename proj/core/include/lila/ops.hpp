#pragma once

#include <algorithm>
#include <cstring>
#include <vector>

#include "lila/tape.hpp"

namespace lila::ad {

enum class Mode { train, eval };

// Running statistics for one batch-norm layer. build() initializes them to
// (0, 1); a default-constructed state must see a train step before eval.
template <typename T>
struct BatchNormState {
    std::vector<T> running_mean;
    std::vector<T> running_var;
    T momentum = T(0.1);
    T eps = T(1e-5);
    bool initialized = false;

    static BatchNormState identity(std::int64_t channels) {
        BatchNormState s;
        s.running_mean.assign(static_cast<std::size_t>(channels), T(0));
        s.running_var.assign(static_cast<std::size_t>(channels), T(1));
        s.initialized = true;
        return s;
    }
};

namespace detail {

template <typename T>
void check_bcm(const Tensor<T>& x, const char* op) {
    if (x.shape.size() != 3)
        throw ConfigError(std::string(op) + ": expected [B,C,M] tensor, got " + x.shape_str());
}

}  // namespace detail

// Kernel-size-1 shared convolution: out[b,o,m] = sum_i W[o,i] x[b,i,m] + b[o].
template <typename T>
Tensor<T> pointwise_linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight,
                           const Tensor<T>& bias) {
    detail::check_bcm(x, "pointwise_linear");
    if (weight.shape.size() != 2 || weight.dim(1) != x.dim(1))
        throw ConfigError("pointwise_linear: weight " + weight.shape_str() +
                          " does not match input " + x.shape_str());
    if (bias.shape != std::vector<std::int64_t>{weight.dim(0)})
        throw ConfigError("pointwise_linear: bias shape mismatch");

    const std::int64_t B = x.dim(0), Cin = x.dim(1), M = x.dim(2), Cout = weight.dim(0);
    Tensor<T> out = zeros<T>({B, Cout, M});
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t o = 0; o < Cout; ++o) {
            T* out_row = &out.at(b, o, 0);
            for (std::int64_t m = 0; m < M; ++m) out_row[m] = bias.values[o];
            for (std::int64_t i = 0; i < Cin; ++i) {
                const T w = weight.values[static_cast<std::size_t>(o * Cin + i)];
                const T* x_row = &x.at(b, i, 0);
                for (std::int64_t m = 0; m < M; ++m) out_row[m] += w * x_row[m];
            }
        }
    Tape<T>::check_finite(out.values, "pointwise_linear");

    const int xn = x.node, wn = weight.node, bn = bias.node;
    if (xn < 0 && wn < 0 && bn < 0) return out;
    out.node = tape.add_record(
        out.numel(), {xn, wn, bn},
        [B, Cin, M, Cout, xv = x.values, wv = weight.values, xn, wn,
         bn](const std::vector<T>& dy, Tape<T>& t) {
            if (xn >= 0) {
                auto& dx = t.grad_buffer(xn);
                for (std::int64_t b = 0; b < B; ++b)
                    for (std::int64_t i = 0; i < Cin; ++i) {
                        T* dx_row = &dx[static_cast<std::size_t>((b * Cin + i) * M)];
                        for (std::int64_t o = 0; o < Cout; ++o) {
                            const T w = wv[static_cast<std::size_t>(o * Cin + i)];
                            const T* dy_row = &dy[static_cast<std::size_t>((b * Cout + o) * M)];
                            for (std::int64_t m = 0; m < M; ++m) dx_row[m] += w * dy_row[m];
                        }
                    }
            }
            if (wn >= 0) {
                auto& dw = t.grad_buffer(wn);
                for (std::int64_t b = 0; b < B; ++b)
                    for (std::int64_t o = 0; o < Cout; ++o)
                        for (std::int64_t i = 0; i < Cin; ++i) {
                            const T* dy_row = &dy[static_cast<std::size_t>((b * Cout + o) * M)];
                            const T* x_row = &xv[static_cast<std::size_t>((b * Cin + i) * M)];
                            T acc = T(0);
                            for (std::int64_t m = 0; m < M; ++m) acc += dy_row[m] * x_row[m];
                            dw[static_cast<std::size_t>(o * Cin + i)] += acc;
                        }
            }
            if (bn >= 0) {
                auto& db = t.grad_buffer(bn);
                for (std::int64_t b = 0; b < B; ++b)
                    for (std::int64_t o = 0; o < Cout; ++o) {
                        const T* dy_row = &dy[static_cast<std::size_t>((b * Cout + o) * M)];
                        T acc = T(0);
                        for (std::int64_t m = 0; m < M; ++m) acc += dy_row[m];
                        db[static_cast<std::size_t>(o)] += acc;
                    }
            }
        });
    return out;
}

// Per-channel normalization over the batch and point axes.
template <typename T>
Tensor<T> batch_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, BatchNormState<T>& state, Mode mode) {
    detail::check_bcm(x, "batch_norm");
    const std::int64_t B = x.dim(0), C = x.dim(1), M = x.dim(2);
    if (gamma.shape != std::vector<std::int64_t>{C} || beta.shape != std::vector<std::int64_t>{C})
        throw ConfigError("batch_norm: gamma/beta must have shape [C]");

    const std::int64_t count = B * M;
    std::vector<T> mean(static_cast<std::size_t>(C)), invstd(static_cast<std::size_t>(C));

    if (mode == Mode::train) {
        if (count < 2) throw RuntimeError("batch_norm train mode needs B*M >= 2");
        if (!state.initialized) {
            state.running_mean.assign(static_cast<std::size_t>(C), T(0));
            state.running_var.assign(static_cast<std::size_t>(C), T(0));
            state.initialized = true;
        }
        for (std::int64_t c = 0; c < C; ++c) {
            T sum = T(0);
            for (std::int64_t b = 0; b < B; ++b) {
                const T* row = &x.at(b, c, 0);
                for (std::int64_t m = 0; m < M; ++m) sum += row[m];
            }
            const T mu = sum / static_cast<T>(count);
            T var_sum = T(0);
            for (std::int64_t b = 0; b < B; ++b) {
                const T* row = &x.at(b, c, 0);
                for (std::int64_t m = 0; m < M; ++m) {
                    const T d = row[m] - mu;
                    var_sum += d * d;
                }
            }
            const T var = var_sum / static_cast<T>(count);
            mean[static_cast<std::size_t>(c)] = mu;
            invstd[static_cast<std::size_t>(c)] = T(1) / std::sqrt(var + state.eps);
            // Running update uses the unbiased variance.
            const T unbiased =
                count > 1 ? var_sum / static_cast<T>(count - 1) : var;
            state.running_mean[static_cast<std::size_t>(c)] =
                (T(1) - state.momentum) * state.running_mean[static_cast<std::size_t>(c)] +
                state.momentum * mu;
            state.running_var[static_cast<std::size_t>(c)] =
                (T(1) - state.momentum) * state.running_var[static_cast<std::size_t>(c)] +
                state.momentum * unbiased;
        }
    } else {
        if (!state.initialized)
            throw RuntimeError("batch_norm eval with uninitialized running stats");
        for (std::int64_t c = 0; c < C; ++c) {
            mean[static_cast<std::size_t>(c)] = state.running_mean[static_cast<std::size_t>(c)];
            invstd[static_cast<std::size_t>(c)] =
                T(1) / std::sqrt(state.running_var[static_cast<std::size_t>(c)] + state.eps);
        }
    }

    Tensor<T> out = zeros<T>({B, C, M});
    std::vector<T> xhat(x.numel());
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t c = 0; c < C; ++c) {
            const T mu = mean[static_cast<std::size_t>(c)];
            const T is = invstd[static_cast<std::size_t>(c)];
            const T g = gamma.values[static_cast<std::size_t>(c)];
            const T bt = beta.values[static_cast<std::size_t>(c)];
            const T* x_row = &x.at(b, c, 0);
            T* out_row = &out.at(b, c, 0);
            T* xh_row = &xhat[static_cast<std::size_t>((b * C + c) * M)];
            for (std::int64_t m = 0; m < M; ++m) {
                xh_row[m] = (x_row[m] - mu) * is;
                out_row[m] = g * xh_row[m] + bt;
            }
        }
    Tape<T>::check_finite(out.values, "batch_norm");

    const int xn = x.node, gn = gamma.node, betan = beta.node;
    if (xn < 0 && gn < 0 && betan < 0) return out;
    const bool train = mode == Mode::train;
    out.node = tape.add_record(
        out.numel(), {xn, gn, betan},
        [B, C, M, xn, gn, betan, train, gv = gamma.values, xhat = std::move(xhat),
         invstd = std::move(invstd)](const std::vector<T>& dy, Tape<T>& t) {
            const std::int64_t count = B * M;
            for (std::int64_t c = 0; c < C; ++c) {
                // Channel reductions shared by all three gradients.
                T sum_dy = T(0), sum_dy_xhat = T(0);
                for (std::int64_t b = 0; b < B; ++b) {
                    const T* dy_row = &dy[static_cast<std::size_t>((b * C + c) * M)];
                    const T* xh_row = &xhat[static_cast<std::size_t>((b * C + c) * M)];
                    for (std::int64_t m = 0; m < M; ++m) {
                        sum_dy += dy_row[m];
                        sum_dy_xhat += dy_row[m] * xh_row[m];
                    }
                }
                if (gn >= 0) t.grad_buffer(gn)[static_cast<std::size_t>(c)] += sum_dy_xhat;
                if (betan >= 0) t.grad_buffer(betan)[static_cast<std::size_t>(c)] += sum_dy;
                if (xn < 0) continue;
                auto& dx = t.grad_buffer(xn);
                const T g = gv[static_cast<std::size_t>(c)];
                const T is = invstd[static_cast<std::size_t>(c)];
                const T mean_dy = sum_dy / static_cast<T>(count);
                const T mean_dy_xhat = sum_dy_xhat / static_cast<T>(count);
                for (std::int64_t b = 0; b < B; ++b) {
                    const T* dy_row = &dy[static_cast<std::size_t>((b * C + c) * M)];
                    const T* xh_row = &xhat[static_cast<std::size_t>((b * C + c) * M)];
                    T* dx_row = &dx[static_cast<std::size_t>((b * C + c) * M)];
                    if (train) {
                        for (std::int64_t m = 0; m < M; ++m)
                            dx_row[m] +=
                                g * is * (dy_row[m] - mean_dy - xh_row[m] * mean_dy_xhat);
                    } else {
                        for (std::int64_t m = 0; m < M; ++m) dx_row[m] += g * is * dy_row[m];
                    }
                }
            }
        });
    return out;
}

// max(0, x); the tie at exactly 0 goes to the inactive branch (grad 0).
template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x) {
    Tensor<T> out = x;
    out.node = -1;
    std::vector<char> mask(x.numel());
    std::uint64_t pattern = 0;
    for (std::size_t i = 0; i < x.values.size(); ++i) {
        const bool active = x.values[i] > T(0);
        mask[i] = active;
        pattern = pattern * 2 + active;
        if ((i & 63) == 63) {
            tape.mix_pattern(pattern);
            pattern = 0;
        }
        if (!active) out.values[i] = T(0);
    }
    tape.mix_pattern(pattern);
    Tape<T>::check_finite(out.values, "relu");

    if (x.node < 0) return out;
    out.node = tape.add_record(out.numel(), {x.node},
                               [xn = x.node, mask = std::move(mask)](const std::vector<T>& dy,
                                                                     Tape<T>& t) {
                                   auto& dx = t.grad_buffer(xn);
                                   for (std::size_t i = 0; i < dy.size(); ++i)
                                       if (mask[i]) dx[i] += dy[i];
                               });
    return out;
}

// Channelwise max over the point axis; gradient routes to the argmax, ties to
// the lowest index.
template <typename T>
Tensor<T> max_pool_points(Tape<T>& tape, const Tensor<T>& x) {
    detail::check_bcm(x, "max_pool_points");
    const std::int64_t B = x.dim(0), C = x.dim(1), M = x.dim(2);
    if (M < 1) throw ConfigError("max_pool_points: empty point axis");

    Tensor<T> out = zeros<T>({B, C, 1});
    std::vector<std::int64_t> argmax(static_cast<std::size_t>(B * C));
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t c = 0; c < C; ++c) {
            const T* row = &x.at(b, c, 0);
            std::int64_t best = 0;
            for (std::int64_t m = 1; m < M; ++m)
                if (row[m] > row[best]) best = m;
            out.at(b, c, 0) = row[best];
            argmax[static_cast<std::size_t>(b * C + c)] = best;
            tape.mix_pattern(static_cast<std::uint64_t>(best));
        }
    Tape<T>::check_finite(out.values, "max_pool_points");

    if (x.node < 0) return out;
    out.node = tape.add_record(
        out.numel(), {x.node},
        [xn = x.node, B, C, M, argmax = std::move(argmax)](const std::vector<T>& dy,
                                                           Tape<T>& t) {
            auto& dx = t.grad_buffer(xn);
            for (std::int64_t bc = 0; bc < B * C; ++bc)
                dx[static_cast<std::size_t>(bc * M + argmax[static_cast<std::size_t>(bc)])] +=
                    dy[static_cast<std::size_t>(bc)];
        });
    return out;
}

// Copies the single column across M points; backward sums over the point axis.
template <typename T>
Tensor<T> replicate_points(Tape<T>& tape, const Tensor<T>& x, std::int64_t m) {
    detail::check_bcm(x, "replicate_points");
    if (x.dim(2) != 1) throw ConfigError("replicate_points expects [B,C,1] input");
    const std::int64_t B = x.dim(0), C = x.dim(1);

    Tensor<T> out = zeros<T>({B, C, m});
    for (std::int64_t bc = 0; bc < B * C; ++bc) {
        const T v = x.values[static_cast<std::size_t>(bc)];
        T* row = &out.values[static_cast<std::size_t>(bc * m)];
        for (std::int64_t i = 0; i < m; ++i) row[i] = v;
    }

    if (x.node < 0) return out;
    out.node = tape.add_record(out.numel(), {x.node},
                               [xn = x.node, B, C, m](const std::vector<T>& dy, Tape<T>& t) {
                                   auto& dx = t.grad_buffer(xn);
                                   for (std::int64_t bc = 0; bc < B * C; ++bc) {
                                       const T* row = &dy[static_cast<std::size_t>(bc * m)];
                                       T acc = T(0);
                                       for (std::int64_t i = 0; i < m; ++i) acc += row[i];
                                       dx[static_cast<std::size_t>(bc)] += acc;
                                   }
                               });
    return out;
}

// Stacks channel blocks; backward splits the gradient.
template <typename T>
Tensor<T> concat_channels(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_bcm(a, "concat_channels");
    detail::check_bcm(b, "concat_channels");
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2))
        throw ConfigError("concat_channels: batch/point mismatch between " + a.shape_str() +
                          " and " + b.shape_str());
    const std::int64_t B = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), M = a.dim(2);

    Tensor<T> out = zeros<T>({B, Ca + Cb, M});
    for (std::int64_t bb = 0; bb < B; ++bb) {
        std::memcpy(&out.at(bb, 0, 0), &a.at(bb, 0, 0),
                    static_cast<std::size_t>(Ca * M) * sizeof(T));
        std::memcpy(&out.at(bb, Ca, 0), &b.at(bb, 0, 0),
                    static_cast<std::size_t>(Cb * M) * sizeof(T));
    }

    if (a.node < 0 && b.node < 0) return out;
    out.node = tape.add_record(
        out.numel(), {a.node, b.node},
        [an = a.node, bn = b.node, B, Ca, Cb, M](const std::vector<T>& dy, Tape<T>& t) {
            for (std::int64_t bb = 0; bb < B; ++bb) {
                if (an >= 0) {
                    auto& da = t.grad_buffer(an);
                    for (std::int64_t i = 0; i < Ca * M; ++i)
                        da[static_cast<std::size_t>(bb * Ca * M + i)] +=
                            dy[static_cast<std::size_t>(bb * (Ca + Cb) * M + i)];
                }
                if (bn >= 0) {
                    auto& db = t.grad_buffer(bn);
                    for (std::int64_t i = 0; i < Cb * M; ++i)
                        db[static_cast<std::size_t>(bb * Cb * M + i)] +=
                            dy[static_cast<std::size_t>((bb * (Ca + Cb) + Ca) * M + i)];
                }
            }
        });
    return out;
}

// Elementwise a + b; used to combine loss terms.
template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape != b.shape) throw ConfigError("add: shape mismatch");
    Tensor<T> out = a;
    out.node = -1;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += b.values[i];
    Tape<T>::check_finite(out.values, "add");
    if (a.node < 0 && b.node < 0) return out;
    out.node = tape.add_record(out.numel(), {a.node, b.node},
                               [an = a.node, bn = b.node](const std::vector<T>& dy, Tape<T>& t) {
                                   if (an >= 0) {
                                       auto& da = t.grad_buffer(an);
                                       for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
                                   }
                                   if (bn >= 0) {
                                       auto& db = t.grad_buffer(bn);
                                       for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i];
                                   }
                               });
    return out;
}

// Scalar projection sum_i coeffs[i] * x[i]; the usual way to collapse an
// activation into a test loss.
template <typename T>
Tensor<T> inner(Tape<T>& tape, const Tensor<T>& x, const std::vector<T>& coeffs) {
    if (coeffs.size() != x.numel()) throw ConfigError("inner: coefficient count mismatch");
    T acc = T(0);
    for (std::size_t i = 0; i < coeffs.size(); ++i) acc += coeffs[i] * x.values[i];
    Tensor<T> out({1}, {acc});
    Tape<T>::check_finite(out.values, "inner");
    if (x.node < 0) return out;
    out.node = tape.add_record(1, {x.node},
                               [xn = x.node, coeffs](const std::vector<T>& dy, Tape<T>& t) {
                                   auto& dx = t.grad_buffer(xn);
                                   for (std::size_t i = 0; i < coeffs.size(); ++i)
                                       dx[i] += coeffs[i] * dy[0];
                               });
    return out;
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, T factor) {
    Tensor<T> out = a;
    out.node = -1;
    for (T& v : out.values) v *= factor;
    Tape<T>::check_finite(out.values, "scale");
    if (a.node < 0) return out;
    out.node = tape.add_record(out.numel(), {a.node},
                               [an = a.node, factor](const std::vector<T>& dy, Tape<T>& t) {
                                   auto& da = t.grad_buffer(an);
                                   for (std::size_t i = 0; i < dy.size(); ++i)
                                       da[i] += factor * dy[i];
                               });
    return out;
}

}  // namespace lila::ad

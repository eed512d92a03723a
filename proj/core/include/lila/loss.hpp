#pragma once

#include <vector>

#include "lila/kdtree.hpp"
#include "lila/tape.hpp"

namespace lila::train {

// Differentiable Chamfer loss between a reconstruction [B,3,M] on the tape
// and a fixed target [B,3,M]: the batch mean of
//   (1/M) sum_x min_r |x-r|^2 + (1/M) sum_r min_x |r-x|^2.
// Nearest-neighbor correspondences are treated as constants at the current
// step; gradients flow through the selected squared distances only.
template <typename T>
ad::Tensor<T> chamfer_loss(ad::Tape<T>& tape, const ad::Tensor<T>& recon,
                           const ad::Tensor<T>& target) {
    if (recon.shape != target.shape || recon.shape.size() != 3 || recon.dim(1) != 3)
        throw ConfigError("chamfer_loss: recon " + recon.shape_str() + " vs target " +
                          target.shape_str());
    const std::int64_t B = recon.dim(0), M = recon.dim(2);

    auto gather = [&](const ad::Tensor<T>& t, std::int64_t b) {
        std::vector<Vec3> pts(static_cast<std::size_t>(M));
        for (std::int64_t m = 0; m < M; ++m)
            pts[static_cast<std::size_t>(m)] = {static_cast<double>(t.at(b, 0, m)),
                                                static_cast<double>(t.at(b, 1, m)),
                                                static_cast<double>(t.at(b, 2, m))};
        return pts;
    };

    // nn_xr[b][m]: recon index nearest to target point m; nn_rx[b][j]: target
    // index nearest to recon point j.
    std::vector<std::vector<std::uint32_t>> nn_xr(static_cast<std::size_t>(B)),
        nn_rx(static_cast<std::size_t>(B));
    double total = 0.0;
    for (std::int64_t b = 0; b < B; ++b) {
        const auto x = gather(target, b);
        const auto r = gather(recon, b);
        auto& xr = nn_xr[static_cast<std::size_t>(b)];
        auto& rx = nn_rx[static_cast<std::size_t>(b)];
        xr.resize(static_cast<std::size_t>(M));
        rx.resize(static_cast<std::size_t>(M));

        double sum = 0.0;
        if (M > 512) {
            const metrics::KdTree tree_r(r), tree_x(x);
            for (std::int64_t m = 0; m < M; ++m) {
                const auto hit = tree_r.nearest(x[static_cast<std::size_t>(m)]);
                xr[static_cast<std::size_t>(m)] = static_cast<std::uint32_t>(hit.index);
                sum += hit.dist2;
            }
            for (std::int64_t j = 0; j < M; ++j) {
                const auto hit = tree_x.nearest(r[static_cast<std::size_t>(j)]);
                rx[static_cast<std::size_t>(j)] = static_cast<std::uint32_t>(hit.index);
                sum += hit.dist2;
            }
        } else {
            auto brute = [&](const std::vector<Vec3>& from, const std::vector<Vec3>& to,
                             std::vector<std::uint32_t>& nn) {
                double acc = 0.0;
                for (std::size_t i = 0; i < from.size(); ++i) {
                    double best = dist2(from[i], to[0]);
                    std::uint32_t best_j = 0;
                    for (std::uint32_t j = 1; j < to.size(); ++j) {
                        const double d2 = dist2(from[i], to[j]);
                        if (d2 < best) {
                            best = d2;
                            best_j = j;
                        }
                    }
                    nn[i] = best_j;
                    acc += best;
                }
                return acc;
            };
            sum += brute(x, r, xr);
            sum += brute(r, x, rx);
        }
        total += sum / static_cast<double>(M);
        for (auto v : xr) tape.mix_pattern(v);
        for (auto v : rx) tape.mix_pattern(v);
    }

    ad::Tensor<T> out({1}, {static_cast<T>(total / static_cast<double>(B))});
    ad::Tape<T>::check_finite(out.values, "chamfer_loss");
    if (recon.node < 0) return out;

    out.node = tape.add_record(
        1, {recon.node},
        [rn = recon.node, B, M, rv = recon.values, tv = target.values,
         nn_xr = std::move(nn_xr), nn_rx = std::move(nn_rx)](const std::vector<T>& dy,
                                                             ad::Tape<T>& t) {
            auto& dr = t.grad_buffer(rn);
            const double w = static_cast<double>(dy[0]) / (static_cast<double>(B) *
                                                           static_cast<double>(M));
            auto recon_at = [&](std::int64_t b, std::int64_t c, std::int64_t m) {
                return static_cast<double>(rv[static_cast<std::size_t>((b * 3 + c) * M + m)]);
            };
            auto target_at = [&](std::int64_t b, std::int64_t c, std::int64_t m) {
                return static_cast<double>(tv[static_cast<std::size_t>((b * 3 + c) * M + m)]);
            };
            auto add_grad = [&](std::int64_t b, std::int64_t c, std::int64_t j, double g) {
                dr[static_cast<std::size_t>((b * 3 + c) * M + j)] += static_cast<T>(g);
            };
            for (std::int64_t b = 0; b < B; ++b) {
                // Target-side term: each target point pulls its nearest recon.
                for (std::int64_t m = 0; m < M; ++m) {
                    const std::int64_t j = nn_xr[static_cast<std::size_t>(b)]
                                                [static_cast<std::size_t>(m)];
                    for (std::int64_t c = 0; c < 3; ++c)
                        add_grad(b, c, j,
                                 2.0 * w * (recon_at(b, c, j) - target_at(b, c, m)));
                }
                // Recon-side term: each recon point is pulled to its nearest target.
                for (std::int64_t j = 0; j < M; ++j) {
                    const std::int64_t m = nn_rx[static_cast<std::size_t>(b)]
                                                [static_cast<std::size_t>(j)];
                    for (std::int64_t c = 0; c < 3; ++c)
                        add_grad(b, c, j,
                                 2.0 * w * (recon_at(b, c, j) - target_at(b, c, m)));
                }
            }
        });
    return out;
}

}  // namespace lila::train

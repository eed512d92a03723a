#pragma once

#include <chrono>
#include <functional>
#include <numeric>
#include <span>

#include "lila/adam.hpp"
#include "lila/loss.hpp"
#include "lila/metrics.hpp"
#include "lila/model.hpp"
#include "lila/preprocess.hpp"
#include "lila/threading.hpp"

namespace lila::train {

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    double learning_rate = 5e-4;
    std::uint64_t seed = 0;
    double split_train_fraction = 0.9;
    bool shuffle_each_epoch = true;
    int precision_bits = 32;  // 32 or 64; selects the scalar type at the CLI
    bool freeze_batch_norm = false;

    void validate() const {
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (split_train_fraction <= 0.0 || split_train_fraction >= 1.0)
            throw ConfigError("split_train_fraction must lie in (0,1)");
        if (precision_bits != 32 && precision_bits != 64)
            throw ConfigError("precision must be 32 or 64 bits");
        if (learning_rate < 0.0) throw ConfigError("learning_rate must be non-negative");
    }
};

// Deterministic shuffled split: floor(fraction * N) entries train, the rest
// test. Both sides must be non-empty.
std::pair<geo::DatasetManifest, geo::DatasetManifest> split_dataset(
    const geo::DatasetManifest& manifest, double fraction, std::uint64_t seed);

// [B,3,M] batch assembled from clouds[indices], x/y/z as channels.
template <typename T>
ad::Tensor<T> make_batch(std::span<const pre::ProcessedCloud> clouds,
                         std::span<const std::size_t> indices) {
    const std::int64_t B = static_cast<std::int64_t>(indices.size());
    const std::int64_t M = static_cast<std::int64_t>(clouds[indices[0]].points.size());
    ad::Tensor<T> x = ad::zeros<T>({B, 3, M});
    for (std::int64_t b = 0; b < B; ++b) {
        const auto& pts = clouds[indices[static_cast<std::size_t>(b)]].points;
        if (static_cast<std::int64_t>(pts.size()) != M)
            throw ConfigError("batch clouds disagree on point count");
        for (std::int64_t m = 0; m < M; ++m) {
            x.at(b, 0, m) = static_cast<T>(pts[static_cast<std::size_t>(m)].x);
            x.at(b, 1, m) = static_cast<T>(pts[static_cast<std::size_t>(m)].y);
            x.at(b, 2, m) = static_cast<T>(pts[static_cast<std::size_t>(m)].z);
        }
    }
    return x;
}

template <typename T>
std::vector<Vec3> tensor_to_points(const ad::Tensor<T>& t, std::int64_t b = 0) {
    const std::int64_t M = t.dim(2);
    std::vector<Vec3> pts(static_cast<std::size_t>(M));
    for (std::int64_t m = 0; m < M; ++m)
        pts[static_cast<std::size_t>(m)] = {static_cast<double>(t.at(b, 0, m)),
                                            static_cast<double>(t.at(b, 1, m)),
                                            static_cast<double>(t.at(b, 2, m))};
    return pts;
}

// Owns the optimizer state so training can stop at a checkpoint and resume
// with an identical trajectory.
template <typename T>
struct Trainer {
    TrainConfig cfg;
    ad::AdamConfig adam;
    std::vector<ad::AdamState<T>> opt;
    std::size_t epoch = 0;
    std::vector<double> loss_history;

    void init(net::LiLaNet<T>& model) {
        opt.clear();
        for (const auto& p : net::named_params(model))
            opt.push_back(ad::AdamState<T>::for_size(p.values->size()));
    }

    // Trains until cfg.epochs. Epoch shuffles are keyed by (seed, epoch), so
    // a resumed run replays the same batch order.
    void run(net::LiLaNet<T>& model,
             std::span<const pre::ProcessedCloud> clouds,
             const std::function<void(std::size_t, double)>& on_epoch = nullptr) {
        cfg.validate();
        if (clouds.empty()) throw RuntimeError("empty training set");
        const std::size_t m = clouds[0].points.size();
        for (const auto& c : clouds)
            if (c.points.size() != m)
                throw ConfigError("training clouds must share one point count");
        if (opt.empty()) init(model);
        adam.lr = cfg.learning_rate;
        const ad::Mode bn_mode = cfg.freeze_batch_norm ? ad::Mode::eval : ad::Mode::train;

        std::vector<std::size_t> order(clouds.size());
        std::iota(order.begin(), order.end(), 0);

        for (; epoch < cfg.epochs; ++epoch) {
            if (cfg.shuffle_each_epoch) {
                Rng rng(derive_seed(cfg.seed, epoch));
                rng.shuffle(order);
            }
            double epoch_loss = 0.0;
            std::size_t seen = 0;
            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                const std::size_t count = std::min(cfg.batch_size, order.size() - start);
                const std::span<const std::size_t> batch_idx(order.data() + start, count);
                ad::Tape<T> tape;
                ad::Tensor<T> x = make_batch<T>(clouds, batch_idx);
                net::ForwardResult<T> fwd;
                ad::Tensor<T> loss;
                try {
                    fwd = net::forward(model, tape, x, bn_mode, /*with_grads=*/true);
                    loss = chamfer_loss(tape, fwd.reconstruction, x);
                    tape.backward(loss);
                } catch (const NumericError& e) {
                    throw NumericError("epoch " + std::to_string(epoch) + ", batch " +
                                       std::to_string(start / cfg.batch_size) + ": " + e.what());
                }
                for (std::size_t p = 0; p < fwd.bound.handles.size(); ++p) {
                    auto& handle = fwd.bound.handles[p];
                    adam_step<T>(std::span<T>(*handle.values),
                                 std::span<const T>(tape.grad_buffer(handle.node)), opt[p],
                                 adam);
                }
                epoch_loss += static_cast<double>(loss.values[0]) * static_cast<double>(count);
                seen += count;
            }
            loss_history.push_back(epoch_loss / static_cast<double>(seen));
            if (on_epoch) on_epoch(epoch, loss_history.back());
        }
    }
};

struct EvalOptions {
    bool compute_emd = true;
    std::size_t emd_exact_cap = 1024;
    int threads = 1;
    // Test hook replacing the model forward (e.g. identity).
    std::function<std::vector<Vec3>(const pre::ProcessedCloud&)> forward_override;
};

struct EvalSummary {
    double mean_cd = 0.0;
    double mean_emd = 0.0;
    bool emd_computed = false;
    metrics::EmdMode emd_mode = metrics::EmdMode::exact;
    double mean_infer_ms = 0.0;
    std::size_t count = 0;
};

// Frozen-model evaluation: per-cloud forward plus metrics, aggregated as
// arithmetic means. Inference time covers the forward pass only.
template <typename T>
EvalSummary evaluate(net::LiLaNet<T>& model, std::span<const pre::ProcessedCloud> clouds,
                     const EvalOptions& options = {}) {
    if (clouds.empty()) throw RuntimeError("empty evaluation set");
    struct Row {
        double cd, emd, infer_ms;
        metrics::EmdMode mode;
    };
    std::vector<Row> rows(clouds.size());

    parallel_for(clouds.size(), options.threads, [&](std::size_t i) {
        const auto& cloud = clouds[i];
        std::vector<Vec3> recon;
        double infer_ms = 0.0;
        if (options.forward_override) {
            recon = options.forward_override(cloud);
        } else {
            const std::size_t one[] = {i};
            ad::Tensor<T> x = make_batch<T>(clouds, one);
            ad::Tape<T> tape;
            const auto t0 = std::chrono::steady_clock::now();
            auto fwd = net::forward(model, tape, x, ad::Mode::eval, /*with_grads=*/false);
            infer_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
            recon = tensor_to_points(fwd.reconstruction);
        }
        Row row{};
        row.infer_ms = infer_ms;
        row.cd = metrics::chamfer_accelerated(cloud.points, recon);
        if (options.compute_emd) {
            if (cloud.points.size() == recon.size() &&
                cloud.points.size() <= options.emd_exact_cap) {
                row.emd = metrics::emd_exact(cloud.points, recon, options.emd_exact_cap);
                row.mode = metrics::EmdMode::exact;
            } else {
                row.emd = metrics::emd_approx(cloud.points, recon).value;
                row.mode = metrics::EmdMode::approx;
            }
        }
        rows[i] = row;
    });

    EvalSummary summary;
    summary.count = rows.size();
    summary.emd_computed = options.compute_emd;
    for (const Row& r : rows) {
        summary.mean_cd += r.cd;
        summary.mean_emd += r.emd;
        summary.mean_infer_ms += r.infer_ms;
        if (r.mode == metrics::EmdMode::approx) summary.emd_mode = metrics::EmdMode::approx;
    }
    const double n = static_cast<double>(rows.size());
    summary.mean_cd /= n;
    summary.mean_emd /= n;
    summary.mean_infer_ms /= n;
    return summary;
}

}  // namespace lila::train

#pragma once

#include <algorithm>
#include <sstream>

#include "lila/train.hpp"

namespace lila::train {

struct ExperimentSpec {
    std::vector<double> fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::size_t repeats = 50;  // desk-scale runs override this downward
    std::vector<std::size_t> cloud_sizes{2048, 8192, 20000};
    std::vector<net::SkipVariant> variants{net::SkipVariant::ss1, net::SkipVariant::ss2,
                                           net::SkipVariant::ss3, net::SkipVariant::ss4};
    int threads = 1;

    void validate() const {
        for (double f : fractions)
            if (f <= 0.0 || f > 1.0) throw ConfigError("fractions must lie in (0,1]");
        if (repeats < 1) throw ConfigError("repeats must be >= 1");
        if (fractions.empty() && cloud_sizes.empty() && variants.empty())
            throw ConfigError("experiment spec selects nothing");
    }
};

// Box-plot statistics in the line-plus-box convention: mean over everything
// (outliers included), median/quartiles, and outliers beyond 1.5 IQR.
struct DistributionStats {
    double mean = 0.0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    std::size_t outliers = 0;
};

inline DistributionStats summarize_distribution(std::vector<double> values) {
    if (values.empty()) throw RuntimeError("summarize_distribution on empty sample");
    DistributionStats s;
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    std::sort(values.begin(), values.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(values.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return values[lo] * (1.0 - frac) + values[hi] * frac;
    };
    s.median = quantile(0.5);
    s.q1 = quantile(0.25);
    s.q3 = quantile(0.75);
    const double iqr = s.q3 - s.q1;
    const double lo = s.q1 - 1.5 * iqr, hi = s.q3 + 1.5 * iqr;
    for (double v : values) s.outliers += v < lo || v > hi;
    return s;
}

struct AblationRow {
    net::SkipVariant variant;
    double cd_true = 0.0;
    double emd_true = 0.0;
    double cd_random = 0.0;
    double emd_random = 0.0;
    std::size_t param_count = 0;
};

// Evaluation of one frozen model under the random-latent ablation.
template <typename T>
EvalSummary evaluate_random_latent(net::LiLaNet<T>& model,
                                   std::span<const pre::ProcessedCloud> clouds,
                                   std::uint64_t rng_seed, const EvalOptions& options = {}) {
    EvalOptions opts = options;
    opts.forward_override = [&model, rng_seed, &clouds](const pre::ProcessedCloud& cloud) {
        // Index of this cloud keys the latent seed so each cloud sees a fixed
        // random vector.
        std::size_t index = 0;
        for (std::size_t i = 0; i < clouds.size(); ++i)
            if (&clouds[i] == &cloud) {
                index = i;
                break;
            }
        std::vector<pre::ProcessedCloud> one{cloud};
        const std::size_t idx[] = {0};
        ad::Tensor<T> x = make_batch<T>(one, idx);
        ad::Tape<T> tape;
        auto fwd = net::forward_random_latent(model, tape, x, ad::Mode::eval,
                                              derive_seed(rng_seed, index));
        return tensor_to_points(fwd.reconstruction);
    };
    return evaluate(model, clouds, opts);
}

// Trains one model per skip variant from identical seeds, then scores each
// with the true latent and with the random-latent ablation.
template <typename T>
std::vector<AblationRow> run_skip_ablation(std::span<const pre::ProcessedCloud> train_set,
                                           std::span<const pre::ProcessedCloud> test_set,
                                           const net::ModelConfig& base_config,
                                           const TrainConfig& train_cfg,
                                           const std::vector<net::SkipVariant>& variants,
                                           std::uint64_t random_latent_seed = 1,
                                           const EvalOptions& eval_options = {}) {
    if (variants.empty()) throw ConfigError("ablation needs at least one variant");
    std::vector<AblationRow> rows(variants.size());
    for (std::size_t i = 0; i < variants.size(); ++i) {
        net::ModelConfig config = base_config;
        config.skip = variants[i];
        net::LiLaNet<T> model = net::build<T>(config);
        Trainer<T> trainer;
        trainer.cfg = train_cfg;
        trainer.run(model, train_set);

        AblationRow row;
        row.variant = variants[i];
        row.param_count = net::param_count(config);
        const EvalSummary with_latent = evaluate(model, test_set, eval_options);
        row.cd_true = with_latent.mean_cd;
        row.emd_true = with_latent.mean_emd;
        const EvalSummary rand =
            evaluate_random_latent(model, test_set, random_latent_seed, eval_options);
        row.cd_random = rand.mean_cd;
        row.emd_random = rand.mean_emd;
        rows[i] = row;
    }
    return rows;
}

struct FractionRow {
    double fraction = 0.0;
    DistributionStats cd;
    DistributionStats emd;
    std::vector<double> cd_runs;
    std::vector<double> emd_runs;
};

// Repeated trainings on nested data fractions; each run draws its subset and
// init from (seed, fraction index, repeat index).
template <typename T>
std::vector<FractionRow> run_data_fraction_experiment(
    std::span<const pre::ProcessedCloud> train_pool,
    std::span<const pre::ProcessedCloud> test_set, const net::ModelConfig& base_config,
    const TrainConfig& train_cfg, const ExperimentSpec& spec,
    const EvalOptions& eval_options = {}) {
    spec.validate();
    std::vector<FractionRow> rows(spec.fractions.size());
    for (std::size_t fi = 0; fi < spec.fractions.size(); ++fi) {
        const double fraction = spec.fractions[fi];
        const std::size_t subset_size = std::max<std::size_t>(
            1, static_cast<std::size_t>(fraction * static_cast<double>(train_pool.size())));
        FractionRow row;
        row.fraction = fraction;
        row.cd_runs.resize(spec.repeats);
        row.emd_runs.resize(spec.repeats);

        parallel_for(spec.repeats, spec.threads, [&](std::size_t rep) {
            const std::uint64_t run_seed =
                derive_seed(train_cfg.seed, fi * 1000003ULL + rep);
            Rng rng(run_seed);
            std::vector<pre::ProcessedCloud> subset;
            subset.reserve(subset_size);
            for (std::size_t idx :
                 rng.sample_without_replacement(train_pool.size(), subset_size))
                subset.push_back(train_pool[idx]);

            net::ModelConfig config = base_config;
            config.init_seed = derive_seed(run_seed, 1);
            net::LiLaNet<T> model = net::build<T>(config);
            Trainer<T> trainer;
            trainer.cfg = train_cfg;
            trainer.cfg.seed = derive_seed(run_seed, 2);
            trainer.run(model, subset);

            const EvalSummary summary = evaluate(model, test_set, eval_options);
            row.cd_runs[rep] = summary.mean_cd;
            row.emd_runs[rep] = summary.mean_emd;
        });

        row.cd = summarize_distribution(row.cd_runs);
        row.emd = summarize_distribution(row.emd_runs);
        rows[fi] = std::move(row);
    }
    return rows;
}

struct CloudSizeRow {
    std::size_t cloud_size = 0;  // M
    double inference_time_ms = 0.0;
    double cd = 0.0;
    double emd = 0.0;
};

// One training per point count M over datasets preprocessed at that M.
template <typename T>
std::vector<CloudSizeRow> run_cloud_size_experiment(
    const std::vector<std::vector<pre::ProcessedCloud>>& train_sets,
    const std::vector<std::vector<pre::ProcessedCloud>>& test_sets,
    const net::ModelConfig& base_config, const TrainConfig& train_cfg,
    const EvalOptions& eval_options = {}) {
    if (train_sets.size() != test_sets.size() || train_sets.empty())
        throw ConfigError("cloud-size experiment needs matching train/test sets");
    std::vector<CloudSizeRow> rows(train_sets.size());
    for (std::size_t i = 0; i < train_sets.size(); ++i) {
        net::ModelConfig config = base_config;
        config.points = static_cast<std::int64_t>(train_sets[i][0].points.size());
        net::LiLaNet<T> model = net::build<T>(config);
        Trainer<T> trainer;
        trainer.cfg = train_cfg;
        trainer.run(model, train_sets[i]);

        const EvalSummary summary = evaluate(model, test_sets[i], eval_options);
        rows[i] = {train_sets[i][0].points.size(), summary.mean_infer_ms, summary.mean_cd,
                   summary.mean_emd};
    }
    return rows;
}

// CSV emitters; headers are part of the output contract.
std::string ablation_csv(const std::vector<AblationRow>& rows);
std::string fraction_summary_csv(const std::vector<FractionRow>& rows);
std::string fraction_runs_csv(const std::vector<FractionRow>& rows);
std::string cloud_size_csv(const std::vector<CloudSizeRow>& rows);

}  // namespace lila::train

// lila: command-line front end for the point-cloud autoencoder toolkit.
// Subcommands cover synthetic data generation, preprocessing, training,
// evaluation, reconstruction, latent embedding, SVM classification, the skip
// ablation, and the data-fraction / cloud-size experiments.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>

#include "lila/checkpoint.hpp"
#include "lila/experiments.hpp"
#include "lila/io.hpp"
#include "lila/latent_eval.hpp"
#include "lila/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct GlobalFlags {
    std::uint64_t seed = 0;
    bool deterministic = false;
    int threads = 1;
};

std::string timestamp(bool deterministic) {
    if (deterministic) return "1970-01-01T00:00:00Z";
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

// One manifest per run; re-running with --deterministic reproduces outputs
// byte for byte, so volatile fields are pinned under that flag.
void write_run_manifest(const fs::path& out_dir, const std::string& command,
                        const GlobalFlags& global, const json& config,
                        const std::vector<std::string>& outputs,
                        const std::string& started_at) {
    json j;
    j["command"] = command;
    j["version"] = kVersion;
    j["seed"] = global.seed;
    j["deterministic"] = global.deterministic;
    j["threads"] = global.threads;
    j["config"] = config;
    j["outputs"] = outputs;
    j["started_at"] = started_at;
    j["finished_at"] = timestamp(global.deterministic);
    lila::io::write_file(out_dir / "run_manifest.json", j.dump(2) + "\n");
}

struct ModelFlags {
    std::vector<std::int64_t> encoder_widths{64, 128, 1024};
    std::vector<std::int64_t> decoder_widths{512, 256};
    std::int64_t latent_dim = 1024;
    std::string skip_variant = "ss4";
    std::int64_t target_points = 2048;

    lila::net::ModelConfig to_config(std::uint64_t init_seed) const {
        lila::net::ModelConfig cfg;
        cfg.encoder_widths = encoder_widths;
        cfg.decoder_widths = decoder_widths;
        cfg.latent_dim = latent_dim;
        const auto variant = lila::net::skip_variant_from_string(skip_variant);
        if (!variant)
            throw lila::ConfigError("skip-variant must be one of none,ss1,ss2,ss3,ss4");
        cfg.skip = *variant;
        cfg.points = target_points;
        cfg.init_seed = init_seed;
        return cfg;
    }
    json snapshot() const {
        return {{"encoder_widths", encoder_widths}, {"decoder_widths", decoder_widths},
                {"latent_dim", latent_dim},         {"skip_variant", skip_variant},
                {"target_points", target_points}};
    }
};

struct TrainFlags {
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    double lr = 5e-4;
    std::string precision = "f32";
    bool freeze_bn = false;

    lila::train::TrainConfig to_config(std::uint64_t seed) const {
        lila::train::TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.learning_rate = lr;
        cfg.seed = seed;
        cfg.freeze_batch_norm = freeze_bn;
        cfg.precision_bits = precision == "f64" ? 64 : 32;
        return cfg;
    }
    json snapshot() const {
        return {{"epochs", epochs},
                {"batch_size", batch_size},
                {"lr", lr},
                {"precision", precision},
                {"freeze_bn", freeze_bn}};
    }
};

void add_model_flags(CLI::App* cmd, ModelFlags& flags) {
    cmd->add_option("--encoder-widths", flags.encoder_widths,
                    "Encoder channel widths (last must equal latent dim)")
        ->delimiter(',');
    cmd->add_option("--decoder-widths", flags.decoder_widths, "Decoder channel widths")
        ->delimiter(',');
    cmd->add_option("--latent-dim", flags.latent_dim, "Latent vector length L")
        ->capture_default_str();
    cmd->add_option("--skip-variant", flags.skip_variant, "Skip variant")
        ->check(CLI::IsMember({"none", "ss1", "ss2", "ss3", "ss4"}))
        ->capture_default_str();
    cmd->add_option("--target-points", flags.target_points, "Points per cloud M")
        ->capture_default_str();
}

void add_train_flags(CLI::App* cmd, TrainFlags& flags) {
    cmd->add_option("--epochs", flags.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--batch-size", flags.batch_size, "Batch size")->capture_default_str();
    cmd->add_option("--lr", flags.lr, "Adam learning rate")->capture_default_str();
    cmd->add_option("--precision", flags.precision, "Scalar precision")
        ->check(CLI::IsMember({"f32", "f64"}))
        ->capture_default_str();
    cmd->add_flag("--freeze-bn", flags.freeze_bn, "Keep batch-norm in eval mode");
}

template <typename Fn>
int with_precision(const std::string& precision, Fn&& fn) {
    if (precision == "f64") return fn(double{});
    return fn(float{});
}

// Manifest paths resolve relative to the manifest file's directory.
fs::path resolve_entry(const fs::path& manifest_path, const std::string& entry) {
    const fs::path p(entry);
    if (p.is_absolute()) return p;
    return manifest_path.parent_path() / p;
}

struct LoadedSet {
    std::vector<lila::latent::LabeledProcessedCloud> clouds;
    std::vector<std::string> stems;
};

// Loads XYZ clouds for one split ("train", "test", or "all"), renormalizing
// to restore the unit-sphere invariants; target 0 keeps each file's own
// point count.
LoadedSet load_processed_set(const fs::path& manifest_path, const std::string& split,
                             std::int64_t target, std::uint64_t seed) {
    const auto manifest = lila::io::load_manifest(manifest_path);
    LoadedSet set;
    std::size_t index = 0;
    for (const auto& entry : manifest.entries) {
        ++index;
        if (split != "all" && std::string(lila::geo::to_string(entry.split)) != split) continue;
        const fs::path path = resolve_entry(manifest_path, entry.path);
        auto raw = lila::io::parse_xyz(lila::io::read_file(path));
        raw.source_id = entry.path;
        const std::size_t m =
            target > 0 ? static_cast<std::size_t>(target) : raw.points.size();
        lila::latent::LabeledProcessedCloud item;
        item.cloud = lila::pre::processed_from_raw(raw, m, lila::derive_seed(seed, index));
        item.label = entry.label;
        set.clouds.push_back(std::move(item));
        set.stems.push_back(path.stem().string());
    }
    if (set.clouds.empty())
        throw lila::RuntimeError("manifest has no entries for split '" + split + "'");
    return set;
}

std::vector<lila::pre::ProcessedCloud> bare_clouds(const LoadedSet& set) {
    std::vector<lila::pre::ProcessedCloud> out;
    out.reserve(set.clouds.size());
    for (const auto& c : set.clouds) out.push_back(c.cloud);
    return out;
}

json eval_summary_json(const lila::train::EvalSummary& summary, bool deterministic) {
    json j;
    j["mean_cd"] = summary.mean_cd;
    if (summary.emd_computed) {
        j["mean_emd"] = summary.mean_emd;
        j["emd_mode"] = summary.emd_mode == lila::metrics::EmdMode::exact ? "exact" : "approx";
    }
    j["mean_infer_ms"] = deterministic ? 0.0 : summary.mean_infer_ms;
    j["count"] = summary.count;
    return j;
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(const GlobalFlags& global, const fs::path& out_dir, std::size_t per_class,
              std::size_t points, double jitter, double test_fraction) {
    const std::string started = timestamp(global.deterministic);
    fs::create_directories(out_dir);
    lila::synth::ShapeParams params;
    params.points = points;
    params.jitter_sigma = jitter;
    const auto dataset = lila::synth::make_shape_dataset(per_class, global.seed, params);

    lila::geo::DatasetManifest manifest;
    manifest.seed = global.seed;
    std::vector<std::string> outputs;
    std::size_t class_counter[3] = {0, 0, 0};
    for (const auto& item : dataset) {
        const std::size_t cls = item.label == "sphere" ? 0 : item.label == "cube" ? 1 : 2;
        const std::size_t within = class_counter[cls]++;
        const std::string name = item.label + "_" + std::to_string(within) + ".xyz";
        lila::io::write_xyz(item.cloud, out_dir / name);
        lila::geo::ManifestEntry entry;
        entry.path = name;
        entry.label = item.label;
        // Deterministic tail split within each class.
        entry.split = static_cast<double>(within) <
                              (1.0 - test_fraction) * static_cast<double>(per_class)
                          ? lila::geo::Split::train
                          : lila::geo::Split::test;
        manifest.entries.push_back(entry);
        outputs.push_back(name);
    }
    lila::io::save_manifest(manifest, out_dir / "manifest.jsonl");
    write_run_manifest(out_dir, "synth", global,
                       {{"per_class", per_class},
                        {"points", points},
                        {"jitter", jitter},
                        {"test_fraction", test_fraction}},
                       outputs, started);
    std::cout << "wrote " << dataset.size() << " clouds to " << out_dir.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// preprocess

int cmd_preprocess(const GlobalFlags& global, const fs::path& in_dir,
                   const fs::path& manifest_path, const fs::path& out_dir,
                   lila::pre::PreprocessConfig cfg, std::size_t mesh_samples) {
    const std::string started = timestamp(global.deterministic);
    fs::create_directories(out_dir);

    struct Item {
        fs::path path;
        std::string label;
        lila::geo::Split split = lila::geo::Split::train;
    };
    std::vector<Item> items;
    if (!manifest_path.empty()) {
        const auto manifest = lila::io::load_manifest(manifest_path);
        for (const auto& e : manifest.entries)
            items.push_back({resolve_entry(manifest_path, e.path), e.label, e.split});
    } else {
        if (!fs::is_directory(in_dir))
            throw lila::ConfigError("--in is not a directory: " + in_dir.string());
        for (const auto& entry : fs::directory_iterator(in_dir)) {
            if (!entry.is_regular_file()) continue;
            const auto ext = entry.path().extension().string();
            if (ext != ".xyz" && ext != ".ply" && ext != ".off" && ext != ".txt") continue;
            items.push_back({entry.path(), "", lila::geo::Split::train});
        }
        std::sort(items.begin(), items.end(),
                  [](const Item& a, const Item& b) { return a.path < b.path; });
    }
    if (items.empty()) throw lila::RuntimeError("no input clouds found");

    lila::geo::DatasetManifest out_manifest;
    out_manifest.seed = global.seed;
    std::vector<std::string> outputs;
    std::size_t failures = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& item = items[i];
        try {
            auto raw = lila::io::load_cloud(item.path, mesh_samples,
                                            lila::derive_seed(global.seed, 2 * i));
            lila::pre::PreprocessConfig cloud_cfg = cfg;
            cloud_cfg.seed = lila::derive_seed(global.seed, 2 * i + 1);
            const auto result = lila::pre::preprocess_pipeline(raw, cloud_cfg);

            const std::string stem = item.path.stem().string();
            lila::geo::RawPointCloud processed;
            processed.points = result.cloud.points;
            processed.source_id = stem;
            lila::io::write_xyz(processed, out_dir / (stem + ".xyz"));
            lila::io::write_file(out_dir / (stem + ".report.json"),
                                 lila::pre::report_to_json(result) + "\n");
            lila::geo::ManifestEntry entry;
            entry.path = stem + ".xyz";
            entry.label = item.label;
            entry.split = item.split;
            out_manifest.entries.push_back(entry);
            outputs.push_back(entry.path);
        } catch (const lila::Error& e) {
            ++failures;
            std::cerr << "error: " << item.path.string() << ": " << e.what() << "\n";
        }
    }
    if (!out_manifest.entries.empty())
        lila::io::save_manifest(out_manifest, out_dir / "manifest.jsonl");

    write_run_manifest(out_dir, "preprocess", global,
                       {{"ransac_iterations", cfg.ransac_iterations},
                        {"inlier_threshold", cfg.inlier_threshold},
                        {"min_inlier_fraction", cfg.min_inlier_fraction},
                        {"radius", cfg.crop_radius},
                        {"min_radius", cfg.min_crop_radius},
                        {"target_points", cfg.target_points},
                        {"mesh_samples", mesh_samples},
                        {"inputs", items.size()},
                        {"failures", failures}},
                       outputs, started);
    std::cout << "processed " << outputs.size() << "/" << items.size() << " clouds\n";
    return failures == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const GlobalFlags& global, const fs::path& manifest_path, const fs::path& out_dir,
              const ModelFlags& model_flags, const TrainFlags& train_flags) {
    const std::string started = timestamp(global.deterministic);
    fs::create_directories(out_dir);
    const auto set = load_processed_set(manifest_path, "train", model_flags.target_points,
                                        global.seed);
    const auto clouds = bare_clouds(set);

    return with_precision(train_flags.precision, [&](auto tag) {
        using T = decltype(tag);
        auto config = model_flags.to_config(lila::derive_seed(global.seed, 0x11));
        auto model = lila::net::build<T>(config);
        lila::train::Trainer<T> trainer;
        trainer.cfg = train_flags.to_config(lila::derive_seed(global.seed, 0x22));
        trainer.run(model, clouds, [](std::size_t epoch, double loss) {
            if (epoch % 10 == 0 || epoch < 3)
                std::cout << "epoch " << epoch << " mean CD " << loss << "\n";
        });

        lila::train::save_checkpoint(model, &trainer, out_dir / "checkpoint.lila");
        std::string csv = "epoch,mean_cd\n";
        for (std::size_t e = 0; e < trainer.loss_history.size(); ++e) {
            char buf[48];
            std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", e, trainer.loss_history[e]);
            csv += buf;
        }
        lila::io::write_file(out_dir / "loss.csv", csv);

        json config_snapshot = model_flags.snapshot();
        config_snapshot.update(train_flags.snapshot());
        config_snapshot["manifest"] = manifest_path.string();
        config_snapshot["train_clouds"] = clouds.size();
        write_run_manifest(out_dir, "train", global, config_snapshot,
                           {"checkpoint.lila", "loss.csv"}, started);
        std::cout << "final mean CD " << trainer.loss_history.back() << " after "
                  << trainer.loss_history.size() << " epochs\n";
        return 0;
    });
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(const GlobalFlags& global, const fs::path& checkpoint_path,
             const fs::path& manifest_path, const std::string& split, bool no_emd,
             std::size_t emd_cap, const std::string& precision, const fs::path& out_dir) {
    const std::string started = timestamp(global.deterministic);
    fs::create_directories(out_dir);
    const auto set = load_processed_set(manifest_path, split, 0, global.seed);
    const auto clouds = bare_clouds(set);

    return with_precision(precision, [&](auto tag) {
        using T = decltype(tag);
        auto loaded = lila::train::load_checkpoint<T>(checkpoint_path);
        lila::train::EvalOptions options;
        options.compute_emd = !no_emd;
        options.emd_exact_cap = emd_cap;
        options.threads = global.threads;
        const auto summary = lila::train::evaluate(loaded.model, clouds, options);

        lila::io::write_file(out_dir / "metrics.json",
                             eval_summary_json(summary, global.deterministic).dump(2) + "\n");
        write_run_manifest(out_dir, "eval", global,
                           {{"checkpoint", checkpoint_path.string()},
                            {"manifest", manifest_path.string()},
                            {"split", split},
                            {"emd", !no_emd},
                            {"emd_cap", emd_cap},
                            {"precision", precision}},
                           {"metrics.json"}, started);
        std::cout << "mean CD " << summary.mean_cd;
        if (summary.emd_computed) std::cout << ", mean EMD " << summary.mean_emd;
        std::cout << " over " << summary.count << " clouds\n";
        return 0;
    });
}

// ---------------------------------------------------------------------------
// reconstruct

int cmd_reconstruct(const GlobalFlags& global, const fs::path& checkpoint_path,
                    const fs::path& manifest_path, const std::string& split,
                    const fs::path& out_dir, bool identity, const std::string& precision) {
    const std::string started = timestamp(global.deterministic);
    fs::create_directories(out_dir);
    const auto set = load_processed_set(manifest_path, split, 0, global.seed);
    if (!identity && checkpoint_path.empty())
        throw lila::ConfigError("reconstruct needs --checkpoint (or --identity)");

    return with_precision(precision, [&](auto tag) {
        using T = decltype(tag);
        std::optional<lila::train::LoadedCheckpoint<T>> loaded;
        if (!identity) loaded = lila::train::load_checkpoint<T>(checkpoint_path);

        std::vector<std::string> outputs;
        for (std::size_t i = 0; i < set.clouds.size(); ++i) {
            const auto& cloud = set.clouds[i].cloud;
            std::vector<lila::Vec3> recon;
            if (identity) {
                recon = cloud.points;  // test hook
            } else {
                std::vector<lila::pre::ProcessedCloud> one{cloud};
                const std::size_t idx[] = {0};
                auto x = lila::train::make_batch<T>(one, idx);
                lila::ad::Tape<T> tape;
                auto fwd = lila::net::forward(loaded->model, tape, x, lila::ad::Mode::eval);
                recon = lila::train::tensor_to_points(fwd.reconstruction);
            }
            lila::geo::RawPointCloud out_cloud;
            out_cloud.points = std::move(recon);
            out_cloud.source_id = set.stems[i];
            const std::string name = set.stems[i] + ".recon.xyz";
            lila::io::write_xyz(out_cloud, out_dir / name);
            outputs.push_back(name);
        }
        write_run_manifest(out_dir, "reconstruct", global,
                           {{"checkpoint", identity ? std::string("identity-hook")
                                                    : checkpoint_path.string()},
                            {"manifest", manifest_path.string()},
                            {"split", split},
                            {"precision", precision}},
                           outputs, started);
        std::cout << "reconstructed " << outputs.size() << " clouds\n";
        return 0;
    });
}

// ---------------------------------------------------------------------------
// embed

int cmd_embed(const GlobalFlags& global, const fs::path& checkpoint_path,
              const fs::path& manifest_path, const std::string& split, const fs::path& out_file,
              const std::string& precision) {
    const std::string started = timestamp(global.deterministic);
    if (out_file.has_parent_path()) fs::create_directories(out_file.parent_path());
    auto set = load_processed_set(manifest_path, split, 0, global.seed);

    return with_precision(precision, [&](auto tag) {
        using T = decltype(tag);
        auto loaded = lila::train::load_checkpoint<T>(checkpoint_path);
        const auto embeddings =
            lila::latent::embed(loaded.model, std::span(set.clouds), global.threads);
        lila::io::write_file(out_file, lila::latent::embeddings_to_csv(embeddings));
        if (out_file.has_parent_path())
            write_run_manifest(out_file.parent_path(), "embed", global,
                               {{"checkpoint", checkpoint_path.string()},
                                {"manifest", manifest_path.string()},
                                {"split", split},
                                {"precision", precision}},
                               {out_file.filename().string()}, started);
        std::cout << "embedded " << embeddings.vectors.size() << " clouds (dim "
                  << embeddings.dim() << ")\n";
        return 0;
    });
}

// ---------------------------------------------------------------------------
// classify

int cmd_classify(const GlobalFlags& global, const fs::path& train_csv, const fs::path& test_csv,
                 const fs::path& out_dir, double svm_c, std::size_t svm_epochs) {
    const std::string started = timestamp(global.deterministic);
    fs::create_directories(out_dir);
    const auto train_set = lila::latent::embeddings_from_csv(lila::io::read_file(train_csv));
    const auto test_set = lila::latent::embeddings_from_csv(lila::io::read_file(test_csv));

    lila::latent::SvmConfig cfg;
    cfg.C = svm_c;
    cfg.epochs = svm_epochs;
    cfg.seed = global.seed;
    const auto svm = lila::latent::train_linear_svm(train_set, cfg);
    const double train_acc = lila::latent::accuracy(svm, train_set);
    const double test_acc = lila::latent::accuracy(svm, test_set);

    lila::io::write_file(out_dir / "svm.json", lila::latent::svm_to_json(svm) + "\n");
    json acc;
    acc["train_accuracy"] = train_acc;
    acc["test_accuracy"] = test_acc;
    acc["n_train"] = train_set.vectors.size();
    acc["n_test"] = test_set.vectors.size();
    acc["classes"] = svm.class_names;
    lila::io::write_file(out_dir / "accuracy.json", acc.dump(2) + "\n");
    lila::io::write_file(
        out_dir / "confusion.csv",
        lila::latent::confusion_to_csv(lila::latent::confusion_matrix(svm, test_set),
                                       svm.class_names));
    write_run_manifest(out_dir, "classify", global,
                       {{"train_embeddings", train_csv.string()},
                        {"test_embeddings", test_csv.string()},
                        {"svm_c", svm_c},
                        {"svm_epochs", svm_epochs}},
                       {"svm.json", "accuracy.json", "confusion.csv"}, started);
    std::cout << "test accuracy " << test_acc << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// ablate

int cmd_ablate(const GlobalFlags& global, const fs::path& manifest_path, const fs::path& out_dir,
               const ModelFlags& model_flags, const TrainFlags& train_flags,
               const std::vector<std::string>& variant_names, std::uint64_t random_latent_seed,
               bool no_emd) {
    const std::string started = timestamp(global.deterministic);
    fs::create_directories(out_dir);
    const auto train_set = bare_clouds(
        load_processed_set(manifest_path, "train", model_flags.target_points, global.seed));
    const auto test_set = bare_clouds(
        load_processed_set(manifest_path, "test", model_flags.target_points, global.seed));

    std::vector<lila::net::SkipVariant> variants;
    for (const auto& name : variant_names) {
        const auto v = lila::net::skip_variant_from_string(name);
        if (!v) throw lila::ConfigError("unknown skip variant '" + name + "'");
        variants.push_back(*v);
    }

    return with_precision(train_flags.precision, [&](auto tag) {
        using T = decltype(tag);
        const auto base_config = model_flags.to_config(lila::derive_seed(global.seed, 0x11));
        const auto train_cfg = train_flags.to_config(lila::derive_seed(global.seed, 0x22));
        lila::train::EvalOptions eval_options;
        eval_options.compute_emd = !no_emd;
        eval_options.threads = global.threads;
        const auto rows = lila::train::run_skip_ablation<T>(
            train_set, test_set, base_config, train_cfg, variants, random_latent_seed,
            eval_options);
        lila::io::write_file(out_dir / "ablation.csv", lila::train::ablation_csv(rows));

        json config_snapshot = model_flags.snapshot();
        config_snapshot.update(train_flags.snapshot());
        config_snapshot["variants"] = variant_names;
        config_snapshot["random_latent_seed"] = random_latent_seed;
        write_run_manifest(out_dir, "ablate", global, config_snapshot, {"ablation.csv"},
                           started);
        std::cout << lila::train::ablation_csv(rows);
        return 0;
    });
}

// ---------------------------------------------------------------------------
// experiment

int cmd_experiment(const GlobalFlags& global, const std::string& kind,
                   const fs::path& manifest_path, const fs::path& out_dir,
                   const ModelFlags& model_flags, const TrainFlags& train_flags,
                   const std::vector<double>& fractions, std::size_t repeats,
                   const std::vector<std::size_t>& cloud_sizes, bool no_emd) {
    const std::string started = timestamp(global.deterministic);
    fs::create_directories(out_dir);

    return with_precision(train_flags.precision, [&](auto tag) {
        using T = decltype(tag);
        const auto base_config = model_flags.to_config(lila::derive_seed(global.seed, 0x11));
        const auto train_cfg = train_flags.to_config(lila::derive_seed(global.seed, 0x22));
        lila::train::EvalOptions eval_options;
        eval_options.compute_emd = !no_emd;

        std::vector<std::string> outputs;
        if (kind == "data_fraction") {
            const auto train_pool = bare_clouds(load_processed_set(
                manifest_path, "train", model_flags.target_points, global.seed));
            const auto test_set = bare_clouds(load_processed_set(
                manifest_path, "test", model_flags.target_points, global.seed));
            lila::train::ExperimentSpec spec;
            spec.fractions = fractions;
            spec.repeats = repeats;
            spec.threads = global.threads;
            const auto rows = lila::train::run_data_fraction_experiment<T>(
                train_pool, test_set, base_config, train_cfg, spec, eval_options);
            lila::io::write_file(out_dir / "fraction_summary.csv",
                                 lila::train::fraction_summary_csv(rows));
            lila::io::write_file(out_dir / "fraction_runs.csv",
                                 lila::train::fraction_runs_csv(rows));
            outputs = {"fraction_summary.csv", "fraction_runs.csv"};
            std::cout << lila::train::fraction_summary_csv(rows);
        } else {
            // cloud_size: raw inputs are re-downsampled at each M.
            std::vector<std::vector<lila::pre::ProcessedCloud>> train_sets, test_sets;
            const auto manifest = lila::io::load_manifest(manifest_path);
            for (std::size_t si = 0; si < cloud_sizes.size(); ++si) {
                std::vector<lila::pre::ProcessedCloud> train_side, test_side;
                std::size_t index = 0;
                for (const auto& entry : manifest.entries) {
                    ++index;
                    auto raw = lila::io::parse_xyz(
                        lila::io::read_file(resolve_entry(manifest_path, entry.path)));
                    raw.source_id = entry.path;
                    auto processed = lila::pre::processed_from_raw(
                        raw, cloud_sizes[si], lila::derive_seed(global.seed, index));
                    if (entry.split == lila::geo::Split::train)
                        train_side.push_back(std::move(processed));
                    else
                        test_side.push_back(std::move(processed));
                }
                train_sets.push_back(std::move(train_side));
                test_sets.push_back(std::move(test_side));
            }
            const auto rows = lila::train::run_cloud_size_experiment<T>(
                train_sets, test_sets, base_config, train_cfg, eval_options);
            lila::io::write_file(out_dir / "cloud_size.csv",
                                 lila::train::cloud_size_csv(rows));
            outputs = {"cloud_size.csv"};
            std::cout << lila::train::cloud_size_csv(rows);
        }

        json config_snapshot = model_flags.snapshot();
        config_snapshot.update(train_flags.snapshot());
        config_snapshot["kind"] = kind;
        config_snapshot["fractions"] = fractions;
        config_snapshot["repeats"] = repeats;
        config_snapshot["cloud_sizes"] = cloud_sizes;
        write_run_manifest(out_dir, "experiment", global, config_snapshot, outputs, started);
        return 0;
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LiLa-Net point-cloud autoencoder toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.set_config("--config", "", "Config file (key=value, [section] per subcommand)");
    app.allow_config_extras(true);

    GlobalFlags global;
    app.add_option("--seed", global.seed, "Master RNG seed")->capture_default_str();
    app.add_flag("--deterministic", global.deterministic,
                 "Pin timing/timestamp fields for byte-identical outputs");
    app.add_option("--threads", global.threads, "Worker threads for independent items")
        ->capture_default_str();

    // synth
    auto* synth = app.add_subcommand("synth", "Generate the bundled synthetic shape dataset");
    fs::path synth_out;
    std::size_t synth_per_class = 40, synth_points = 256;
    double synth_jitter = 0.005, synth_test_fraction = 0.25;
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--per-class", synth_per_class, "Clouds per shape class")
        ->capture_default_str();
    synth->add_option("--points", synth_points, "Points per cloud")->capture_default_str();
    synth->add_option("--jitter", synth_jitter, "Surface jitter sigma")->capture_default_str();
    synth->add_option("--test-fraction", synth_test_fraction, "Held-out fraction per class")
        ->capture_default_str();

    // preprocess
    auto* preprocess = app.add_subcommand(
        "preprocess", "Run the ground/crop/downsample/normalize pipeline");
    fs::path pre_in, pre_manifest, pre_out;
    lila::pre::PreprocessConfig pre_cfg;
    std::size_t mesh_samples = 8192;
    preprocess->add_option("--in", pre_in, "Directory of .xyz/.ply/.off inputs");
    preprocess->add_option("--manifest", pre_manifest, "Input manifest (JSON-lines)");
    preprocess->add_option("--out", pre_out, "Output directory")->required();
    preprocess->add_option("--ransac-iterations", pre_cfg.ransac_iterations, "RANSAC rounds")
        ->capture_default_str();
    preprocess
        ->add_option("--inlier-threshold", pre_cfg.inlier_threshold,
                     "Plane inlier distance (m)")
        ->capture_default_str();
    preprocess
        ->add_option("--min-inlier-fraction", pre_cfg.min_inlier_fraction,
                     "Minimum plane support")
        ->capture_default_str();
    preprocess->add_option("--radius", pre_cfg.crop_radius, "Cylinder crop radius (m)")
        ->capture_default_str();
    preprocess->add_option("--min-radius", pre_cfg.min_crop_radius, "Inner annulus radius (m)")
        ->capture_default_str();
    preprocess->add_flag("--allow-out-of-range-radius", pre_cfg.allow_out_of_range_radius,
                         "Permit radii outside [15,200] m");
    preprocess->add_flag("--skip-ground", pre_cfg.skip_ground_removal,
                         "Skip RANSAC ground removal");
    preprocess->add_option("--target-points", pre_cfg.target_points, "Points per cloud M")
        ->capture_default_str();
    preprocess->add_option("--mesh-samples", mesh_samples, "Surface samples for .off meshes")
        ->capture_default_str();

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the autoencoder");
    fs::path train_manifest, train_out;
    ModelFlags train_model;
    TrainFlags train_flags;
    train_cmd->add_option("--manifest", train_manifest, "Processed dataset manifest")
        ->required();
    train_cmd->add_option("--out", train_out, "Output directory")->required();
    add_model_flags(train_cmd, train_model);
    add_train_flags(train_cmd, train_flags);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint with CD/EMD");
    fs::path eval_checkpoint, eval_manifest, eval_out = ".";
    std::string eval_split = "test", eval_precision = "f32";
    bool eval_no_emd = false;
    std::size_t eval_emd_cap = 1024;
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")->required();
    eval_cmd->add_option("--manifest", eval_manifest, "Dataset manifest")->required();
    eval_cmd->add_option("--split", eval_split, "Split to evaluate")
        ->check(CLI::IsMember({"train", "test", "all"}))
        ->capture_default_str();
    eval_cmd->add_option("--out", eval_out, "Output directory")->capture_default_str();
    eval_cmd->add_flag("--no-emd", eval_no_emd, "Skip EMD (Chamfer only)");
    eval_cmd->add_option("--emd-cap", eval_emd_cap, "Max n for exact EMD")
        ->capture_default_str();
    eval_cmd->add_option("--precision", eval_precision, "Scalar precision")
        ->check(CLI::IsMember({"f32", "f64"}))
        ->capture_default_str();

    // reconstruct
    auto* recon_cmd = app.add_subcommand("reconstruct", "Write reconstructed XYZ clouds");
    fs::path recon_checkpoint, recon_manifest, recon_out;
    std::string recon_split = "all", recon_precision = "f32";
    bool recon_identity = false;
    recon_cmd->add_option("--checkpoint", recon_checkpoint, "Checkpoint file");
    recon_cmd->add_option("--manifest", recon_manifest, "Dataset manifest")->required();
    recon_cmd->add_option("--out", recon_out, "Output directory")->required();
    recon_cmd->add_option("--split", recon_split, "Split to reconstruct")
        ->check(CLI::IsMember({"train", "test", "all"}))
        ->capture_default_str();
    recon_cmd->add_option("--precision", recon_precision, "Scalar precision")
        ->check(CLI::IsMember({"f32", "f64"}))
        ->capture_default_str();
    recon_cmd->add_flag("--identity", recon_identity,
                        "Test hook: echo inputs instead of running the model");

    // embed
    auto* embed_cmd = app.add_subcommand("embed", "Extract latent vectors to CSV");
    fs::path embed_checkpoint, embed_manifest, embed_out;
    std::string embed_split = "all", embed_precision = "f32";
    embed_cmd->add_option("--checkpoint", embed_checkpoint, "Checkpoint file")->required();
    embed_cmd->add_option("--manifest", embed_manifest, "Dataset manifest")->required();
    embed_cmd->add_option("--out", embed_out, "Output CSV path")->required();
    embed_cmd->add_option("--split", embed_split, "Split to embed")
        ->check(CLI::IsMember({"train", "test", "all"}))
        ->capture_default_str();
    embed_cmd->add_option("--precision", embed_precision, "Scalar precision")
        ->check(CLI::IsMember({"f32", "f64"}))
        ->capture_default_str();

    // classify
    auto* classify_cmd =
        app.add_subcommand("classify", "Train/evaluate a linear SVM on embeddings");
    fs::path cls_train, cls_test, cls_out;
    double svm_c = 1.0;
    std::size_t svm_epochs = 100;
    classify_cmd->add_option("--train-embeddings", cls_train, "Training embeddings CSV")
        ->required();
    classify_cmd->add_option("--test-embeddings", cls_test, "Test embeddings CSV")->required();
    classify_cmd->add_option("--out", cls_out, "Output directory")->required();
    classify_cmd->add_option("--svm-c", svm_c, "SVM regularization C")->capture_default_str();
    classify_cmd->add_option("--svm-epochs", svm_epochs, "Subgradient epochs")
        ->capture_default_str();

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "Skip-connection ablation study");
    fs::path ablate_manifest, ablate_out;
    ModelFlags ablate_model;
    TrainFlags ablate_train;
    std::vector<std::string> ablate_variants{"ss1", "ss2", "ss3", "ss4"};
    std::uint64_t ablate_latent_seed = 1;
    bool ablate_no_emd = false;
    ablate_cmd->add_option("--manifest", ablate_manifest, "Processed dataset manifest")
        ->required();
    ablate_cmd->add_option("--out", ablate_out, "Output directory")->required();
    ablate_cmd->add_option("--variants", ablate_variants, "Variants to train")->delimiter(',');
    ablate_cmd
        ->add_option("--random-latent-seed", ablate_latent_seed, "Seed for the random latent")
        ->capture_default_str();
    ablate_cmd->add_flag("--no-emd", ablate_no_emd, "Skip EMD in evaluations");
    add_model_flags(ablate_cmd, ablate_model);
    add_train_flags(ablate_cmd, ablate_train);

    // experiment
    auto* exp_cmd = app.add_subcommand("experiment", "Data-fraction or cloud-size sweep");
    std::string exp_kind;
    fs::path exp_manifest, exp_out;
    ModelFlags exp_model;
    TrainFlags exp_train;
    std::vector<double> exp_fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::size_t exp_repeats = 5;
    std::vector<std::size_t> exp_sizes{256, 1024, 4096};
    bool exp_no_emd = false;
    exp_cmd->add_option("--kind", exp_kind, "Experiment kind")
        ->check(CLI::IsMember({"data_fraction", "cloud_size"}))
        ->required();
    exp_cmd->add_option("--manifest", exp_manifest, "Dataset manifest")->required();
    exp_cmd->add_option("--out", exp_out, "Output directory")->required();
    exp_cmd->add_option("--fractions", exp_fractions, "Training-data fractions")
        ->delimiter(',');
    exp_cmd->add_option("--repeats", exp_repeats, "Independent trainings per fraction")
        ->capture_default_str();
    exp_cmd->add_option("--cloud-sizes", exp_sizes, "Point counts M to sweep")->delimiter(',');
    exp_cmd->add_flag("--no-emd", exp_no_emd, "Skip EMD in evaluations");
    add_model_flags(exp_cmd, exp_model);
    add_train_flags(exp_cmd, exp_train);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // configuration failure
    }

    try {
        if (synth->parsed())
            return cmd_synth(global, synth_out, synth_per_class, synth_points, synth_jitter,
                             synth_test_fraction);
        if (preprocess->parsed())
            return cmd_preprocess(global, pre_in, pre_manifest, pre_out, pre_cfg, mesh_samples);
        if (train_cmd->parsed())
            return cmd_train(global, train_manifest, train_out, train_model, train_flags);
        if (eval_cmd->parsed())
            return cmd_eval(global, eval_checkpoint, eval_manifest, eval_split, eval_no_emd,
                            eval_emd_cap, eval_precision, eval_out);
        if (recon_cmd->parsed())
            return cmd_reconstruct(global, recon_checkpoint, recon_manifest, recon_split,
                                   recon_out, recon_identity, recon_precision);
        if (embed_cmd->parsed())
            return cmd_embed(global, embed_checkpoint, embed_manifest, embed_split, embed_out,
                             embed_precision);
        if (classify_cmd->parsed())
            return cmd_classify(global, cls_train, cls_test, cls_out, svm_c, svm_epochs);
        if (ablate_cmd->parsed())
            return cmd_ablate(global, ablate_manifest, ablate_out, ablate_model, ablate_train,
                              ablate_variants, ablate_latent_seed, ablate_no_emd);
        if (exp_cmd->parsed())
            return cmd_experiment(global, exp_kind, exp_manifest, exp_out, exp_model, exp_train,
                                  exp_fractions, exp_repeats, exp_sizes, exp_no_emd);
    } catch (const lila::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

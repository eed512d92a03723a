#include <doctest.h>

#include "lila/checkpoint.hpp"
#include "lila/experiments.hpp"
#include "lila/io.hpp"
#include "lila/synthetic.hpp"

#include "support/fd.hpp"
#include "support/tmpdir.hpp"

using namespace lila;

namespace {

net::ModelConfig toy_model(net::SkipVariant variant = net::SkipVariant::ss4,
                           std::uint64_t seed = 1) {
    net::ModelConfig cfg;
    cfg.encoder_widths = {8, 16, 32};
    cfg.latent_dim = 32;
    cfg.decoder_widths = {16, 8};
    cfg.skip = variant;
    cfg.points = 64;
    cfg.init_seed = seed;
    return cfg;
}

std::vector<pre::ProcessedCloud> toy_dataset(std::size_t count, std::size_t points,
                                             std::uint64_t seed) {
    synth::ShapeParams params;
    params.points = points;
    std::vector<pre::ProcessedCloud> out;
    for (const auto& item : synth::make_shape_dataset(count, seed, params))
        out.push_back(pre::processed_from_raw(item.cloud, points, seed));
    return out;
}

geo::DatasetManifest numbered_manifest(std::size_t n) {
    geo::DatasetManifest manifest;
    for (std::size_t i = 0; i < n; ++i)
        manifest.entries.push_back({"cloud_" + std::to_string(i) + ".xyz", "", geo::Split::train});
    return manifest;
}

}  // namespace

TEST_CASE("split_dataset floor rule, disjointness, determinism") {
    const auto manifest = numbered_manifest(4955);
    const auto [train_side, test_side] = train::split_dataset(manifest, 0.9, 3);
    CHECK(train_side.entries.size() == 4459);  // floor(0.9 * 4955)
    CHECK(test_side.entries.size() == 496);

    std::vector<std::string> all;
    for (const auto& e : train_side.entries) all.push_back(e.path);
    for (const auto& e : test_side.entries) all.push_back(e.path);
    std::sort(all.begin(), all.end());
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());

    const auto [train2, test2] = train::split_dataset(manifest, 0.9, 3);
    CHECK(train_side.entries.size() == train2.entries.size());
    for (std::size_t i = 0; i < train_side.entries.size(); ++i)
        CHECK(train_side.entries[i].path == train2.entries[i].path);

    const auto [one, other] = train::split_dataset(numbered_manifest(2), 0.5, 1);
    CHECK(one.entries.size() == 1);
    CHECK(other.entries.size() == 1);

    CHECK_THROWS_AS(train::split_dataset(numbered_manifest(3), 0.1, 1), RuntimeError);
}

TEST_CASE("chamfer loss gradient matches finite differences") {
    Rng rng(2);
    const std::int64_t B = 2, M = 12;
    std::vector<double> target(static_cast<std::size_t>(B * 3 * M));
    for (auto& v : target) v = rng.normal();
    test::Params params = {std::vector<double>(static_cast<std::size_t>(B * 3 * M))};
    for (auto& v : params[0]) v = rng.normal();

    auto build = [&](test::Params& p, ad::Tape<double>& tape) {
        auto recon = tape.leaf(ad::Tensor<double>({B, 3, M}, p[0]));
        const ad::Tensor<double> x({B, 3, M}, target);
        return train::chamfer_loss(tape, recon, x);
    };
    const auto report = test::fd_check(
        params,
        [&](test::Params& p, std::uint64_t* sig) {
            ad::Tape<double> tape;
            auto loss = build(p, tape);
            *sig = tape.pattern_signature();
            return loss.values[0];
        },
        [&](test::Params& p) {
            ad::Tape<double> tape;
            auto loss = build(p, tape);
            tape.backward(loss);
            return test::Params{tape.grad_buffer(0)};
        });
    CHECK(report.max_rel_err < 1e-4);
    CHECK(report.checked > 0);
}

TEST_CASE("training converges on a small synthetic set") {
    const auto clouds = toy_dataset(10, 64, 5);  // 30 clouds
    auto model = net::build<float>(toy_model());
    train::Trainer<float> trainer;
    trainer.cfg.epochs = 30;
    trainer.cfg.batch_size = 8;
    trainer.cfg.learning_rate = 2e-3;
    trainer.cfg.seed = 5;
    trainer.run(model, clouds);
    REQUIRE(trainer.loss_history.size() == 30);
    CHECK(trainer.loss_history.back() < 0.5 * trainer.loss_history.front());
    for (double v : trainer.loss_history) CHECK(std::isfinite(v));
}

TEST_CASE("lr=0 with frozen batch norm keeps the loss exactly constant") {
    const auto clouds = toy_dataset(4, 64, 6);
    auto model = net::build<float>(toy_model());
    train::Trainer<float> trainer;
    trainer.cfg.epochs = 4;
    trainer.cfg.batch_size = 4;
    trainer.cfg.learning_rate = 0.0;
    trainer.cfg.freeze_batch_norm = true;
    trainer.cfg.shuffle_each_epoch = false;
    trainer.run(model, clouds);
    for (std::size_t e = 1; e < trainer.loss_history.size(); ++e)
        CHECK(trainer.loss_history[e] == trainer.loss_history[0]);
}

TEST_CASE("identical seeds give identical loss histories") {
    const auto clouds = toy_dataset(6, 64, 7);
    auto run = [&] {
        auto model = net::build<float>(toy_model(net::SkipVariant::ss4, 3));
        train::Trainer<float> trainer;
        trainer.cfg.epochs = 6;
        trainer.cfg.batch_size = 4;
        trainer.cfg.learning_rate = 1e-3;
        trainer.cfg.seed = 11;
        trainer.run(model, clouds);
        return trainer.loss_history;
    };
    CHECK(run() == run());
}

TEST_CASE("training rejects mixed point counts and empty sets") {
    auto clouds = toy_dataset(2, 64, 8);
    auto odd = toy_dataset(1, 32, 9);
    clouds.push_back(odd[0]);
    auto model = net::build<float>(toy_model());
    train::Trainer<float> trainer;
    trainer.cfg.epochs = 1;
    CHECK_THROWS_AS(trainer.run(model, clouds), ConfigError);

    train::Trainer<float> trainer2;
    CHECK_THROWS_AS(trainer2.run(model, {}), RuntimeError);
}

TEST_CASE("checkpoint round trip reproduces forward outputs bit-identically") {
    const auto clouds = toy_dataset(4, 64, 10);
    auto model = net::build<float>(toy_model(net::SkipVariant::ss4, 21));
    train::Trainer<float> trainer;
    trainer.cfg.epochs = 3;
    trainer.cfg.batch_size = 4;
    trainer.cfg.learning_rate = 1e-3;
    trainer.run(model, clouds);

    test::TmpDir tmp;
    train::save_checkpoint(model, &trainer, tmp / "model.lila");
    auto loaded = train::load_checkpoint<float>(tmp / "model.lila");
    CHECK(loaded.has_optimizer);
    CHECK(loaded.trainer.epoch == 3);
    CHECK(loaded.trainer.loss_history == trainer.loss_history);

    const std::size_t idx[] = {0};
    auto x = train::make_batch<float>(clouds, idx);
    ad::Tape<float> t1, t2;
    const auto r1 = net::forward(model, t1, x, ad::Mode::eval).reconstruction;
    const auto r2 = net::forward(loaded.model, t2, x, ad::Mode::eval).reconstruction;
    CHECK(r1.values == r2.values);  // bit-identical at 32-bit
}

TEST_CASE("checkpoint rejects bad magic, version, truncation") {
    test::TmpDir tmp;
    io::write_file(tmp / "bad.lila", "XXXXsomething");
    CHECK_THROWS_WITH_AS(train::load_checkpoint<float>(tmp / "bad.lila"),
                         doctest::Contains("magic"), ParseError);

    auto model = net::build<float>(toy_model());
    train::save_checkpoint<float>(model, nullptr, tmp / "ok.lila");
    auto bytes = io::read_file(tmp / "ok.lila");
    bytes[4] = 9;  // corrupt the version field
    io::write_file(tmp / "vers.lila", bytes);
    CHECK_THROWS_WITH_AS(train::load_checkpoint<float>(tmp / "vers.lila"),
                         doctest::Contains("version"), ParseError);

    io::write_file(tmp / "trunc.lila", bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(train::load_checkpoint<float>(tmp / "trunc.lila"), ParseError);
}

TEST_CASE("resuming from a checkpoint replays the uninterrupted trajectory") {
    const auto clouds = toy_dataset(6, 64, 11);
    train::TrainConfig cfg;
    cfg.epochs = 8;
    cfg.batch_size = 4;
    cfg.learning_rate = 1e-3;
    cfg.seed = 13;

    // uninterrupted run
    auto full_model = net::build<float>(toy_model(net::SkipVariant::ss4, 31));
    train::Trainer<float> full;
    full.cfg = cfg;
    full.run(full_model, clouds);

    // stop at epoch 4, checkpoint, resume
    auto half_model = net::build<float>(toy_model(net::SkipVariant::ss4, 31));
    train::Trainer<float> half;
    half.cfg = cfg;
    half.cfg.epochs = 4;
    half.run(half_model, clouds);

    test::TmpDir tmp;
    train::save_checkpoint(half_model, &half, tmp / "half.lila");
    auto resumed = train::load_checkpoint<float>(tmp / "half.lila");
    resumed.trainer.cfg = cfg;  // full horizon again
    resumed.trainer.run(resumed.model, clouds);

    REQUIRE(resumed.trainer.loss_history.size() == full.loss_history.size());
    for (std::size_t e = 0; e < full.loss_history.size(); ++e)
        CHECK(resumed.trainer.loss_history[e] == full.loss_history[e]);
}

TEST_CASE("evaluate with the identity hook reports zero CD") {
    const auto clouds = toy_dataset(3, 64, 12);
    auto model = net::build<float>(toy_model());
    train::EvalOptions options;
    options.forward_override = [](const pre::ProcessedCloud& c) { return c.points; };
    const auto summary = train::evaluate(model, clouds, options);
    CHECK(summary.mean_cd == doctest::Approx(0.0));
    CHECK(summary.mean_emd == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(summary.count == clouds.size());
}

TEST_CASE("evaluate on an untrained model yields finite non-negative fields") {
    const auto clouds = toy_dataset(3, 64, 13);
    auto model = net::build<float>(toy_model(net::SkipVariant::ss4, 77));
    const auto summary = train::evaluate(model, clouds);
    CHECK(std::isfinite(summary.mean_cd));
    CHECK(summary.mean_cd >= 0.0);
    CHECK(std::isfinite(summary.mean_emd));
    CHECK(summary.mean_emd >= 0.0);
    CHECK(summary.mean_infer_ms >= 0.0);
}

TEST_CASE("evaluate is invariant to the thread count") {
    const auto clouds = toy_dataset(4, 64, 14);
    auto model = net::build<float>(toy_model(net::SkipVariant::ss4, 78));
    train::EvalOptions serial;
    serial.threads = 1;
    train::EvalOptions parallel;
    parallel.threads = 4;
    const auto a = train::evaluate(model, clouds, serial);
    const auto b = train::evaluate(model, clouds, parallel);
    CHECK(a.mean_cd == b.mean_cd);
    CHECK(a.mean_emd == b.mean_emd);
}

TEST_CASE("distribution summary matches a hand-checked sample") {
    // values 1..8 plus an outlier at 100
    const auto stats = train::summarize_distribution({1, 2, 3, 4, 5, 6, 7, 8, 100});
    CHECK(stats.mean == doctest::Approx(136.0 / 9.0));
    CHECK(stats.median == 5.0);
    CHECK(stats.q1 == 3.0);
    CHECK(stats.q3 == 7.0);
    CHECK(stats.outliers == 1);
    CHECK(stats.q1 <= stats.median);
    CHECK(stats.median <= stats.q3);
}

TEST_CASE("skip ablation emits one row per variant with finite metrics") {
    const auto train_set = toy_dataset(6, 64, 15);
    const auto test_set = toy_dataset(2, 64, 16);
    train::TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 6;
    cfg.learning_rate = 1e-3;
    cfg.seed = 4;
    train::EvalOptions eval_options;
    eval_options.compute_emd = false;
    const auto rows = train::run_skip_ablation<float>(
        train_set, test_set, toy_model(), cfg,
        {net::SkipVariant::ss2, net::SkipVariant::ss4}, 1, eval_options);
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) {
        CHECK(row.cd_true > 0.0);
        CHECK(std::isfinite(row.cd_random));
        CHECK(row.param_count > 0);
    }
    CHECK(rows[0].param_count < rows[1].param_count);  // ss2 < ss4

    const auto csv = train::ablation_csv(rows);
    CHECK(csv.rfind("variant,cd_true_latent,emd_true_latent,cd_random_latent,", 0) == 0);
    CHECK(csv.find("ss2,") != std::string::npos);
}

TEST_CASE("data-fraction experiment keeps one row per fraction") {
    const auto pool = toy_dataset(8, 64, 17);
    const auto test_set = toy_dataset(2, 64, 18);
    train::TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.learning_rate = 1e-3;
    cfg.seed = 21;
    train::ExperimentSpec spec;
    spec.fractions = {0.5, 1.0};
    spec.repeats = 3;
    train::EvalOptions eval_options;
    eval_options.compute_emd = false;
    const auto rows = train::run_data_fraction_experiment<float>(pool, test_set, toy_model(),
                                                                 cfg, spec, eval_options);
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) {
        CHECK(row.cd_runs.size() == 3);
        CHECK(row.cd.median >= row.cd.q1);
        CHECK(row.cd.median <= row.cd.q3);
    }
    const auto runs_csv = train::fraction_runs_csv(rows);
    CHECK(std::count(runs_csv.begin(), runs_csv.end(), '\n') == 1 + 2 * 3);
}

TEST_CASE("data-fraction repeats are invariant to worker count") {
    const auto pool = toy_dataset(6, 64, 19);
    const auto test_set = toy_dataset(2, 64, 20);
    train::TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.learning_rate = 1e-3;
    cfg.seed = 22;
    train::ExperimentSpec spec;
    spec.fractions = {1.0};
    spec.repeats = 4;
    train::EvalOptions eval_options;
    eval_options.compute_emd = false;

    spec.threads = 1;
    const auto serial = train::run_data_fraction_experiment<float>(pool, test_set, toy_model(),
                                                                   cfg, spec, eval_options);
    spec.threads = 4;
    const auto parallel = train::run_data_fraction_experiment<float>(
        pool, test_set, toy_model(), cfg, spec, eval_options);
    CHECK(serial[0].cd_runs == parallel[0].cd_runs);
}

TEST_CASE("cloud-size experiment emits one row per size") {
    std::vector<std::vector<pre::ProcessedCloud>> train_sets, test_sets;
    for (const std::size_t m : {32UL, 64UL}) {
        train_sets.push_back(toy_dataset(4, m, 23));
        test_sets.push_back(toy_dataset(2, m, 24));
    }
    train::TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    cfg.learning_rate = 1e-3;
    train::EvalOptions eval_options;
    eval_options.compute_emd = false;
    net::ModelConfig base = toy_model();
    const auto rows =
        train::run_cloud_size_experiment<float>(train_sets, test_sets, base, cfg, eval_options);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].cloud_size == 32);
    CHECK(rows[1].cloud_size == 64);
    const auto csv = train::cloud_size_csv(rows);
    CHECK(csv.rfind("M,inference_time_ms,cd,emd\n", 0) == 0);
}

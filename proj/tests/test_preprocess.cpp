#include <doctest.h>

#include <cmath>

#include "lila/preprocess.hpp"
#include "lila/rng.hpp"
#include "lila/synthetic.hpp"

using namespace lila;

namespace {

geo::RawPointCloud cloud_of(std::vector<Vec3> pts) {
    geo::RawPointCloud c;
    c.points = std::move(pts);
    return c;
}

double angle_between(const Vec3& a, const Vec3& b) {
    const double c = std::abs(a.dot(b)) / (a.norm() * b.norm());
    return std::acos(std::min(1.0, c)) * 180.0 / M_PI;
}

}  // namespace

TEST_CASE("fit_ground_plane recovers a dominant z=0 plane") {
    Rng rng(1);
    geo::RawPointCloud cloud;
    for (int i = 0; i < 1000; ++i)
        cloud.points.push_back({rng.uniform(-10, 10), rng.uniform(-10, 10), 0.0});
    for (int i = 0; i < 100; ++i)
        cloud.points.push_back({rng.uniform(-10, 10), rng.uniform(-10, 10),
                                rng.uniform(1.0, 2.0)});

    pre::PreprocessConfig cfg;
    cfg.inlier_threshold = 0.1;
    cfg.seed = 3;
    const auto fit = pre::fit_ground_plane(cloud, cfg);
    REQUIRE(fit.has_value());
    CHECK(angle_between(fit->plane.normal, {0, 0, 1}) < 1.0);

    std::size_t plane_hits = 0, elevated_hits = 0;
    for (std::size_t i = 0; i < 1000; ++i) plane_hits += fit->inlier_mask[i];
    for (std::size_t i = 1000; i < cloud.points.size(); ++i)
        elevated_hits += fit->inlier_mask[i];
    CHECK(plane_hits >= 990);
    CHECK(elevated_hits == 0);
}

TEST_CASE("fit_ground_plane recovers a tilted noiseless plane within 1 degree") {
    // z = 0.05 x, tilt about 2.86 degrees
    Rng rng(2);
    geo::RawPointCloud cloud;
    for (int i = 0; i < 2000; ++i) {
        const double x = rng.uniform(-20, 20), y = rng.uniform(-20, 20);
        cloud.points.push_back({x, y, 0.05 * x});
    }
    pre::PreprocessConfig cfg;
    cfg.seed = 11;
    const auto fit = pre::fit_ground_plane(cloud, cfg);
    REQUIRE(fit.has_value());
    const Vec3 expected{-0.05, 0.0, 1.0};
    CHECK(angle_between(fit->plane.normal, expected) < 1.0);
}

TEST_CASE("fit_ground_plane returns no_plane on unstructured data") {
    Rng rng(5);
    geo::RawPointCloud cloud;
    // uniform in the unit ball: no plane can reach 50% support at 0.05 m
    while (cloud.points.size() < 500) {
        const Vec3 p{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        if (p.norm() <= 1.0) cloud.points.push_back(p);
    }
    pre::PreprocessConfig cfg;
    cfg.min_inlier_fraction = 0.5;
    cfg.inlier_threshold = 0.05;
    cfg.seed = 7;
    CHECK_FALSE(pre::fit_ground_plane(cloud, cfg).has_value());
}

TEST_CASE("fit_ground_plane needs three points") {
    pre::PreprocessConfig cfg;
    CHECK_THROWS_AS(pre::fit_ground_plane(cloud_of({{0, 0, 0}, {1, 0, 0}}), cfg),
                    RuntimeError);
}

TEST_CASE("fit_ground_plane is deterministic per seed") {
    const auto scene = synth::make_street_scene(17);
    pre::PreprocessConfig cfg;
    cfg.seed = 29;
    const auto a = pre::fit_ground_plane(scene.cloud, cfg);
    const auto b = pre::fit_ground_plane(scene.cloud, cfg);
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK(a->plane.normal.x == b->plane.normal.x);
    CHECK(a->plane.offset == b->plane.offset);
    CHECK(a->inlier_mask == b->inlier_mask);
}

TEST_CASE("remove_ground keeps exactly the far points in order") {
    const pre::Plane plane{{0, 0, 1}, 0.0};
    const auto out = pre::remove_ground(cloud_of({{0, 0, 0}, {0, 0, 1}}), plane, 0.1);
    REQUIRE(out.points.size() == 1);
    CHECK(out.points[0].z == 1.0);

    CHECK_THROWS_AS(pre::remove_ground(cloud_of({{0, 0, 0}, {1, 1, 0}}), plane, 0.1),
                    RuntimeError);  // everything on the plane

    const auto all_far = pre::remove_ground(cloud_of({{0, 0, 2}, {0, 0, 3}}), plane, 0.1);
    CHECK(all_far.points.size() == 2);
}

TEST_CASE("cylinder_crop keeps the closed boundary") {
    const auto out = pre::cylinder_crop(cloud_of({{10, 0, 5}, {20, 0, 0}}), 15.0);
    REQUIRE(out.points.size() == 1);
    CHECK(out.points[0].x == 10.0);

    // point exactly at the radius is retained
    const auto edge = pre::cylinder_crop(cloud_of({{15, 0, -3}}), 15.0);
    CHECK(edge.points.size() == 1);

    // radius covering the whole cloud is the identity
    Rng rng(3);
    geo::RawPointCloud wide;
    for (int i = 0; i < 100; ++i)
        wide.points.push_back({rng.uniform(-150, 150), rng.uniform(-20, 20), rng.normal()});
    const auto same = pre::cylinder_crop(wide, 200.0);
    CHECK(same.points.size() == wide.points.size());

    CHECK_THROWS_AS(pre::cylinder_crop(cloud_of({{30, 0, 0}}), 15.0), RuntimeError);
}

TEST_CASE("cylinder_crop is idempotent and monotone in radius") {
    Rng rng(4);
    geo::RawPointCloud cloud;
    for (int i = 0; i < 500; ++i)
        cloud.points.push_back({rng.uniform(-100, 100), rng.uniform(-100, 100), rng.normal()});
    const auto once = pre::cylinder_crop(cloud, 50.0);
    const auto twice = pre::cylinder_crop(once, 50.0);
    CHECK(once.points.size() == twice.points.size());

    const auto smaller = pre::cylinder_crop(cloud, 30.0);
    CHECK(smaller.points.size() <= once.points.size());
    for (const auto& p : smaller.points)
        CHECK(std::sqrt(p.x * p.x + p.y * p.y) <= 30.0);
}

TEST_CASE("random_downsample without replacement and with padding") {
    Rng rng(5);
    geo::RawPointCloud cloud;
    for (int i = 0; i < 5000; ++i)
        cloud.points.push_back({static_cast<double>(i), 0, 0});

    const auto down = pre::random_downsample(cloud, 2048, 9);
    REQUIRE(down.points.size() == 2048);
    std::vector<double> xs;
    for (const auto& p : down.points) xs.push_back(p.x);
    std::sort(xs.begin(), xs.end());
    CHECK(std::adjacent_find(xs.begin(), xs.end()) == xs.end());  // distinct

    // N == M: multiset equality with the input
    geo::RawPointCloud small;
    for (int i = 0; i < 64; ++i) small.points.push_back({static_cast<double>(i), 1, 2});
    const auto same = pre::random_downsample(small, 64, 9);
    std::vector<double> a, b;
    for (const auto& p : small.points) a.push_back(p.x);
    for (const auto& p : same.points) b.push_back(p.x);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);

    // N < M: all originals kept plus duplicates of originals
    geo::RawPointCloud tiny;
    for (int i = 0; i < 1000; ++i) tiny.points.push_back({static_cast<double>(i), 0, 0});
    const auto padded = pre::random_downsample(tiny, 2048, 9);
    REQUIRE(padded.points.size() == 2048);
    std::vector<int> counts(1000, 0);
    for (const auto& p : padded.points) {
        const int idx = static_cast<int>(p.x);
        REQUIRE(idx >= 0);
        REQUIRE(idx < 1000);
        ++counts[static_cast<std::size_t>(idx)];
    }
    for (int c : counts) CHECK(c >= 1);
}

TEST_CASE("normalize_unit_sphere examples and invariants") {
    const auto two = pre::normalize_unit_sphere(cloud_of({{1, 1, 1}, {3, 1, 1}}));
    CHECK(two.centroid.x == doctest::Approx(2.0));
    CHECK(two.points[0].x == doctest::Approx(-1.0));
    CHECK(two.points[1].x == doctest::Approx(1.0));
    CHECK(two.points[0].y == doctest::Approx(0.0));

    // coincident-points guard
    const auto single = pre::normalize_unit_sphere(cloud_of({{5, 2, -3}}));
    CHECK(single.points[0].norm() == doctest::Approx(0.0));
    CHECK(single.scale == 1.0);

    Rng rng(8);
    geo::RawPointCloud cloud;
    for (int i = 0; i < 1000; ++i)
        cloud.points.push_back({rng.normal() * 4, rng.normal() * 4, rng.normal() * 4});
    const auto norm = pre::normalize_unit_sphere(cloud);
    Vec3 mean{0, 0, 0};
    double max_r = 0.0;
    for (const auto& p : norm.points) {
        mean += p;
        max_r = std::max(max_r, p.norm());
    }
    mean = mean / 1000.0;
    CHECK(mean.norm() < 1e-6);
    CHECK(max_r <= 1.0);
    CHECK(max_r >= 1.0 - 1e-6);
}

TEST_CASE("normalize_unit_sphere is idempotent and translation/scale invariant") {
    Rng rng(9);
    geo::RawPointCloud cloud;
    for (int i = 0; i < 300; ++i)
        cloud.points.push_back({rng.normal(), rng.normal(), rng.normal()});

    const auto once = pre::normalize_unit_sphere(cloud);
    geo::RawPointCloud as_cloud;
    as_cloud.points = once.points;
    const auto twice = pre::normalize_unit_sphere(as_cloud);
    for (std::size_t i = 0; i < once.points.size(); ++i)
        CHECK((once.points[i] - twice.points[i]).norm() < 1e-9);

    geo::RawPointCloud moved;
    const Vec3 t{123.0, -45.0, 9.0};
    for (const auto& p : cloud.points) moved.points.push_back(p * 3.7 + t);
    const auto from_moved = pre::normalize_unit_sphere(moved);
    for (std::size_t i = 0; i < once.points.size(); ++i)
        CHECK((once.points[i] - from_moved.points[i]).norm() < 1e-9);
}

TEST_CASE("preprocess_pipeline on a synthetic street scene") {
    const auto scene = synth::make_street_scene(33);
    pre::PreprocessConfig cfg;
    cfg.target_points = 512;
    cfg.seed = 12;
    cfg.allow_out_of_range_radius = false;
    cfg.crop_radius = 25.0;

    const auto result = pre::preprocess_pipeline(scene.cloud, cfg);
    CHECK(result.cloud.points.size() == 512);
    CHECK(result.ground_plane_found);
    REQUIRE(result.stages.size() == 4);
    CHECK(result.stages[0].stage == "ground_removal");
    CHECK(result.stages[0].plane.has_value());
    CHECK(result.stages[0].points_out < result.stages[0].points_in);
    CHECK(result.stages[3].points_out == 512);

    // no surviving point was within the inlier threshold of the fitted plane
    const auto& plane = *result.stages[0].plane;
    geo::RawPointCloud after_ground;
    after_ground.points = scene.cloud.points;
    const auto removed = pre::remove_ground(after_ground, plane, cfg.inlier_threshold);
    for (const auto& p : removed.points) CHECK(plane.distance(p) > cfg.inlier_threshold);
}

TEST_CASE("pipeline flags no_plane and proceeds") {
    Rng rng(14);
    geo::RawPointCloud blob;
    for (int i = 0; i < 400; ++i)
        blob.points.push_back({rng.normal() * 3, rng.normal() * 3, rng.normal() * 3});
    pre::PreprocessConfig cfg;
    cfg.target_points = 128;
    cfg.min_inlier_fraction = 0.6;
    cfg.inlier_threshold = 0.02;
    cfg.crop_radius = 15.0;
    const auto result = pre::preprocess_pipeline(blob, cfg);
    CHECK_FALSE(result.ground_plane_found);
    CHECK_FALSE(result.stages[0].plane.has_value());
    CHECK(result.stages[0].points_in == result.stages[0].points_out);
    CHECK(result.cloud.points.size() == 128);
}

TEST_CASE("pipeline determinism") {
    const auto scene = synth::make_street_scene(44);
    pre::PreprocessConfig cfg;
    cfg.target_points = 256;
    cfg.seed = 77;
    const auto a = pre::preprocess_pipeline(scene.cloud, cfg);
    const auto b = pre::preprocess_pipeline(scene.cloud, cfg);
    REQUIRE(a.cloud.points.size() == b.cloud.points.size());
    for (std::size_t i = 0; i < a.cloud.points.size(); ++i) {
        CHECK(a.cloud.points[i].x == b.cloud.points[i].x);
        CHECK(a.cloud.points[i].y == b.cloud.points[i].y);
        CHECK(a.cloud.points[i].z == b.cloud.points[i].z);
    }
}

TEST_CASE("pipeline failure names the stage") {
    geo::RawPointCloud far_cloud;
    for (int i = 0; i < 10; ++i)
        far_cloud.points.push_back({300.0 + i, 0, 0});
    pre::PreprocessConfig cfg;
    cfg.skip_ground_removal = true;
    cfg.crop_radius = 15.0;
    try {
        pre::preprocess_pipeline(far_cloud, cfg);
        FAIL("expected stage error");
    } catch (const RuntimeError& e) {
        CHECK(std::string(e.what()).find("cylinder_crop") != std::string::npos);
    }
}

TEST_CASE("config validation") {
    pre::PreprocessConfig cfg;
    cfg.crop_radius = 10.0;  // outside [15,200]
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.allow_out_of_range_radius = true;
    CHECK_NOTHROW(cfg.validate());
    cfg.min_inlier_fraction = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("stage report serializes to JSON") {
    const auto scene = synth::make_street_scene(55);
    pre::PreprocessConfig cfg;
    cfg.target_points = 128;
    const auto result = pre::preprocess_pipeline(scene.cloud, cfg);
    const auto json = pre::report_to_json(result);
    CHECK(json.find("\"stage\": \"ground_removal\"") != std::string::npos);
    CHECK(json.find("\"points_in\"") != std::string::npos);
    CHECK(json.find("\"normal\"") != std::string::npos);
}

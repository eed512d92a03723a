#include <doctest.h>

#include "lila/metrics.hpp"
#include "lila/rng.hpp"

using namespace lila;

namespace {

std::vector<Vec3> random_cloud(Rng& rng, std::size_t n, double scale = 1.0) {
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = {scale * rng.normal(), scale * rng.normal(), scale * rng.normal()};
    return pts;
}

// Brute-force nearest neighbor with the same tie rule as the KdTree.
std::size_t brute_nearest(const std::vector<Vec3>& pts, const Vec3& q) {
    std::size_t best = 0;
    double best_d2 = dist2(pts[0], q);
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double d2 = dist2(pts[i], q);
        if (d2 < best_d2) {
            best_d2 = d2;
            best = i;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("kdtree nearest equals brute force with lowest-index ties") {
    Rng rng(11);
    for (const std::size_t n : {1UL, 5UL, 16UL, 17UL, 100UL, 1000UL}) {
        auto pts = random_cloud(rng, n);
        // inject exact duplicates to exercise the tie rule
        if (n >= 16) {
            pts[7] = pts[3];
            pts[12] = pts[3];
        }
        metrics::KdTree tree(pts);
        for (int q = 0; q < 200; ++q) {
            const Vec3 query{rng.normal(), rng.normal(), rng.normal()};
            const auto hit = tree.nearest(query);
            CHECK(hit.index == brute_nearest(pts, query));
        }
        // querying the duplicated point itself must return the lowest index
        if (n >= 16) CHECK(tree.nearest(pts[3]).index == 3);
    }
}

TEST_CASE("chamfer hand-checked examples") {
    const std::vector<Vec3> x1{{0, 0, 0}};
    CHECK(metrics::chamfer(x1, x1) == 0.0);

    const std::vector<Vec3> r1{{1, 0, 0}};
    CHECK(metrics::chamfer(x1, r1) == doctest::Approx(2.0));

    const std::vector<Vec3> x2{{0, 0, 0}, {2, 0, 0}};
    // (1 + 1)/2 + 1 = 2
    CHECK(metrics::chamfer(x2, r1) == doctest::Approx(2.0));
}

TEST_CASE("chamfer_accelerated matches brute force") {
    Rng rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(256);
        const std::size_t m = 1 + rng.uniform_index(256);
        const auto x = random_cloud(rng, n);
        const auto r = random_cloud(rng, m);
        const double brute = metrics::chamfer(x, r);
        const double accel = metrics::chamfer_accelerated(x, r);
        CHECK(std::abs(accel - brute) <= 1e-9 * std::max(1.0, std::abs(brute)));
    }
}

TEST_CASE("chamfer ignores duplicate points in R") {
    Rng rng(22);
    const auto x = random_cloud(rng, 40);
    auto r = random_cloud(rng, 40);
    const double base = metrics::chamfer_accelerated(x, r);
    r.push_back(r[0]);
    r.push_back(r[17]);
    // duplicates change only the R-side mean weight, not any minimum;
    // recompute the expected value directly
    const double dup = metrics::chamfer_accelerated(x, r);
    const double brute = metrics::chamfer(x, r);
    CHECK(dup == doctest::Approx(brute));
    CHECK(base == doctest::Approx(metrics::chamfer(x, std::vector<Vec3>(r.begin(), r.end() - 2))));
}

TEST_CASE("chamfer symmetry, translation invariance, scaling law") {
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const auto x = random_cloud(rng, 30);
        const auto r = random_cloud(rng, 25);
        const double cd = metrics::chamfer(x, r);
        CHECK(std::abs(cd - metrics::chamfer(r, x)) < 1e-12);

        const Vec3 t{rng.normal() * 10, rng.normal() * 10, rng.normal() * 10};
        auto xt = x;
        auto rt = r;
        for (auto& p : xt) p += t;
        for (auto& p : rt) p += t;
        CHECK(metrics::chamfer(xt, rt) == doctest::Approx(cd).epsilon(1e-9));

        const double alpha = 0.3 + rng.uniform01() * 3.0;
        auto xs = x;
        auto rs = r;
        for (auto& p : xs) p = p * alpha;
        for (auto& p : rs) p = p * alpha;
        // squared-distance form scales quadratically
        CHECK(metrics::chamfer(xs, rs) == doctest::Approx(alpha * alpha * cd).epsilon(1e-9));
    }
}

TEST_CASE("emd_exact equals brute force enumeration for n <= 6") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(6);
        const auto x = random_cloud(rng, n);
        const auto r = random_cloud(rng, n);
        const double exact = metrics::emd_exact(x, r);
        const double brute = metrics::emd_bruteforce(x, r);
        CHECK(std::abs(exact - brute) < 1e-12);
    }
}

TEST_CASE("emd examples") {
    const std::vector<Vec3> x{{0, 0, 0}, {0, 1, 0}};
    const std::vector<Vec3> r{{1, 0, 0}, {1, 1, 0}};
    CHECK(metrics::emd_exact(x, r) == doctest::Approx(1.0));

    const std::vector<Vec3> a{{0, 0, 0}, {1, 0, 0}};
    const std::vector<Vec3> b{{1, 0, 0}, {0, 0, 0}};
    CHECK(metrics::emd_exact(a, b) == doctest::Approx(0.0));

    // single pair degenerates to the plain distance
    CHECK(metrics::emd_exact(std::vector<Vec3>{{0, 0, 0}}, std::vector<Vec3>{{3, 4, 0}}) ==
          doctest::Approx(5.0));

    // collinear triple against its shifted copy moves each point by d
    const std::vector<Vec3> c{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    std::vector<Vec3> cs = c;
    for (auto& p : cs) p.x += 0.25;
    CHECK(metrics::emd_bruteforce(c, cs) == doctest::Approx(0.25));
}

TEST_CASE("emd rejects unequal cardinalities and oversized exact calls") {
    const std::vector<Vec3> x{{0, 0, 0}, {1, 0, 0}};
    const std::vector<Vec3> r{{0, 0, 0}};
    CHECK_THROWS_AS(metrics::emd_exact(x, r), RuntimeError);

    Rng rng(1);
    const auto big_x = random_cloud(rng, 10);
    const auto big_r = random_cloud(rng, 10);
    CHECK_THROWS_WITH_AS(metrics::emd_exact(big_x, big_r, 8), doctest::Contains("emd_approx"),
                         RuntimeError);
}

TEST_CASE("emd scaling law is linear") {
    Rng rng(41);
    const auto x = random_cloud(rng, 20);
    const auto r = random_cloud(rng, 20);
    const double base = metrics::emd_exact(x, r);
    const double alpha = 2.5;
    auto xs = x;
    auto rs = r;
    for (auto& p : xs) p = p * alpha;
    for (auto& p : rs) p = p * alpha;
    CHECK(metrics::emd_exact(xs, rs) == doctest::Approx(alpha * base).epsilon(1e-9));
}

TEST_CASE("emd_approx tracks the exact value") {
    Rng rng(51);
    for (const std::size_t n : {8UL, 64UL, 256UL}) {
        const auto x = random_cloud(rng, n);
        const auto r = random_cloud(rng, n);
        const double exact = metrics::emd_exact(x, r);
        const auto approx = metrics::emd_approx(x, r);
        CHECK(approx.value >= exact - 1e-9);  // assignments upper-bound the optimum
        CHECK(std::abs(approx.value - exact) / exact < 0.01);
    }
}

TEST_CASE("emd_approx on identical sets returns zero") {
    Rng rng(52);
    const auto x = random_cloud(rng, 128);
    auto shuffled = x;
    rng.shuffle(shuffled);
    CHECK(metrics::emd_approx(x, shuffled).value == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("emd_approx value is non-increasing as target epsilon decreases") {
    Rng rng(53);
    const auto x = random_cloud(rng, 96);
    const auto r = random_cloud(rng, 96);
    double prev = std::numeric_limits<double>::max();
    for (const double eps : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
        const double value = metrics::emd_approx(x, r, eps).value;
        CHECK(value <= prev + 1e-12);
        prev = value;
    }
}

TEST_CASE("emd_approx budget exhaustion raises BudgetError with a partial value") {
    Rng rng(54);
    const auto x = random_cloud(rng, 64);
    const auto r = random_cloud(rng, 64);
    CHECK_THROWS_AS(metrics::emd_approx(x, r, 0.0, 10), metrics::BudgetError);
    try {
        metrics::emd_approx(x, r, 0.0, 10);
    } catch (const metrics::BudgetError& e) {
        CHECK(std::isfinite(e.partial_value()));
    }
}

TEST_CASE("identity of indiscernibles at multiset level") {
    Rng rng(61);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng.uniform_index(5);
        auto x = random_cloud(rng, n);
        auto perm = x;
        rng.shuffle(perm);
        CHECK(metrics::chamfer(x, perm) == doctest::Approx(0.0));
        CHECK(metrics::emd_bruteforce(x, perm) == doctest::Approx(0.0));

        auto different = x;
        different[0].x += 0.5;
        CHECK(metrics::chamfer(x, different) > 0.0);
        CHECK(metrics::emd_bruteforce(x, different) > 0.0);
    }
}

TEST_CASE("evaluate_pair reports mode and timing") {
    Rng rng(71);
    const auto x = random_cloud(rng, 64);
    const auto r = random_cloud(rng, 64);
    const auto report = metrics::evaluate_pair(x, r);
    CHECK(report.cd >= 0.0);
    CHECK(report.emd >= 0.0);
    CHECK(report.emd_mode == metrics::EmdMode::exact);
    CHECK(report.wall_time_s >= 0.0);
    const auto json = metrics::report_to_json(report);
    CHECK(json.find("\"emd_mode\": \"exact\"") != std::string::npos);

    const auto big_x = random_cloud(rng, 40);
    const auto big_r = random_cloud(rng, 40);
    const auto approx_report = metrics::evaluate_pair(big_x, big_r, 16);
    CHECK(approx_report.emd_mode == metrics::EmdMode::approx);
}

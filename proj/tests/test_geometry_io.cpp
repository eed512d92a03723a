#include <doctest.h>

#include "lila/io.hpp"
#include "lila/rng.hpp"
#include "lila/synthetic.hpp"

#include "support/tmpdir.hpp"

using namespace lila;

TEST_CASE("parse_off minimal file") {
    const auto mesh = io::parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
    CHECK(mesh.vertices.size() == 3);
    CHECK(mesh.faces.size() == 1);
}

TEST_CASE("parse_off header variants") {
    // counts glued to the magic (seen in ModelNet exports)
    const auto glued = io::parse_off("OFF 3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
    CHECK(glued.vertices.size() == 3);
    // no magic at all
    const auto bare = io::parse_off("3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
    CHECK(bare.faces.size() == 1);
    // comments skipped
    const auto commented =
        io::parse_off("OFF\n# a comment\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
    CHECK(commented.vertices.size() == 3);
}

TEST_CASE("parse_off rejects out-of-range indices naming the line") {
    try {
        io::parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 5\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("out of range") != std::string::npos);
        CHECK(e.line() == 6);
    }
}

TEST_CASE("parse_off fan-triangulates polygon faces") {
    const auto mesh =
        io::parse_off("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n");
    REQUIRE(mesh.faces.size() == 2);
    CHECK(mesh.faces[0] == std::array<std::uint32_t, 3>{0, 1, 2});
    CHECK(mesh.faces[1] == std::array<std::uint32_t, 3>{0, 2, 3});
}

TEST_CASE("parse_off error cases") {
    CHECK_THROWS_AS(io::parse_off(""), ParseError);
    CHECK_THROWS_AS(io::parse_off("OFF\nx 1 0\n"), ParseError);
    CHECK_THROWS_AS(io::parse_off("OFF\n1 0 0\n0 0 zz\n"), ParseError);
    CHECK_THROWS_AS(io::parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n2 0 1\n"), ParseError);
}

TEST_CASE("sample_mesh_surface stays inside the triangle") {
    geo::TriangleMesh tri;
    tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    tri.faces = {{0, 1, 2}};
    const auto cloud = geo::sample_mesh_surface(tri, 1000, 5);
    REQUIRE(cloud.points.size() == 1000);
    for (const auto& p : cloud.points) {
        CHECK(p.x >= -1e-12);
        CHECK(p.y >= -1e-12);
        CHECK(p.x + p.y <= 1.0 + 1e-12);
        CHECK(p.z == 0.0);
    }
}

TEST_CASE("sample_mesh_surface weights triangles by area") {
    // areas 1 and 3 -> the second triangle should absorb ~75% of samples
    geo::TriangleMesh mesh;
    mesh.vertices = {{0, 0, 0}, {2, 0, 0}, {0, 1, 0}, {10, 0, 0}, {16, 0, 0}, {10, 1, 0}};
    mesh.faces = {{0, 1, 2}, {3, 4, 5}};
    const auto cloud = geo::sample_mesh_surface(mesh, 100000, 9);
    std::size_t second = 0;
    for (const auto& p : cloud.points) second += p.x >= 5.0;
    const double fraction = static_cast<double>(second) / 100000.0;
    CHECK(fraction == doctest::Approx(0.75).epsilon(0.013));
}

TEST_CASE("sample_mesh_surface is deterministic per seed") {
    geo::TriangleMesh tri;
    tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    tri.faces = {{0, 1, 2}};
    const auto a = geo::sample_mesh_surface(tri, 500, 42);
    const auto b = geo::sample_mesh_surface(tri, 500, 42);
    REQUIRE(a.points.size() == b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        CHECK(a.points[i].x == b.points[i].x);
        CHECK(a.points[i].y == b.points[i].y);
        CHECK(a.points[i].z == b.points[i].z);
    }
}

TEST_CASE("sample_mesh_surface rejects zero-area meshes") {
    geo::TriangleMesh degenerate;
    degenerate.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    degenerate.faces = {{0, 1, 2}};
    CHECK_THROWS_AS(geo::sample_mesh_surface(degenerate, 10, 0), RuntimeError);
}

TEST_CASE("per-triangle counts pass a chi-squared test, independent of face order") {
    // four triangles with areas 0.5, 1, 1.5, 2 (total 5)
    geo::TriangleMesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0},   {2, 0, 0}, {4, 0, 0}, {2, 1, 0},
                     {6, 0, 0}, {9, 0, 0}, {6, 1, 0},   {11, 0, 0}, {15, 0, 0}, {11, 1, 0}};
    mesh.faces = {{0, 1, 2}, {3, 4, 5}, {6, 7, 8}, {9, 10, 11}};
    const double areas[4] = {0.5, 1.0, 1.5, 2.0};
    const double total_area = 5.0;
    const std::size_t n = 10000;

    auto chi_squared = [&](const geo::TriangleMesh& m, std::uint64_t seed) {
        const auto cloud = geo::sample_mesh_surface(m, n, seed);
        std::size_t counts[4] = {0, 0, 0, 0};
        for (const auto& p : cloud.points) {
            if (p.x < 1.5)
                ++counts[0];
            else if (p.x < 5.0)
                ++counts[1];
            else if (p.x < 10.0)
                ++counts[2];
            else
                ++counts[3];
        }
        double chi2 = 0.0;
        for (int k = 0; k < 4; ++k) {
            const double expected = static_cast<double>(n) * areas[k] / total_area;
            const double delta = static_cast<double>(counts[k]) - expected;
            chi2 += delta * delta / expected;
        }
        return chi2;
    };

    // chi-squared critical value, 3 dof, p = 0.01
    const double critical = 11.345;
    CHECK(chi_squared(mesh, 123) < critical);

    geo::TriangleMesh permuted = mesh;
    std::reverse(permuted.faces.begin(), permuted.faces.end());
    CHECK(chi_squared(permuted, 123) < critical);
}

TEST_CASE("parse_xyz basics") {
    const auto cloud = io::parse_xyz("0 0 0\n1 2 3\n");
    REQUIRE(cloud.points.size() == 2);
    CHECK(cloud.points[1].y == 2.0);

    // extra intensity column dropped
    const auto with_extra = io::parse_xyz("1 2 3 0.5\n");
    REQUIRE(with_extra.points.size() == 1);
    CHECK(with_extra.points[0].z == 3.0);

    CHECK_THROWS_AS(io::parse_xyz("1 2\n"), ParseError);
    CHECK_THROWS_AS(io::parse_xyz("a b c\n"), ParseError);
    CHECK_THROWS_AS(io::parse_xyz(""), RuntimeError);  // violates N >= 1
}

TEST_CASE("parse_ply_ascii") {
    const char* ply =
        "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
        "property float z\nend_header\n0 0 0\n1 2 3\n";
    const auto cloud = io::parse_ply_ascii(ply);
    REQUIRE(cloud.points.size() == 2);
    CHECK(cloud.points[1].x == 1.0);

    const char* empty =
        "ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\n"
        "property float z\nend_header\n";
    CHECK_THROWS_AS(io::parse_ply_ascii(empty), ParseError);

    CHECK_THROWS_AS(io::parse_ply_ascii("ply\nformat ascii 1.0\nend_header\n"), ParseError);
    CHECK_THROWS_AS(io::parse_ply_ascii("not a ply"), ParseError);
}

TEST_CASE("parse_ply_ascii with extra properties and elements") {
    const char* ply =
        "ply\nformat ascii 1.0\ncomment made up\nelement vertex 2\nproperty float x\n"
        "property float y\nproperty float z\nproperty float intensity\nelement face 1\n"
        "property list uchar int vertex_indices\nend_header\n0 0 1 9\n4 5 6 9\n3 0 1 0\n";
    const auto cloud = io::parse_ply_ascii(ply);
    REQUIRE(cloud.points.size() == 2);
    CHECK(cloud.points[1].z == 6.0);
}

TEST_CASE("write_xyz formats with 9 significant digits") {
    geo::RawPointCloud cloud;
    cloud.points = {{1.5, -2.0, 0.0}};
    CHECK(io::format_xyz(cloud) == "1.5 -2 0\n");
}

TEST_CASE("write/parse xyz round trip on 1000 random points") {
    Rng rng(7);
    geo::RawPointCloud cloud;
    for (int i = 0; i < 1000; ++i)
        cloud.points.push_back({rng.normal(), rng.normal(), rng.normal()});

    test::TmpDir tmp;
    io::write_xyz(cloud, tmp / "cloud.xyz");
    const auto back = io::parse_xyz(io::read_file(tmp / "cloud.xyz"));
    REQUIRE(back.points.size() == cloud.points.size());
    double max_err = 0.0;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        max_err = std::max(max_err, std::abs(back.points[i].x - cloud.points[i].x));
        max_err = std::max(max_err, std::abs(back.points[i].y - cloud.points[i].y));
        max_err = std::max(max_err, std::abs(back.points[i].z - cloud.points[i].z));
    }
    CHECK(max_err < 1e-8);
}

TEST_CASE("write_xyz to a missing directory raises IoError") {
    geo::RawPointCloud cloud;
    cloud.points = {{0, 0, 0}};
    CHECK_THROWS_AS(io::write_xyz(cloud, "/nonexistent_dir_lila/cloud.xyz"), IoError);
}

TEST_CASE("manifest round trip and validation") {
    geo::DatasetManifest manifest;
    manifest.entries = {{"a.xyz", "sphere", geo::Split::train},
                        {"b.xyz", "", geo::Split::test},
                        {"c.xyz", "cube", geo::Split::train}};
    const auto text = io::format_manifest(manifest);
    const auto back = io::parse_manifest(text);
    REQUIRE(back.entries.size() == 3);
    CHECK(back.entries[0].label == "sphere");
    CHECK(back.entries[1].label.empty());
    CHECK(back.entries[1].split == geo::Split::test);

    geo::DatasetManifest dup;
    dup.entries = {{"a.xyz", "", geo::Split::train}, {"a.xyz", "", geo::Split::test}};
    CHECK_THROWS_AS(dup.validate(), ConfigError);

    CHECK_THROWS_AS(io::parse_manifest("{\"path\":\"x\",\"split\":\"validation\"}\n"),
                    ParseError);
    CHECK_THROWS_AS(io::parse_manifest("{\"label\":\"no-path\"}\n"), ParseError);
}

TEST_CASE("cloud validation rejects non-finite coordinates") {
    geo::RawPointCloud cloud;
    cloud.points = {{0, 0, std::numeric_limits<double>::quiet_NaN()}};
    CHECK_THROWS_AS(cloud.validate(), RuntimeError);
}

TEST_CASE("synthetic shapes are deterministic and labeled") {
    const auto a = synth::make_shape_dataset(2, 99);
    const auto b = synth::make_shape_dataset(2, 99);
    REQUIRE(a.size() == 6);
    CHECK(a[0].label == "sphere");
    CHECK(a[1].label == "cube");
    CHECK(a[2].label == "plane");
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].cloud.points.size() == b[i].cloud.points.size());
        CHECK(a[i].cloud.points[0].x == b[i].cloud.points[0].x);
    }
}

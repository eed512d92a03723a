#include "lila/synthetic.hpp"

#include <cmath>

#include "lila/rng.hpp"

namespace lila::synth {
namespace {

// Rotation from a uniformly random axis and angle.
struct Rotation {
    double m[3][3];
    Vec3 apply(const Vec3& v) const {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
                m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }
};

Rotation random_rotation(Rng& rng) {
    // Axis uniform on the sphere, angle uniform in [0, 2pi).
    const double z = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * M_PI);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vec3 a{r * std::cos(phi), r * std::sin(phi), z};
    const double t = rng.uniform(0.0, 2.0 * M_PI);
    const double c = std::cos(t), s = std::sin(t), ic = 1.0 - c;
    Rotation rot;
    rot.m[0][0] = c + a.x * a.x * ic;
    rot.m[0][1] = a.x * a.y * ic - a.z * s;
    rot.m[0][2] = a.x * a.z * ic + a.y * s;
    rot.m[1][0] = a.y * a.x * ic + a.z * s;
    rot.m[1][1] = c + a.y * a.y * ic;
    rot.m[1][2] = a.y * a.z * ic - a.x * s;
    rot.m[2][0] = a.z * a.x * ic - a.y * s;
    rot.m[2][1] = a.z * a.y * ic + a.x * s;
    rot.m[2][2] = c + a.z * a.z * ic;
    return rot;
}

Vec3 jitter(Rng& rng, double sigma) {
    return {sigma * rng.normal(), sigma * rng.normal(), sigma * rng.normal()};
}

}  // namespace

geo::RawPointCloud make_sphere(std::uint64_t seed, const ShapeParams& p) {
    Rng rng(seed);
    const double radius = rng.uniform(0.5, 1.5);
    geo::RawPointCloud cloud;
    cloud.source_id = "synth:sphere:" + std::to_string(seed);
    cloud.points.reserve(p.points);
    for (std::size_t i = 0; i < p.points; ++i) {
        const double z = rng.uniform(-1.0, 1.0);
        const double phi = rng.uniform(0.0, 2.0 * M_PI);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        Vec3 q{r * std::cos(phi), r * std::sin(phi), z};
        cloud.points.push_back(q * radius + jitter(rng, p.jitter_sigma));
    }
    return cloud;
}

geo::RawPointCloud make_cube(std::uint64_t seed, const ShapeParams& p) {
    Rng rng(seed);
    const double half = rng.uniform(0.4, 1.2);
    const Rotation rot = random_rotation(rng);
    geo::RawPointCloud cloud;
    cloud.source_id = "synth:cube:" + std::to_string(seed);
    cloud.points.reserve(p.points);
    for (std::size_t i = 0; i < p.points; ++i) {
        const std::size_t face = rng.uniform_index(6);
        const double u = rng.uniform(-half, half);
        const double v = rng.uniform(-half, half);
        Vec3 q;
        switch (face) {
            case 0: q = {half, u, v}; break;
            case 1: q = {-half, u, v}; break;
            case 2: q = {u, half, v}; break;
            case 3: q = {u, -half, v}; break;
            case 4: q = {u, v, half}; break;
            default: q = {u, v, -half}; break;
        }
        cloud.points.push_back(rot.apply(q) + jitter(rng, p.jitter_sigma));
    }
    return cloud;
}

geo::RawPointCloud make_plane(std::uint64_t seed, const ShapeParams& p) {
    Rng rng(seed);
    const double a = rng.uniform(0.8, 1.6);
    const double b = rng.uniform(0.4, 1.2);
    const Rotation rot = random_rotation(rng);
    geo::RawPointCloud cloud;
    cloud.source_id = "synth:plane:" + std::to_string(seed);
    cloud.points.reserve(p.points);
    for (std::size_t i = 0; i < p.points; ++i) {
        const Vec3 q{rng.uniform(-a, a), rng.uniform(-b, b), 0.0};
        cloud.points.push_back(rot.apply(q) + jitter(rng, p.jitter_sigma));
    }
    return cloud;
}

std::vector<LabeledCloud> make_shape_dataset(std::size_t count_per_class, std::uint64_t seed,
                                             const ShapeParams& p) {
    std::vector<LabeledCloud> out;
    out.reserve(count_per_class * 3);
    for (std::size_t i = 0; i < count_per_class; ++i) {
        out.push_back({make_sphere(derive_seed(seed, 3 * i + 0), p), "sphere"});
        out.push_back({make_cube(derive_seed(seed, 3 * i + 1), p), "cube"});
        out.push_back({make_plane(derive_seed(seed, 3 * i + 2), p), "plane"});
    }
    return out;
}

StreetScene make_street_scene(std::uint64_t seed, const StreetSceneParams& p) {
    Rng rng(seed);
    StreetScene scene;

    // Ground plane: small random tilt around a horizontal axis.
    const double tilt = rng.uniform(0.0, p.tilt_max_deg * M_PI / 180.0);
    const double azim = rng.uniform(0.0, 2.0 * M_PI);
    const Vec3 n{std::sin(tilt) * std::cos(azim), std::sin(tilt) * std::sin(azim),
                 std::cos(tilt)};
    const double d = rng.uniform(-0.5, 0.5);
    scene.plane_normal = n;
    scene.plane_offset = d;

    const std::size_t total = p.ground_points + p.obstacle_points;
    scene.cloud.source_id = "synth:street:" + std::to_string(seed);
    scene.cloud.points.reserve(total);
    scene.ground_mask.reserve(total);

    for (std::size_t i = 0; i < p.ground_points; ++i) {
        const double x = rng.uniform(-p.extent, p.extent);
        const double y = rng.uniform(-p.extent, p.extent);
        // Solve n.p + d = 0 for z, then displace along z by the noise term.
        const double z = -(n.x * x + n.y * y + d) / n.z;
        scene.cloud.points.push_back({x, y, z + p.noise_sigma * rng.normal()});
        scene.ground_mask.push_back(true);
    }

    // Obstacles: box-shaped clusters floating above the plane.
    const std::size_t n_boxes = 3 + rng.uniform_index(4);
    std::size_t remaining = p.obstacle_points;
    for (std::size_t bi = 0; bi < n_boxes; ++bi) {
        const std::size_t count = bi + 1 == n_boxes ? remaining : remaining / (n_boxes - bi);
        remaining -= count;
        const Vec3 center{rng.uniform(-p.extent * 0.6, p.extent * 0.6),
                          rng.uniform(-p.extent * 0.6, p.extent * 0.6),
                          0.0};
        const double height = p.clearance + rng.uniform(0.0, 2.0);
        const double sx = rng.uniform(0.3, 1.5), sy = rng.uniform(0.3, 1.5),
                     sz = rng.uniform(0.3, 1.5);
        for (std::size_t i = 0; i < count; ++i) {
            const double x = center.x + sx * rng.uniform(-1.0, 1.0);
            const double y = center.y + sy * rng.uniform(-1.0, 1.0);
            const double base = -(n.x * x + n.y * y + d) / n.z;
            const double z = base + height + sz * rng.uniform(0.0, 1.0);
            scene.cloud.points.push_back({x, y, z});
            scene.ground_mask.push_back(false);
        }
    }
    return scene;
}

}  // namespace lila::synth

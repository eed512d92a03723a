#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lila/geometry.hpp"

namespace lila::synth {

// Procedural shape families used by the bundled toy dataset: sphere surfaces,
// cube shells, and flat rectangular patches, each with a random pose and a
// small jitter. Everything is deterministic per seed.
struct ShapeParams {
    std::size_t points = 256;
    double jitter_sigma = 0.005;
};

geo::RawPointCloud make_sphere(std::uint64_t seed, const ShapeParams& p);
geo::RawPointCloud make_cube(std::uint64_t seed, const ShapeParams& p);
geo::RawPointCloud make_plane(std::uint64_t seed, const ShapeParams& p);

struct LabeledCloud {
    geo::RawPointCloud cloud;
    std::string label;
};

// count_per_class clouds for each of {sphere, cube, plane}, interleaved.
std::vector<LabeledCloud> make_shape_dataset(std::size_t count_per_class, std::uint64_t seed,
                                             const ShapeParams& p = {});

// Synthetic street scene: a tilted ground plane plus box-shaped obstacles,
// sized for RANSAC recovery tests.
struct StreetSceneParams {
    std::size_t ground_points = 2000;
    std::size_t obstacle_points = 800;
    double extent = 20.0;        // half-extent of the ground patch (m)
    double noise_sigma = 0.02;   // ground noise along the normal (m)
    double tilt_max_deg = 3.0;   // max ground tilt from horizontal
    double clearance = 0.5;      // min obstacle height above the plane (m)
};

struct StreetScene {
    geo::RawPointCloud cloud;
    Vec3 plane_normal;              // unit normal of the true ground plane
    double plane_offset = 0.0;      // d in n.p + d = 0
    std::vector<bool> ground_mask;  // per point, true when it belongs to the plane
};

StreetScene make_street_scene(std::uint64_t seed, const StreetSceneParams& p = {});

}  // namespace lila::synth

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lila/geometry.hpp"

namespace lila::pre {

// Plane {p : normal.p + offset = 0} with unit normal.
struct Plane {
    Vec3 normal{0, 0, 1};
    double offset = 0.0;

    double distance(const Vec3& p) const { return std::abs(normal.dot(p) + offset); }
    void validate() const;
};

struct PreprocessConfig {
    std::size_t ransac_iterations = 200;
    double inlier_threshold = 0.15;     // meters
    double min_inlier_fraction = 0.2;
    double crop_radius = 15.0;          // meters, sensor-centered cylinder
    double min_crop_radius = 0.0;       // optional inner annulus bound
    bool allow_out_of_range_radius = false;
    bool skip_ground_removal = false;
    std::size_t target_points = 2048;   // M
    std::uint64_t seed = 0;

    void validate() const;
};

// Fixed-size cloud after the full pipeline; points are dimensionless, the
// original centroid/scale are kept for the inverse mapping.
struct ProcessedCloud {
    std::vector<Vec3> points;
    Vec3 centroid;
    double scale = 1.0;
    std::string provenance;

    std::size_t size() const { return points.size(); }
};

struct PlaneFit {
    Plane plane;
    std::vector<bool> inlier_mask;
    std::size_t inlier_count = 0;
};

// RANSAC over 3-point samples; a point is an inlier iff its plane distance is
// <= inlier_threshold. Returns nullopt when the best inlier fraction stays
// below min_inlier_fraction. Deterministic per cfg.seed.
std::optional<PlaneFit> fit_ground_plane(const geo::RawPointCloud& cloud,
                                         const PreprocessConfig& cfg);

// Keeps exactly the points farther than `threshold` from the plane, in order.
geo::RawPointCloud remove_ground(const geo::RawPointCloud& cloud, const Plane& plane,
                                 double threshold);

// Keeps points with min_radius <= sqrt(x^2+y^2) <= radius (closed bounds).
geo::RawPointCloud cylinder_crop(const geo::RawPointCloud& cloud, double radius,
                                 double min_radius = 0.0);

// Exactly `target` points: without replacement when N >= target, otherwise all
// originals plus uniform duplicates. Deterministic per seed.
geo::RawPointCloud random_downsample(const geo::RawPointCloud& cloud, std::size_t target,
                                     std::uint64_t seed);

// p' = (p - centroid) / max_j |p_j - centroid|; coincident clouds are centered
// but left unscaled.
ProcessedCloud normalize_unit_sphere(const geo::RawPointCloud& cloud);

// Downsample + normalize, for inputs that need no ground removal or crop
// (synthetic shapes, mesh samples).
ProcessedCloud processed_from_raw(const geo::RawPointCloud& cloud, std::size_t target,
                                  std::uint64_t seed);

struct StageReport {
    std::string stage;
    std::size_t points_in = 0;
    std::size_t points_out = 0;
    std::optional<Plane> plane;  // set by the ground stage when a plane was found
};

struct PipelineResult {
    ProcessedCloud cloud;
    std::vector<StageReport> stages;
    bool ground_plane_found = false;
};

// fit_ground_plane -> remove_ground (skipped on no_plane) -> cylinder_crop ->
// random_downsample -> normalize_unit_sphere. Failures name the stage.
PipelineResult preprocess_pipeline(const geo::RawPointCloud& cloud,
                                   const PreprocessConfig& cfg);

std::string report_to_json(const PipelineResult& result);

}  // namespace lila::pre

#include "lila/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "lila/rng.hpp"

namespace lila::pre {

void Plane::validate() const {
    if (std::abs(normal.norm() - 1.0) >= 1e-9) throw ConfigError("plane normal is not unit");
}

void PreprocessConfig::validate() const {
    if (ransac_iterations < 1) throw ConfigError("ransac_iterations must be positive");
    if (inlier_threshold <= 0.0) throw ConfigError("inlier_threshold must be positive");
    if (min_inlier_fraction <= 0.0 || min_inlier_fraction >= 1.0)
        throw ConfigError("min_inlier_fraction must lie in (0,1)");
    if (!allow_out_of_range_radius && (crop_radius < 15.0 || crop_radius > 200.0))
        throw ConfigError("crop_radius outside [15,200]; pass the override flag to allow it");
    if (min_crop_radius < 0.0 || min_crop_radius >= crop_radius)
        throw ConfigError("min_crop_radius must lie in [0, crop_radius)");
    if (target_points < 1) throw ConfigError("target_points must be positive");
}

namespace {

// Least-squares plane through a point subset (centroid + smallest covariance
// eigenvector, 3x3 Jacobi sweep). Used to polish the RANSAC winner.
std::optional<Plane> refit_plane(const std::vector<Vec3>& pts, const std::vector<bool>& mask) {
    Vec3 c{0, 0, 0};
    std::size_t n = 0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        if (mask[i]) {
            c += pts[i];
            ++n;
        }
    if (n < 3) return std::nullopt;
    c = c / static_cast<double>(n);

    double cov[3][3] = {};
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!mask[i]) continue;
        const Vec3 q = pts[i] - c;
        const double v[3] = {q.x, q.y, q.z};
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) cov[a][b] += v[a] * v[b];
    }

    double eig[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (int sweep = 0; sweep < 32; ++sweep) {
        double off = std::abs(cov[0][1]) + std::abs(cov[0][2]) + std::abs(cov[1][2]);
        if (off < 1e-14) break;
        for (int p = 0; p < 2; ++p)
            for (int q = p + 1; q < 3; ++q) {
                if (std::abs(cov[p][q]) < 1e-18) continue;
                const double theta = 0.5 * std::atan2(2.0 * cov[p][q], cov[q][q] - cov[p][p]);
                const double cs = std::cos(theta), sn = std::sin(theta);
                for (int k = 0; k < 3; ++k) {
                    const double akp = cov[k][p], akq = cov[k][q];
                    cov[k][p] = cs * akp - sn * akq;
                    cov[k][q] = sn * akp + cs * akq;
                }
                for (int k = 0; k < 3; ++k) {
                    const double apk = cov[p][k], aqk = cov[q][k];
                    cov[p][k] = cs * apk - sn * aqk;
                    cov[q][k] = sn * apk + cs * aqk;
                }
                for (int k = 0; k < 3; ++k) {
                    const double ekp = eig[k][p], ekq = eig[k][q];
                    eig[k][p] = cs * ekp - sn * ekq;
                    eig[k][q] = sn * ekp + cs * ekq;
                }
            }
    }
    int min_i = 0;
    for (int i = 1; i < 3; ++i)
        if (cov[i][i] < cov[min_i][min_i]) min_i = i;
    Vec3 normal{eig[0][min_i], eig[1][min_i], eig[2][min_i]};
    const double len = normal.norm();
    if (len < 1e-12) return std::nullopt;
    normal = normal / len;
    return Plane{normal, -normal.dot(c)};
}

std::size_t count_inliers(const std::vector<Vec3>& pts, const Plane& plane, double threshold,
                          std::vector<bool>* mask) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const bool in = plane.distance(pts[i]) <= threshold;
        if (mask) (*mask)[i] = in;
        count += in;
    }
    return count;
}

}  // namespace

std::optional<PlaneFit> fit_ground_plane(const geo::RawPointCloud& cloud,
                                         const PreprocessConfig& cfg) {
    cloud.validate();
    const auto& pts = cloud.points;
    if (pts.size() < 3) throw RuntimeError("plane fit needs at least 3 points");

    Rng rng(cfg.seed);
    Plane best;
    std::size_t best_count = 0;
    bool found = false;

    for (std::size_t iter = 0; iter < cfg.ransac_iterations; ++iter) {
        const auto idx = rng.sample_without_replacement(pts.size(), 3);
        const Vec3& a = pts[idx[0]];
        const Vec3 ab = pts[idx[1]] - a;
        const Vec3 ac = pts[idx[2]] - a;
        Vec3 n = ab.cross(ac);
        const double len = n.norm();
        // Collinearity guard relative to the edge lengths.
        if (len < 1e-12 * std::max(1.0, ab.norm() * ac.norm())) continue;
        n = n / len;
        const Plane candidate{n, -n.dot(a)};
        const std::size_t count = count_inliers(pts, candidate, cfg.inlier_threshold, nullptr);
        if (count > best_count) {
            best_count = count;
            best = candidate;
            found = true;
        }
    }
    if (!found) return std::nullopt;

    PlaneFit fit;
    fit.inlier_mask.assign(pts.size(), false);
    fit.plane = best;
    fit.inlier_count = count_inliers(pts, best, cfg.inlier_threshold, &fit.inlier_mask);

    // One least-squares pass over the winning consensus set; kept only when it
    // does not lose inliers.
    if (auto refined = refit_plane(pts, fit.inlier_mask)) {
        std::vector<bool> mask(pts.size(), false);
        const std::size_t count = count_inliers(pts, *refined, cfg.inlier_threshold, &mask);
        if (count >= fit.inlier_count) {
            fit.plane = *refined;
            fit.inlier_mask = std::move(mask);
            fit.inlier_count = count;
        }
    }

    const double fraction =
        static_cast<double>(fit.inlier_count) / static_cast<double>(pts.size());
    if (fraction < cfg.min_inlier_fraction) return std::nullopt;
    return fit;
}

geo::RawPointCloud remove_ground(const geo::RawPointCloud& cloud, const Plane& plane,
                                 double threshold) {
    cloud.validate();
    plane.validate();
    geo::RawPointCloud out;
    out.source_id = cloud.source_id;
    for (const Vec3& p : cloud.points)
        if (plane.distance(p) > threshold) out.points.push_back(p);
    if (out.points.empty()) throw RuntimeError("empty cloud after ground removal");
    return out;
}

geo::RawPointCloud cylinder_crop(const geo::RawPointCloud& cloud, double radius,
                                 double min_radius) {
    cloud.validate();
    if (radius <= 0.0) throw ConfigError("crop radius must be positive");
    geo::RawPointCloud out;
    out.source_id = cloud.source_id;
    for (const Vec3& p : cloud.points) {
        const double r = std::sqrt(p.x * p.x + p.y * p.y);
        if (r <= radius && r >= min_radius) out.points.push_back(p);
    }
    if (out.points.empty()) throw RuntimeError("empty cloud after cylinder crop");
    return out;
}

geo::RawPointCloud random_downsample(const geo::RawPointCloud& cloud, std::size_t target,
                                     std::uint64_t seed) {
    cloud.validate();
    if (target < 1) throw ConfigError("downsample target must be positive");
    Rng rng(seed);
    geo::RawPointCloud out;
    out.source_id = cloud.source_id;
    const std::size_t n = cloud.points.size();
    if (n >= target) {
        for (std::size_t i : rng.sample_without_replacement(n, target))
            out.points.push_back(cloud.points[i]);
    } else {
        out.points = cloud.points;
        for (std::size_t i = n; i < target; ++i)
            out.points.push_back(cloud.points[rng.uniform_index(n)]);
    }
    return out;
}

ProcessedCloud normalize_unit_sphere(const geo::RawPointCloud& cloud) {
    cloud.validate();
    const std::size_t n = cloud.points.size();
    Vec3 centroid{0, 0, 0};
    for (const Vec3& p : cloud.points) centroid += p;
    centroid = centroid / static_cast<double>(n);

    double max_r = 0.0;
    for (const Vec3& p : cloud.points) max_r = std::max(max_r, (p - centroid).norm());

    ProcessedCloud out;
    out.centroid = centroid;
    out.scale = max_r < 1e-12 ? 1.0 : max_r;  // coincident-points guard
    out.provenance = cloud.source_id;
    out.points.reserve(n);
    for (const Vec3& p : cloud.points) out.points.push_back((p - centroid) / out.scale);
    return out;
}

ProcessedCloud processed_from_raw(const geo::RawPointCloud& cloud, std::size_t target,
                                  std::uint64_t seed) {
    return normalize_unit_sphere(random_downsample(cloud, target, seed));
}

PipelineResult preprocess_pipeline(const geo::RawPointCloud& cloud,
                                   const PreprocessConfig& cfg) {
    cfg.validate();
    cloud.validate();
    PipelineResult result;
    geo::RawPointCloud current = cloud;

    auto run_stage = [&](const std::string& stage, auto&& fn) {
        StageReport report;
        report.stage = stage;
        report.points_in = current.points.size();
        try {
            fn(report);
        } catch (const Error& e) {
            throw RuntimeError("preprocess stage '" + stage + "': " + e.what());
        }
        report.points_out = current.points.size();
        result.stages.push_back(std::move(report));
    };

    run_stage("ground_removal", [&](StageReport& report) {
        if (cfg.skip_ground_removal) return;
        const auto fit = fit_ground_plane(current, cfg);
        if (!fit) return;  // no dominant plane: stage is skipped, not fatal
        result.ground_plane_found = true;
        report.plane = fit->plane;
        current = remove_ground(current, fit->plane, cfg.inlier_threshold);
    });
    run_stage("cylinder_crop", [&](StageReport&) {
        current = cylinder_crop(current, cfg.crop_radius, cfg.min_crop_radius);
    });
    run_stage("random_downsample", [&](StageReport&) {
        current = random_downsample(current, cfg.target_points, cfg.seed);
    });
    run_stage("normalize_unit_sphere", [&](StageReport&) {
        result.cloud = normalize_unit_sphere(current);
    });
    return result;
}

std::string report_to_json(const PipelineResult& result) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : result.stages) {
        nlohmann::json j;
        j["stage"] = s.stage;
        j["points_in"] = s.points_in;
        j["points_out"] = s.points_out;
        if (s.plane) {
            j["plane"] = {{"normal", {s.plane->normal.x, s.plane->normal.y, s.plane->normal.z}},
                          {"offset", s.plane->offset}};
        } else {
            j["plane"] = nullptr;
        }
        stages.push_back(std::move(j));
    }
    nlohmann::json root;
    root["stages"] = std::move(stages);
    root["ground_plane_found"] = result.ground_plane_found;
    root["centroid"] = {result.cloud.centroid.x, result.cloud.centroid.y,
                        result.cloud.centroid.z};
    root["scale"] = result.cloud.scale;
    return root.dump(2);
}

}  // namespace lila::pre

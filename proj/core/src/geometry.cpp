#include "lila/geometry.hpp"

#include <algorithm>

#include "lila/rng.hpp"

namespace lila::geo {

void RawPointCloud::validate() const {
    if (points.empty()) throw RuntimeError("point cloud is empty" +
                                           (source_id.empty() ? "" : " (" + source_id + ")"));
    for (const Vec3& p : points)
        if (!p.finite()) throw RuntimeError("point cloud contains non-finite coordinates");
}

double TriangleMesh::total_area() const {
    double area = 0.0;
    for (const auto& f : faces) {
        const Vec3 e1 = vertices[f[1]] - vertices[f[0]];
        const Vec3 e2 = vertices[f[2]] - vertices[f[0]];
        area += 0.5 * e1.cross(e2).norm();
    }
    return area;
}

std::optional<Split> split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    return std::nullopt;
}

void DatasetManifest::validate() const {
    std::vector<std::string> paths;
    paths.reserve(entries.size());
    for (const auto& e : entries) paths.push_back(e.path);
    std::sort(paths.begin(), paths.end());
    auto dup = std::adjacent_find(paths.begin(), paths.end());
    if (dup != paths.end()) throw ConfigError("duplicate manifest path: " + *dup);
}

RawPointCloud sample_mesh_surface(const TriangleMesh& mesh, std::size_t count,
                                  std::uint64_t seed) {
    if (count < 1) throw ConfigError("sample count must be >= 1");
    std::vector<double> cumulative;
    cumulative.reserve(mesh.faces.size());
    double total = 0.0;
    for (const auto& f : mesh.faces) {
        const Vec3 e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
        const Vec3 e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
        total += 0.5 * e1.cross(e2).norm();
        cumulative.push_back(total);
    }
    if (total <= 0.0) throw RuntimeError("degenerate mesh: total surface area is zero");

    Rng rng(seed);
    RawPointCloud cloud;
    cloud.points.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double r = rng.uniform01() * total;
        const std::size_t t = static_cast<std::size_t>(
            std::lower_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
        const auto& f = mesh.faces[std::min(t, mesh.faces.size() - 1)];
        double u = rng.uniform01();
        double v = rng.uniform01();
        if (u + v > 1.0) {  // reflect into the lower barycentric triangle
            u = 1.0 - u;
            v = 1.0 - v;
        }
        const Vec3& a = mesh.vertices[f[0]];
        const Vec3 ab = mesh.vertices[f[1]] - a;
        const Vec3 ac = mesh.vertices[f[2]] - a;
        cloud.points.push_back(a + ab * u + ac * v);
    }
    return cloud;
}

}  // namespace lila::geo

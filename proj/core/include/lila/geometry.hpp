#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lila/common.hpp"

namespace lila::geo {

// Unordered set of 3D points in meters.
struct RawPointCloud {
    std::vector<Vec3> points;
    std::string source_id;

    std::size_t size() const { return points.size(); }
    // Invariants: at least one point, every coordinate finite.
    void validate() const;
};

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> faces;

    double total_area() const;
};

enum class Split { train, test };

inline const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }
std::optional<Split> split_from_string(const std::string& s);

struct ManifestEntry {
    std::string path;
    std::string label;  // empty when unlabeled
    Split split = Split::train;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    std::uint64_t seed = 0;

    // Invariant: paths unique.
    void validate() const;
};

// Area-weighted surface sampling: triangles chosen with probability
// proportional to area, points uniform in barycentric coordinates.
// Deterministic per seed.
RawPointCloud sample_mesh_surface(const TriangleMesh& mesh, std::size_t count,
                                  std::uint64_t seed);

}  // namespace lila::geo

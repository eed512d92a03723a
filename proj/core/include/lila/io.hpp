#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "lila/geometry.hpp"

namespace lila::io {

// ASCII OFF. Polygon faces are fan-triangulated; parse failures name the
// offending line.
geo::TriangleMesh parse_off(std::string_view text);

// Whitespace-delimited "x y z" lines; extra columns (intensity etc.) are
// dropped.
geo::RawPointCloud parse_xyz(std::string_view text);

// ASCII PLY with x,y,z vertex properties; non-vertex elements are skipped.
geo::RawPointCloud parse_ply_ascii(std::string_view text);

// Coordinates written with 9 significant digits, one point per line.
void write_xyz(const geo::RawPointCloud& cloud, const std::filesystem::path& path);
std::string format_xyz(const geo::RawPointCloud& cloud);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// Loads a point cloud by extension: .xyz, .ply, or .off (meshes are surface
// sampled to `mesh_samples` points).
geo::RawPointCloud load_cloud(const std::filesystem::path& path, std::size_t mesh_samples,
                              std::uint64_t seed);

// Manifest is JSON-lines, one {"path","label","split"} object per entry.
geo::DatasetManifest parse_manifest(std::string_view text);
geo::DatasetManifest load_manifest(const std::filesystem::path& path);
std::string format_manifest(const geo::DatasetManifest& manifest);
void save_manifest(const geo::DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace lila::io

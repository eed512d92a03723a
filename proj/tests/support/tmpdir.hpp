#pragma once

#include <filesystem>
#include <random>
#include <string>

namespace lila::test {

// Scoped temporary directory under the system temp path.
struct TmpDir {
    std::filesystem::path path;

    explicit TmpDir(const std::string& prefix = "lila_test") {
        std::random_device rd;
        path = std::filesystem::temp_directory_path() /
               (prefix + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path);
    }
    ~TmpDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TmpDir(const TmpDir&) = delete;
    TmpDir& operator=(const TmpDir&) = delete;

    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

}  // namespace lila::test

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lila/common.hpp"

namespace lila::metrics {

// Static 3D index: median split on the widest extent, leaf size 16.
// nearest() returns exactly the brute-force answer; squared-distance ties are
// broken toward the lowest input index.
class KdTree {
public:
    static constexpr std::size_t kLeafSize = 16;

    KdTree() = default;
    explicit KdTree(std::span<const Vec3> points) { build(points); }

    void build(std::span<const Vec3> points);

    struct Hit {
        std::size_t index = 0;
        double dist2 = 0.0;
    };
    Hit nearest(const Vec3& query) const;

    std::size_t size() const { return points_.size(); }

private:
    struct Node {
        // Leaf when child[0] < 0; then [begin, end) indexes into order_.
        int child[2] = {-1, -1};
        int axis = 0;
        double split = 0.0;
        std::uint32_t begin = 0;
        std::uint32_t end = 0;
    };

    int build_node(std::uint32_t begin, std::uint32_t end);
    void search(int node, const Vec3& query, Hit& best) const;

    std::vector<Vec3> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace lila::metrics

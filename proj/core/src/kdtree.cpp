#include "lila/kdtree.hpp"

#include <algorithm>
#include <limits>

namespace lila::metrics {

namespace {
inline double coord(const Vec3& p, int axis) {
    return axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
}
}  // namespace

void KdTree::build(std::span<const Vec3> points) {
    points_.assign(points.begin(), points.end());
    order_.resize(points_.size());
    for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
    nodes_.clear();
    nodes_.reserve(points_.empty() ? 0 : 2 * points_.size() / kLeafSize + 2);
    root_ = points_.empty() ? -1 : build_node(0, static_cast<std::uint32_t>(points_.size()));
}

int KdTree::build_node(std::uint32_t begin, std::uint32_t end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();

    if (end - begin <= kLeafSize) {
        // Keep leaf entries in input order so the lowest-index tie rule falls
        // out of the sequential scan.
        std::sort(order_.begin() + begin, order_.begin() + end);
        nodes_[id].begin = begin;
        nodes_[id].end = end;
        return id;
    }

    Vec3 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
            std::numeric_limits<double>::max()};
    Vec3 hi{-std::numeric_limits<double>::max(), -std::numeric_limits<double>::max(),
            -std::numeric_limits<double>::max()};
    for (std::uint32_t i = begin; i < end; ++i) {
        const Vec3& p = points_[order_[i]];
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    const Vec3 extent = hi - lo;
    int axis = 0;
    if (extent.y > coord(extent, axis)) axis = 1;
    if (extent.z > coord(extent, axis)) axis = 2;

    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                         return coord(points_[a], axis) < coord(points_[b], axis);
                     });
    const double split = coord(points_[order_[mid]], axis);

    const int left = build_node(begin, mid);
    const int right = build_node(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].child[0] = left;
    nodes_[id].child[1] = right;
    return id;
}

KdTree::Hit KdTree::nearest(const Vec3& query) const {
    if (points_.empty()) throw RuntimeError("nearest() on empty KdTree");
    Hit best{0, std::numeric_limits<double>::max()};
    search(root_, query, best);
    return best;
}

void KdTree::search(int node, const Vec3& query, Hit& best) const {
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    if (n.child[0] < 0) {
        for (std::uint32_t i = n.begin; i < n.end; ++i) {
            const std::uint32_t idx = order_[i];
            const double d2 = dist2(points_[idx], query);
            if (d2 < best.dist2 || (d2 == best.dist2 && idx < best.index)) {
                best.dist2 = d2;
                best.index = idx;
            }
        }
        return;
    }
    const double delta = coord(query, n.axis) - n.split;
    const int near = delta < 0.0 ? n.child[0] : n.child[1];
    const int far = delta < 0.0 ? n.child[1] : n.child[0];
    search(near, query, best);
    // The far side can still hold an equal-distance lower index, so recurse on
    // <= rather than <.
    if (delta * delta <= best.dist2) search(far, query, best);
}

}  // namespace lila::metrics

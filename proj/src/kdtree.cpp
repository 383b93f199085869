#include "frgt/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace frgt {

KdTree2::KdTree2(const std::vector<double>& xy) : pts_(xy) {
    if (xy.size() % 2 != 0) throw Error("kdtree: point array must be s x 2");
    const std::size_t s = xy.size() / 2;
    if (s == 0) throw Error("kdtree: empty point set");
    std::vector<std::uint32_t> order(s);
    std::iota(order.begin(), order.end(), 0u);
    nodes_.reserve(s);
    root_ = build(order.data(), order.data() + s, 0);
}

std::int32_t KdTree2::build(std::uint32_t* begin, std::uint32_t* end, int depth) {
    if (begin == end) return -1;
    int axis = depth % 2;
    std::uint32_t* mid = begin + (end - begin) / 2;
    std::nth_element(begin, mid, end, [&](std::uint32_t a, std::uint32_t b) {
        return pts_[2 * a + axis] < pts_[2 * b + axis];
    });
    Node node;
    node.point = *mid;
    node.axis = static_cast<std::uint8_t>(axis);
    std::int32_t id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);
    std::int32_t left = build(begin, mid, depth + 1);
    std::int32_t right = build(mid + 1, end, depth + 1);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void KdTree2::search(std::int32_t node, double x, double y, double& best2) const {
    if (node < 0) return;
    const Node& nd = nodes_[node];
    double px = pts_[2 * nd.point];
    double py = pts_[2 * nd.point + 1];
    double dx = x - px, dy = y - py;
    double d2 = dx * dx + dy * dy;
    if (d2 < best2) best2 = d2;
    double diff = (nd.axis == 0) ? dx : dy;
    std::int32_t near = diff < 0.0 ? nd.left : nd.right;
    std::int32_t far = diff < 0.0 ? nd.right : nd.left;
    search(near, x, y, best2);
    if (diff * diff < best2) search(far, x, y, best2);
}

double KdTree2::nearest_distance(double x, double y) const {
    double best2 = std::numeric_limits<double>::infinity();
    search(root_, x, y, best2);
    return std::sqrt(best2);
}

double brute_force_nearest_distance(const std::vector<double>& xy, double x, double y) {
    double best2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < xy.size(); i += 2) {
        double dx = x - xy[i], dy = y - xy[i + 1];
        double d2 = dx * dx + dy * dy;
        if (d2 < best2) best2 = d2;
    }
    return std::sqrt(best2);
}

}  // namespace frgt

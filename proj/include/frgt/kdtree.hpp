#pragma once

#include <cstdint>
#include <vector>

#include "frgt/common.hpp"

namespace frgt {

// 2-D k-d tree over a fixed point set; exact nearest-neighbor queries.
// Build is O(s log s), a query is O(log s) on average.
class KdTree2 {
public:
    KdTree2() = default;
    explicit KdTree2(const std::vector<double>& xy);  // s x 2, row-major

    std::size_t size() const { return pts_.size() / 2; }

    // Distance from (x, y) to the nearest stored point.
    double nearest_distance(double x, double y) const;

private:
    struct Node {
        std::int32_t left = -1;
        std::int32_t right = -1;
        std::uint32_t point = 0;
        std::uint8_t axis = 0;
    };

    std::int32_t build(std::uint32_t* begin, std::uint32_t* end, int depth);
    void search(std::int32_t node, double x, double y, double& best2) const;

    std::vector<double> pts_;
    std::vector<Node> nodes_;
    std::int32_t root_ = -1;
};

// O(n*s) reference used to cross-check the tree.
double brute_force_nearest_distance(const std::vector<double>& xy, double x, double y);

}  // namespace frgt

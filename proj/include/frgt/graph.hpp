#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "frgt/common.hpp"

namespace frgt {

enum class NodeType : std::uint8_t { fluid = 0, wall = 1 };

// Dual graph of a triangular mesh around a 2-D body. Nodes are cell
// centroids (fluid) and surface polyline vertices (wall); edges are
// directed and always come in (i,j)/(j,i) pairs. Numeric arrays are f32,
// matching the on-disk bundle layout; geometry is computed in f64 and
// rounded once on storage.
struct MeshGraph {
    std::int64_t n_nodes = 0;
    std::vector<float> positions;      // n x 2, meters
    std::vector<std::uint8_t> node_type;  // n, NodeType
    std::vector<std::uint32_t> edge_src;  // m
    std::vector<std::uint32_t> edge_dst;  // m
    std::vector<float> edge_feat;      // m x 4: r_x, r_y, l, l_b
    std::vector<float> sdf;            // n, meters, >= 0
    std::vector<float> pressure_obs;   // n, Pa, NaN where unobserved
    std::vector<float> target;         // n x 3: p, u_x, u_y (empty until set)
    std::vector<std::uint8_t> sense_mask;  // n, 1 where pressure is measured

    double chord = 1.0;   // meters
    double rho = 1.225;   // kg/m^3, ambient property carried as metadata

    std::int64_t n_edges() const { return static_cast<std::int64_t>(edge_src.size()); }
    bool is_wall(std::int64_t i) const { return node_type[static_cast<std::size_t>(i)] == 1; }
    bool has_target() const { return !target.empty(); }

    float px(std::int64_t i) const { return positions[2 * static_cast<std::size_t>(i)]; }
    float py(std::int64_t i) const { return positions[2 * static_cast<std::size_t>(i) + 1]; }
};

inline float missing_value() { return std::numeric_limits<float>::quiet_NaN(); }

// Structural invariants: matching reverse edge for every edge with
// r_ij == -r_ji, l_ij == l_ji, l_b symmetric; sense_mask only on wall
// nodes with finite pressure_obs; sdf >= 0 everywhere and == 0 on walls;
// index ranges and array lengths consistent. Throws Error (message names
// the offending edge/node) on the first violation.
void validate_graph(const MeshGraph& g);

// Undirected connected components (ignores edge direction). Returns a
// component id per node and the number of components.
std::vector<std::int32_t> connected_components(const MeshGraph& g, std::int32_t* n_components);

}  // namespace frgt

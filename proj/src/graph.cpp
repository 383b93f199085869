#include "frgt/graph.hpp"

#include <cmath>
#include <unordered_map>

namespace frgt {

namespace {

inline std::uint64_t edge_key(std::uint32_t s, std::uint32_t d) {
    return (static_cast<std::uint64_t>(s) << 32) | d;
}

}  // namespace

void validate_graph(const MeshGraph& g) {
    const auto n = static_cast<std::size_t>(g.n_nodes);
    const auto m = g.edge_src.size();
    if (g.positions.size() != 2 * n) throw Error("graph: positions size mismatch");
    if (g.node_type.size() != n) throw Error("graph: node_type size mismatch");
    if (g.edge_dst.size() != m) throw Error("graph: edge_dst size mismatch");
    if (g.edge_feat.size() != 4 * m) throw Error("graph: edge_feat size mismatch");
    if (g.sdf.size() != n) throw Error("graph: sdf size mismatch");
    if (g.pressure_obs.size() != n) throw Error("graph: pressure_obs size mismatch");
    if (g.sense_mask.size() != n) throw Error("graph: sense_mask size mismatch");
    if (!g.target.empty() && g.target.size() != 3 * n) throw Error("graph: target size mismatch");
    if (g.chord <= 0.0) throw Error("graph: chord must be > 0");

    std::unordered_map<std::uint64_t, std::size_t> index;
    index.reserve(m * 2);
    for (std::size_t e = 0; e < m; ++e) {
        std::uint32_t s = g.edge_src[e], d = g.edge_dst[e];
        if (s >= n || d >= n)
            throw Error("graph: edge " + std::to_string(e) + " endpoint out of range");
        if (s == d) throw Error("graph: edge " + std::to_string(e) + " is a self-loop");
        if (!index.emplace(edge_key(s, d), e).second)
            throw Error("graph: duplicate edge (" + std::to_string(s) + "," + std::to_string(d) + ")");
    }
    for (std::size_t e = 0; e < m; ++e) {
        std::uint32_t s = g.edge_src[e], d = g.edge_dst[e];
        auto it = index.find(edge_key(d, s));
        if (it == index.end())
            throw Error("graph: edge (" + std::to_string(s) + "," + std::to_string(d) +
                        ") has no reverse edge");
        std::size_t r = it->second;
        const float* ef = &g.edge_feat[4 * e];
        const float* rf = &g.edge_feat[4 * r];
        if (ef[0] != -rf[0] || ef[1] != -rf[1])
            throw Error("graph: edge (" + std::to_string(s) + "," + std::to_string(d) +
                        ") breaks r antisymmetry");
        if (ef[2] != rf[2])
            throw Error("graph: edge (" + std::to_string(s) + "," + std::to_string(d) +
                        ") has asymmetric length");
        if (ef[3] != rf[3])
            throw Error("graph: edge (" + std::to_string(s) + "," + std::to_string(d) +
                        ") has asymmetric boundary length");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (g.node_type[i] > 1) throw Error("graph: node " + std::to_string(i) + " has unknown type");
        if (!(g.sdf[i] >= 0.0f))
            throw Error("graph: node " + std::to_string(i) + " has negative sdf");
        if (g.node_type[i] == 1 && g.sdf[i] != 0.0f)
            throw Error("graph: wall node " + std::to_string(i) + " has nonzero sdf");
        if (g.sense_mask[i]) {
            if (g.node_type[i] != 1)
                throw Error("graph: sensed node " + std::to_string(i) + " is not a wall node");
            if (!std::isfinite(g.pressure_obs[i]))
                throw Error("graph: sensed node " + std::to_string(i) + " has no finite pressure");
        }
    }
}

std::vector<std::int32_t> connected_components(const MeshGraph& g, std::int32_t* n_components) {
    const auto n = static_cast<std::size_t>(g.n_nodes);
    std::vector<std::int32_t> parent(n);
    for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<std::int32_t>(i);
    auto find = [&](std::int32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (std::size_t e = 0; e < g.edge_src.size(); ++e) {
        std::int32_t a = find(static_cast<std::int32_t>(g.edge_src[e]));
        std::int32_t b = find(static_cast<std::int32_t>(g.edge_dst[e]));
        if (a != b) parent[a] = b;
    }
    std::vector<std::int32_t> comp(n, -1);
    std::int32_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::int32_t r = find(static_cast<std::int32_t>(i));
        if (comp[r] < 0) comp[r] = next++;
        comp[i] = comp[r];
    }
    if (n_components) *n_components = next;
    return comp;
}

}  // namespace frgt

#include "frgt/meshgraph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <utility>

#include "frgt/kdtree.hpp"

namespace frgt {

namespace {

// Appends the directed pair (a,b),(b,a). r/l/l_b are computed once in f64
// and the reverse edge gets the negated f32 values, so r_ij == -r_ji and
// l/l_b symmetry hold bitwise.
void push_edge_pair(MeshGraph& g, std::uint32_t a, std::uint32_t b, Vec2 ra, double len, double lb) {
    float rx = static_cast<float>(ra.x);
    float ry = static_cast<float>(ra.y);
    float l = static_cast<float>(len);
    float lbf = static_cast<float>(lb);
    g.edge_src.push_back(a);
    g.edge_dst.push_back(b);
    g.edge_feat.insert(g.edge_feat.end(), {rx, ry, l, lbf});
    g.edge_src.push_back(b);
    g.edge_dst.push_back(a);
    g.edge_feat.insert(g.edge_feat.end(), {-rx, -ry, l, lbf});
}

std::pair<std::uint32_t, std::uint32_t> sorted_pair(std::uint32_t a, std::uint32_t b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

}  // namespace

MeshGraph build_dual_graph(const TriMesh& mesh) {
    validate_mesh(mesh);
    const std::size_t nt = mesh.n_triangles();

    MeshGraph g;
    g.n_nodes = static_cast<std::int64_t>(nt);
    g.chord = mesh.chord;
    g.positions.resize(2 * nt);
    std::vector<Vec2> centroids(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        centroids[t] = triangle_centroid(mesh, t);
        g.positions[2 * t] = static_cast<float>(centroids[t].x);
        g.positions[2 * t + 1] = static_cast<float>(centroids[t].y);
    }
    g.node_type.assign(nt, static_cast<std::uint8_t>(NodeType::fluid));
    g.sdf.assign(nt, 0.0f);
    g.pressure_obs.assign(nt, missing_value());
    g.sense_mask.assign(nt, 0);

    // mesh edge (sorted vertex pair) -> incident triangles; ordered map for
    // a deterministic edge order
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::uint32_t>> incident;
    for (std::size_t t = 0; t < nt; ++t) {
        const auto& tri = mesh.triangles[t];
        for (int k = 0; k < 3; ++k) {
            auto key = sorted_pair(tri[k], tri[(k + 1) % 3]);
            auto& v = incident[key];
            if (v.size() >= 2)
                throw Error("mesh: non-manifold edge (" + std::to_string(key.first) + "," +
                            std::to_string(key.second) + ") shared by more than 2 triangles");
            v.push_back(static_cast<std::uint32_t>(t));
        }
    }
    for (const auto& [key, tris] : incident) {
        if (tris.size() != 2) continue;  // boundary edge
        std::uint32_t ta = std::min(tris[0], tris[1]);
        std::uint32_t tb = std::max(tris[0], tris[1]);
        Vec2 r = centroids[tb] - centroids[ta];
        double lb = norm(mesh.vertices[key.second] - mesh.vertices[key.first]);
        push_edge_pair(g, ta, tb, r, norm(r), lb);
    }
    return g;
}

MeshGraph attach_surface_chain(const MeshGraph& graph, const TriMesh& mesh) {
    const auto& loop = mesh.surface_polyline;
    if (loop.empty()) throw Error("mesh: empty surface polyline");
    const std::size_t ns = loop.size();
    const std::size_t nf = static_cast<std::size_t>(graph.n_nodes);

    MeshGraph g = graph;
    g.n_nodes += static_cast<std::int64_t>(ns);
    g.positions.resize(2 * (nf + ns));
    for (std::size_t i = 0; i < ns; ++i) {
        g.positions[2 * (nf + i)] = static_cast<float>(mesh.vertices[loop[i]].x);
        g.positions[2 * (nf + i) + 1] = static_cast<float>(mesh.vertices[loop[i]].y);
    }
    g.node_type.resize(nf + ns, static_cast<std::uint8_t>(NodeType::wall));
    g.sdf.resize(nf + ns, 0.0f);
    g.pressure_obs.resize(nf + ns, missing_value());
    g.sense_mask.resize(nf + ns, 0);

    // triangle incident to each surface segment (the boundary edge must
    // belong to exactly one triangle)
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::uint32_t>> incident;
    for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        for (int k = 0; k < 3; ++k)
            incident[sorted_pair(tri[k], tri[(k + 1) % 3])].push_back(static_cast<std::uint32_t>(t));
    }
    auto segment_cells = [&](std::uint32_t va, std::uint32_t vb) -> const std::vector<std::uint32_t>& {
        auto it = incident.find(sorted_pair(va, vb));
        if (it == incident.end())
            throw Error("mesh: surface segment (" + std::to_string(va) + "," + std::to_string(vb) +
                        ") has no incident triangle");
        return it->second;
    };

    auto wall_pos = [&](std::size_t i) { return mesh.vertices[loop[i]]; };

    if (ns < 2) throw Error("mesh: surface polyline needs at least 2 vertices");
    for (std::size_t i = 0; i < ns; ++i) {
        std::size_t j = (i + 1) % ns;
        if (ns == 2 && i == 1) break;  // a 2-vertex loop has a single segment
        Vec2 r = wall_pos(j) - wall_pos(i);
        push_edge_pair(g, static_cast<std::uint32_t>(nf + i), static_cast<std::uint32_t>(nf + j),
                       r, norm(r), 0.0);
    }

    // wall-fluid edges: each wall node connects to every cell incident to
    // its two adjacent segments (deduplicated, in segment order)
    for (std::size_t i = 0; i < ns; ++i) {
        std::size_t prev = (i + ns - 1) % ns;
        std::size_t next = (i + 1) % ns;
        std::vector<std::uint32_t> cells;
        for (std::uint32_t c : segment_cells(loop[prev], loop[i])) cells.push_back(c);
        for (std::uint32_t c : segment_cells(loop[i], loop[next]))
            if (std::find(cells.begin(), cells.end(), c) == cells.end()) cells.push_back(c);
        Vec2 wp = wall_pos(i);
        for (std::uint32_t c : cells) {
            Vec2 cpos = triangle_centroid(mesh, c);
            Vec2 r = cpos - wp;
            push_edge_pair(g, static_cast<std::uint32_t>(nf + i), c, r, norm(r), 0.0);
        }
    }
    return g;
}

void compute_sdf(MeshGraph& graph) {
    const auto n = static_cast<std::size_t>(graph.n_nodes);
    std::vector<double> surf;
    for (std::size_t i = 0; i < n; ++i) {
        if (graph.node_type[i] == 1) {
            surf.push_back(graph.positions[2 * i]);
            surf.push_back(graph.positions[2 * i + 1]);
        }
    }
    if (surf.empty()) throw Error("graph: compute_sdf requires wall nodes");
    KdTree2 tree(surf);
    for (std::size_t i = 0; i < n; ++i) {
        if (graph.node_type[i] == 1) {
            graph.sdf[i] = 0.0f;
        } else {
            graph.sdf[i] = static_cast<float>(
                tree.nearest_distance(graph.positions[2 * i], graph.positions[2 * i + 1]));
        }
    }
}

MeshGraph crop_to_radius(const MeshGraph& graph, double radius_chords) {
    const auto n = static_cast<std::size_t>(graph.n_nodes);
    const double limit = radius_chords * graph.chord;
    std::vector<std::int64_t> remap(n, -1);
    std::int64_t kept = 0;
    std::int64_t kept_fluid = 0;
    for (std::size_t i = 0; i < n; ++i) {
        bool keep = graph.node_type[i] == 1 || static_cast<double>(graph.sdf[i]) <= limit;
        if (keep) {
            remap[i] = kept++;
            if (graph.node_type[i] == 0) ++kept_fluid;
        }
    }
    if (kept_fluid == 0) throw Error("graph: crop at " + std::to_string(radius_chords) +
                                     " chords removes all fluid nodes");

    MeshGraph out;
    out.n_nodes = kept;
    out.chord = graph.chord;
    out.rho = graph.rho;
    out.positions.resize(2 * static_cast<std::size_t>(kept));
    out.node_type.resize(static_cast<std::size_t>(kept));
    out.sdf.resize(static_cast<std::size_t>(kept));
    out.pressure_obs.resize(static_cast<std::size_t>(kept));
    out.sense_mask.resize(static_cast<std::size_t>(kept));
    if (graph.has_target()) out.target.resize(3 * static_cast<std::size_t>(kept));
    for (std::size_t i = 0; i < n; ++i) {
        if (remap[i] < 0) continue;
        auto j = static_cast<std::size_t>(remap[i]);
        out.positions[2 * j] = graph.positions[2 * i];
        out.positions[2 * j + 1] = graph.positions[2 * i + 1];
        out.node_type[j] = graph.node_type[i];
        out.sdf[j] = graph.sdf[i];
        out.pressure_obs[j] = graph.pressure_obs[i];
        out.sense_mask[j] = graph.sense_mask[i];
        if (graph.has_target())
            for (int c = 0; c < 3; ++c) out.target[3 * j + c] = graph.target[3 * i + c];
    }
    for (std::size_t e = 0; e < graph.edge_src.size(); ++e) {
        std::int64_t s = remap[graph.edge_src[e]];
        std::int64_t d = remap[graph.edge_dst[e]];
        if (s < 0 || d < 0) continue;
        out.edge_src.push_back(static_cast<std::uint32_t>(s));
        out.edge_dst.push_back(static_cast<std::uint32_t>(d));
        for (int k = 0; k < 4; ++k) out.edge_feat.push_back(graph.edge_feat[4 * e + k]);
    }
    return out;
}

}  // namespace frgt

#pragma once

#include "frgt/graph.hpp"
#include "frgt/mesh.hpp"

namespace frgt {

// One node per triangle at its centroid, one directed edge pair per mesh
// edge shared by exactly two triangles. Edge features: r = dst - src
// centroid, l = |r|, l_b = length of the shared mesh edge. Throws Error
// on non-manifold edges (shared by more than two triangles).
MeshGraph build_dual_graph(const TriMesh& mesh);

// Appends one wall node per surface polyline vertex, chain edges between
// consecutive wall nodes, and edges between each wall node and the fluid
// cells incident to its two surface segments. Chain and wall-fluid edges
// carry l_b = 0 (no shared finite-volume face). Throws Error if the
// polyline is empty or a surface segment has no incident triangle.
MeshGraph attach_surface_chain(const MeshGraph& graph, const TriMesh& mesh);

// Distance from every node to the discrete surface point set (the wall
// node positions), via a k-d tree. Wall nodes get exactly 0.
void compute_sdf(MeshGraph& graph);

// Keeps wall nodes plus fluid nodes with sdf <= radius_chords * chord,
// drops edges with a dropped endpoint and reindexes contiguously. Kept
// edge features are copied bitwise. Throws Error if no fluid node
// survives.
MeshGraph crop_to_radius(const MeshGraph& graph, double radius_chords = 1.0);

}  // namespace frgt

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "frgt/common.hpp"

namespace frgt {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

// Triangular mesh around a closed body. Triangles are counter-clockwise,
// the surface polyline is an ordered loop of vertex indices on the body
// (implicitly closed; a repeated first index is also accepted on input).
struct TriMesh {
    std::vector<Vec2> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;
    std::vector<std::uint32_t> surface_polyline;
    double chord = 1.0;

    std::size_t n_vertices() const { return vertices.size(); }
    std::size_t n_triangles() const { return triangles.size(); }
};

double triangle_signed_area(const TriMesh& mesh, std::size_t t);
Vec2 triangle_centroid(const TriMesh& mesh, std::size_t t);

// Throws Error on out-of-range indices, non-positive or degenerate
// (area < 1e-12 m^2) triangles, a non-simple surface loop, or chord <= 0.
void validate_mesh(const TriMesh& mesh);

// Plain-text mesh format:
//   line 1:            nv nt ns chord
//   next nv lines:     x y
//   next nt lines:     i j k        (0-based vertex indices)
//   next ns lines:     one surface-loop vertex index per line, in order
TriMesh read_tri_mesh(std::istream& in);
TriMesh read_tri_mesh_file(const std::string& path);
void write_tri_mesh(std::ostream& out, const TriMesh& mesh);
void write_tri_mesh_file(const std::string& path, const TriMesh& mesh);

}  // namespace frgt

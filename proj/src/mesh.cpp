#include "frgt/mesh.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace frgt {

double triangle_signed_area(const TriMesh& mesh, std::size_t t) {
    const auto& tri = mesh.triangles[t];
    Vec2 a = mesh.vertices[tri[0]];
    Vec2 b = mesh.vertices[tri[1]];
    Vec2 c = mesh.vertices[tri[2]];
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

Vec2 triangle_centroid(const TriMesh& mesh, std::size_t t) {
    const auto& tri = mesh.triangles[t];
    Vec2 a = mesh.vertices[tri[0]];
    Vec2 b = mesh.vertices[tri[1]];
    Vec2 c = mesh.vertices[tri[2]];
    return {(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
}

void validate_mesh(const TriMesh& mesh) {
    if (mesh.chord <= 0.0) throw Error("mesh: chord must be > 0, got " + std::to_string(mesh.chord));
    const std::size_t nv = mesh.n_vertices();
    for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
        for (int k = 0; k < 3; ++k) {
            if (mesh.triangles[t][k] >= nv)
                throw Error("mesh: triangle " + std::to_string(t) + " references vertex " +
                            std::to_string(mesh.triangles[t][k]) + " >= " + std::to_string(nv));
        }
        double area = triangle_signed_area(mesh, t);
        if (area < 1e-12)
            throw Error("mesh: triangle " + std::to_string(t) +
                        " has non-positive or degenerate area " + std::to_string(area));
    }
    // surface loop: valid indices, no repeats except an optional closing one
    std::unordered_set<std::uint32_t> seen;
    const auto& loop = mesh.surface_polyline;
    for (std::size_t i = 0; i < loop.size(); ++i) {
        if (loop[i] >= nv)
            throw Error("mesh: surface index " + std::to_string(loop[i]) + " out of range");
        bool closing = (i + 1 == loop.size() && loop[i] == loop[0] && loop.size() > 2);
        if (!closing && !seen.insert(loop[i]).second)
            throw Error("mesh: surface loop revisits vertex " + std::to_string(loop[i]));
    }
}

TriMesh read_tri_mesh(std::istream& in) {
    TriMesh mesh;
    std::size_t nv = 0, nt = 0, ns = 0;
    if (!(in >> nv >> nt >> ns >> mesh.chord)) throw Error("mesh: bad header line");
    mesh.vertices.resize(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        if (!(in >> mesh.vertices[i].x >> mesh.vertices[i].y))
            throw Error("mesh: bad vertex at line " + std::to_string(i + 2));
    }
    mesh.triangles.resize(nt);
    for (std::size_t i = 0; i < nt; ++i) {
        if (!(in >> mesh.triangles[i][0] >> mesh.triangles[i][1] >> mesh.triangles[i][2]))
            throw Error("mesh: bad triangle at line " + std::to_string(nv + i + 2));
    }
    mesh.surface_polyline.resize(ns);
    for (std::size_t i = 0; i < ns; ++i) {
        if (!(in >> mesh.surface_polyline[i]))
            throw Error("mesh: bad surface index at line " + std::to_string(nv + nt + i + 2));
    }
    // drop an explicit closing index; the loop is implicitly closed
    if (mesh.surface_polyline.size() > 2 && mesh.surface_polyline.front() == mesh.surface_polyline.back())
        mesh.surface_polyline.pop_back();
    validate_mesh(mesh);
    return mesh;
}

TriMesh read_tri_mesh_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("mesh: cannot open " + path);
    return read_tri_mesh(in);
}

void write_tri_mesh(std::ostream& out, const TriMesh& mesh) {
    out.precision(17);
    out << mesh.n_vertices() << ' ' << mesh.n_triangles() << ' ' << mesh.surface_polyline.size()
        << ' ' << mesh.chord << '\n';
    for (const auto& v : mesh.vertices) out << v.x << ' ' << v.y << '\n';
    for (const auto& t : mesh.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    for (auto s : mesh.surface_polyline) out << s << '\n';
}

void write_tri_mesh_file(const std::string& path, const TriMesh& mesh) {
    std::ofstream out(path);
    if (!out) throw Error("mesh: cannot open " + path + " for writing");
    write_tri_mesh(out, mesh);
    if (!out) throw Error("mesh: write failed for " + path);
}

}  // namespace frgt

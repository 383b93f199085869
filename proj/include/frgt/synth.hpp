#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "frgt/graph.hpp"
#include "frgt/mesh.hpp"
#include "frgt/norm.hpp"

namespace frgt {

// Analytic incompressible potential-flow case around a cylinder or a
// Joukowski airfoil. Pressure follows Bernoulli with zero far-field static
// pressure: p = rho/2 (U^2 - |u|^2).
struct FlowCase {
    enum class Body { cylinder, joukowski };
    Body body = Body::cylinder;
    double radius = 0.5;      // cylinder radius a (m)
    double mu_x = -0.08;      // joukowski circle center (m)
    double mu_y = 0.04;
    double circle_radius = 0.35;  // joukowski circle radius a (m)
    double u_inf = 10.0;      // m/s
    double alpha = 0.0;       // rad
    double gamma = 0.0;       // circulation, cylinder only (joukowski uses Kutta)
    double rho = 1.225;

    // The circle is kept slightly larger than the critical-point distance,
    // which rounds the trailing edge and keeps the conformal map regular on
    // the whole body surface (meshes stay fold-free at any resolution).
    static constexpr double te_rounding = 0.08;

    void validate() const;
    // map constant c of z = zeta + c^2/zeta (joukowski)
    double map_constant() const;
    // trailing-edge angle beta with Gamma = -4 pi U a sin(alpha + beta)
    double kutta_beta() const;
    double kutta_circulation() const;
};

struct PointFlow {
    double u_x = 0.0;
    double u_y = 0.0;
    double p = 0.0;
};

// Velocity and pressure at a query point (world = body frame; the
// freestream is inclined at alpha). Throws Error for queries inside the
// body; joukowski evaluation is forbidden within 1e-6 chord of the
// trailing edge.
PointFlow potential_flow_cylinder(const FlowCase& fc, double x, double y);
PointFlow joukowski_flow(const FlowCase& fc, double x, double y);
PointFlow evaluate_flow(const FlowCase& fc, double x, double y);

// O-grid layout: n_theta angular cells, n_r radial rings from the body to
// outer_radius_chords away, with geometrically growing ring spacing.
struct GridSpec {
    int n_theta = 48;
    int n_r = 14;
    double outer_radius_chords = 1.25;
    double growth = 1.08;

    void validate() const;
};

// Triangulated O-grid mesh around the case body (two triangles per quad);
// the surface polyline is the innermost ring.
TriMesh build_ogrid_mesh(const FlowCase& fc, const GridSpec& grid);

// Full desk-scale sample: mesh -> dual graph + surface chain + sdf ->
// crop -> analytic targets at every node, pressure observed at all wall
// nodes. crop_radius_chords <= 0 disables cropping.
MeshGraph generate_case(const FlowCase& fc, const GridSpec& grid,
                        double crop_radius_chords = 1.0);

// Restricts sensing to wall nodes within fraction*chord of the leading
// edge (chordwise distance, both surfaces); pressure_obs elsewhere becomes
// missing. Throws Error when no sensed node would remain.
MeshGraph mask_coverage(const MeshGraph& graph, double fraction);

// Low-discrepancy point set (direction-number construction, up to 8
// dimensions) with a seed-derived digital shift.
class Sobol {
public:
    Sobol(int dim, std::uint64_t seed);
    std::vector<double> next();

private:
    int dim_;
    std::uint64_t index_ = 0;
    std::vector<std::uint32_t> state_;
    std::vector<std::uint32_t> shift_;
    std::vector<std::vector<std::uint32_t>> dirs_;  // per dim, 32 direction numbers
};

struct DatasetSpec {
    std::uint64_t seed = 0;
    int n_train = 0;
    int n_val = 0;
    int n_test = 0;
    GridSpec grid;
    double u_min = 1.0, u_max = 100.0;
    double alpha_train_deg = 20.0;  // train cases: [-a, a]
    double alpha_eval_deg = 25.0;   // val/test cases: [-a, a]
    double coverage = 1.0;          // sense-mask fraction applied at generation
};

struct DatasetSplit {
    std::vector<std::string> train, val, test;
};

FlowCase sample_case(const std::vector<double>& u01, double alpha_max_deg, double u_min,
                     double u_max);

// Writes one bundle directory per case plus splits.json; deterministic for
// a fixed spec. Returns the split listing (bundle directory names).
DatasetSplit generate_dataset(const DatasetSpec& spec, const std::string& out_dir);

}  // namespace frgt

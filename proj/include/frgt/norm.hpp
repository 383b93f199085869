#pragma once

#include <vector>

#include "frgt/graph.hpp"

namespace frgt {

// Per-graph normalization constants, derived from surface data only.
struct NormStats {
    double mu_p = 0.0;     // Pa
    double sigma_p = 1.0;  // Pa
    double u_inf = 1.0;    // m/s, Bernoulli estimate from max surface pressure
    double rho = 1.225;    // kg/m^3
    double chord = 1.0;    // m

    void validate() const;
};

// U = sqrt(2 * max(p) / rho). Throws Error("... no stagnation-like
// pressure ...") when max(p) <= 0.
double estimate_inflow(const std::vector<double>& surface_pressures, double rho);

// Stats from sensed surface pressures only; sigma_p is floored at
// 1e-6 * max(1, |mu_p|).
NormStats compute_stats(const std::vector<double>& sensed_pressures, double chord, double rho);
NormStats compute_stats(const MeshGraph& graph);

// p -> (p - mu)/sigma for observed and target pressure, u -> u/U for
// target velocities, sdf -> sdf/chord. denormalize_predictions inverts the
// target mapping on an n x 3 prediction array in place.
MeshGraph normalize(const MeshGraph& graph, const NormStats& stats);
void denormalize_predictions(std::vector<float>& pred_n3, const NormStats& stats);
void denormalize_predictions(std::vector<double>& pred_n3, const NormStats& stats);

}  // namespace frgt

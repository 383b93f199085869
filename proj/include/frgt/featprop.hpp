#pragma once

#include <cstdint>
#include <vector>

#include "frgt/graph.hpp"

namespace frgt {

// Node features with an explicit per-entry known mask. Missing entries are
// quiet-NaN on input; propagation replaces every one of them.
struct MaskedFeatures {
    std::int64_t n = 0;
    int channels = 0;
    std::vector<double> values;       // n x c
    std::vector<std::uint8_t> known;  // n x c

    static MaskedFeatures from_channel(const std::vector<double>& col,
                                       const std::vector<std::uint8_t>& mask);
};

enum class Diffusion {
    row_stochastic,        // D^-1 A, preserves the [min,max] envelope of known values
    symmetric_normalized,  // D^-1/2 A D^-1/2
};

// Iterative fill-in of missing features: repeat `iterations` times
// x <- A_norm x, then reset known entries to their original values.
// Known entries of the output equal the input bitwise. Throws Error if a
// connected component has no known node in some channel.
std::vector<double> propagate(const MeshGraph& graph, const MaskedFeatures& feats,
                              int iterations = 30,
                              Diffusion diffusion = Diffusion::row_stochastic);

// Model input matrix (n x 4), columns [p_propagated, t_fluid, t_wall, sdf].
// Expects a normalized graph (pressure_obs in normalized units, sdf in
// chords); the pressure channel is propagated from the sensed nodes.
std::vector<float> init_node_inputs(const MeshGraph& graph, int fp_iterations = 30);

}  // namespace frgt

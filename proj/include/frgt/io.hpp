#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "frgt/graph.hpp"
#include "frgt/model.hpp"
#include "frgt/norm.hpp"

namespace frgt {

inline constexpr int kBundleFormatVersion = 1;
inline constexpr int kCheckpointFormatVersion = 1;

// Free-form case metadata stored in the bundle manifest (JSON object,
// serialized as-is).
struct CaseMeta {
    std::string body;  // "cylinder", "joukowski", "synthetic", ...
    double u_inf = 0.0;
    double alpha = 0.0;
    double gamma = 0.0;
    double shape_p1 = 0.0;
    double shape_p2 = 0.0;
};

// Graph bundle: manifest.json + flat little-endian row-major binaries
// (pos.f32, node_type.u8, sdf.f32, edge_index.u32, edge_feat.f32,
// p_obs.f32, target.f32, sense_mask.u8). Every file carries an FNV-1a
// checksum in the manifest; load verifies checksums and all MeshGraph
// invariants. Errors are StoreError with a specific kind.
void save_bundle(const MeshGraph& graph, const std::optional<NormStats>& stats,
                 const std::optional<CaseMeta>& meta, const std::string& dir);

struct LoadedBundle {
    MeshGraph graph;
    std::optional<NormStats> stats;
    std::optional<CaseMeta> meta;
};

LoadedBundle load_bundle(const std::string& dir);

// Optimizer/trainer state stored alongside a checkpoint so a run can
// resume bit-exactly.
struct TrainState {
    std::int64_t adam_t = 0;
    int epoch = 0;  // epochs completed
    double best_val = 0.0;
    bool has_best_val = false;
    std::vector<float> adam_m;  // concatenated over params, in entry order
    std::vector<float> adam_v;
    int fp_iters = 30;
};

// Checkpoint: manifest.json (config, parameter names/shapes/checksums,
// seed, training metadata) + one .f32 file per named tensor.
void save_checkpoint(const ad::Params<float>& params, const FrgtConfig& config,
                     std::uint64_t seed, const std::optional<TrainState>& state,
                     const std::string& dir);

struct LoadedCheckpoint {
    ad::Params<float> params;
    FrgtConfig config;
    std::uint64_t seed = 0;
    std::optional<TrainState> state;
};

LoadedCheckpoint load_checkpoint(const std::string& dir);

}  // namespace frgt

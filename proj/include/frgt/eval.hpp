#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "frgt/graph.hpp"
#include "frgt/io.hpp"
#include "frgt/train.hpp"

namespace frgt {

struct ChannelMetrics {
    double rmse = 0.0;
    double max_abs = 0.0;
    std::optional<double> r2;  // empty when the target is constant
};

// Per-channel RMSE / max abs error / R^2 of n x 3 arrays over the given
// rows. R^2 uses the targets' own mean per channel.
std::array<ChannelMetrics, 3> metrics_n3(const std::vector<double>& pred,
                                         const std::vector<double>& target,
                                         const std::vector<std::uint32_t>& rows);

struct GraphEval {
    std::string id;
    std::int64_t n_eval_nodes = 0;
    std::array<ChannelMetrics, 3> channels;  // physical units, fluid nodes
};

struct EvalReport {
    std::vector<GraphEval> graphs;
    // aggregate rmse is the root of the node-count-weighted mean squared
    // error; R^2 is computed over the concatenated node set
    std::array<ChannelMetrics, 3> aggregate;
    double coverage = 1.0;
    std::string variant;
    std::int64_t param_count = 0;

    std::string to_json() const;
    std::string to_table() const;
};

// Runs the checkpoint over one split of a dataset (mask -> stats ->
// normalize -> propagate -> forward -> denormalize) and reports errors in
// physical units over fluid nodes. coverage < 1 restricts sensing the same
// way training did.
EvalReport evaluate_checkpoint(const std::string& ckpt_dir, const std::string& data_dir,
                               const std::string& split = "test", double coverage = 1.0);

struct CoverageRow {
    double fraction = 1.0;
    std::array<double, 3> rmse{};
    std::array<double, 3> change_pct{};  // vs the full-coverage baseline
};

struct CoverageStudy {
    std::vector<CoverageRow> rows;  // ordered as given, baseline first
    std::string to_json() const;
    std::string to_table() const;
};

// Baseline (fraction 1.0) plus one checkpoint per reduced fraction; each
// model is evaluated at its own training coverage.
CoverageStudy coverage_study(const std::string& baseline_ckpt,
                             const std::vector<std::pair<double, std::string>>& fraction_ckpts,
                             const std::string& data_dir, const std::string& split = "test");

// Field export for external plotting. format is "vtk" (legacy POLYDATA
// with point data) or "csv" (x,y,p,ux,uy,p_true,ux_true,uy_true).
void export_fields(const MeshGraph& graph, const std::vector<float>& pred_phys,
                   const std::string& path, const std::string& format);

struct InferResult {
    std::vector<float> pred_phys;  // n x 3
    NormStats stats;
    double forward_seconds = 0.0;
    double total_seconds = 0.0;
};

InferResult infer_bundle(const LoadedCheckpoint& ck, const MeshGraph& graph);

}  // namespace frgt

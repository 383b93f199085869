#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "frgt/featprop.hpp"
#include "frgt/io.hpp"
#include "frgt/model.hpp"

namespace frgt {

struct TrainConfig {
    int epochs = 500;
    double lr0 = 5e-4;
    double lr_min = 0.0;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    int accum_graphs = 1;  // optimizer step every k graphs (default: per graph)
    enum class LossNodes { fluid_only, all };
    LossNodes loss_nodes = LossNodes::fluid_only;
    double coverage = 1.0;
    int fp_iters = 30;
    bool deterministic = true;
    bool debug_checks = false;
    // stop after this epoch while keeping the cosine schedule spanning
    // `epochs` (0 = run to completion); resuming later continues the same
    // schedule
    int halt_epoch = 0;

    void validate() const;
};

// lr_min + (lr0 - lr_min) * (1 + cos(pi t / T)) / 2; throws on t > T.
double cosine_lr(std::int64_t t, std::int64_t total, double lr0, double lr_min);

struct LossParts {
    double p = 0.0;
    double ux = 0.0;
    double uy = 0.0;
    double total = 0.0;
};

// Mean squared error over the selected rows of n x 3 arrays, channels
// equally weighted; throws on an empty selection.
LossParts l2_loss_parts(const std::vector<float>& pred, const std::vector<float>& target,
                        const std::vector<std::uint32_t>& rows);

struct AdamState {
    std::int64_t t = 0;
    std::vector<std::vector<float>> m;  // aligned with params.entries
    std::vector<std::vector<float>> v;

    static AdamState like(const ad::Params<float>& params);
    std::vector<float> flatten_m() const;
    std::vector<float> flatten_v() const;
    void load_flat(const ad::Params<float>& params, const std::vector<float>& m_flat,
                   const std::vector<float>& v_flat);
};

// Decoupled weight decay (applied before the moment update term),
// bias-corrected first/second moments.
void adamw_step(ad::Params<float>& params, const std::vector<std::vector<float>>& grads,
                AdamState& state, double lr, const TrainConfig& cfg);

// A graph after the full input pipeline (mask -> stats -> normalize ->
// feature propagation), ready to feed the network.
struct PreparedGraph {
    std::string id;
    ModelGraph<float> inputs;
    std::vector<float> target_norm;       // n x 3
    std::vector<float> target_phys;       // n x 3
    std::vector<std::uint32_t> loss_rows;
    NormStats stats;
};

PreparedGraph prepare_graph(const MeshGraph& graph, const std::string& id, double coverage,
                            int fp_iters, TrainConfig::LossNodes loss_nodes);

struct TrainOutcome {
    std::string best_dir;
    std::string last_dir;
    std::string metrics_csv;
    double best_val = 0.0;
    std::vector<float> step_losses;  // chronological per-step training losses
};

// Full training run over a generated dataset directory (expects
// splits.json). Resumes from resume_dir when given (a checkpoint written
// by this trainer, at an epoch boundary). Writes metrics.csv, best/ and
// last/ under out_dir.
TrainOutcome train(const std::string& data_dir, const FrgtConfig& model_cfg,
                   const TrainConfig& cfg, const std::string& out_dir,
                   const std::string& resume_dir = "");

}  // namespace frgt

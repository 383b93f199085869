#include "frgt/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "frgt/norm.hpp"
#include "frgt/synth.hpp"

namespace frgt {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
    if (epochs < 1) throw Error("train config: epochs must be >= 1");
    if (!(lr0 > 0.0)) throw Error("train config: lr0 must be > 0");
    if (!(coverage > 0.0) || coverage > 1.0)
        throw Error("train config: coverage must be in (0, 1]");
    if (accum_graphs < 1) throw Error("train config: accum_graphs must be >= 1");
    if (fp_iters < 1) throw Error("train config: fp_iters must be >= 1");
}

double cosine_lr(std::int64_t t, std::int64_t total, double lr0, double lr_min) {
    if (t < 0 || t > total) throw Error("cosine_lr: step " + std::to_string(t) +
                                        " outside [0, " + std::to_string(total) + "]");
    constexpr double pi = 3.141592653589793238462643383279502884;
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(pi * static_cast<double>(t) / static_cast<double>(total)));
}

LossParts l2_loss_parts(const std::vector<float>& pred, const std::vector<float>& target,
                        const std::vector<std::uint32_t>& rows) {
    if (pred.size() != target.size()) throw Error("l2 loss: shape mismatch");
    if (rows.empty()) throw Error("l2 loss: empty node set");
    double acc[3] = {0.0, 0.0, 0.0};
    for (auto r : rows) {
        for (int c = 0; c < 3; ++c) {
            double d = static_cast<double>(pred[3 * static_cast<std::size_t>(r) + c]) -
                       static_cast<double>(target[3 * static_cast<std::size_t>(r) + c]);
            acc[c] += d * d;
        }
    }
    LossParts parts;
    parts.p = acc[0] / static_cast<double>(rows.size());
    parts.ux = acc[1] / static_cast<double>(rows.size());
    parts.uy = acc[2] / static_cast<double>(rows.size());
    parts.total = (parts.p + parts.ux + parts.uy) / 3.0;
    return parts;
}

AdamState AdamState::like(const ad::Params<float>& params) {
    AdamState s;
    s.m.reserve(params.entries.size());
    s.v.reserve(params.entries.size());
    for (const auto& e : params.entries) {
        s.m.emplace_back(e.value.size(), 0.0f);
        s.v.emplace_back(e.value.size(), 0.0f);
    }
    return s;
}

std::vector<float> AdamState::flatten_m() const {
    std::vector<float> out;
    for (const auto& x : m) out.insert(out.end(), x.begin(), x.end());
    return out;
}
std::vector<float> AdamState::flatten_v() const {
    std::vector<float> out;
    for (const auto& x : v) out.insert(out.end(), x.begin(), x.end());
    return out;
}

void AdamState::load_flat(const ad::Params<float>& params, const std::vector<float>& m_flat,
                          const std::vector<float>& v_flat) {
    m.clear();
    v.clear();
    std::size_t off = 0;
    for (const auto& e : params.entries) {
        if (off + e.value.size() > m_flat.size() || m_flat.size() != v_flat.size())
            throw Error("adam state: flat moment arrays do not match parameters");
        m.emplace_back(m_flat.begin() + static_cast<std::ptrdiff_t>(off),
                       m_flat.begin() + static_cast<std::ptrdiff_t>(off + e.value.size()));
        v.emplace_back(v_flat.begin() + static_cast<std::ptrdiff_t>(off),
                       v_flat.begin() + static_cast<std::ptrdiff_t>(off + e.value.size()));
        off += e.value.size();
    }
    if (off != m_flat.size()) throw Error("adam state: flat moment arrays do not match parameters");
}

void adamw_step(ad::Params<float>& params, const std::vector<std::vector<float>>& grads,
                AdamState& state, double lr, const TrainConfig& cfg) {
    if (grads.size() != params.entries.size())
        throw Error("adamw: gradient list does not match parameters");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t k = 0; k < params.entries.size(); ++k) {
        auto& theta = params.entries[k].value;
        const auto& g = grads[k];
        auto& m = state.m[k];
        auto& v = state.v[k];
        if (g.size() != theta.size()) throw Error("adamw: gradient shape mismatch for " +
                                                  params.entries[k].name);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            double th = static_cast<double>(theta[i]);
            th -= lr * cfg.weight_decay * th;  // decoupled decay
            double gi = static_cast<double>(g[i]);
            double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * gi;
            double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * gi * gi;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            double mhat = mi / bc1;
            double vhat = vi / bc2;
            th -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
            theta[i] = static_cast<float>(th);
        }
    }
}

PreparedGraph prepare_graph(const MeshGraph& graph, const std::string& id, double coverage,
                            int fp_iters, TrainConfig::LossNodes loss_nodes) {
    PreparedGraph pg;
    pg.id = id;
    MeshGraph g = coverage < 1.0 ? mask_coverage(graph, coverage) : graph;
    pg.stats = compute_stats(g);
    pg.target_phys = g.target;
    g = normalize(g, pg.stats);
    pg.target_norm = g.target;

    pg.inputs.n_nodes = static_cast<int>(g.n_nodes);
    pg.inputs.edge_src = g.edge_src;
    pg.inputs.edge_dst = g.edge_dst;
    pg.inputs.node_in = init_node_inputs(g, fp_iters);
    pg.inputs.edge_in = g.edge_feat;

    for (std::int64_t i = 0; i < g.n_nodes; ++i) {
        bool use = loss_nodes == TrainConfig::LossNodes::all || g.node_type[static_cast<std::size_t>(i)] == 0;
        if (use) pg.loss_rows.push_back(static_cast<std::uint32_t>(i));
    }
    if (pg.loss_rows.empty()) throw Error("prepare_graph: empty loss node set for " + id);
    return pg;
}

namespace {

struct Dataset {
    std::vector<PreparedGraph> train;
    std::vector<PreparedGraph> val;
};

Dataset load_dataset(const std::string& data_dir, const TrainConfig& cfg) {
    std::ifstream in(fs::path(data_dir) / "splits.json");
    if (!in) throw Error("train: cannot open splits.json in " + data_dir);
    nlohmann::json j;
    in >> j;
    Dataset ds;
    auto load_list = [&](const char* key, std::vector<PreparedGraph>& out) {
        for (const auto& name : j.at(key)) {
            auto id = name.get<std::string>();
            auto b = load_bundle((fs::path(data_dir) / id).string());
            out.push_back(prepare_graph(b.graph, id, cfg.coverage, cfg.fp_iters, cfg.loss_nodes));
        }
    };
    load_list("train", ds.train);
    load_list("val", ds.val);
    if (ds.train.empty()) throw Error("train: dataset has no training graphs");
    return ds;
}

// forward + per-channel losses without gradients
LossParts eval_loss(const PreparedGraph& pg, const FrgtConfig& mcfg,
                    const ad::Params<float>& params) {
    auto pred = frgt_predict(pg.inputs, mcfg, params);
    return l2_loss_parts(pred, pg.target_norm, pg.loss_rows);
}

void append_csv(std::ofstream& csv, int epoch, const char* split, const LossParts& parts,
                double lr) {
    char line[256];
    std::snprintf(line, sizeof(line), "%d,%s,%.9e,%.9e,%.9e,%.9e,%.9e\n", epoch, split, parts.p,
                  parts.ux, parts.uy, parts.total, lr);
    csv << line;
}

}  // namespace

TrainOutcome train(const std::string& data_dir, const FrgtConfig& model_cfg,
                   const TrainConfig& cfg, const std::string& out_dir,
                   const std::string& resume_dir) {
    model_cfg.validate();
    cfg.validate();
    fs::create_directories(out_dir);

    Dataset ds = load_dataset(data_dir, cfg);

    ad::Params<float> params;
    AdamState adam;
    int start_epoch = 0;
    double best_val = std::numeric_limits<double>::infinity();
    bool has_best = false;
    if (resume_dir.empty()) {
        params = init_params<float>(model_cfg, cfg.seed);
        adam = AdamState::like(params);
    } else {
        auto ck = load_checkpoint(resume_dir);
        params = std::move(ck.params);
        adam = AdamState::like(params);
        if (!ck.state) throw Error("train: checkpoint " + resume_dir + " has no training state");
        adam.load_flat(params, ck.state->adam_m, ck.state->adam_v);
        adam.t = ck.state->adam_t;
        start_epoch = ck.state->epoch;
        if (ck.state->has_best_val) {
            best_val = ck.state->best_val;
            has_best = true;
        }
    }

    TrainOutcome outcome;
    outcome.best_dir = (fs::path(out_dir) / "best").string();
    outcome.last_dir = (fs::path(out_dir) / "last").string();
    outcome.metrics_csv = (fs::path(out_dir) / "metrics.csv").string();

    bool fresh_csv = resume_dir.empty() || !fs::exists(outcome.metrics_csv);
    std::ofstream csv(outcome.metrics_csv, resume_dir.empty() ? std::ios::trunc : std::ios::app);
    if (!csv) throw Error("train: cannot write " + outcome.metrics_csv);
    if (fresh_csv) csv << "epoch,split,loss_p,loss_ux,loss_uy,loss_total,lr\n";

    auto save_state = [&](const std::string& dir, int epochs_done) {
        TrainState st;
        st.adam_t = adam.t;
        st.epoch = epochs_done;
        st.best_val = best_val;
        st.has_best_val = has_best;
        st.adam_m = adam.flatten_m();
        st.adam_v = adam.flatten_v();
        st.fp_iters = cfg.fp_iters;
        save_checkpoint(params, model_cfg, cfg.seed, st, dir);
    };

    std::vector<std::vector<float>> grad_acc(params.entries.size());
    for (std::size_t k = 0; k < params.entries.size(); ++k)
        grad_acc[k].assign(params.entries[k].value.size(), 0.0f);

    std::vector<std::size_t> order(ds.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const int last_epoch =
        cfg.halt_epoch > 0 ? std::min(cfg.epochs, cfg.halt_epoch) : cfg.epochs;
    for (int epoch = start_epoch; epoch < last_epoch; ++epoch) {
        const double lr = cosine_lr(epoch, cfg.epochs, cfg.lr0, cfg.lr_min);
        Rng shuffle_rng(splitmix64(cfg.seed + 1) ^ splitmix64(static_cast<std::uint64_t>(epoch) + 0x51ed));
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        shuffle_rng.shuffle(order);

        LossParts train_sum;
        int accum = 0;
        for (std::size_t step = 0; step < order.size(); ++step) {
            const PreparedGraph& pg = ds.train[order[step]];
            ad::Tape<float> tape;
            tape.debug_checks = cfg.debug_checks;
            auto bound = bind_params(tape, params, /*needs_grad=*/true);
            auto pred = frgt_forward(tape, pg.inputs, model_cfg, bound);

            std::vector<float> sel_target(pg.loss_rows.size() * 3);
            for (std::size_t r = 0; r < pg.loss_rows.size(); ++r)
                for (int c = 0; c < 3; ++c)
                    sel_target[3 * r + c] = pg.target_norm[3 * pg.loss_rows[r] + c];
            auto sel = ad::gather_rows(pred, pg.loss_rows);
            auto tgt = tape.value(static_cast<int>(pg.loss_rows.size()), 3, std::move(sel_target));
            auto diff = ad::sub(sel, tgt);
            auto loss = ad::scale(ad::sum_all(ad::mul(diff, diff)),
                                  1.0 / (static_cast<double>(pg.loss_rows.size()) * 3.0));

            float loss_val = loss.val()[0];
            if (!std::isfinite(loss_val))
                throw Error("train: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(step) + ", graph " + pg.id);
            outcome.step_losses.push_back(loss_val);

            LossParts parts = l2_loss_parts(pred.val(), pg.target_norm, pg.loss_rows);
            train_sum.p += parts.p;
            train_sum.ux += parts.ux;
            train_sum.uy += parts.uy;
            train_sum.total += parts.total;

            tape.backward(loss);
            for (std::size_t k = 0; k < params.entries.size(); ++k) {
                const auto& g = tape.grad(bound.tensors[k].id);
                auto& acc = grad_acc[k];
                for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
            }
            ++accum;
            if (accum == cfg.accum_graphs || step + 1 == order.size()) {
                if (accum > 1)
                    for (auto& g : grad_acc)
                        for (auto& x : g) x /= static_cast<float>(accum);
                adamw_step(params, grad_acc, adam, lr, cfg);
                for (auto& g : grad_acc) std::fill(g.begin(), g.end(), 0.0f);
                accum = 0;
            }
        }
        const double inv_steps = 1.0 / static_cast<double>(order.size());
        train_sum.p *= inv_steps;
        train_sum.ux *= inv_steps;
        train_sum.uy *= inv_steps;
        train_sum.total *= inv_steps;
        append_csv(csv, epoch, "train", train_sum, lr);

        if (!ds.val.empty()) {
            LossParts val_sum;
            for (const auto& pg : ds.val) {
                LossParts p = eval_loss(pg, model_cfg, params);
                val_sum.p += p.p;
                val_sum.ux += p.ux;
                val_sum.uy += p.uy;
                val_sum.total += p.total;
            }
            const double inv = 1.0 / static_cast<double>(ds.val.size());
            val_sum.p *= inv;
            val_sum.ux *= inv;
            val_sum.uy *= inv;
            val_sum.total *= inv;
            append_csv(csv, epoch, "val", val_sum, lr);
            if (!has_best || val_sum.total < best_val) {
                best_val = val_sum.total;
                has_best = true;
                save_state(outcome.best_dir, epoch + 1);
            }
        }
        csv.flush();
    }
    // without a validation split the final model doubles as "best"
    if (!has_best) {
        best_val = outcome.step_losses.empty() ? 0.0 : outcome.step_losses.back();
        save_state(outcome.best_dir, last_epoch);
    }
    save_state(outcome.last_dir, last_epoch);
    outcome.best_val = best_val;
    return outcome;
}

}  // namespace frgt

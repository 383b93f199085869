#include "frgt/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "frgt/featprop.hpp"
#include "frgt/norm.hpp"
#include "frgt/synth.hpp"

namespace frgt {

namespace fs = std::filesystem;
using nlohmann::json;

std::array<ChannelMetrics, 3> metrics_n3(const std::vector<double>& pred,
                                         const std::vector<double>& target,
                                         const std::vector<std::uint32_t>& rows) {
    if (pred.size() != target.size()) throw Error("metrics: shape mismatch");
    if (rows.empty()) throw Error("metrics: empty node set");
    std::array<ChannelMetrics, 3> out;
    for (int c = 0; c < 3; ++c) {
        double mean_t = 0.0;
        for (auto r : rows) mean_t += target[3 * static_cast<std::size_t>(r) + c];
        mean_t /= static_cast<double>(rows.size());
        double ss_res = 0.0, ss_tot = 0.0, max_abs = 0.0;
        for (auto r : rows) {
            double t = target[3 * static_cast<std::size_t>(r) + c];
            double d = pred[3 * static_cast<std::size_t>(r) + c] - t;
            ss_res += d * d;
            ss_tot += (t - mean_t) * (t - mean_t);
            max_abs = std::max(max_abs, std::abs(d));
        }
        out[static_cast<std::size_t>(c)].rmse = std::sqrt(ss_res / static_cast<double>(rows.size()));
        out[static_cast<std::size_t>(c)].max_abs = max_abs;
        if (ss_tot > 0.0)
            out[static_cast<std::size_t>(c)].r2 = 1.0 - ss_res / ss_tot;
    }
    return out;
}

namespace {

json channel_json(const ChannelMetrics& m) {
    json j{{"rmse", m.rmse}, {"max_abs", m.max_abs}};
    if (m.r2)
        j["r2"] = *m.r2;
    else
        j["r2"] = nullptr;
    return j;
}

const char* kChannelNames[3] = {"p", "u_x", "u_y"};
const char* kChannelUnits[3] = {"Pa", "m/s", "m/s"};

}  // namespace

std::string EvalReport::to_json() const {
    json j;
    j["coverage"] = coverage;
    j["variant"] = variant;
    j["param_count"] = param_count;
    j["aggregate"] = json::object();
    for (int c = 0; c < 3; ++c) j["aggregate"][kChannelNames[c]] = channel_json(aggregate[static_cast<std::size_t>(c)]);
    j["graphs"] = json::array();
    for (const auto& g : graphs) {
        json gj{{"id", g.id}, {"n_eval_nodes", g.n_eval_nodes}};
        for (int c = 0; c < 3; ++c) gj[kChannelNames[c]] = channel_json(g.channels[static_cast<std::size_t>(c)]);
        j["graphs"].push_back(gj);
    }
    return j.dump(2);
}

std::string EvalReport::to_table() const {
    char buf[256];
    std::string s;
    std::snprintf(buf, sizeof(buf), "variant=%s  coverage=%.2f  params=%lld  graphs=%zu\n",
                  variant.c_str(), coverage, static_cast<long long>(param_count), graphs.size());
    s += buf;
    s += "channel      avg RMSE        max abs err     R^2\n";
    for (int c = 0; c < 3; ++c) {
        const auto& m = aggregate[static_cast<std::size_t>(c)];
        char r2[32];
        if (m.r2)
            std::snprintf(r2, sizeof(r2), "%.6f", *m.r2);
        else
            std::snprintf(r2, sizeof(r2), "n/a");
        std::snprintf(buf, sizeof(buf), "%-5s %12.4f %-5s %12.4f %-5s  %s\n", kChannelNames[c],
                      m.rmse, kChannelUnits[c], m.max_abs, kChannelUnits[c], r2);
        s += buf;
    }
    return s;
}

InferResult infer_bundle(const LoadedCheckpoint& ck, const MeshGraph& graph) {
    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();
    int fp_iters = ck.state ? ck.state->fp_iters : 30;
    PreparedGraph pg = prepare_graph(graph, "infer", 1.0, fp_iters,
                                     TrainConfig::LossNodes::fluid_only);
    auto t1 = clock::now();
    auto pred = frgt_predict(pg.inputs, ck.config, ck.params);
    auto t2 = clock::now();

    InferResult r;
    r.stats = pg.stats;
    denormalize_predictions(pred, r.stats);
    r.pred_phys = std::move(pred);
    r.forward_seconds = std::chrono::duration<double>(t2 - t1).count();
    r.total_seconds = std::chrono::duration<double>(t2 - t0).count();
    return r;
}

EvalReport evaluate_checkpoint(const std::string& ckpt_dir, const std::string& data_dir,
                               const std::string& split, double coverage) {
    auto ck = load_checkpoint(ckpt_dir);
    std::ifstream in(fs::path(data_dir) / "splits.json");
    if (!in) throw Error("eval: cannot open splits.json in " + data_dir);
    json sj;
    in >> sj;
    if (!sj.contains(split)) throw Error("eval: dataset has no split '" + split + "'");

    EvalReport report;
    report.coverage = coverage;
    report.variant = ck.config.variant_name();
    report.param_count = count_params(ck.config);
    int fp_iters = ck.state ? ck.state->fp_iters : 30;

    // concatenated accumulators for aggregate metrics
    double sum_sq[3] = {0, 0, 0}, sum_t[3] = {0, 0, 0}, sum_t2[3] = {0, 0, 0}, max_abs[3] = {0, 0, 0};
    std::int64_t total_nodes = 0;

    for (const auto& name : sj.at(split)) {
        auto id = name.get<std::string>();
        auto b = load_bundle((fs::path(data_dir) / id).string());
        PreparedGraph pg = prepare_graph(b.graph, id, coverage, fp_iters,
                                         TrainConfig::LossNodes::fluid_only);
        auto pred = frgt_predict(pg.inputs, ck.config, ck.params);
        denormalize_predictions(pred, pg.stats);

        std::vector<double> pd(pred.begin(), pred.end());
        std::vector<double> td(pg.target_phys.begin(), pg.target_phys.end());
        GraphEval ge;
        ge.id = id;
        ge.n_eval_nodes = static_cast<std::int64_t>(pg.loss_rows.size());
        ge.channels = metrics_n3(pd, td, pg.loss_rows);
        report.graphs.push_back(ge);

        for (auto r : pg.loss_rows) {
            for (int c = 0; c < 3; ++c) {
                double t = td[3 * static_cast<std::size_t>(r) + c];
                double d = pd[3 * static_cast<std::size_t>(r) + c] - t;
                sum_sq[c] += d * d;
                sum_t[c] += t;
                sum_t2[c] += t * t;
                max_abs[c] = std::max(max_abs[c], std::abs(d));
            }
        }
        total_nodes += ge.n_eval_nodes;
    }
    if (total_nodes == 0) throw Error("eval: split '" + split + "' is empty");
    for (int c = 0; c < 3; ++c) {
        auto& m = report.aggregate[static_cast<std::size_t>(c)];
        m.rmse = std::sqrt(sum_sq[c] / static_cast<double>(total_nodes));
        m.max_abs = max_abs[c];
        double ss_tot = sum_t2[c] - sum_t[c] * sum_t[c] / static_cast<double>(total_nodes);
        if (ss_tot > 0.0) m.r2 = 1.0 - sum_sq[c] / ss_tot;
    }
    return report;
}

std::string CoverageStudy::to_json() const {
    json j = json::array();
    for (const auto& r : rows) {
        j.push_back(json{{"fraction", r.fraction},
                         {"rmse", {{"p", r.rmse[0]}, {"u_x", r.rmse[1]}, {"u_y", r.rmse[2]}}},
                         {"change_pct",
                          {{"p", r.change_pct[0]}, {"u_x", r.change_pct[1]}, {"u_y", r.change_pct[2]}}}});
    }
    return j.dump(2);
}

std::string CoverageStudy::to_table() const {
    std::string s = "coverage   dRMSE_p%   dRMSE_ux%  dRMSE_uy%\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%8.2f %+10.2f %+10.2f %+10.2f\n", r.fraction,
                      r.change_pct[0], r.change_pct[1], r.change_pct[2]);
        s += buf;
    }
    return s;
}

CoverageStudy coverage_study(const std::string& baseline_ckpt,
                             const std::vector<std::pair<double, std::string>>& fraction_ckpts,
                             const std::string& data_dir, const std::string& split) {
    if (baseline_ckpt.empty()) throw Error("coverage study: missing full-coverage baseline");
    CoverageStudy study;
    EvalReport base = evaluate_checkpoint(baseline_ckpt, data_dir, split, 1.0);
    CoverageRow brow;
    brow.fraction = 1.0;
    for (int c = 0; c < 3; ++c) {
        brow.rmse[static_cast<std::size_t>(c)] = base.aggregate[static_cast<std::size_t>(c)].rmse;
        brow.change_pct[static_cast<std::size_t>(c)] = 0.0;
    }
    study.rows.push_back(brow);
    for (const auto& [fraction, ckpt] : fraction_ckpts) {
        EvalReport rep = evaluate_checkpoint(ckpt, data_dir, split, fraction);
        CoverageRow row;
        row.fraction = fraction;
        for (int c = 0; c < 3; ++c) {
            double r = rep.aggregate[static_cast<std::size_t>(c)].rmse;
            row.rmse[static_cast<std::size_t>(c)] = r;
            double b = brow.rmse[static_cast<std::size_t>(c)];
            if (b <= 0.0) throw Error("coverage study: baseline RMSE is zero");
            row.change_pct[static_cast<std::size_t>(c)] = 100.0 * (r - b) / b;
        }
        study.rows.push_back(row);
    }
    return study;
}

void export_fields(const MeshGraph& graph, const std::vector<float>& pred_phys,
                   const std::string& path, const std::string& format) {
    const auto n = static_cast<std::size_t>(graph.n_nodes);
    if (pred_phys.size() != 3 * n) throw Error("export: prediction must be n x 3");
    std::ofstream out(path);
    if (!out) throw Error("export: cannot open " + path);
    char buf[512];

    if (format == "vtk") {
        out << "# vtk DataFile Version 3.0\nflow field\nASCII\nDATASET POLYDATA\n";
        std::snprintf(buf, sizeof(buf), "POINTS %zu float\n", n);
        out << buf;
        for (std::size_t i = 0; i < n; ++i) {
            std::snprintf(buf, sizeof(buf), "%.9g %.9g 0\n", graph.positions[2 * i],
                          graph.positions[2 * i + 1]);
            out << buf;
        }
        std::snprintf(buf, sizeof(buf), "VERTICES %zu %zu\n", n, 2 * n);
        out << buf;
        for (std::size_t i = 0; i < n; ++i) out << "1 " << i << '\n';
        std::snprintf(buf, sizeof(buf), "POINT_DATA %zu\n", n);
        out << buf;
        auto scalars = [&](const char* name, auto getter) {
            out << "SCALARS " << name << " float 1\nLOOKUP_TABLE default\n";
            for (std::size_t i = 0; i < n; ++i) {
                std::snprintf(buf, sizeof(buf), "%.9g\n", static_cast<double>(getter(i)));
                out << buf;
            }
        };
        scalars("p", [&](std::size_t i) { return pred_phys[3 * i]; });
        scalars("u_x", [&](std::size_t i) { return pred_phys[3 * i + 1]; });
        scalars("u_y", [&](std::size_t i) { return pred_phys[3 * i + 2]; });
        scalars("u_mag", [&](std::size_t i) {
            return std::hypot(pred_phys[3 * i + 1], pred_phys[3 * i + 2]);
        });
        if (graph.has_target()) {
            scalars("p_err", [&](std::size_t i) { return pred_phys[3 * i] - graph.target[3 * i]; });
            scalars("u_x_err",
                    [&](std::size_t i) { return pred_phys[3 * i + 1] - graph.target[3 * i + 1]; });
            scalars("u_y_err",
                    [&](std::size_t i) { return pred_phys[3 * i + 2] - graph.target[3 * i + 2]; });
        }
    } else if (format == "csv") {
        out << "x,y,p,ux,uy,p_true,ux_true,uy_true\n";
        for (std::size_t i = 0; i < n; ++i) {
            float pt = graph.has_target() ? graph.target[3 * i] : missing_value();
            float uxt = graph.has_target() ? graph.target[3 * i + 1] : missing_value();
            float uyt = graph.has_target() ? graph.target[3 * i + 2] : missing_value();
            std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                          graph.positions[2 * i], graph.positions[2 * i + 1], pred_phys[3 * i],
                          pred_phys[3 * i + 1], pred_phys[3 * i + 2], pt, uxt, uyt);
            out << buf;
        }
    } else {
        throw Error("export: unknown format '" + format + "' (expected vtk or csv)");
    }
    if (!out) throw Error("export: write failed for " + path);
}

}  // namespace frgt

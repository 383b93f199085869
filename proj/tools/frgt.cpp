#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "frgt/eval.hpp"
#include "frgt/gradcheck.hpp"
#include "frgt/io.hpp"
#include "frgt/synth.hpp"
#include "frgt/train.hpp"

namespace fs = std::filesystem;
using namespace frgt;

namespace {

// key = value file mirroring the model/training config fields
void parse_config_file(const std::string& path, FrgtConfig& mcfg, TrainConfig& tcfg) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto eq = line.find('=');
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        if (eq == std::string::npos)
            throw Error("config: line " + std::to_string(lineno) + " is not key = value");
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r\n");
            auto e = s.find_last_not_of(" \t\r\n");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key == "variant")
            mcfg.variant = variant_from_name(val);
        else if (key == "L")
            mcfg.mp_layers = std::stoi(val);
        else if (key == "T")
            mcfg.attn_layers = std::stoi(val);
        else if (key == "C")
            mcfg.combined_layers = std::stoi(val);
        else if (key == "d")
            mcfg.latent = std::stoi(val);
        else if (key == "eta")
            mcfg.heads = std::stoi(val);
        else if (key == "d_eta")
            mcfg.head_dim = std::stoi(val);
        else if (key == "enc_hidden_layers")
            mcfg.enc_hidden_layers = std::stoi(val);
        else if (key == "dec_hidden_layers")
            mcfg.dec_hidden_layers = std::stoi(val);
        else if (key == "update_mlp_layers")
            mcfg.update_mlp_layers = std::stoi(val);
        else if (key == "msg_eps")
            mcfg.msg_eps = std::stod(val);
        else if (key == "epochs")
            tcfg.epochs = std::stoi(val);
        else if (key == "lr0")
            tcfg.lr0 = std::stod(val);
        else if (key == "lr_min")
            tcfg.lr_min = std::stod(val);
        else if (key == "weight_decay")
            tcfg.weight_decay = std::stod(val);
        else if (key == "beta1")
            tcfg.beta1 = std::stod(val);
        else if (key == "beta2")
            tcfg.beta2 = std::stod(val);
        else if (key == "adam_eps")
            tcfg.adam_eps = std::stod(val);
        else if (key == "seed")
            tcfg.seed = std::stoull(val);
        else if (key == "accum_graphs")
            tcfg.accum_graphs = std::stoi(val);
        else if (key == "loss_node_set")
            tcfg.loss_nodes = val == "all" ? TrainConfig::LossNodes::all
                                           : TrainConfig::LossNodes::fluid_only;
        else if (key == "coverage_fraction")
            tcfg.coverage = std::stod(val);
        else if (key == "fp_iters")
            tcfg.fp_iters = std::stoi(val);
        else
            throw Error("config: unknown key '" + key + "' at line " + std::to_string(lineno));
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << text;
}

std::vector<float> read_f32(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() % 4 != 0) throw Error(path + ": size is not a multiple of 4 bytes");
    std::vector<float> out(buf.size() / 4);
    std::memcpy(out.data(), buf.data(), buf.size());
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flow reconstruction graph transformer pipeline"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic potential-flow dataset");
    std::uint64_t gen_seed = 0;
    int n_cases = 16;
    std::string gen_out = "data";
    std::string split_frac = "0.8,0.1,0.1";
    std::string split_counts;
    double gen_coverage = 1.0;
    int g_ntheta = 48, g_nr = 14;
    gen->add_option("--seed", gen_seed, "RNG seed");
    gen->add_option("--n-cases", n_cases, "total number of cases");
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--split-frac", split_frac, "train,val,test fractions");
    gen->add_option("--split-counts", split_counts, "train,val,test absolute counts");
    gen->add_option("--coverage", gen_coverage, "sense-mask fraction applied at generation");
    gen->add_option("--n-theta", g_ntheta, "angular cells");
    gen->add_option("--n-r", g_nr, "radial rings");

    // train
    auto* tr = app.add_subcommand("train", "train a model on a generated dataset");
    std::string tr_data, tr_config, tr_out = "run", tr_resume;
    double tr_coverage = -1.0;
    std::uint64_t tr_seed = UINT64_MAX;
    bool tr_deterministic = false;
    int tr_fp_iters = -1;
    tr->add_option("--data", tr_data, "dataset directory")->required();
    tr->add_option("--config", tr_config, "key=value config file");
    tr->add_option("--coverage", tr_coverage, "sensor coverage fraction (0,1]");
    tr->add_option("--out", tr_out, "output directory");
    tr->add_option("--seed", tr_seed, "seed override");
    tr->add_option("--resume", tr_resume, "checkpoint directory to resume from");
    tr->add_option("--fp-iters", tr_fp_iters, "feature propagation iterations");
    tr->add_flag("--deterministic", tr_deterministic, "single-threaded deterministic mode");

    // infer
    auto* inf = app.add_subcommand("infer", "run a checkpoint on one bundle");
    std::string inf_ckpt, inf_bundle, inf_out = "pred";
    inf->add_option("--ckpt", inf_ckpt, "checkpoint directory")->required();
    inf->add_option("--bundle", inf_bundle, "graph bundle directory")->required();
    inf->add_option("--out", inf_out, "output directory");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
    std::string ev_ckpt, ev_data, ev_report, ev_split = "test";
    double ev_coverage = 1.0;
    ev->add_option("--ckpt", ev_ckpt, "checkpoint directory")->required();
    ev->add_option("--data", ev_data, "dataset directory")->required();
    ev->add_option("--report", ev_report, "write the JSON report here");
    ev->add_option("--split", ev_split, "dataset split");
    ev->add_option("--coverage", ev_coverage, "sensor coverage at evaluation");

    // coverage-study
    auto* cov = app.add_subcommand("coverage-study", "RMSE change vs the full-coverage baseline");
    std::vector<std::string> cov_ckpts;
    std::string cov_data, cov_report, cov_split = "test";
    cov->add_option("--ckpts", cov_ckpts, "fraction=ckpt_dir pairs (must include 1.0=...)")
        ->required()
        ->expected(-1);
    cov->add_option("--data", cov_data, "dataset directory")->required();
    cov->add_option("--report", cov_report, "write the JSON report here");
    cov->add_option("--split", cov_split, "dataset split");

    // grad-check
    auto* gc = app.add_subcommand("grad-check", "finite-difference check of all primitives");
    std::uint64_t gc_seed = 7;
    double gc_tol = 1e-4;
    gc->add_option("--seed", gc_seed, "RNG seed");
    gc->add_option("--tol", gc_tol, "max relative error");

    // export
    auto* ex = app.add_subcommand("export", "export predicted fields for plotting");
    std::string ex_bundle, ex_pred, ex_format = "vtk", ex_out;
    ex->add_option("--bundle", ex_bundle, "graph bundle directory")->required();
    ex->add_option("--pred", ex_pred, "pred.f32 file (n x 3, physical units)")->required();
    ex->add_option("--format", ex_format, "vtk or csv");
    ex->add_option("--out", ex_out, "output file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 2;
    }

    try {
        if (*gen) {
            DatasetSpec spec;
            spec.seed = gen_seed;
            spec.grid.n_theta = g_ntheta;
            spec.grid.n_r = g_nr;
            spec.coverage = gen_coverage;
            if (!split_counts.empty()) {
                if (std::sscanf(split_counts.c_str(), "%d,%d,%d", &spec.n_train, &spec.n_val,
                                &spec.n_test) != 3)
                    throw Error("gen-data: --split-counts wants train,val,test");
            } else {
                double ft, fv, fe;
                if (std::sscanf(split_frac.c_str(), "%lf,%lf,%lf", &ft, &fv, &fe) != 3)
                    throw Error("gen-data: --split-frac wants train,val,test");
                spec.n_train = static_cast<int>(ft * n_cases + 0.5);
                spec.n_val = static_cast<int>(fv * n_cases + 0.5);
                spec.n_test = n_cases - spec.n_train - spec.n_val;
            }
            auto split = generate_dataset(spec, gen_out);
            std::printf("wrote %zu train / %zu val / %zu test bundles to %s\n",
                        split.train.size(), split.val.size(), split.test.size(), gen_out.c_str());
        } else if (*tr) {
            FrgtConfig mcfg;
            TrainConfig tcfg;
            if (!tr_config.empty()) parse_config_file(tr_config, mcfg, tcfg);
            if (tr_coverage > 0.0) tcfg.coverage = tr_coverage;
            if (tr_seed != UINT64_MAX) tcfg.seed = tr_seed;
            if (tr_fp_iters > 0) tcfg.fp_iters = tr_fp_iters;
            if (tr_deterministic) tcfg.deterministic = true;
            auto outcome = train(tr_data, mcfg, tcfg, tr_out, tr_resume);
            std::printf("training done: best val loss %.6g\n  best: %s\n  last: %s\n  log: %s\n",
                        outcome.best_val, outcome.best_dir.c_str(), outcome.last_dir.c_str(),
                        outcome.metrics_csv.c_str());
        } else if (*inf) {
            auto ck = load_checkpoint(inf_ckpt);
            auto bundle = load_bundle(inf_bundle);
            auto res = infer_bundle(ck, bundle.graph);
            fs::create_directories(inf_out);
            std::ofstream out(fs::path(inf_out) / "pred.f32", std::ios::binary);
            out.write(reinterpret_cast<const char*>(res.pred_phys.data()),
                      static_cast<std::streamsize>(res.pred_phys.size() * sizeof(float)));
            if (!out) throw Error("infer: cannot write pred.f32");
            std::printf("inference on %lld nodes: forward %.3f s (total with preprocessing %.3f s)\n",
                        static_cast<long long>(bundle.graph.n_nodes), res.forward_seconds,
                        res.total_seconds);
            if (bundle.graph.has_target()) {
                std::vector<double> pd(res.pred_phys.begin(), res.pred_phys.end());
                std::vector<double> td(bundle.graph.target.begin(), bundle.graph.target.end());
                std::vector<std::uint32_t> rows;
                for (std::int64_t i = 0; i < bundle.graph.n_nodes; ++i)
                    if (bundle.graph.node_type[static_cast<std::size_t>(i)] == 0)
                        rows.push_back(static_cast<std::uint32_t>(i));
                auto m = metrics_n3(pd, td, rows);
                std::printf("fluid-node RMSE: p %.4f Pa, u_x %.4f m/s, u_y %.4f m/s\n", m[0].rmse,
                            m[1].rmse, m[2].rmse);
            }
        } else if (*ev) {
            auto report = evaluate_checkpoint(ev_ckpt, ev_data, ev_split, ev_coverage);
            std::cout << report.to_table();
            if (!ev_report.empty()) write_text(ev_report, report.to_json() + "\n");
        } else if (*cov) {
            std::string baseline;
            std::vector<std::pair<double, std::string>> fractions;
            for (const auto& spec : cov_ckpts) {
                auto eq = spec.find('=');
                if (eq == std::string::npos)
                    throw Error("coverage-study: --ckpts entries are fraction=dir, got " + spec);
                double f = std::stod(spec.substr(0, eq));
                std::string dir = spec.substr(eq + 1);
                if (f == 1.0)
                    baseline = dir;
                else
                    fractions.emplace_back(f, dir);
            }
            if (baseline.empty())
                throw Error("coverage-study: missing the 1.0=<baseline ckpt> entry");
            std::sort(fractions.begin(), fractions.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first; });
            auto study = coverage_study(baseline, fractions, cov_data, cov_split);
            std::cout << study.to_table();
            if (!cov_report.empty()) write_text(cov_report, study.to_json() + "\n");
        } else if (*gc) {
            auto report = run_grad_checks(gc_seed);
            for (const auto& e : report.entries)
                std::printf("%-32s input %d  max rel err %.3e\n", e.op.c_str(), e.input,
                            e.max_rel_err);
            std::printf("worst %.3e (tolerance %.1e): %s\n", report.worst, gc_tol,
                        report.passed(gc_tol) ? "PASS" : "FAIL");
            return report.passed(gc_tol) ? 0 : 1;
        } else if (*ex) {
            auto bundle = load_bundle(ex_bundle);
            auto pred = read_f32(ex_pred);
            export_fields(bundle.graph, pred, ex_out, ex_format);
            std::printf("wrote %s\n", ex_out.c_str());
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}

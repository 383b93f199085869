#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "frgt/eval.hpp"
#include "frgt/synth.hpp"

using namespace frgt;
namespace fs = std::filesystem;

namespace {

struct TmpDir {
    fs::path path;
    explicit TmpDir(const char* name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TmpDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("metrics: exact prediction, constant offset, mean predictor") {
    Rng rng(19);
    std::vector<double> target(30);
    for (auto& t : target) t = rng.uniform(-5.0, 5.0);
    std::vector<std::uint32_t> rows = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};

    auto exact = metrics_n3(target, target, rows);
    for (int c = 0; c < 3; ++c) {
        CHECK(exact[static_cast<std::size_t>(c)].rmse == 0.0);
        CHECK(exact[static_cast<std::size_t>(c)].max_abs == 0.0);
        REQUIRE(exact[static_cast<std::size_t>(c)].r2.has_value());
        CHECK(*exact[static_cast<std::size_t>(c)].r2 == 1.0);
    }

    std::vector<double> off(target.size());
    for (std::size_t i = 0; i < target.size(); ++i) off[i] = target[i] + 0.75;
    auto shifted = metrics_n3(off, target, rows);
    for (int c = 0; c < 3; ++c) {
        CHECK(shifted[static_cast<std::size_t>(c)].rmse == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(shifted[static_cast<std::size_t>(c)].max_abs == doctest::Approx(0.75).epsilon(1e-12));
    }

    // predicting the per-channel mean gives r2 = 0
    std::vector<double> mean_pred(target.size());
    for (int c = 0; c < 3; ++c) {
        double mu = 0.0;
        for (auto r : rows) mu += target[3 * r + static_cast<std::size_t>(c)];
        mu /= static_cast<double>(rows.size());
        for (auto r : rows) mean_pred[3 * r + static_cast<std::size_t>(c)] = mu;
    }
    auto mean_m = metrics_n3(mean_pred, target, rows);
    for (int c = 0; c < 3; ++c)
        CHECK(*mean_m[static_cast<std::size_t>(c)].r2 == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("metrics: constant target reports undefined r2, not infinity") {
    std::vector<double> target(12, 2.5);
    std::vector<double> pred(12, 2.0);
    auto m = metrics_n3(pred, target, {0, 1, 2, 3});
    for (int c = 0; c < 3; ++c) CHECK_FALSE(m[static_cast<std::size_t>(c)].r2.has_value());
}

TEST_CASE("metrics agree with an independent scalar loop on random data") {
    Rng rng(23);
    const int n = 200;
    std::vector<double> pred(3 * n), target(3 * n);
    for (auto& v : pred) v = rng.uniform(-10.0, 10.0);
    for (auto& v : target) v = rng.uniform(-10.0, 10.0);
    std::vector<std::uint32_t> rows;
    for (int i = 0; i < n; i += 2) rows.push_back(static_cast<std::uint32_t>(i));

    auto m = metrics_n3(pred, target, rows);
    for (int c = 0; c < 3; ++c) {
        double ss = 0.0, mu = 0.0, mx = 0.0;
        for (auto r : rows) mu += target[3 * r + static_cast<std::size_t>(c)];
        mu /= static_cast<double>(rows.size());
        double st = 0.0;
        for (auto r : rows) {
            double d = pred[3 * r + static_cast<std::size_t>(c)] - target[3 * r + static_cast<std::size_t>(c)];
            ss += d * d;
            st += (target[3 * r + static_cast<std::size_t>(c)] - mu) *
                  (target[3 * r + static_cast<std::size_t>(c)] - mu);
            mx = std::max(mx, std::abs(d));
        }
        CHECK(std::abs(m[static_cast<std::size_t>(c)].rmse -
                       std::sqrt(ss / static_cast<double>(rows.size()))) < 1e-10);
        CHECK(std::abs(m[static_cast<std::size_t>(c)].max_abs - mx) < 1e-10);
        CHECK(std::abs(*m[static_cast<std::size_t>(c)].r2 - (1.0 - ss / st)) < 1e-10);
    }
}

TEST_CASE("export: vtk and csv round trip on a small graph") {
    FlowCase fc;
    GridSpec grid;
    grid.n_theta = 8;
    grid.n_r = 2;
    MeshGraph g = generate_case(fc, grid, 0.0);
    std::vector<float> pred(static_cast<std::size_t>(3 * g.n_nodes));
    Rng rng(3);
    for (auto& v : pred) v = static_cast<float>(rng.uniform(-3.0, 3.0));

    TmpDir tmp("frgt_export");
    auto vtk = (tmp.path / "f.vtk").string();
    export_fields(g, pred, vtk, "vtk");
    {
        std::ifstream in(vtk);
        std::string l1, l2, l3, l4, l5;
        std::getline(in, l1);
        std::getline(in, l2);
        std::getline(in, l3);
        std::getline(in, l4);
        std::getline(in, l5);
        CHECK(l1 == "# vtk DataFile Version 3.0");
        CHECK(l3 == "ASCII");
        CHECK(l4 == "DATASET POLYDATA");
        CHECK(l5 == "POINTS " + std::to_string(g.n_nodes) + " float");
    }

    auto csv = (tmp.path / "f.csv").string();
    export_fields(g, pred, csv, "csv");
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "x,y,p,ux,uy,p_true,ux_true,uy_true");
    std::size_t rows = 0;
    std::string line;
    bool exact = true;
    while (std::getline(in, line)) {
        double x, y, p, ux, uy, pt, uxt, uyt;
        REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &x, &y, &p, &ux, &uy,
                            &pt, &uxt, &uyt) == 8);
        // 9 significant digits round-trip any f32 exactly
        exact = exact && static_cast<float>(p) == pred[3 * rows];
        exact = exact && static_cast<float>(ux) == pred[3 * rows + 1];
        exact = exact && static_cast<float>(uy) == pred[3 * rows + 2];
        ++rows;
    }
    CHECK(rows == static_cast<std::size_t>(g.n_nodes));
    CHECK(exact);

    CHECK_THROWS_AS(export_fields(g, pred, (tmp.path / "f.x").string(), "hdf5"), Error);
}

TEST_CASE("evaluate_checkpoint equals a manual infer + metrics pass") {
    TmpDir data("frgt_eval_data");
    DatasetSpec spec;
    spec.seed = 3;
    spec.n_train = 1;
    spec.n_val = 0;
    spec.n_test = 2;
    spec.grid.n_theta = 32;
    spec.grid.n_r = 3;
    generate_dataset(spec, data.path.string());

    FrgtConfig cfg;
    cfg.mp_layers = 1;
    cfg.attn_layers = 1;
    cfg.latent = 8;
    cfg.heads = 2;
    cfg.head_dim = 4;
    auto params = init_params<float>(cfg, 7);
    TmpDir ckpt("frgt_eval_ckpt");
    save_checkpoint(params, cfg, 7, std::nullopt, ckpt.path.string());

    auto report = evaluate_checkpoint(ckpt.path.string(), data.path.string(), "test", 1.0);
    REQUIRE(report.graphs.size() == 2);

    auto ck = load_checkpoint(ckpt.path.string());
    for (const auto& ge : report.graphs) {
        auto b = load_bundle((data.path / ge.id).string());
        auto res = infer_bundle(ck, b.graph);
        std::vector<double> pd(res.pred_phys.begin(), res.pred_phys.end());
        std::vector<double> td(b.graph.target.begin(), b.graph.target.end());
        std::vector<std::uint32_t> rows;
        for (std::int64_t i = 0; i < b.graph.n_nodes; ++i)
            if (b.graph.node_type[static_cast<std::size_t>(i)] == 0)
                rows.push_back(static_cast<std::uint32_t>(i));
        auto m = metrics_n3(pd, td, rows);
        for (int c = 0; c < 3; ++c) {
            CHECK(ge.channels[static_cast<std::size_t>(c)].rmse ==
                  doctest::Approx(m[static_cast<std::size_t>(c)].rmse).epsilon(1e-12));
            CHECK(ge.channels[static_cast<std::size_t>(c)].max_abs ==
                  doctest::Approx(m[static_cast<std::size_t>(c)].max_abs).epsilon(1e-12));
        }
    }
    CHECK(report.param_count == count_params(cfg));
    CHECK(report.to_json().find("aggregate") != std::string::npos);
    CHECK(report.to_table().find("RMSE") != std::string::npos);
}

TEST_CASE("coverage study: hand-computed percentage on a 2-value case") {
    // baseline rmse 2, reduced-coverage rmse 3 -> +50%
    CoverageStudy study;
    CoverageRow base;
    base.fraction = 1.0;
    base.rmse = {2.0, 2.0, 2.0};
    base.change_pct = {0.0, 0.0, 0.0};
    study.rows.push_back(base);
    CoverageRow r;
    r.fraction = 0.5;
    for (int c = 0; c < 3; ++c) {
        r.rmse[static_cast<std::size_t>(c)] = 3.0;
        r.change_pct[static_cast<std::size_t>(c)] =
            100.0 * (r.rmse[static_cast<std::size_t>(c)] - base.rmse[static_cast<std::size_t>(c)]) /
            base.rmse[static_cast<std::size_t>(c)];
    }
    study.rows.push_back(r);
    CHECK(study.rows[1].change_pct[0] == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(study.to_table().find("+50.00") != std::string::npos);
    CHECK(study.to_json().find("fraction") != std::string::npos);
}

TEST_CASE("coverage study: fraction 1.0 vs itself is 0%") {
    TmpDir data("frgt_cov_data");
    DatasetSpec spec;
    spec.seed = 13;
    spec.n_train = 1;
    spec.n_val = 0;
    spec.n_test = 1;
    spec.grid.n_theta = 32;
    spec.grid.n_r = 3;
    generate_dataset(spec, data.path.string());

    FrgtConfig cfg;
    cfg.mp_layers = 1;
    cfg.attn_layers = 1;
    cfg.latent = 4;
    cfg.heads = 1;
    cfg.head_dim = 4;
    auto params = init_params<float>(cfg, 1);
    TmpDir ckpt("frgt_cov_ckpt");
    save_checkpoint(params, cfg, 1, std::nullopt, ckpt.path.string());

    auto study = coverage_study(ckpt.path.string(), {{1.0, ckpt.path.string()}},
                                data.path.string(), "test");
    REQUIRE(study.rows.size() == 2);
    for (int c = 0; c < 3; ++c)
        CHECK(study.rows[1].change_pct[static_cast<std::size_t>(c)] ==
              doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(coverage_study("", {}, data.path.string(), "test"), Error);
}

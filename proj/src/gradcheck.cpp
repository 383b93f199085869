#include "frgt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "frgt/model.hpp"

namespace frgt {

using ad::Tape;
using ad::Tensor;

namespace {

double eval_loss(const FdProblem& p, const std::vector<std::vector<double>>& inputs) {
    Tape<double> tape;
    std::vector<Tensor<double>> ts;
    ts.reserve(inputs.size());
    for (std::size_t k = 0; k < inputs.size(); ++k)
        ts.push_back(tape.value(p.shapes[k].first, p.shapes[k].second, inputs[k]));
    return p.build(tape, ts).val()[0];
}

double rel_err(double a, double b) {
    double denom = std::max({1e-6, std::abs(a), std::abs(b)});
    return std::abs(a - b) / denom;
}

}  // namespace

std::vector<double> finite_diff_errors(const FdProblem& problem, double h) {
    Tape<double> tape;
    std::vector<Tensor<double>> ts;
    for (std::size_t k = 0; k < problem.inputs.size(); ++k)
        ts.push_back(tape.value(problem.shapes[k].first, problem.shapes[k].second,
                                problem.inputs[k], /*needs_grad=*/true));
    auto loss = problem.build(tape, ts);
    tape.backward(loss);

    std::vector<double> errs(problem.inputs.size(), 0.0);
    auto work = problem.inputs;
    for (std::size_t k = 0; k < problem.inputs.size(); ++k) {
        const auto& analytic = tape.grad(ts[k].id);
        for (std::size_t i = 0; i < work[k].size(); ++i) {
            double x0 = work[k][i];
            work[k][i] = x0 + h;
            double fp = eval_loss(problem, work);
            work[k][i] = x0 - h;
            double fm = eval_loss(problem, work);
            work[k][i] = x0;
            double fd = (fp - fm) / (2.0 * h);
            errs[k] = std::max(errs[k], rel_err(analytic[i], fd));
        }
    }
    return errs;
}

namespace {

std::vector<double> random_away_from_zero(Rng& rng, std::size_t n, double lo = 0.2,
                                          double hi = 1.2) {
    std::vector<double> v(n);
    for (auto& x : v) {
        double mag = rng.uniform(lo, hi);
        x = rng.uniform() < 0.5 ? -mag : mag;
    }
    return v;
}

std::vector<double> random_values(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

using OpBuilder = std::function<Tensor<double>(Tape<double>&, const std::vector<Tensor<double>>&)>;

// Contracts the op output against weights fixed at problem-construction
// time, so every output element contributes asymmetrically to the scalar.
FdProblem make_problem(const std::string& name, std::vector<std::pair<int, int>> shapes,
                       std::vector<std::vector<double>> inputs, int out_rows, int out_cols,
                       Rng& rng, OpBuilder op) {
    FdProblem p;
    p.name = name;
    p.shapes = std::move(shapes);
    p.inputs = std::move(inputs);
    auto w = std::make_shared<std::vector<double>>(
        random_values(rng, static_cast<std::size_t>(out_rows) * out_cols));
    p.build = [op, w, out_rows, out_cols](Tape<double>& t,
                                          const std::vector<Tensor<double>>& xs) {
        auto out = op(t, xs);
        if (out.rows != out_rows || out.cols != out_cols)
            throw Error("grad check: unexpected output shape for contraction");
        return ad::sum_all(ad::mul(out, t.value(out_rows, out_cols, *w)));
    };
    return p;
}

void check(GradCheckReport& report, const FdProblem& p) {
    auto errs = finite_diff_errors(p);
    for (std::size_t k = 0; k < errs.size(); ++k) {
        report.entries.push_back(GradCheckEntry{p.name, static_cast<int>(k), errs[k]});
        report.worst = std::max(report.worst, errs[k]);
    }
}

FdProblem model_problem(std::uint64_t seed, FrgtConfig::Variant variant) {
    FrgtConfig cfg;
    cfg.variant = variant;
    cfg.mp_layers = 1;
    cfg.attn_layers = 1;
    cfg.combined_layers = 1;
    cfg.latent = 8;
    cfg.heads = 2;
    cfg.head_dim = 4;

    Rng rng(splitmix64(seed ^ 0xabcd));
    const int n = 12;
    auto g = std::make_shared<ModelGraph<double>>();
    g->n_nodes = n;
    auto link = [&](std::uint32_t a, std::uint32_t b) {
        g->edge_src.push_back(a);
        g->edge_dst.push_back(b);
        g->edge_src.push_back(b);
        g->edge_dst.push_back(a);
    };
    for (std::uint32_t i = 0; i < static_cast<std::uint32_t>(n); ++i)
        link(i, (i + 1) % static_cast<std::uint32_t>(n));
    link(0, 5);
    link(2, 9);
    const auto m = g->edge_src.size();
    g->node_in = random_values(rng, static_cast<std::size_t>(n) * 4);
    g->edge_in = random_values(rng, m * 4);

    auto params = init_params<double>(cfg, seed);
    auto target =
        std::make_shared<std::vector<double>>(random_values(rng, static_cast<std::size_t>(n) * 3));
    auto names = std::make_shared<std::vector<std::string>>();
    for (const auto& e : params.entries) names->push_back(e.name);

    FdProblem p;
    p.name = variant == FrgtConfig::Variant::stacked ? "model_stacked" : "model_interleaved";
    for (const auto& e : params.entries) {
        p.shapes.emplace_back(e.rows, e.cols);
        p.inputs.push_back(e.value);
    }
    p.build = [g, cfg, names, target, n](Tape<double>& tape,
                                         const std::vector<Tensor<double>>& ts) {
        ad::Params<double> skeleton;  // rebuilds the name -> index map
        for (std::size_t k = 0; k < ts.size(); ++k)
            skeleton.add((*names)[k], ts[k].rows, ts[k].cols,
                         std::vector<double>(ts[k].size(), 0.0));
        BoundParams<double> bound;
        bound.params = &skeleton;
        bound.tensors = ts;
        auto pred = frgt_forward(tape, *g, cfg, bound);
        auto tgt = tape.value(n, 3, *target);
        auto diff = ad::sub(pred, tgt);
        return ad::scale(ad::sum_all(ad::mul(diff, diff)), 1.0 / (n * 3.0));
    };
    return p;
}

}  // namespace

GradCheckReport run_grad_checks(std::uint64_t seed) {
    GradCheckReport report;
    Rng rng(splitmix64(seed));

    check(report, make_problem("matmul", {{3, 4}, {4, 5}},
                               {random_values(rng, 12), random_values(rng, 20)}, 3, 5, rng,
                               [](Tape<double>&, const std::vector<Tensor<double>>& x) {
                                   return ad::matmul(x[0], x[1]);
                               }));
    check(report, make_problem("matmul_ta", {{4, 3}, {4, 5}},
                               {random_values(rng, 12), random_values(rng, 20)}, 3, 5, rng,
                               [](Tape<double>&, const std::vector<Tensor<double>>& x) {
                                   return ad::matmul(x[0], x[1], true, false);
                               }));
    check(report, make_problem("matmul_tb", {{3, 4}, {5, 4}},
                               {random_values(rng, 12), random_values(rng, 20)}, 3, 5, rng,
                               [](Tape<double>&, const std::vector<Tensor<double>>& x) {
                                   return ad::matmul(x[0], x[1], false, true);
                               }));
    check(report, make_problem("add", {{3, 4}, {3, 4}},
                               {random_values(rng, 12), random_values(rng, 12)}, 3, 4, rng,
                               [](Tape<double>&, const std::vector<Tensor<double>>& x) {
                                   return ad::add(x[0], x[1]);
                               }));
    check(report, make_problem("sub", {{3, 4}, {3, 4}},
                               {random_values(rng, 12), random_values(rng, 12)}, 3, 4, rng,
                               [](Tape<double>&, const std::vector<Tensor<double>>& x) {
                                   return ad::sub(x[0], x[1]);
                               }));
    check(report, make_problem("mul", {{3, 4}, {3, 4}},
                               {random_values(rng, 12), random_values(rng, 12)}, 3, 4, rng,
                               [](Tape<double>&, const std::vector<Tensor<double>>& x) {
                                   return ad::mul(x[0], x[1]);
                               }));
    check(report, make_problem("add_rows", {{5, 3}, {1, 3}},
                               {random_values(rng, 15), random_values(rng, 3)}, 5, 3, rng,
                               [](Tape<double>&, const std::vector<Tensor<double>>& x) {
                                   return ad::add_rows(x[0], x[1]);
                               }));
    check(report, make_problem("relu", {{4, 4}}, {random_away_from_zero(rng, 16)}, 4, 4, rng,
                               [](Tape<double>&, const std::vector<Tensor<double>>& x) {
                                   return ad::relu(x[0]);
                               }));
    check(report, make_problem("add_scalar", {{3, 3}}, {random_values(rng, 9)}, 3, 3, rng,
                               [](Tape<double>&, const std::vector<Tensor<double>>& x) {
                                   return ad::add_scalar(x[0], 0.37);
                               }));
    check(report, make_problem("scale", {{3, 3}}, {random_values(rng, 9)}, 3, 3, rng,
                               [](Tape<double>&, const std::vector<Tensor<double>>& x) {
                                   return ad::scale(x[0], -1.7);
                               }));
    check(report,
          make_problem("concat", {{4, 2}, {4, 3}, {4, 1}},
                       {random_values(rng, 8), random_values(rng, 12), random_values(rng, 4)}, 4,
                       6, rng, [](Tape<double>&, const std::vector<Tensor<double>>& x) {
                           return ad::concat(x);
                       }));
    check(report,
          make_problem("layer_norm", {{5, 6}, {1, 6}, {1, 6}},
                       {random_values(rng, 30), random_values(rng, 6, 0.5, 1.5),
                        random_values(rng, 6)},
                       5, 6, rng, [](Tape<double>&, const std::vector<Tensor<double>>& x) {
                           return ad::layer_norm(x[0], x[1], x[2]);
                       }));
    // constant rows exercise the variance-eps path
    check(report,
          make_problem("layer_norm_const", {{2, 5}, {1, 5}, {1, 5}},
                       {std::vector<double>(10, 0.75), random_values(rng, 5, 0.5, 1.5),
                        random_values(rng, 5)},
                       2, 5, rng, [](Tape<double>&, const std::vector<Tensor<double>>& x) {
                           return ad::layer_norm(x[0], x[1], x[2]);
                       }));
    check(report, make_problem("gather_rows", {{5, 3}}, {random_values(rng, 15)}, 6, 3, rng,
                               [](Tape<double>&, const std::vector<Tensor<double>>& x) {
                                   return ad::gather_rows(x[0], {4, 0, 2, 2, 1, 3});
                               }));
    check(report, make_problem("segment_sum", {{7, 2}}, {random_values(rng, 14)}, 4, 2, rng,
                               [](Tape<double>&, const std::vector<Tensor<double>>& x) {
                                   return ad::segment_sum(x[0], {0, 2, 1, 2, 0, 2, 1}, 4);
                               }));
    check(report, make_problem("segment_softmax_weighted_sum", {{7, 2}, {1, 1}},
                               {random_values(rng, 14), {0.8}}, 4, 2, rng,
                               [](Tape<double>&, const std::vector<Tensor<double>>& x) {
                                   return ad::segment_softmax_weighted_sum(
                                       x[0], x[1], {0, 2, 1, 2, 0, 2, 1}, 4);
                               }));
    {
        FdProblem p;
        p.name = "sum_all";
        p.shapes = {{4, 3}};
        p.inputs = {random_values(rng, 12)};
        p.build = [](Tape<double>&, const std::vector<Tensor<double>>& x) {
            return ad::sum_all(x[0]);
        };
        check(report, p);
    }
    {
        // identity map: gradient must match exactly
        FdProblem p;
        p.name = "identity";
        p.shapes = {{3, 3}};
        p.inputs = {random_values(rng, 9)};
        p.build = [](Tape<double>&, const std::vector<Tensor<double>>& x) {
            return ad::sum_all(ad::scale(x[0], 1.0));
        };
        check(report, p);
    }

    check(report, model_problem(seed, FrgtConfig::Variant::stacked));
    check(report, model_problem(seed, FrgtConfig::Variant::interleaved));
    return report;
}

}  // namespace frgt

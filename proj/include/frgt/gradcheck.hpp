#pragma once

#include <functional>
#include <string>
#include <vector>

#include "frgt/tensor.hpp"

namespace frgt {

// Central finite-difference verification of reverse-mode gradients, run in
// f64. A problem owns its input arrays; `build` reconstructs the scalar
// loss from fresh tape inputs on every evaluation.
struct FdProblem {
    std::string name;
    std::vector<std::pair<int, int>> shapes;
    std::vector<std::vector<double>> inputs;
    std::function<ad::Tensor<double>(ad::Tape<double>&, const std::vector<ad::Tensor<double>>&)>
        build;
};

// Max relative error per input, comparing backward() against central
// differences with step h.
std::vector<double> finite_diff_errors(const FdProblem& problem, double h = 1e-6);

struct GradCheckEntry {
    std::string op;
    int input = 0;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double worst = 0.0;
    bool passed(double tol = 1e-4) const { return worst < tol; }
};

// Checks every primitive plus the assembled tiny-model loss (both
// variants).
GradCheckReport run_grad_checks(std::uint64_t seed);

}  // namespace frgt

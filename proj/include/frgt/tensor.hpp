#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "frgt/common.hpp"

// Dense reverse-mode autodiff on a flat tape. All tensors are rank-2
// (scalars are 1x1, row vectors 1xc). Forward values are computed eagerly
// when an op is recorded; backward() walks the tape once in reverse.
// T is float for training and double for finite-difference checks.
namespace frgt::ad {

enum class Op : std::uint8_t {
    input,
    matmul,
    add,
    add_rows,
    sub,
    mul,
    relu,
    add_scalar,
    scale,
    concat,
    layer_norm,
    gather_rows,
    segment_sum,
    segment_softmax_weighted_sum,
    sum_all,
};

const char* op_name(Op op);

template <typename T>
class Tape;

template <typename T>
struct Tensor {
    Tape<T>* tape = nullptr;
    int id = -1;
    int rows = 0;
    int cols = 0;

    const std::vector<T>& val() const;
    std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

template <typename T>
class Tape {
public:
    struct Node {
        Op op = Op::input;
        int rows = 0;
        int cols = 0;
        std::vector<int> in;
        std::vector<T> val;
        std::vector<T> grad;
        bool needs_grad = false;
        // op-specific extras
        bool ta = false;
        bool tb = false;
        double c = 0.0;
        std::vector<std::uint32_t> idx;
        int n_segments = 0;
        std::vector<T> saved;
    };

    bool debug_checks = false;  // scan every op output for NaN/Inf

    Tensor<T> value(int rows, int cols, std::vector<T> data, bool needs_grad = false) {
        if (data.size() != static_cast<std::size_t>(rows) * cols)
            throw Error("tape: value data length " + std::to_string(data.size()) +
                        " does not match shape " + shape_str(rows, cols));
        Node n;
        n.op = Op::input;
        n.rows = rows;
        n.cols = cols;
        n.val = std::move(data);
        n.needs_grad = needs_grad;
        return push(std::move(n));
    }

    Tensor<T> value(int rows, int cols, const T* data, bool needs_grad = false) {
        return value(rows, cols, std::vector<T>(data, data + static_cast<std::size_t>(rows) * cols),
                     needs_grad);
    }

    Tensor<T> scalar(T v, bool needs_grad = false) { return value(1, 1, std::vector<T>{v}, needs_grad); }

    Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    std::size_t size() const { return nodes_.size(); }

    const std::vector<T>& grad(int id) const {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.empty()) throw Error("tape: node has no gradient (backward not run?)");
        return n.grad;
    }

    // Gradient of a scalar loss w.r.t. every needs_grad tensor on the tape.
    void backward(Tensor<T> loss);

    Tensor<T> push(Node&& n) {
        if (debug_checks) check_finite(n);
        int id = static_cast<int>(nodes_.size());
        nodes_.push_back(std::move(n));
        return Tensor<T>{this, id, nodes_.back().rows, nodes_.back().cols};
    }

    static std::string shape_str(int r, int c) {
        return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
    }

private:
    void check_finite(const Node& n) const {
        for (T v : n.val)
            if (!std::isfinite(static_cast<double>(v)))
                throw Error(std::string("tape: non-finite value in output of ") + op_name(n.op));
    }

    void backward_node(int id);

    std::vector<Node> nodes_;
};

template <typename T>
const std::vector<T>& Tensor<T>::val() const {
    return tape->node(id).val;
}

namespace detail {

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Map = Eigen::Map<EMat<T>>;
template <typename T>
using CMap = Eigen::Map<const EMat<T>>;

template <typename T>
CMap<T> cmap(const std::vector<T>& v, int r, int c) {
    return CMap<T>(v.data(), r, c);
}
template <typename T>
Map<T> map(std::vector<T>& v, int r, int c) {
    return Map<T>(v.data(), r, c);
}

}  // namespace detail

// ---- op constructors ----

template <typename T>
Tensor<T> matmul(Tensor<T> a, Tensor<T> b, bool ta = false, bool tb = false) {
    int ar = ta ? a.cols : a.rows, ac = ta ? a.rows : a.cols;
    int br = tb ? b.cols : b.rows, bc = tb ? b.rows : b.cols;
    if (ac != br)
        throw Error("matmul: incompatible shapes " + Tape<T>::shape_str(a.rows, a.cols) +
                    (ta ? "^T" : "") + " @ " + Tape<T>::shape_str(b.rows, b.cols) + (tb ? "^T" : ""));
    typename Tape<T>::Node n;
    n.op = Op::matmul;
    n.rows = ar;
    n.cols = bc;
    n.in = {a.id, b.id};
    n.ta = ta;
    n.tb = tb;
    n.needs_grad = a.tape->node(a.id).needs_grad || b.tape->node(b.id).needs_grad;
    n.val.resize(static_cast<std::size_t>(ar) * bc);
    auto A = detail::cmap(a.val(), a.rows, a.cols);
    auto B = detail::cmap(b.val(), b.rows, b.cols);
    auto C = detail::map(n.val, ar, bc);
    if (!ta && !tb)
        C.noalias() = A * B;
    else if (ta && !tb)
        // A^T B contracts over rows (the node axis in attention); f64
        // accumulation keeps the result stable under row reordering
        C = (A.template cast<double>().transpose() * B.template cast<double>()).template cast<T>();
    else if (!ta && tb)
        C.noalias() = A * B.transpose();
    else
        C.noalias() = A.transpose() * B.transpose();
    return a.tape->push(std::move(n));
}

template <typename T>
Tensor<T> make_elementwise(Op op, Tensor<T> a, Tensor<T> b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw Error(std::string(op_name(op)) + ": shape mismatch " +
                    Tape<T>::shape_str(a.rows, a.cols) + " vs " + Tape<T>::shape_str(b.rows, b.cols));
    typename Tape<T>::Node n;
    n.op = op;
    n.rows = a.rows;
    n.cols = a.cols;
    n.in = {a.id, b.id};
    n.needs_grad = a.tape->node(a.id).needs_grad || b.tape->node(b.id).needs_grad;
    n.val.resize(a.size());
    const auto& av = a.val();
    const auto& bv = b.val();
    for (std::size_t i = 0; i < n.val.size(); ++i) {
        if (op == Op::add)
            n.val[i] = av[i] + bv[i];
        else if (op == Op::sub)
            n.val[i] = av[i] - bv[i];
        else
            n.val[i] = av[i] * bv[i];
    }
    return a.tape->push(std::move(n));
}

template <typename T>
Tensor<T> add(Tensor<T> a, Tensor<T> b) {
    return make_elementwise(Op::add, a, b);
}
template <typename T>
Tensor<T> sub(Tensor<T> a, Tensor<T> b) {
    return make_elementwise(Op::sub, a, b);
}
template <typename T>
Tensor<T> mul(Tensor<T> a, Tensor<T> b) {
    return make_elementwise(Op::mul, a, b);
}

// x (n x c) + bias (1 x c), broadcast over rows
template <typename T>
Tensor<T> add_rows(Tensor<T> x, Tensor<T> bias) {
    if (bias.rows != 1 || bias.cols != x.cols)
        throw Error("add_rows: bias " + Tape<T>::shape_str(bias.rows, bias.cols) +
                    " does not broadcast over " + Tape<T>::shape_str(x.rows, x.cols));
    typename Tape<T>::Node n;
    n.op = Op::add_rows;
    n.rows = x.rows;
    n.cols = x.cols;
    n.in = {x.id, bias.id};
    n.needs_grad = x.tape->node(x.id).needs_grad || x.tape->node(bias.id).needs_grad;
    n.val.resize(x.size());
    const auto& xv = x.val();
    const auto& bv = bias.val();
    for (int r = 0; r < x.rows; ++r)
        for (int c = 0; c < x.cols; ++c)
            n.val[static_cast<std::size_t>(r) * x.cols + c] =
                xv[static_cast<std::size_t>(r) * x.cols + c] + bv[static_cast<std::size_t>(c)];
    return x.tape->push(std::move(n));
}

template <typename T>
Tensor<T> relu(Tensor<T> x) {
    typename Tape<T>::Node n;
    n.op = Op::relu;
    n.rows = x.rows;
    n.cols = x.cols;
    n.in = {x.id};
    n.needs_grad = x.tape->node(x.id).needs_grad;
    n.val.resize(x.size());
    const auto& xv = x.val();
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = xv[i] > T(0) ? xv[i] : T(0);
    return x.tape->push(std::move(n));
}

template <typename T>
Tensor<T> add_scalar(Tensor<T> x, double c) {
    typename Tape<T>::Node n;
    n.op = Op::add_scalar;
    n.rows = x.rows;
    n.cols = x.cols;
    n.in = {x.id};
    n.c = c;
    n.needs_grad = x.tape->node(x.id).needs_grad;
    n.val.resize(x.size());
    const auto& xv = x.val();
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = xv[i] + static_cast<T>(c);
    return x.tape->push(std::move(n));
}

template <typename T>
Tensor<T> scale(Tensor<T> x, double c) {
    typename Tape<T>::Node n;
    n.op = Op::scale;
    n.rows = x.rows;
    n.cols = x.cols;
    n.in = {x.id};
    n.c = c;
    n.needs_grad = x.tape->node(x.id).needs_grad;
    n.val.resize(x.size());
    const auto& xv = x.val();
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = static_cast<T>(c) * xv[i];
    return x.tape->push(std::move(n));
}

// last-axis concat; all inputs share the row count
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs) {
    if (xs.empty()) throw Error("concat: no inputs");
    typename Tape<T>::Node n;
    n.op = Op::concat;
    n.rows = xs[0].rows;
    n.cols = 0;
    for (const auto& x : xs) {
        if (x.rows != n.rows)
            throw Error("concat: row mismatch " + Tape<T>::shape_str(x.rows, x.cols) + " vs " +
                        Tape<T>::shape_str(n.rows, xs[0].cols));
        n.cols += x.cols;
        n.in.push_back(x.id);
        n.needs_grad = n.needs_grad || x.tape->node(x.id).needs_grad;
    }
    n.val.resize(static_cast<std::size_t>(n.rows) * n.cols);
    int off = 0;
    for (const auto& x : xs) {
        const auto& xv = x.val();
        for (int r = 0; r < n.rows; ++r)
            for (int c = 0; c < x.cols; ++c)
                n.val[static_cast<std::size_t>(r) * n.cols + off + c] =
                    xv[static_cast<std::size_t>(r) * x.cols + c];
        off += x.cols;
    }
    return xs[0].tape->push(std::move(n));
}

// layer norm over the last axis with learnable gain/bias.
// saved layout: xhat (n*c) followed by inv_std (n).
template <typename T>
Tensor<T> layer_norm(Tensor<T> x, Tensor<T> gain, Tensor<T> bias, double eps = 1e-5) {
    if (gain.rows != 1 || gain.cols != x.cols || bias.rows != 1 || bias.cols != x.cols)
        throw Error("layer_norm: gain/bias must be (1x" + std::to_string(x.cols) + "), got " +
                    Tape<T>::shape_str(gain.rows, gain.cols) + " and " +
                    Tape<T>::shape_str(bias.rows, bias.cols));
    typename Tape<T>::Node n;
    n.op = Op::layer_norm;
    n.rows = x.rows;
    n.cols = x.cols;
    n.in = {x.id, gain.id, bias.id};
    n.c = eps;
    n.needs_grad = x.tape->node(x.id).needs_grad || x.tape->node(gain.id).needs_grad ||
                   x.tape->node(bias.id).needs_grad;
    n.val.resize(x.size());
    n.saved.resize(x.size() + static_cast<std::size_t>(x.rows));
    const auto& xv = x.val();
    const auto& gv = gain.val();
    const auto& bv = bias.val();
    const int c = x.cols;
    for (int r = 0; r < x.rows; ++r) {
        const T* row = &xv[static_cast<std::size_t>(r) * c];
        double mu = 0.0;
        for (int k = 0; k < c; ++k) mu += static_cast<double>(row[k]);
        mu /= c;
        double var = 0.0;
        for (int k = 0; k < c; ++k) {
            double d = static_cast<double>(row[k]) - mu;
            var += d * d;
        }
        var /= c;
        double inv = 1.0 / std::sqrt(var + eps);
        n.saved[x.size() + static_cast<std::size_t>(r)] = static_cast<T>(inv);
        for (int k = 0; k < c; ++k) {
            double xhat = (static_cast<double>(row[k]) - mu) * inv;
            n.saved[static_cast<std::size_t>(r) * c + k] = static_cast<T>(xhat);
            n.val[static_cast<std::size_t>(r) * c + k] =
                static_cast<T>(xhat * static_cast<double>(gv[static_cast<std::size_t>(k)]) +
                               static_cast<double>(bv[static_cast<std::size_t>(k)]));
        }
    }
    return x.tape->push(std::move(n));
}

template <typename T>
Tensor<T> gather_rows(Tensor<T> x, std::vector<std::uint32_t> index) {
    typename Tape<T>::Node n;
    n.op = Op::gather_rows;
    n.rows = static_cast<int>(index.size());
    n.cols = x.cols;
    n.in = {x.id};
    n.needs_grad = x.tape->node(x.id).needs_grad;
    n.val.resize(index.size() * static_cast<std::size_t>(x.cols));
    const auto& xv = x.val();
    for (std::size_t r = 0; r < index.size(); ++r) {
        if (index[r] >= static_cast<std::uint32_t>(x.rows))
            throw Error("gather_rows: index " + std::to_string(index[r]) + " out of range for " +
                        Tape<T>::shape_str(x.rows, x.cols));
        for (int c = 0; c < x.cols; ++c)
            n.val[r * x.cols + c] = xv[static_cast<std::size_t>(index[r]) * x.cols + c];
    }
    n.idx = std::move(index);
    return x.tape->push(std::move(n));
}

// out[s] = sum of rows with segment id s; accumulation in f64, index order.
template <typename T>
Tensor<T> segment_sum(Tensor<T> x, std::vector<std::uint32_t> segment_ids, int n_segments) {
    if (segment_ids.size() != static_cast<std::size_t>(x.rows))
        throw Error("segment_sum: " + std::to_string(segment_ids.size()) + " ids for " +
                    Tape<T>::shape_str(x.rows, x.cols));
    typename Tape<T>::Node n;
    n.op = Op::segment_sum;
    n.rows = n_segments;
    n.cols = x.cols;
    n.in = {x.id};
    n.n_segments = n_segments;
    n.needs_grad = x.tape->node(x.id).needs_grad;
    const auto& xv = x.val();
    std::vector<double> acc(static_cast<std::size_t>(n_segments) * x.cols, 0.0);
    for (std::size_t r = 0; r < segment_ids.size(); ++r) {
        if (segment_ids[r] >= static_cast<std::uint32_t>(n_segments))
            throw Error("segment_sum: segment id " + std::to_string(segment_ids[r]) +
                        " out of range (" + std::to_string(n_segments) + " segments)");
        for (int c = 0; c < x.cols; ++c)
            acc[static_cast<std::size_t>(segment_ids[r]) * x.cols + c] +=
                static_cast<double>(xv[r * x.cols + c]);
    }
    n.val.resize(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) n.val[i] = static_cast<T>(acc[i]);
    n.idx = std::move(segment_ids);
    return x.tape->push(std::move(n));
}

// Channel-wise softmax-weighted sum per segment:
//   out[s][c] = sum_e softmax_e(beta * x[e][c]) * x[e][c]  over rows e with id s.
// Empty segments produce zeros. beta is a learnable 1x1 tensor.
// saved = the softmax weights (same shape as x).
template <typename T>
Tensor<T> segment_softmax_weighted_sum(Tensor<T> x, Tensor<T> beta,
                                       std::vector<std::uint32_t> segment_ids, int n_segments) {
    if (segment_ids.size() != static_cast<std::size_t>(x.rows))
        throw Error("segment_softmax_weighted_sum: " + std::to_string(segment_ids.size()) +
                    " ids for " + Tape<T>::shape_str(x.rows, x.cols));
    if (beta.rows != 1 || beta.cols != 1)
        throw Error("segment_softmax_weighted_sum: beta must be scalar, got " +
                    Tape<T>::shape_str(beta.rows, beta.cols));
    typename Tape<T>::Node n;
    n.op = Op::segment_softmax_weighted_sum;
    n.rows = n_segments;
    n.cols = x.cols;
    n.in = {x.id, beta.id};
    n.n_segments = n_segments;
    n.needs_grad = x.tape->node(x.id).needs_grad || x.tape->node(beta.id).needs_grad;
    const int c = x.cols;
    const auto& xv = x.val();
    const double b = static_cast<double>(beta.val()[0]);

    // CSR-style grouping by segment, stable in input order
    std::vector<std::uint32_t> count(static_cast<std::size_t>(n_segments) + 1, 0);
    for (auto s : segment_ids) {
        if (s >= static_cast<std::uint32_t>(n_segments))
            throw Error("segment_softmax_weighted_sum: segment id " + std::to_string(s) +
                        " out of range (" + std::to_string(n_segments) + " segments)");
        ++count[s + 1];
    }
    for (std::size_t s = 1; s < count.size(); ++s) count[s] += count[s - 1];
    std::vector<std::uint32_t> order(segment_ids.size());
    {
        std::vector<std::uint32_t> cursor(count.begin(), count.end() - 1);
        for (std::uint32_t e = 0; e < segment_ids.size(); ++e) order[cursor[segment_ids[e]]++] = e;
    }

    n.val.assign(static_cast<std::size_t>(n_segments) * c, T(0));
    n.saved.assign(xv.size(), T(0));
    std::uint32_t max_deg = 0;
    for (int s = 0; s < n_segments; ++s)
        max_deg = std::max(max_deg, count[static_cast<std::size_t>(s) + 1] - count[s]);
    std::vector<double> ex(max_deg);
    for (int s = 0; s < n_segments; ++s) {
        std::uint32_t lo = count[s], hi = count[static_cast<std::size_t>(s) + 1];
        if (lo == hi) continue;
        for (int ch = 0; ch < c; ++ch) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::uint32_t k = lo; k < hi; ++k)
                mx = std::max(mx, b * static_cast<double>(xv[static_cast<std::size_t>(order[k]) * c + ch]));
            double z = 0.0;
            for (std::uint32_t k = lo; k < hi; ++k) {
                double e = std::exp(b * static_cast<double>(xv[static_cast<std::size_t>(order[k]) * c + ch]) - mx);
                ex[k - lo] = e;
                z += e;
            }
            double out = 0.0;
            for (std::uint32_t k = lo; k < hi; ++k) {
                std::size_t e = order[k];
                double xe = static_cast<double>(xv[e * c + ch]);
                double w = ex[k - lo] / z;
                n.saved[e * c + ch] = static_cast<T>(w);
                out += w * xe;
            }
            n.val[static_cast<std::size_t>(s) * c + ch] = static_cast<T>(out);
        }
    }
    n.idx = std::move(segment_ids);
    return x.tape->push(std::move(n));
}

template <typename T>
Tensor<T> sum_all(Tensor<T> x) {
    typename Tape<T>::Node n;
    n.op = Op::sum_all;
    n.rows = 1;
    n.cols = 1;
    n.in = {x.id};
    n.needs_grad = x.tape->node(x.id).needs_grad;
    const auto& xv = x.val();
    double acc = 0.0;
    for (T v : xv) acc += static_cast<double>(v);
    n.val = {static_cast<T>(acc)};
    return x.tape->push(std::move(n));
}

// ---- backward ----

template <typename T>
void Tape<T>::backward(Tensor<T> loss) {
    Node& ln = node(loss.id);
    if (ln.rows != 1 || ln.cols != 1)
        throw Error("backward: loss must be scalar, got " + shape_str(ln.rows, ln.cols));
    for (auto& n : nodes_)
        if (n.needs_grad) n.grad.assign(n.val.size(), T(0));
    if (!ln.needs_grad) throw Error("backward: loss does not depend on any differentiable input");
    ln.grad[0] = T(1);
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.needs_grad || n.op == Op::input || n.grad.empty()) continue;
        backward_node(id);
    }
}

template <typename T>
void Tape<T>::backward_node(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    auto needs = [&](int k) { return nodes_[static_cast<std::size_t>(n.in[k])].needs_grad; };
    auto gv = [&](int k) -> std::vector<T>& { return nodes_[static_cast<std::size_t>(n.in[k])].grad; };
    auto vv = [&](int k) -> const std::vector<T>& { return nodes_[static_cast<std::size_t>(n.in[k])].val; };
    auto shape = [&](int k, int& r, int& c) {
        r = nodes_[static_cast<std::size_t>(n.in[k])].rows;
        c = nodes_[static_cast<std::size_t>(n.in[k])].cols;
    };

    switch (n.op) {
        case Op::input:
            break;
        case Op::matmul: {
            int ar, ac, br, bc;
            shape(0, ar, ac);
            shape(1, br, bc);
            auto G = detail::cmap(n.grad, n.rows, n.cols);
            auto A = detail::cmap(vv(0), ar, ac);
            auto B = detail::cmap(vv(1), br, bc);
            if (needs(0)) {
                auto dA = detail::map(gv(0), ar, ac);
                if (!n.ta && !n.tb)
                    dA.noalias() += G * B.transpose();
                else if (n.ta && !n.tb)
                    dA.noalias() += B * G.transpose();
                else if (!n.ta && n.tb)
                    dA.noalias() += G * B;
                else
                    dA.noalias() += B.transpose() * G.transpose();
            }
            if (needs(1)) {
                auto dB = detail::map(gv(1), br, bc);
                if (!n.ta && !n.tb)
                    dB.noalias() += A.transpose() * G;
                else if (n.ta && !n.tb)
                    dB.noalias() += A * G;
                else if (!n.ta && n.tb)
                    dB.noalias() += G.transpose() * A;
                else
                    dB.noalias() += G.transpose() * A.transpose();
            }
            break;
        }
        case Op::add:
        case Op::sub: {
            T sgn = n.op == Op::sub ? T(-1) : T(1);
            if (needs(0)) {
                auto& g0 = gv(0);
                for (std::size_t i = 0; i < n.grad.size(); ++i) g0[i] += n.grad[i];
            }
            if (needs(1)) {
                auto& g1 = gv(1);
                for (std::size_t i = 0; i < n.grad.size(); ++i) g1[i] += sgn * n.grad[i];
            }
            break;
        }
        case Op::mul: {
            if (needs(0)) {
                auto& g0 = gv(0);
                const auto& b = vv(1);
                for (std::size_t i = 0; i < n.grad.size(); ++i) g0[i] += n.grad[i] * b[i];
            }
            if (needs(1)) {
                auto& g1 = gv(1);
                const auto& a = vv(0);
                for (std::size_t i = 0; i < n.grad.size(); ++i) g1[i] += n.grad[i] * a[i];
            }
            break;
        }
        case Op::add_rows: {
            if (needs(0)) {
                auto& g0 = gv(0);
                for (std::size_t i = 0; i < n.grad.size(); ++i) g0[i] += n.grad[i];
            }
            if (needs(1)) {
                auto& g1 = gv(1);
                for (int r = 0; r < n.rows; ++r)
                    for (int c = 0; c < n.cols; ++c)
                        g1[static_cast<std::size_t>(c)] += n.grad[static_cast<std::size_t>(r) * n.cols + c];
            }
            break;
        }
        case Op::relu: {
            if (needs(0)) {
                auto& g0 = gv(0);
                const auto& x = vv(0);
                for (std::size_t i = 0; i < n.grad.size(); ++i)
                    if (x[i] > T(0)) g0[i] += n.grad[i];
            }
            break;
        }
        case Op::add_scalar:
        case Op::gather_rows: {
            if (n.op == Op::add_scalar) {
                if (needs(0)) {
                    auto& g0 = gv(0);
                    for (std::size_t i = 0; i < n.grad.size(); ++i) g0[i] += n.grad[i];
                }
            } else if (needs(0)) {
                auto& g0 = gv(0);
                for (std::size_t r = 0; r < n.idx.size(); ++r)
                    for (int c = 0; c < n.cols; ++c)
                        g0[static_cast<std::size_t>(n.idx[r]) * n.cols + c] +=
                            n.grad[r * n.cols + c];
            }
            break;
        }
        case Op::scale: {
            if (needs(0)) {
                auto& g0 = gv(0);
                for (std::size_t i = 0; i < n.grad.size(); ++i)
                    g0[i] += static_cast<T>(n.c) * n.grad[i];
            }
            break;
        }
        case Op::concat: {
            int off = 0;
            for (std::size_t k = 0; k < n.in.size(); ++k) {
                int r, c;
                shape(static_cast<int>(k), r, c);
                if (needs(static_cast<int>(k))) {
                    auto& g = gv(static_cast<int>(k));
                    for (int i = 0; i < r; ++i)
                        for (int j = 0; j < c; ++j)
                            g[static_cast<std::size_t>(i) * c + j] +=
                                n.grad[static_cast<std::size_t>(i) * n.cols + off + j];
                }
                off += c;
            }
            break;
        }
        case Op::layer_norm: {
            const int c = n.cols;
            const auto& g = vv(1);
            const std::size_t xsz = static_cast<std::size_t>(n.rows) * c;
            for (int r = 0; r < n.rows; ++r) {
                const T* xhat = &n.saved[static_cast<std::size_t>(r) * c];
                double inv = static_cast<double>(n.saved[xsz + static_cast<std::size_t>(r)]);
                const T* go = &n.grad[static_cast<std::size_t>(r) * c];
                double sum_dxh = 0.0, sum_dxh_xh = 0.0;
                for (int k = 0; k < c; ++k) {
                    double dxh = static_cast<double>(go[k]) * static_cast<double>(g[static_cast<std::size_t>(k)]);
                    sum_dxh += dxh;
                    sum_dxh_xh += dxh * static_cast<double>(xhat[k]);
                }
                if (needs(0)) {
                    auto& gx = gv(0);
                    for (int k = 0; k < c; ++k) {
                        double dxh = static_cast<double>(go[k]) * static_cast<double>(g[static_cast<std::size_t>(k)]);
                        double dx = inv * (dxh - sum_dxh / c - static_cast<double>(xhat[k]) * sum_dxh_xh / c);
                        gx[static_cast<std::size_t>(r) * c + k] += static_cast<T>(dx);
                    }
                }
                if (needs(1)) {
                    auto& gg = gv(1);
                    for (int k = 0; k < c; ++k)
                        gg[static_cast<std::size_t>(k)] += go[k] * xhat[k];
                }
                if (needs(2)) {
                    auto& gb = gv(2);
                    for (int k = 0; k < c; ++k) gb[static_cast<std::size_t>(k)] += go[k];
                }
            }
            break;
        }
        case Op::segment_sum: {
            if (needs(0)) {
                auto& g0 = gv(0);
                for (std::size_t r = 0; r < n.idx.size(); ++r)
                    for (int c = 0; c < n.cols; ++c)
                        g0[r * n.cols + c] += n.grad[static_cast<std::size_t>(n.idx[r]) * n.cols + c];
            }
            break;
        }
        case Op::segment_softmax_weighted_sum: {
            const int c = n.cols;
            const auto& x = vv(0);
            const double b = static_cast<double>(vv(1)[0]);
            double dbeta = 0.0;
            auto* gx = needs(0) ? &gv(0) : nullptr;
            for (std::size_t e = 0; e < n.idx.size(); ++e) {
                std::size_t s = n.idx[e];
                for (int ch = 0; ch < c; ++ch) {
                    double w = static_cast<double>(n.saved[e * c + ch]);
                    if (w == 0.0) continue;
                    double xe = static_cast<double>(x[e * c + ch]);
                    double out = static_cast<double>(n.val[s * c + ch]);
                    double go = static_cast<double>(n.grad[s * c + ch]);
                    if (gx)
                        (*gx)[e * c + ch] += static_cast<T>(go * w * (1.0 + b * (xe - out)));
                    dbeta += go * w * xe * (xe - out);
                }
            }
            if (needs(1)) gv(1)[0] += static_cast<T>(dbeta);
            break;
        }
        case Op::sum_all: {
            if (needs(0)) {
                auto& g0 = gv(0);
                for (std::size_t i = 0; i < g0.size(); ++i) g0[i] += n.grad[0];
            }
            break;
        }
    }
}

// Named parameter set backing a model; values persist across steps, the
// tape holds per-step views.
template <typename T>
struct Params {
    struct Entry {
        std::string name;
        int rows = 0;
        int cols = 0;
        std::vector<T> value;
    };
    std::vector<Entry> entries;
    std::unordered_map<std::string, int> by_name;

    int add(const std::string& name, int rows, int cols, std::vector<T> value) {
        if (by_name.count(name)) throw Error("params: duplicate name " + name);
        if (value.size() != static_cast<std::size_t>(rows) * cols)
            throw Error("params: bad init size for " + name);
        by_name[name] = static_cast<int>(entries.size());
        entries.push_back(Entry{name, rows, cols, std::move(value)});
        return static_cast<int>(entries.size()) - 1;
    }

    Entry& at(const std::string& name) {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw Error("params: unknown name " + name);
        return entries[static_cast<std::size_t>(it->second)];
    }
    const Entry& at(const std::string& name) const {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw Error("params: unknown name " + name);
        return entries[static_cast<std::size_t>(it->second)];
    }

    std::int64_t total_count() const {
        std::int64_t t = 0;
        for (const auto& e : entries) t += static_cast<std::int64_t>(e.value.size());
        return t;
    }
};

}  // namespace frgt::ad

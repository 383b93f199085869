#include "frgt/norm.hpp"

#include <algorithm>
#include <cmath>

namespace frgt {

void NormStats::validate() const {
    if (!(sigma_p > 0.0)) throw Error("norm stats: sigma_p must be > 0");
    if (!(u_inf > 0.0)) throw Error("norm stats: u_inf must be > 0");
    if (!(rho > 0.0)) throw Error("norm stats: rho must be > 0");
    if (!(chord > 0.0)) throw Error("norm stats: chord must be > 0");
}

double estimate_inflow(const std::vector<double>& surface_pressures, double rho) {
    if (surface_pressures.empty()) throw Error("inflow estimate: no sensed surface pressures");
    double p0 = *std::max_element(surface_pressures.begin(), surface_pressures.end());
    if (!(p0 > 0.0))
        throw Error("inflow estimate: no stagnation-like pressure (max sensed pressure " +
                    std::to_string(p0) + " <= 0)");
    return std::sqrt(2.0 * p0 / rho);
}

NormStats compute_stats(const std::vector<double>& sensed_pressures, double chord, double rho) {
    if (sensed_pressures.empty()) throw Error("norm stats: no sensed pressures");
    NormStats s;
    s.chord = chord;
    s.rho = rho;
    double mu = 0.0;
    for (double p : sensed_pressures) mu += p;
    mu /= static_cast<double>(sensed_pressures.size());
    double var = 0.0;
    for (double p : sensed_pressures) var += (p - mu) * (p - mu);
    var /= static_cast<double>(sensed_pressures.size());
    s.mu_p = mu;
    s.sigma_p = std::max(std::sqrt(var), 1e-6 * std::max(1.0, std::abs(mu)));
    s.u_inf = estimate_inflow(sensed_pressures, rho);
    s.validate();
    return s;
}

NormStats compute_stats(const MeshGraph& graph) {
    std::vector<double> sensed;
    for (std::int64_t i = 0; i < graph.n_nodes; ++i)
        if (graph.sense_mask[static_cast<std::size_t>(i)])
            sensed.push_back(graph.pressure_obs[static_cast<std::size_t>(i)]);
    return compute_stats(sensed, graph.chord, graph.rho);
}

MeshGraph normalize(const MeshGraph& graph, const NormStats& stats) {
    stats.validate();
    MeshGraph g = graph;
    const auto n = static_cast<std::size_t>(g.n_nodes);
    for (std::size_t i = 0; i < n; ++i) {
        if (std::isfinite(g.pressure_obs[i]))
            g.pressure_obs[i] =
                static_cast<float>((static_cast<double>(g.pressure_obs[i]) - stats.mu_p) / stats.sigma_p);
        g.sdf[i] = static_cast<float>(static_cast<double>(g.sdf[i]) / stats.chord);
    }
    if (g.has_target()) {
        for (std::size_t i = 0; i < n; ++i) {
            g.target[3 * i] = static_cast<float>(
                (static_cast<double>(g.target[3 * i]) - stats.mu_p) / stats.sigma_p);
            g.target[3 * i + 1] =
                static_cast<float>(static_cast<double>(g.target[3 * i + 1]) / stats.u_inf);
            g.target[3 * i + 2] =
                static_cast<float>(static_cast<double>(g.target[3 * i + 2]) / stats.u_inf);
        }
    }
    return g;
}

namespace {

template <typename T>
void denorm_impl(std::vector<T>& pred, const NormStats& stats) {
    stats.validate();
    if (pred.size() % 3 != 0) throw Error("denormalize: prediction array must be n x 3");
    for (std::size_t i = 0; i + 2 < pred.size(); i += 3) {
        pred[i] = static_cast<T>(static_cast<double>(pred[i]) * stats.sigma_p + stats.mu_p);
        pred[i + 1] = static_cast<T>(static_cast<double>(pred[i + 1]) * stats.u_inf);
        pred[i + 2] = static_cast<T>(static_cast<double>(pred[i + 2]) * stats.u_inf);
    }
}

}  // namespace

void denormalize_predictions(std::vector<float>& pred_n3, const NormStats& stats) {
    denorm_impl(pred_n3, stats);
}
void denormalize_predictions(std::vector<double>& pred_n3, const NormStats& stats) {
    denorm_impl(pred_n3, stats);
}

}  // namespace frgt

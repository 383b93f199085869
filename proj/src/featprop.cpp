#include "frgt/featprop.hpp"

#include <cmath>

namespace frgt {

MaskedFeatures MaskedFeatures::from_channel(const std::vector<double>& col,
                                            const std::vector<std::uint8_t>& mask) {
    if (col.size() != mask.size()) throw Error("masked features: value/mask length mismatch");
    MaskedFeatures f;
    f.n = static_cast<std::int64_t>(col.size());
    f.channels = 1;
    f.values = col;
    f.known = mask;
    return f;
}

std::vector<double> propagate(const MeshGraph& graph, const MaskedFeatures& feats,
                              int iterations, Diffusion diffusion) {
    const auto n = static_cast<std::size_t>(graph.n_nodes);
    const int c = feats.channels;
    if (feats.n != graph.n_nodes)
        throw Error("feature propagation: " + std::to_string(feats.n) + " feature rows for " +
                    std::to_string(graph.n_nodes) + " nodes");
    if (iterations < 1) throw Error("feature propagation: iterations must be >= 1");
    for (std::size_t i = 0; i < feats.values.size(); ++i)
        if (feats.known[i] && !std::isfinite(feats.values[i]))
            throw Error("feature propagation: known entry " + std::to_string(i) + " is not finite");

    // every component needs at least one known node per channel
    std::int32_t n_comp = 0;
    auto comp = connected_components(graph, &n_comp);
    std::vector<double> comp_sum(static_cast<std::size_t>(n_comp) * c, 0.0);
    std::vector<std::int64_t> comp_cnt(static_cast<std::size_t>(n_comp) * c, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
            if (feats.known[i * c + ch]) {
                comp_sum[static_cast<std::size_t>(comp[i]) * c + ch] += feats.values[i * c + ch];
                comp_cnt[static_cast<std::size_t>(comp[i]) * c + ch] += 1;
            }
    for (std::size_t i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            if (comp_cnt[static_cast<std::size_t>(comp[i]) * c + ch] == 0)
                throw Error("feature propagation: component " + std::to_string(comp[i]) +
                            " (contains node " + std::to_string(i) +
                            ") has no known value in channel " + std::to_string(ch));
        }
    }

    std::vector<double> deg(n, 0.0);
    for (auto d : graph.edge_dst) deg[d] += 1.0;

    // missing entries start at their component's known mean, so every
    // iterate stays inside the known-value envelope
    std::vector<double> x(feats.values.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::size_t ch = i % static_cast<std::size_t>(c);
        std::size_t ci = static_cast<std::size_t>(comp[i / static_cast<std::size_t>(c)]) * c + ch;
        x[i] = feats.known[i] ? feats.values[i] : comp_sum[ci] / static_cast<double>(comp_cnt[ci]);
    }

    std::vector<double> next(x.size());
    for (int it = 0; it < iterations; ++it) {
        std::fill(next.begin(), next.end(), 0.0);
        if (diffusion == Diffusion::row_stochastic) {
            for (std::size_t e = 0; e < graph.edge_src.size(); ++e) {
                const double* src = &x[static_cast<std::size_t>(graph.edge_src[e]) * c];
                double* dst = &next[static_cast<std::size_t>(graph.edge_dst[e]) * c];
                for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
            }
            for (std::size_t i = 0; i < n; ++i) {
                if (deg[i] > 0.0)
                    for (int ch = 0; ch < c; ++ch) next[i * c + ch] /= deg[i];
                else
                    for (int ch = 0; ch < c; ++ch) next[i * c + ch] = x[i * c + ch];
            }
        } else {
            for (std::size_t e = 0; e < graph.edge_src.size(); ++e) {
                std::size_t s = graph.edge_src[e], d = graph.edge_dst[e];
                double w = 1.0 / std::sqrt(deg[s] * deg[d]);
                for (int ch = 0; ch < c; ++ch) next[d * c + ch] += w * x[s * c + ch];
            }
            for (std::size_t i = 0; i < n; ++i)
                if (deg[i] == 0.0)
                    for (int ch = 0; ch < c; ++ch) next[i * c + ch] = x[i * c + ch];
        }
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = feats.known[i] ? feats.values[i] : next[i];
    }
    return x;
}

std::vector<float> init_node_inputs(const MeshGraph& graph, int fp_iterations) {
    const auto n = static_cast<std::size_t>(graph.n_nodes);
    std::vector<double> p(n, 0.0);
    std::vector<std::uint8_t> known(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        known[i] = graph.sense_mask[i];
        p[i] = graph.sense_mask[i] ? static_cast<double>(graph.pressure_obs[i])
                                   : static_cast<double>(missing_value());
    }
    auto filled = propagate(graph, MaskedFeatures::from_channel(p, known), fp_iterations);

    std::vector<float> out(n * 4);
    for (std::size_t i = 0; i < n; ++i) {
        out[4 * i] = static_cast<float>(filled[i]);
        out[4 * i + 1] = graph.node_type[i] == 0 ? 1.0f : 0.0f;
        out[4 * i + 2] = graph.node_type[i] == 1 ? 1.0f : 0.0f;
        out[4 * i + 3] = graph.sdf[i];
    }
    return out;
}

}  // namespace frgt

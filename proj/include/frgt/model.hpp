#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "frgt/common.hpp"
#include "frgt/tensor.hpp"

namespace frgt {

// Architecture hyperparameters. Stacked runs L message-passing layers then
// T attention layers; interleaved runs C combined (message-passing +
// attention) layers. heads * head_dim must equal latent.
struct FrgtConfig {
    enum class Variant { stacked, interleaved };
    Variant variant = Variant::stacked;
    int mp_layers = 10;        // L
    int attn_layers = 1;       // T
    int combined_layers = 5;   // C
    int latent = 160;          // d
    int heads = 4;             // eta
    int head_dim = 40;         // d_eta
    int enc_hidden_layers = 3;
    int dec_hidden_layers = 3;
    int update_mlp_layers = 2;
    double msg_eps = 1e-7;

    static constexpr int node_in_channels = 4;
    static constexpr int edge_in_channels = 4;
    static constexpr int out_channels = 3;
    // update-MLP hidden width is update_hidden_factor * latent; this is the
    // width assumption behind the default parameter budget
    static constexpr int update_hidden_factor = 2;

    void validate() const;
    int processor_mp_layers() const {
        return variant == Variant::stacked ? mp_layers : combined_layers;
    }
    int processor_attn_layers() const {
        return variant == Variant::stacked ? attn_layers : combined_layers;
    }
    std::string variant_name() const {
        return variant == Variant::stacked ? "stacked" : "interleaved";
    }
};

FrgtConfig::Variant variant_from_name(const std::string& name);

// Graph view the network consumes: propagated node inputs, raw geometric
// edge inputs, and the directed edge list (messages flow src -> dst).
template <typename T>
struct ModelGraph {
    int n_nodes = 0;
    std::vector<std::uint32_t> edge_src;
    std::vector<std::uint32_t> edge_dst;
    std::vector<T> node_in;  // n x 4
    std::vector<T> edge_in;  // m x 4
};

// Enumerates the named parameter tensors of a config in a fixed order.
void for_each_param(const FrgtConfig& cfg,
                    const std::function<void(const std::string&, int, int)>& fn);

std::int64_t count_params(const FrgtConfig& cfg);

template <typename T>
ad::Params<T> init_params(const FrgtConfig& cfg, std::uint64_t seed);

template <typename Dst, typename Src>
ad::Params<Dst> convert_params(const ad::Params<Src>& p) {
    ad::Params<Dst> out;
    for (const auto& e : p.entries) {
        std::vector<Dst> v(e.value.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<Dst>(e.value[i]);
        out.add(e.name, e.rows, e.cols, std::move(v));
    }
    return out;
}

// Per-step binding of persistent parameters onto a tape.
template <typename T>
struct BoundParams {
    const ad::Params<T>* params = nullptr;
    std::vector<ad::Tensor<T>> tensors;

    ad::Tensor<T> operator()(const std::string& name) const {
        auto it = params->by_name.find(name);
        if (it == params->by_name.end()) throw Error("params: unknown name " + name);
        return tensors[static_cast<std::size_t>(it->second)];
    }
};

template <typename T>
BoundParams<T> bind_params(ad::Tape<T>& tape, const ad::Params<T>& params, bool needs_grad = true);

// Encoders: h0_i = MLP(x_i), a_ij = MLP(e_ij), ReLU-activated hidden layers.
template <typename T>
std::pair<ad::Tensor<T>, ad::Tensor<T>> encode(ad::Tape<T>& tape, const ModelGraph<T>& g,
                                               const FrgtConfig& cfg, const BoundParams<T>& p);

// One GEN message-passing layer:
//   m_ij = ReLU(h_src + a_ij) + eps
//   agg_i = channel-wise softmax(beta * m) weighted sum over incoming edges
//   h' = LayerNorm(MLP(h + agg))
template <typename T>
ad::Tensor<T> gen_layer(ad::Tensor<T> h, ad::Tensor<T> a, const ModelGraph<T>& g,
                        const FrgtConfig& cfg, const BoundParams<T>& p, const std::string& prefix);

// One Galerkin attention layer: per head Q = HWq, K = LN(HWk), V = LN(HWv),
// head = Q (K^T V) / n; heads concatenated, projected, with residual and a
// position-wise feed-forward block.
template <typename T>
ad::Tensor<T> galerkin_attention(ad::Tensor<T> h, int n_nodes, const FrgtConfig& cfg,
                                 const BoundParams<T>& p, const std::string& prefix);

// Full encode-process-decode pass; returns n x 3 predictions.
template <typename T>
ad::Tensor<T> frgt_forward(ad::Tape<T>& tape, const ModelGraph<T>& g, const FrgtConfig& cfg,
                           const BoundParams<T>& p);

// Convenience: forward pass on fresh tape with values only.
template <typename T>
std::vector<T> frgt_predict(const ModelGraph<T>& g, const FrgtConfig& cfg,
                            const ad::Params<T>& params);

}  // namespace frgt

#include "frgt/model.hpp"

#include <cmath>

namespace frgt {

using ad::Tensor;

void FrgtConfig::validate() const {
    if (latent < 1) throw Error("config: latent width must be >= 1");
    if (heads < 1 || head_dim < 1 || heads * head_dim != latent)
        throw Error("config: heads * head_dim must equal latent (" + std::to_string(heads) + " * " +
                    std::to_string(head_dim) + " != " + std::to_string(latent) + ")");
    if (variant == Variant::stacked) {
        if (mp_layers < 1 || attn_layers < 1)
            throw Error("config: stacked variant needs L >= 1 and T >= 1");
    } else {
        if (combined_layers < 1) throw Error("config: interleaved variant needs C >= 1");
    }
    if (enc_hidden_layers < 1 || dec_hidden_layers < 1 || update_mlp_layers < 1)
        throw Error("config: MLP depths must be >= 1");
    if (!(msg_eps >= 0.0)) throw Error("config: message eps must be >= 0");
}

FrgtConfig::Variant variant_from_name(const std::string& name) {
    if (name == "stacked") return FrgtConfig::Variant::stacked;
    if (name == "interleaved") return FrgtConfig::Variant::interleaved;
    throw Error("config: unknown variant '" + name + "' (expected stacked or interleaved)");
}

namespace {

// Shapes of an MLP: in -> hidden (xN, width `hidden`) -> out.
void mlp_params(const std::string& prefix, int in, int hidden, int out, int n_hidden,
                const std::function<void(const std::string&, int, int)>& fn) {
    int cur = in;
    int layer = 0;
    for (; layer < n_hidden; ++layer) {
        fn(prefix + "." + std::to_string(layer) + ".w", cur, hidden);
        fn(prefix + "." + std::to_string(layer) + ".b", 1, hidden);
        cur = hidden;
    }
    fn(prefix + "." + std::to_string(layer) + ".w", cur, out);
    fn(prefix + "." + std::to_string(layer) + ".b", 1, out);
}

}  // namespace

void for_each_param(const FrgtConfig& cfg,
                    const std::function<void(const std::string&, int, int)>& fn) {
    cfg.validate();
    const int d = cfg.latent;
    mlp_params("enc_node", FrgtConfig::node_in_channels, d, d, cfg.enc_hidden_layers, fn);
    mlp_params("enc_edge", FrgtConfig::edge_in_channels, d, d, cfg.enc_hidden_layers, fn);

    auto mp = [&](const std::string& prefix) {
        mlp_params(prefix + ".update", d, FrgtConfig::update_hidden_factor * d, d,
                   cfg.update_mlp_layers - 1, fn);
        fn(prefix + ".beta", 1, 1);
        fn(prefix + ".ln.g", 1, d);
        fn(prefix + ".ln.b", 1, d);
    };
    auto attn = [&](const std::string& prefix) {
        for (int h = 0; h < cfg.heads; ++h) {
            std::string hp = prefix + ".h" + std::to_string(h);
            fn(hp + ".wq", d, cfg.head_dim);
            fn(hp + ".wk", d, cfg.head_dim);
            fn(hp + ".wv", d, cfg.head_dim);
            fn(hp + ".lnk.g", 1, cfg.head_dim);
            fn(hp + ".lnk.b", 1, cfg.head_dim);
            fn(hp + ".lnv.g", 1, cfg.head_dim);
            fn(hp + ".lnv.b", 1, cfg.head_dim);
        }
        fn(prefix + ".wo", d, d);
        mlp_params(prefix + ".ff", d, d, d, 1, fn);
    };

    if (cfg.variant == FrgtConfig::Variant::stacked) {
        for (int l = 0; l < cfg.mp_layers; ++l) mp("mp" + std::to_string(l));
        for (int t = 0; t < cfg.attn_layers; ++t) attn("attn" + std::to_string(t));
    } else {
        for (int k = 0; k < cfg.combined_layers; ++k) {
            mp("mp" + std::to_string(k));
            attn("attn" + std::to_string(k));
        }
    }
    mlp_params("dec", d, d, FrgtConfig::out_channels, cfg.dec_hidden_layers, fn);
}

std::int64_t count_params(const FrgtConfig& cfg) {
    std::int64_t total = 0;
    for_each_param(cfg, [&](const std::string&, int r, int c) {
        total += static_cast<std::int64_t>(r) * c;
    });
    return total;
}

template <typename T>
ad::Params<T> init_params(const FrgtConfig& cfg, std::uint64_t seed) {
    ad::Params<T> params;
    Rng rng(splitmix64(seed));
    for_each_param(cfg, [&](const std::string& name, int r, int c) {
        std::vector<T> v(static_cast<std::size_t>(r) * c);
        bool is_weight = name.size() > 2 && name.compare(name.size() - 2, 2, ".w") == 0;
        bool is_proj = name.find(".wq") != std::string::npos ||
                       name.find(".wk") != std::string::npos ||
                       name.find(".wv") != std::string::npos ||
                       name.find(".wo") != std::string::npos;
        if (name.find(".ln") != std::string::npos) {
            bool is_gain = name.compare(name.size() - 2, 2, ".g") == 0;
            std::fill(v.begin(), v.end(), is_gain ? T(1) : T(0));
        } else if (name.find(".beta") != std::string::npos) {
            v[0] = T(1);
        } else if (is_proj) {
            double bound = std::sqrt(6.0 / (r + c));
            for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
        } else if (is_weight) {
            double bound = std::sqrt(6.0 / r);  // fan-in scaling for ReLU nets
            for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
        }  // biases stay zero
        params.add(name, r, c, std::move(v));
    });
    return params;
}

template ad::Params<float> init_params<float>(const FrgtConfig&, std::uint64_t);
template ad::Params<double> init_params<double>(const FrgtConfig&, std::uint64_t);

template <typename T>
BoundParams<T> bind_params(ad::Tape<T>& tape, const ad::Params<T>& params, bool needs_grad) {
    BoundParams<T> bound;
    bound.params = &params;
    bound.tensors.reserve(params.entries.size());
    for (const auto& e : params.entries)
        bound.tensors.push_back(tape.value(e.rows, e.cols, e.value.data(), needs_grad));
    return bound;
}

template BoundParams<float> bind_params<float>(ad::Tape<float>&, const ad::Params<float>&, bool);
template BoundParams<double> bind_params<double>(ad::Tape<double>&, const ad::Params<double>&, bool);

namespace {

template <typename T>
Tensor<T> mlp_forward(Tensor<T> x, const BoundParams<T>& p, const std::string& prefix,
                      int n_weight_layers) {
    Tensor<T> h = x;
    for (int l = 0; l < n_weight_layers; ++l) {
        std::string lp = prefix + "." + std::to_string(l);
        h = ad::add_rows(ad::matmul(h, p(lp + ".w")), p(lp + ".b"));
        if (l + 1 < n_weight_layers) h = ad::relu(h);
    }
    return h;
}

}  // namespace

template <typename T>
std::pair<Tensor<T>, Tensor<T>> encode(ad::Tape<T>& tape, const ModelGraph<T>& g,
                                       const FrgtConfig& cfg, const BoundParams<T>& p) {
    const int m = static_cast<int>(g.edge_src.size());
    if (g.node_in.size() != static_cast<std::size_t>(g.n_nodes) * FrgtConfig::node_in_channels)
        throw Error("encode: node input must be n x " +
                    std::to_string(FrgtConfig::node_in_channels));
    if (g.edge_in.size() != static_cast<std::size_t>(m) * FrgtConfig::edge_in_channels)
        throw Error("encode: edge input must be m x " +
                    std::to_string(FrgtConfig::edge_in_channels));
    Tensor<T> x = tape.value(g.n_nodes, FrgtConfig::node_in_channels, g.node_in.data());
    Tensor<T> e = tape.value(m, FrgtConfig::edge_in_channels, g.edge_in.data());
    Tensor<T> h = mlp_forward(x, p, "enc_node", cfg.enc_hidden_layers + 1);
    Tensor<T> a = mlp_forward(e, p, "enc_edge", cfg.enc_hidden_layers + 1);
    return {h, a};
}

template <typename T>
Tensor<T> gen_layer(Tensor<T> h, Tensor<T> a, const ModelGraph<T>& g, const FrgtConfig& cfg,
                    const BoundParams<T>& p, const std::string& prefix) {
    Tensor<T> msg = ad::add_scalar(ad::relu(ad::add(ad::gather_rows(h, g.edge_src), a)), cfg.msg_eps);
    Tensor<T> agg = ad::segment_softmax_weighted_sum(msg, p(prefix + ".beta"), g.edge_dst,
                                                     g.n_nodes);
    Tensor<T> upd = mlp_forward(ad::add(h, agg), p, prefix + ".update", cfg.update_mlp_layers);
    return ad::layer_norm(upd, p(prefix + ".ln.g"), p(prefix + ".ln.b"));
}

template <typename T>
Tensor<T> galerkin_attention(Tensor<T> h, int n_nodes, const FrgtConfig& cfg,
                             const BoundParams<T>& p, const std::string& prefix) {
    std::vector<Tensor<T>> heads;
    heads.reserve(static_cast<std::size_t>(cfg.heads));
    for (int k = 0; k < cfg.heads; ++k) {
        std::string hp = prefix + ".h" + std::to_string(k);
        Tensor<T> q = ad::matmul(h, p(hp + ".wq"));
        Tensor<T> key = ad::layer_norm(ad::matmul(h, p(hp + ".wk")), p(hp + ".lnk.g"), p(hp + ".lnk.b"));
        Tensor<T> val = ad::layer_norm(ad::matmul(h, p(hp + ".wv")), p(hp + ".lnv.g"), p(hp + ".lnv.b"));
        Tensor<T> ktv = ad::matmul(key, val, /*ta=*/true);
        heads.push_back(ad::scale(ad::matmul(q, ktv), 1.0 / n_nodes));
    }
    Tensor<T> mh = cfg.heads == 1 ? heads[0] : ad::concat(heads);
    Tensor<T> z = ad::add(h, ad::matmul(mh, p(prefix + ".wo")));
    Tensor<T> ff = mlp_forward(z, p, prefix + ".ff", 2);
    return ad::add(z, ff);
}

template <typename T>
Tensor<T> frgt_forward(ad::Tape<T>& tape, const ModelGraph<T>& g, const FrgtConfig& cfg,
                       const BoundParams<T>& p) {
    cfg.validate();
    auto [h, a] = encode(tape, g, cfg, p);
    if (cfg.variant == FrgtConfig::Variant::stacked) {
        for (int l = 0; l < cfg.mp_layers; ++l)
            h = gen_layer(h, a, g, cfg, p, "mp" + std::to_string(l));
        for (int t = 0; t < cfg.attn_layers; ++t)
            h = galerkin_attention(h, g.n_nodes, cfg, p, "attn" + std::to_string(t));
    } else {
        for (int k = 0; k < cfg.combined_layers; ++k) {
            h = gen_layer(h, a, g, cfg, p, "mp" + std::to_string(k));
            h = galerkin_attention(h, g.n_nodes, cfg, p, "attn" + std::to_string(k));
        }
    }
    return mlp_forward(h, p, "dec", cfg.dec_hidden_layers + 1);
}

template <typename T>
std::vector<T> frgt_predict(const ModelGraph<T>& g, const FrgtConfig& cfg,
                            const ad::Params<T>& params) {
    ad::Tape<T> tape;
    auto bound = bind_params(tape, params, /*needs_grad=*/false);
    auto out = frgt_forward(tape, g, cfg, bound);
    return out.val();
}

template std::pair<Tensor<float>, Tensor<float>> encode<float>(ad::Tape<float>&,
                                                               const ModelGraph<float>&,
                                                               const FrgtConfig&,
                                                               const BoundParams<float>&);
template std::pair<Tensor<double>, Tensor<double>> encode<double>(ad::Tape<double>&,
                                                                  const ModelGraph<double>&,
                                                                  const FrgtConfig&,
                                                                  const BoundParams<double>&);
template Tensor<float> gen_layer<float>(Tensor<float>, Tensor<float>, const ModelGraph<float>&,
                                        const FrgtConfig&, const BoundParams<float>&,
                                        const std::string&);
template Tensor<double> gen_layer<double>(Tensor<double>, Tensor<double>,
                                          const ModelGraph<double>&, const FrgtConfig&,
                                          const BoundParams<double>&, const std::string&);
template Tensor<float> galerkin_attention<float>(Tensor<float>, int, const FrgtConfig&,
                                                 const BoundParams<float>&, const std::string&);
template Tensor<double> galerkin_attention<double>(Tensor<double>, int, const FrgtConfig&,
                                                   const BoundParams<double>&, const std::string&);
template Tensor<float> frgt_forward<float>(ad::Tape<float>&, const ModelGraph<float>&,
                                           const FrgtConfig&, const BoundParams<float>&);
template Tensor<double> frgt_forward<double>(ad::Tape<double>&, const ModelGraph<double>&,
                                             const FrgtConfig&, const BoundParams<double>&);
template std::vector<float> frgt_predict<float>(const ModelGraph<float>&, const FrgtConfig&,
                                                const ad::Params<float>&);
template std::vector<double> frgt_predict<double>(const ModelGraph<double>&, const FrgtConfig&,
                                                  const ad::Params<double>&);

}  // namespace frgt

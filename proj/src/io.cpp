#include "frgt/io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "frgt/common.hpp"

namespace frgt {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "bundle i/o assumes a little-endian host");

std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

namespace {

struct ArrayDesc {
    std::string name;
    std::vector<std::int64_t> shape;
    std::string dtype;
    std::uint64_t byte_length = 0;
    std::string checksum;
};

void write_file(const fs::path& path, const void* data, std::size_t bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StoreError(StoreError::Kind::io, "cannot open " + path.string() + " for writing");
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    if (!out) throw StoreError(StoreError::Kind::io, "write failed for " + path.string());
}

std::vector<char> read_file_checked(const fs::path& path, const ArrayDesc& desc) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StoreError(StoreError::Kind::io, "cannot open " + path.string());
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() != desc.byte_length)
        throw StoreError(StoreError::Kind::truncated,
                         path.string() + ": expected " + std::to_string(desc.byte_length) +
                             " bytes, found " + std::to_string(buf.size()));
    std::string sum = to_hex(fnv1a64(buf.data(), buf.size()));
    if (sum != desc.checksum)
        throw StoreError(StoreError::Kind::checksum_mismatch,
                         path.string() + ": checksum " + sum + " != manifest " + desc.checksum);
    return buf;
}

template <typename T>
ArrayDesc describe(const std::string& name, const std::vector<std::int64_t>& shape,
                   const std::string& dtype, const std::vector<T>& data) {
    ArrayDesc d;
    d.name = name;
    d.shape = shape;
    d.dtype = dtype;
    d.byte_length = data.size() * sizeof(T);
    d.checksum = to_hex(fnv1a64(data.data(), d.byte_length));
    return d;
}

json desc_to_json(const ArrayDesc& d) {
    return json{{"name", d.name},
                {"shape", d.shape},
                {"dtype", d.dtype},
                {"byte_length", d.byte_length},
                {"fnv1a64", d.checksum}};
}

ArrayDesc desc_from_json(const json& j) {
    ArrayDesc d;
    d.name = j.at("name").get<std::string>();
    d.shape = j.at("shape").get<std::vector<std::int64_t>>();
    d.dtype = j.at("dtype").get<std::string>();
    d.byte_length = j.at("byte_length").get<std::uint64_t>();
    d.checksum = j.at("fnv1a64").get<std::string>();
    return d;
}

json stats_to_json(const NormStats& s) {
    return json{{"mu_p", s.mu_p},
                {"sigma_p", s.sigma_p},
                {"u_inf", s.u_inf},
                {"rho", s.rho},
                {"chord", s.chord}};
}

NormStats stats_from_json(const json& j) {
    NormStats s;
    s.mu_p = j.at("mu_p").get<double>();
    s.sigma_p = j.at("sigma_p").get<double>();
    s.u_inf = j.at("u_inf").get<double>();
    s.rho = j.at("rho").get<double>();
    s.chord = j.at("chord").get<double>();
    return s;
}

json meta_to_json(const CaseMeta& m) {
    return json{{"body", m.body},     {"u_inf", m.u_inf},       {"alpha", m.alpha},
                {"gamma", m.gamma},   {"shape_p1", m.shape_p1}, {"shape_p2", m.shape_p2}};
}

CaseMeta meta_from_json(const json& j) {
    CaseMeta m;
    m.body = j.value("body", "");
    m.u_inf = j.value("u_inf", 0.0);
    m.alpha = j.value("alpha", 0.0);
    m.gamma = j.value("gamma", 0.0);
    m.shape_p1 = j.value("shape_p1", 0.0);
    m.shape_p2 = j.value("shape_p2", 0.0);
    return m;
}

json parse_manifest(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw StoreError(StoreError::Kind::io, "cannot open " + (dir / "manifest.json").string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw StoreError(StoreError::Kind::parse,
                         (dir / "manifest.json").string() + ": " + e.what());
    }
    return j;
}

template <typename T>
std::vector<T> take(const std::vector<char>& buf) {
    std::vector<T> out(buf.size() / sizeof(T));
    std::memcpy(out.data(), buf.data(), out.size() * sizeof(T));
    return out;
}

}  // namespace

void save_bundle(const MeshGraph& graph, const std::optional<NormStats>& stats,
                 const std::optional<CaseMeta>& meta, const std::string& dir) {
    validate_graph(graph);
    fs::create_directories(dir);
    const fs::path root(dir);
    const auto n = static_cast<std::int64_t>(graph.n_nodes);
    const auto m = graph.n_edges();

    // edge_index.u32 is 2 x m: the full src row then the full dst row
    std::vector<std::uint32_t> edge_index;
    edge_index.reserve(static_cast<std::size_t>(2 * m));
    edge_index.insert(edge_index.end(), graph.edge_src.begin(), graph.edge_src.end());
    edge_index.insert(edge_index.end(), graph.edge_dst.begin(), graph.edge_dst.end());

    std::vector<ArrayDesc> descs;
    auto emit = [&](const auto& data, const std::string& name,
                    const std::vector<std::int64_t>& shape, const std::string& dtype) {
        descs.push_back(describe(name, shape, dtype, data));
        write_file(root / name, data.data(),
                   data.size() * sizeof(typename std::decay_t<decltype(data)>::value_type));
    };
    emit(graph.positions, "pos.f32", {n, 2}, "f32");
    emit(graph.node_type, "node_type.u8", {n}, "u8");
    emit(graph.sdf, "sdf.f32", {n}, "f32");
    emit(edge_index, "edge_index.u32", {2, m}, "u32");
    emit(graph.edge_feat, "edge_feat.f32", {m, 4}, "f32");
    emit(graph.pressure_obs, "p_obs.f32", {n}, "f32");
    std::vector<float> target = graph.target;
    if (target.empty()) target.assign(static_cast<std::size_t>(3 * n), missing_value());
    emit(target, "target.f32", {n, 3}, "f32");
    emit(graph.sense_mask, "sense_mask.u8", {n}, "u8");

    json manifest;
    manifest["format_version"] = kBundleFormatVersion;
    manifest["kind"] = "graph_bundle";
    manifest["n_nodes"] = n;
    manifest["n_edges"] = m;
    manifest["chord"] = graph.chord;
    manifest["rho"] = graph.rho;
    manifest["arrays"] = json::array();
    for (const auto& d : descs) manifest["arrays"].push_back(desc_to_json(d));
    if (stats) manifest["norm_stats"] = stats_to_json(*stats);
    if (meta) manifest["case"] = meta_to_json(*meta);

    std::ofstream out(root / "manifest.json");
    if (!out) throw StoreError(StoreError::Kind::io, "cannot write manifest in " + dir);
    out << manifest.dump(2) << '\n';
    if (!out) throw StoreError(StoreError::Kind::io, "manifest write failed in " + dir);
}

LoadedBundle load_bundle(const std::string& dir) {
    const fs::path root(dir);
    json manifest = parse_manifest(root);
    try {
        if (manifest.at("format_version").get<int>() != kBundleFormatVersion)
            throw StoreError(StoreError::Kind::unknown_version,
                             dir + ": unsupported bundle format_version " +
                                 manifest.at("format_version").dump());

        LoadedBundle b;
        b.graph.n_nodes = manifest.at("n_nodes").get<std::int64_t>();
        b.graph.chord = manifest.at("chord").get<double>();
        b.graph.rho = manifest.at("rho").get<double>();
        const auto m = manifest.at("n_edges").get<std::int64_t>();

        std::unordered_map<std::string, ArrayDesc> byname;
        for (const auto& dj : manifest.at("arrays")) {
            ArrayDesc d = desc_from_json(dj);
            byname[d.name] = d;
        }
        auto fetch = [&](const std::string& name) {
            auto it = byname.find(name);
            if (it == byname.end())
                throw StoreError(StoreError::Kind::parse, dir + ": manifest lacks array " + name);
            return read_file_checked(root / name, it->second);
        };

        b.graph.positions = take<float>(fetch("pos.f32"));
        b.graph.node_type = take<std::uint8_t>(fetch("node_type.u8"));
        b.graph.sdf = take<float>(fetch("sdf.f32"));
        auto edge_index = take<std::uint32_t>(fetch("edge_index.u32"));
        if (edge_index.size() != static_cast<std::size_t>(2 * m))
            throw StoreError(StoreError::Kind::truncated, dir + ": edge_index length mismatch");
        b.graph.edge_src.assign(edge_index.begin(), edge_index.begin() + m);
        b.graph.edge_dst.assign(edge_index.begin() + m, edge_index.end());
        b.graph.edge_feat = take<float>(fetch("edge_feat.f32"));
        b.graph.pressure_obs = take<float>(fetch("p_obs.f32"));
        b.graph.target = take<float>(fetch("target.f32"));
        b.graph.sense_mask = take<std::uint8_t>(fetch("sense_mask.u8"));

        if (manifest.contains("norm_stats")) b.stats = stats_from_json(manifest.at("norm_stats"));
        if (manifest.contains("case")) b.meta = meta_from_json(manifest.at("case"));

        try {
            validate_graph(b.graph);
        } catch (const Error& e) {
            throw StoreError(StoreError::Kind::invariant_violation, dir + ": " + e.what());
        }
        return b;
    } catch (const json::exception& e) {
        throw StoreError(StoreError::Kind::parse, dir + ": " + e.what());
    }
}

namespace {

json config_to_json(const FrgtConfig& c) {
    return json{{"variant", c.variant_name()},
                {"L", c.mp_layers},
                {"T", c.attn_layers},
                {"C", c.combined_layers},
                {"d", c.latent},
                {"eta", c.heads},
                {"d_eta", c.head_dim},
                {"enc_hidden_layers", c.enc_hidden_layers},
                {"dec_hidden_layers", c.dec_hidden_layers},
                {"update_mlp_layers", c.update_mlp_layers},
                {"msg_eps", c.msg_eps}};
}

FrgtConfig config_from_json(const json& j) {
    FrgtConfig c;
    c.variant = variant_from_name(j.at("variant").get<std::string>());
    c.mp_layers = j.at("L").get<int>();
    c.attn_layers = j.at("T").get<int>();
    c.combined_layers = j.at("C").get<int>();
    c.latent = j.at("d").get<int>();
    c.heads = j.at("eta").get<int>();
    c.head_dim = j.at("d_eta").get<int>();
    c.enc_hidden_layers = j.at("enc_hidden_layers").get<int>();
    c.dec_hidden_layers = j.at("dec_hidden_layers").get<int>();
    c.update_mlp_layers = j.at("update_mlp_layers").get<int>();
    c.msg_eps = j.at("msg_eps").get<double>();
    c.validate();
    return c;
}

std::string tensor_file(const std::string& name) { return name + ".f32"; }

}  // namespace

void save_checkpoint(const ad::Params<float>& params, const FrgtConfig& config,
                     std::uint64_t seed, const std::optional<TrainState>& state,
                     const std::string& dir) {
    fs::create_directories(dir);
    const fs::path root(dir);
    json manifest;
    manifest["format_version"] = kCheckpointFormatVersion;
    manifest["kind"] = "checkpoint";
    manifest["config"] = config_to_json(config);
    manifest["seed"] = seed;
    manifest["params"] = json::array();
    for (const auto& e : params.entries) {
        auto d = describe(e.name, {e.rows, e.cols}, "f32", e.value);
        manifest["params"].push_back(desc_to_json(d));
        write_file(root / tensor_file(e.name), e.value.data(), e.value.size() * sizeof(float));
    }
    if (state) {
        json t;
        t["adam_t"] = state->adam_t;
        t["epoch"] = state->epoch;
        t["fp_iters"] = state->fp_iters;
        if (state->has_best_val) t["best_val"] = state->best_val;
        auto dm = describe("opt_m", {static_cast<std::int64_t>(state->adam_m.size())}, "f32",
                           state->adam_m);
        auto dv = describe("opt_v", {static_cast<std::int64_t>(state->adam_v.size())}, "f32",
                           state->adam_v);
        t["opt_m"] = desc_to_json(dm);
        t["opt_v"] = desc_to_json(dv);
        write_file(root / "opt_m.f32", state->adam_m.data(), state->adam_m.size() * sizeof(float));
        write_file(root / "opt_v.f32", state->adam_v.data(), state->adam_v.size() * sizeof(float));
        manifest["training"] = t;
    }
    std::ofstream out(root / "manifest.json");
    if (!out) throw StoreError(StoreError::Kind::io, "cannot write manifest in " + dir);
    out << manifest.dump(2) << '\n';
    if (!out) throw StoreError(StoreError::Kind::io, "manifest write failed in " + dir);
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
    const fs::path root(dir);
    json manifest = parse_manifest(root);
    try {
        if (manifest.at("format_version").get<int>() != kCheckpointFormatVersion)
            throw StoreError(StoreError::Kind::unknown_version,
                             dir + ": unsupported checkpoint format_version " +
                                 manifest.at("format_version").dump());
        LoadedCheckpoint ck;
        ck.config = config_from_json(manifest.at("config"));
        ck.seed = manifest.at("seed").get<std::uint64_t>();

        std::unordered_map<std::string, ArrayDesc> byname;
        std::vector<std::string> order;
        for (const auto& dj : manifest.at("params")) {
            ArrayDesc d = desc_from_json(dj);
            order.push_back(d.name);
            byname[d.name] = d;
        }
        // the manifest must describe exactly the tensors the config implies
        std::size_t expected = 0;
        for_each_param(ck.config, [&](const std::string& name, int r, int c) {
            ++expected;
            auto it = byname.find(name);
            if (it == byname.end())
                throw StoreError(StoreError::Kind::shape_mismatch,
                                 dir + ": missing parameter " + name);
            const auto& sh = it->second.shape;
            if (sh.size() != 2 || sh[0] != r || sh[1] != c)
                throw StoreError(StoreError::Kind::shape_mismatch,
                                 dir + ": parameter " + name + " has shape " +
                                     json(sh).dump() + ", config implies [" + std::to_string(r) +
                                     "," + std::to_string(c) + "]");
        });
        if (expected != order.size())
            throw StoreError(StoreError::Kind::shape_mismatch,
                             dir + ": checkpoint has " + std::to_string(order.size()) +
                                 " tensors, config implies " + std::to_string(expected));

        for_each_param(ck.config, [&](const std::string& name, int r, int c) {
            auto buf = read_file_checked(root / tensor_file(name), byname.at(name));
            ck.params.add(name, r, c, take<float>(buf));
        });

        if (manifest.contains("training")) {
            const auto& t = manifest.at("training");
            TrainState st;
            st.adam_t = t.at("adam_t").get<std::int64_t>();
            st.epoch = t.at("epoch").get<int>();
            st.fp_iters = t.value("fp_iters", 30);
            if (t.contains("best_val")) {
                st.best_val = t.at("best_val").get<double>();
                st.has_best_val = true;
            }
            st.adam_m = take<float>(read_file_checked(root / "opt_m.f32", desc_from_json(t.at("opt_m"))));
            st.adam_v = take<float>(read_file_checked(root / "opt_v.f32", desc_from_json(t.at("opt_v"))));
            ck.state = st;
        }
        return ck;
    } catch (const json::exception& e) {
        throw StoreError(StoreError::Kind::parse, dir + ": " + e.what());
    }
}

}  // namespace frgt

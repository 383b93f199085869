#include "frgt/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "frgt/io.hpp"
#include "frgt/meshgraph.hpp"

namespace frgt {

namespace {

using cplx = std::complex<double>;
constexpr double kPi = 3.141592653589793238462643383279502884;

}  // namespace

void FlowCase::validate() const {
    if (!(u_inf > 0.0)) throw Error("flow case: u_inf must be > 0");
    if (!(rho > 0.0)) throw Error("flow case: rho must be > 0");
    if (body == Body::cylinder) {
        if (!(radius > 0.0)) throw Error("flow case: cylinder radius must be > 0");
    } else {
        if (!(circle_radius > std::abs(mu_y) * (1.0 + te_rounding)))
            throw Error("flow case: joukowski circle radius must exceed |mu_y|");
        double c = map_constant();
        if (!(c > 0.0)) throw Error("flow case: joukowski map constant must be > 0");
        // both critical points +-c must be strictly inside the circle
        for (double cp : {c, -c}) {
            double dist = std::hypot(cp - mu_x, mu_y);
            if (!(dist < circle_radius * (1.0 - 1e-9)))
                throw Error("flow case: joukowski circle does not enclose the critical points");
        }
    }
}

double FlowCase::map_constant() const {
    double r_in = circle_radius / (1.0 + te_rounding);
    return mu_x + std::sqrt(r_in * r_in - mu_y * mu_y);
}

double FlowCase::kutta_beta() const { return std::asin(mu_y / circle_radius); }

double FlowCase::kutta_circulation() const {
    return -4.0 * kPi * u_inf * circle_radius * std::sin(alpha + kutta_beta());
}

namespace {

// complex velocity (u_x - i u_y) of flow around a circle of radius a
// centred at mu: uniform stream at angle alpha + doublet + vortex
cplx circle_flow_velocity(cplx zeta, cplx mu, double a, double u, double alpha, double gamma) {
    cplx zp = zeta - mu;
    cplx e_m = std::polar(1.0, -alpha);
    cplx e_p = std::polar(1.0, alpha);
    return u * e_m - u * a * a * e_p / (zp * zp) - cplx(0.0, gamma / (2.0 * kPi)) / zp;
}

PointFlow finish(const FlowCase& fc, cplx w) {
    PointFlow f;
    f.u_x = w.real();
    f.u_y = -w.imag();
    double speed2 = f.u_x * f.u_x + f.u_y * f.u_y;
    f.p = 0.5 * fc.rho * (fc.u_inf * fc.u_inf - speed2);
    return f;
}

}  // namespace

PointFlow potential_flow_cylinder(const FlowCase& fc, double x, double y) {
    double r = std::hypot(x, y);
    // boundary queries sit on the circle up to rounding
    if (r < fc.radius * (1.0 - 1e-9))
        throw Error("flow: query (" + std::to_string(x) + "," + std::to_string(y) +
                    ") lies inside the cylinder");
    return finish(fc, circle_flow_velocity(cplx(x, y), cplx(0.0, 0.0), fc.radius, fc.u_inf,
                                           fc.alpha, fc.gamma));
}

PointFlow joukowski_flow(const FlowCase& fc, double x, double y) {
    const double c = fc.map_constant();
    const cplx z(x, y);
    const cplx z_te(2.0 * c, 0.0);
    if (std::abs(z - z_te) < 1e-6 * 4.0 * c)
        throw Error("flow: query too close to the trailing edge");

    // invert z = zeta + c^2/zeta, picking the root outside the circle
    cplx rt = std::sqrt(z * z - 4.0 * c * c);
    cplx zeta1 = 0.5 * (z + rt);
    cplx zeta2 = 0.5 * (z - rt);
    cplx mu(fc.mu_x, fc.mu_y);
    cplx zeta = (std::abs(zeta1 - mu) >= std::abs(zeta2 - mu)) ? zeta1 : zeta2;
    if (std::abs(zeta - mu) < fc.circle_radius * (1.0 - 1e-9))
        throw Error("flow: query (" + std::to_string(x) + "," + std::to_string(y) +
                    ") lies inside the airfoil");

    cplx w_zeta = circle_flow_velocity(zeta, mu, fc.circle_radius, fc.u_inf, fc.alpha,
                                       fc.kutta_circulation());
    cplx dz_dzeta = 1.0 - (c * c) / (zeta * zeta);
    return finish(fc, w_zeta / dz_dzeta);
}

PointFlow evaluate_flow(const FlowCase& fc, double x, double y) {
    return fc.body == FlowCase::Body::cylinder ? potential_flow_cylinder(fc, x, y)
                                               : joukowski_flow(fc, x, y);
}

void GridSpec::validate() const {
    if (n_theta < 8) throw Error("grid: n_theta must be >= 8");
    if (n_r < 2) throw Error("grid: n_r must be >= 2");
    if (!(outer_radius_chords > 0.0)) throw Error("grid: outer radius must be > 0");
    if (!(growth >= 1.0)) throw Error("grid: growth ratio must be >= 1");
}

namespace {

// ring radii from r0 outward, spacing growing geometrically to reach out_r
std::vector<double> ring_radii(double r0, double out_r, int n_r, double growth) {
    std::vector<double> r(static_cast<std::size_t>(n_r) + 1);
    r[0] = r0;
    double total = out_r - r0;
    double step0;
    if (growth == 1.0)
        step0 = total / n_r;
    else
        step0 = total * (growth - 1.0) / (std::pow(growth, n_r) - 1.0);
    double step = step0;
    for (int k = 1; k <= n_r; ++k) {
        r[static_cast<std::size_t>(k)] = r[static_cast<std::size_t>(k) - 1] + step;
        step *= growth;
    }
    return r;
}

TriMesh grid_from_rings(const std::vector<Vec2>& verts, int n_theta, int n_r) {
    TriMesh mesh;
    mesh.vertices = verts;
    auto vid = [n_theta](int k, int j) {
        return static_cast<std::uint32_t>(k * n_theta + (j % n_theta));
    };
    for (int k = 0; k < n_r; ++k) {
        for (int j = 0; j < n_theta; ++j) {
            // counter-clockwise quad: inner_j, outer_j, outer_j+1, inner_j+1
            std::uint32_t a = vid(k, j), b = vid(k, j + 1);
            std::uint32_t cc = vid(k + 1, j + 1), d = vid(k + 1, j);
            mesh.triangles.push_back({a, d, cc});
            mesh.triangles.push_back({a, cc, b});
        }
    }
    mesh.surface_polyline.resize(static_cast<std::size_t>(n_theta));
    for (int j = 0; j < n_theta; ++j)
        mesh.surface_polyline[static_cast<std::size_t>(j)] = static_cast<std::uint32_t>(j);
    return mesh;
}

}  // namespace

TriMesh build_ogrid_mesh(const FlowCase& fc, const GridSpec& grid) {
    fc.validate();
    grid.validate();
    const int nt = grid.n_theta;
    const int nr = grid.n_r;

    if (fc.body == FlowCase::Body::cylinder) {
        const double a = fc.radius;
        const double chord = 2.0 * a;
        auto radii = ring_radii(a, a + grid.outer_radius_chords * chord, nr, grid.growth);
        std::vector<Vec2> verts;
        verts.reserve(static_cast<std::size_t>((nr + 1) * nt));
        for (int k = 0; k <= nr; ++k)
            for (int j = 0; j < nt; ++j) {
                double th = 2.0 * kPi * j / nt;
                verts.push_back({radii[static_cast<std::size_t>(k)] * std::cos(th),
                                 radii[static_cast<std::size_t>(k)] * std::sin(th)});
            }
        TriMesh mesh = grid_from_rings(verts, nt, nr);
        mesh.chord = chord;
        validate_mesh(mesh);
        return mesh;
    }

    // joukowski: build the O-grid in the circle plane and map every vertex.
    // One vertex sits exactly on the (rounded) trailing edge so no cell
    // spans the high-curvature tip; the map is regular on the whole
    // surface, but resolving the tip still needs a minimum angular count.
    if (nt < 32) throw Error("grid: joukowski meshes need n_theta >= 32, got " + std::to_string(nt));
    const double a = fc.circle_radius;
    const double c = fc.map_constant();
    const cplx mu(fc.mu_x, fc.mu_y);
    const double theta_te = -fc.kutta_beta();
    auto map_z = [&](cplx zeta) { return zeta + (c * c) / zeta; };

    // chord from the mapped surface ring
    std::vector<cplx> surf(static_cast<std::size_t>(nt));
    double min_x = 1e300, max_x = -1e300;
    cplx z_le, z_te;
    for (int j = 0; j < nt; ++j) {
        double th = theta_te + 2.0 * kPi * j / nt;
        surf[static_cast<std::size_t>(j)] = map_z(mu + std::polar(a, th));
        double zx = surf[static_cast<std::size_t>(j)].real();
        if (zx < min_x) {
            min_x = zx;
            z_le = surf[static_cast<std::size_t>(j)];
        }
        if (zx > max_x) {
            max_x = zx;
            z_te = surf[static_cast<std::size_t>(j)];
        }
    }
    const double chord = std::abs(z_te - z_le);

    auto radii = ring_radii(a, a + grid.outer_radius_chords * chord + c, nr, grid.growth);
    std::vector<Vec2> verts;
    verts.reserve(static_cast<std::size_t>((nr + 1) * nt));
    for (int k = 0; k <= nr; ++k)
        for (int j = 0; j < nt; ++j) {
            double th = theta_te + 2.0 * kPi * j / nt;
            cplx z = map_z(mu + std::polar(radii[static_cast<std::size_t>(k)], th));
            verts.push_back({z.real(), z.imag()});
        }
    TriMesh mesh = grid_from_rings(verts, nt, nr);
    mesh.chord = chord;
    validate_mesh(mesh);
    return mesh;
}

MeshGraph generate_case(const FlowCase& fc, const GridSpec& grid, double crop_radius_chords) {
    TriMesh mesh = build_ogrid_mesh(fc, grid);
    MeshGraph g = build_dual_graph(mesh);
    g = attach_surface_chain(g, mesh);
    compute_sdf(g);
    g.rho = fc.rho;

    // targets in f64 mesh coordinates (centroids / surface vertices), then
    // rounded once into the f32 arrays
    const std::size_t nf = mesh.n_triangles();
    const std::size_t ns = mesh.surface_polyline.size();
    g.target.resize(3 * (nf + ns));
    for (std::size_t t = 0; t < nf; ++t) {
        Vec2 cpos = triangle_centroid(mesh, t);
        PointFlow f = evaluate_flow(fc, cpos.x, cpos.y);
        g.target[3 * t] = static_cast<float>(f.p);
        g.target[3 * t + 1] = static_cast<float>(f.u_x);
        g.target[3 * t + 2] = static_cast<float>(f.u_y);
    }
    for (std::size_t i = 0; i < ns; ++i) {
        Vec2 vp = mesh.vertices[mesh.surface_polyline[i]];
        PointFlow f = evaluate_flow(fc, vp.x, vp.y);
        std::size_t node = nf + i;
        g.target[3 * node] = static_cast<float>(f.p);
        g.target[3 * node + 1] = static_cast<float>(f.u_x);
        g.target[3 * node + 2] = static_cast<float>(f.u_y);
        g.pressure_obs[node] = static_cast<float>(f.p);
        g.sense_mask[node] = 1;
    }
    if (crop_radius_chords > 0.0) g = crop_to_radius(g, crop_radius_chords);
    return g;
}

MeshGraph mask_coverage(const MeshGraph& graph, double fraction) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw Error("mask_coverage: fraction must be in (0, 1], got " + std::to_string(fraction));
    const auto n = static_cast<std::size_t>(graph.n_nodes);
    double x_le = 1e300;
    for (std::size_t i = 0; i < n; ++i)
        if (graph.node_type[i] == 1) x_le = std::min(x_le, static_cast<double>(graph.px(static_cast<std::int64_t>(i))));
    if (x_le == 1e300) throw Error("mask_coverage: graph has no wall nodes");

    // boundary nodes sit exactly at fraction * chord for symmetric bodies;
    // the ulp-scale slack keeps the predicate stable in f32 coordinates
    const double limit = fraction * graph.chord * (1.0 + 1e-6);
    MeshGraph g = graph;
    std::size_t sensed = 0;
    for (std::size_t i = 0; i < n; ++i) {
        bool keep = graph.node_type[i] == 1 &&
                    std::isfinite(graph.pressure_obs[i]) &&
                    (static_cast<double>(graph.px(static_cast<std::int64_t>(i))) - x_le) <= limit;
        g.sense_mask[i] = keep ? 1 : 0;
        if (!keep) g.pressure_obs[i] = missing_value();
        sensed += keep;
    }
    if (sensed == 0)
        throw Error("mask_coverage: fraction " + std::to_string(fraction) +
                    " leaves no sensed node");
    return g;
}

// Direction numbers for the first 8 dimensions of the standard Sobol
// construction (primitive polynomial degree s, coefficient a, initial m).
namespace {

struct SobolDim {
    int s;
    std::uint32_t a;
    std::uint32_t m[5];
};

const SobolDim kSobolDims[7] = {
    {1, 0, {1, 0, 0, 0, 0}},  {2, 1, {1, 3, 0, 0, 0}},  {3, 1, {1, 3, 1, 0, 0}},
    {3, 2, {1, 1, 1, 0, 0}},  {4, 1, {1, 1, 3, 3, 0}},  {4, 4, {1, 3, 5, 13, 0}},
    {5, 2, {1, 1, 5, 5, 17}},
};

}  // namespace

Sobol::Sobol(int dim, std::uint64_t seed) : dim_(dim) {
    if (dim < 1 || dim > 8) throw Error("sobol: dimension must be in [1, 8]");
    dirs_.resize(static_cast<std::size_t>(dim));
    state_.assign(static_cast<std::size_t>(dim), 0);
    shift_.resize(static_cast<std::size_t>(dim));
    for (int d = 0; d < dim; ++d) {
        auto& v = dirs_[static_cast<std::size_t>(d)];
        v.resize(32);
        if (d == 0) {
            for (int j = 0; j < 32; ++j) v[static_cast<std::size_t>(j)] = 1u << (31 - j);
        } else {
            const SobolDim& sd = kSobolDims[d - 1];
            for (int j = 0; j < sd.s; ++j)
                v[static_cast<std::size_t>(j)] = sd.m[j] << (31 - j);
            for (int j = sd.s; j < 32; ++j) {
                std::uint32_t x = v[static_cast<std::size_t>(j - sd.s)];
                x ^= x >> sd.s;
                for (int k = 1; k < sd.s; ++k)
                    if ((sd.a >> (sd.s - 1 - k)) & 1u) x ^= v[static_cast<std::size_t>(j - k)];
                v[static_cast<std::size_t>(j)] = x;
            }
        }
        shift_[static_cast<std::size_t>(d)] =
            seed == 0 ? 0u
                      : static_cast<std::uint32_t>(splitmix64(seed + 0x1234567u * (d + 1)) >> 32);
    }
}

std::vector<double> Sobol::next() {
    ++index_;
    int bit = std::countr_zero(index_);
    std::vector<double> out(static_cast<std::size_t>(dim_));
    for (int d = 0; d < dim_; ++d) {
        state_[static_cast<std::size_t>(d)] ^= dirs_[static_cast<std::size_t>(d)][static_cast<std::size_t>(bit)];
        out[static_cast<std::size_t>(d)] =
            (state_[static_cast<std::size_t>(d)] ^ shift_[static_cast<std::size_t>(d)]) * 0x1.0p-32;
    }
    return out;
}

FlowCase sample_case(const std::vector<double>& u01, double alpha_max_deg, double u_min,
                     double u_max) {
    if (u01.size() < 5) throw Error("sample_case: needs 5 coordinates");
    FlowCase fc;
    fc.u_inf = u_min + (u_max - u_min) * u01[3];
    fc.alpha = (2.0 * u01[4] - 1.0) * alpha_max_deg * kPi / 180.0;
    if (u01[0] < 0.5) {
        fc.body = FlowCase::Body::cylinder;
        fc.radius = 0.35 + 0.3 * u01[1];
        fc.gamma = (2.0 * u01[2] - 1.0) * 0.25 * 4.0 * kPi * fc.u_inf * fc.radius;
    } else {
        fc.body = FlowCase::Body::joukowski;
        const double c0 = 0.25;
        double eps = 0.06 + 0.16 * u01[1];   // thickness
        double cam = 0.18 * u01[2];          // camber
        fc.mu_x = -eps * c0;
        fc.mu_y = cam * c0;
        fc.circle_radius = std::hypot(c0 - fc.mu_x, fc.mu_y);
    }
    fc.validate();
    return fc;
}

DatasetSplit generate_dataset(const DatasetSpec& spec, const std::string& out_dir) {
    namespace fs = std::filesystem;
    if (spec.n_train + spec.n_val + spec.n_test < 1) throw Error("dataset: needs n_cases >= 1");
    spec.grid.validate();
    fs::create_directories(out_dir);

    Sobol sobol(5, spec.seed);
    DatasetSplit split;
    const int total = spec.n_train + spec.n_val + spec.n_test;
    for (int i = 0; i < total; ++i) {
        auto u = sobol.next();
        bool is_train = i < spec.n_train;
        double alpha_deg = is_train ? spec.alpha_train_deg : spec.alpha_eval_deg;
        FlowCase fc = sample_case(u, alpha_deg, spec.u_min, spec.u_max);

        MeshGraph g = generate_case(fc, spec.grid);
        if (spec.coverage < 1.0) g = mask_coverage(g, spec.coverage);
        NormStats stats = compute_stats(g);

        CaseMeta meta;
        meta.body = fc.body == FlowCase::Body::cylinder ? "cylinder" : "joukowski";
        meta.u_inf = fc.u_inf;
        meta.alpha = fc.alpha;
        meta.gamma = fc.body == FlowCase::Body::cylinder ? fc.gamma : fc.kutta_circulation();
        meta.shape_p1 = fc.body == FlowCase::Body::cylinder ? fc.radius : fc.mu_x;
        meta.shape_p2 = fc.body == FlowCase::Body::cylinder ? 0.0 : fc.mu_y;

        char name[32];
        std::snprintf(name, sizeof(name), "case_%04d", i);
        save_bundle(g, stats, meta, (fs::path(out_dir) / name).string());

        if (i < spec.n_train)
            split.train.push_back(name);
        else if (i < spec.n_train + spec.n_val)
            split.val.push_back(name);
        else
            split.test.push_back(name);
    }

    nlohmann::json j;
    j["format_version"] = 1;
    j["seed"] = spec.seed;
    j["coverage"] = spec.coverage;
    j["train"] = split.train;
    j["val"] = split.val;
    j["test"] = split.test;
    std::ofstream out(fs::path(out_dir) / "splits.json");
    if (!out) throw StoreError(StoreError::Kind::io, "cannot write splits.json in " + out_dir);
    out << j.dump(2) << '\n';
    return split;
}

}  // namespace frgt

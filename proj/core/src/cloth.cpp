#include "csda/cloth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

#include "csda/rng.hpp"

namespace csda {

namespace {

// Lattice bookkeeping for the cross-shaped layout. Cells are unit squares of
// the build lattice; a cell is active when it belongs to body or sleeves and
// not to the neck cutout.
struct Layout {
    int nbw, nbh, nsw, nsh, neck_w, neck_d, grasp;

    bool body(int cx, int cy) const {
        if (cx < 0 || cx >= nbw || cy < 0 || cy >= nbh) return false;
        const int nx0 = (nbw - neck_w) / 2;
        if (cy >= nbh - neck_d && cx >= nx0 && cx < nx0 + neck_w) return false;  // neck
        return true;
    }
    bool sleeve(int cx, int cy) const {
        if (cy < nbh - nsh || cy >= nbh) return false;
        return (cx >= -nsw && cx < 0) || (cx >= nbw && cx < nbw + nsw);
    }
    bool active(int cx, int cy) const { return body(cx, cy) || sleeve(cx, cy); }
};

Layout make_layout(double body_w, double body_h, double sleeve_w, double sleeve_h,
                   double resolution) {
    if (body_w <= 0 || body_h <= 0 || sleeve_w <= 0 || sleeve_h <= 0 || resolution <= 0)
        throw std::invalid_argument("build_surrogate_tshirt: extents and resolution must be > 0");
    Layout L;
    L.nbw = static_cast<int>(std::lround(body_w * resolution));
    L.nbh = static_cast<int>(std::lround(body_h * resolution));
    L.nsw = static_cast<int>(std::lround(sleeve_w * resolution));
    L.nsh = static_cast<int>(std::lround(sleeve_h * resolution));
    if (L.nbw < 8 || L.nbh < 8 || L.nsw < 3 || L.nsh < 3)
        throw std::invalid_argument(
            "build_surrogate_tshirt: degenerate extents (body needs >= 8 cells per edge, "
            "sleeves >= 3)");
    L.neck_w = 2 * std::max(1, static_cast<int>(std::lround(L.nbw / 6.0)));
    L.neck_d = std::max(1, static_cast<int>(std::lround(0.1 * L.nbh)));
    if (L.nbw - L.neck_w < 4)
        throw std::invalid_argument("build_surrogate_tshirt: neck cutout leaves no shoulders");
    L.grasp = std::max(1, static_cast<int>(std::lround(0.05 * resolution)));
    return L;
}

}  // namespace

ClothMesh build_surrogate_tshirt(double body_w, double body_h, double sleeve_w,
                                 double sleeve_h, double resolution, double density) {
    const Layout L = make_layout(body_w, body_h, sleeve_w, sleeve_h, resolution);
    const double h = 1.0 / resolution;

    ClothMesh mesh;
    mesh.cell_size = h;
    mesh.vertex_mass = density * h * h;

    // Vertices: lattice nodes touching at least one active cell.
    std::map<std::pair<int, int>, int> node_id;
    auto node_active = [&](int nx, int ny) {
        return L.active(nx, ny) || L.active(nx - 1, ny) || L.active(nx, ny - 1) ||
               L.active(nx - 1, ny - 1);
    };
    for (int ny = 0; ny <= L.nbh; ++ny)
        for (int nx = -L.nsw; nx <= L.nbw + L.nsw; ++nx)
            if (node_active(nx, ny)) {
                node_id[{nx, ny}] = static_cast<int>(mesh.vertices.size());
                mesh.vertices.push_back({nx * h, ny * h, 0.0});
            }

    // Faces (active cells) with labels.
    auto boundary = [&](int cx, int cy) {
        return !L.active(cx - 1, cy) || !L.active(cx + 1, cy) || !L.active(cx, cy - 1) ||
               !L.active(cx, cy + 1);
    };
    const int nx0 = (L.nbw - L.neck_w) / 2;
    for (int cy = 0; cy < L.nbh; ++cy) {
        for (int cx = -L.nsw; cx < L.nbw + L.nsw; ++cx) {
            if (!L.active(cx, cy)) continue;
            mesh.faces.push_back({node_id.at({cx, cy}), node_id.at({cx + 1, cy}),
                                  node_id.at({cx + 1, cy + 1}), node_id.at({cx, cy + 1})});
            FaceLabel label = FaceLabel::body;
            if (L.sleeve(cx, cy)) {
                if (boundary(cx, cy)) label = FaceLabel::middle_edge;  // cuff and sleeve rim
            } else if (boundary(cx, cy)) {
                const bool neck_ring = (cy == L.nbh - L.neck_d - 1 && cx >= nx0 &&
                                        cx < nx0 + L.neck_w) ||
                                       (cy >= L.nbh - L.neck_d &&
                                        (cx == nx0 - 1 || cx == nx0 + L.neck_w));
                if (cy == 0) label = FaceLabel::bottom_edge;  // hem
                else if (cy == L.nbh - 1 || neck_ring)
                    label = FaceLabel::top_edge;  // shoulder seam + neckline
                else
                    label = cy >= L.nbh / 2 ? FaceLabel::top_edge : FaceLabel::bottom_edge;
            }
            // grasp regions override: two shoulder corners, two hem corners
            const bool corner_col = (cx >= 0 && cx < L.grasp) ||
                                    (cx >= L.nbw - L.grasp && cx < L.nbw);
            if (corner_col && (cy < L.grasp || cy >= L.nbh - L.grasp))
                label = FaceLabel::grasp_point;
            mesh.face_labels.push_back(label);
        }
    }

    // Springs. Structural: active-cell edges. Shear: cell diagonals. Bend:
    // two-apart nodes bridging two collinear structural edges.
    std::set<std::pair<int, int>> seen;
    auto add_spring = [&](int a, int b, SpringClass cls) {
        if (a > b) std::swap(a, b);
        if (!seen.insert({a, b}).second) return;
        const double len = (mesh.vertices[static_cast<std::size_t>(a)] -
                            mesh.vertices[static_cast<std::size_t>(b)])
                               .norm();
        mesh.springs.push_back({a, b, len, cls});
    };
    auto has_node = [&](int nx, int ny) { return node_id.count({nx, ny}) != 0; };
    std::set<std::pair<int, int>> struct_edges;
    auto add_structural = [&](int ax, int ay, int bx, int by) {
        int a = node_id.at({ax, ay}), b = node_id.at({bx, by});
        add_spring(a, b, SpringClass::structural);
        if (a > b) std::swap(a, b);
        struct_edges.insert({a, b});
    };
    for (int cy = 0; cy < L.nbh; ++cy)
        for (int cx = -L.nsw; cx < L.nbw + L.nsw; ++cx) {
            if (!L.active(cx, cy)) continue;
            add_structural(cx, cy, cx + 1, cy);
            add_structural(cx, cy + 1, cx + 1, cy + 1);
            add_structural(cx, cy, cx, cy + 1);
            add_structural(cx + 1, cy, cx + 1, cy + 1);
            add_spring(node_id.at({cx, cy}), node_id.at({cx + 1, cy + 1}), SpringClass::shear);
            add_spring(node_id.at({cx + 1, cy}), node_id.at({cx, cy + 1}), SpringClass::shear);
        }
    auto has_struct = [&](int ax, int ay, int bx, int by) {
        if (!has_node(ax, ay) || !has_node(bx, by)) return false;
        int a = node_id.at({ax, ay}), b = node_id.at({bx, by});
        if (a > b) std::swap(a, b);
        return struct_edges.count({a, b}) != 0;
    };
    for (const auto& [key, id] : node_id) {
        const auto [nx, ny] = key;
        if (has_struct(nx, ny, nx + 1, ny) && has_struct(nx + 1, ny, nx + 2, ny))
            add_spring(id, node_id.at({nx + 2, ny}), SpringClass::bend);
        if (has_struct(nx, ny, nx, ny + 1) && has_struct(nx, ny + 1, nx, ny + 2))
            add_spring(id, node_id.at({nx, ny + 2}), SpringClass::bend);
    }
    return mesh;
}

void step(ClothState& state, const ClothMesh& mesh, const Stiffness& stiffness) {
    const double dt = state.time_step;
    const double inv_m = 1.0 / mesh.vertex_mass;
    const std::size_t n = state.positions.size();
    thread_local std::vector<Vec3> force;
    force.assign(n, Vec3{});

    for (const Spring& s : mesh.springs) {
        const Vec3 d = state.positions[static_cast<std::size_t>(s.j)] -
                       state.positions[static_cast<std::size_t>(s.i)];
        const double len = d.norm();
        if (len <= 0) continue;
        const Vec3 f = d * (stiffness.of(s.cls) * (len - s.rest_length) / len);
        force[static_cast<std::size_t>(s.i)] += f;
        force[static_cast<std::size_t>(s.j)] += f * -1.0;
    }

    const double keep = 1.0 - state.damping;
    double max_disp = 0;
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
        if (static_cast<int>(i) == state.pinned_vertex) {
            state.velocities[i] = {};
            continue;
        }
        Vec3 v = state.velocities[i] + (force[i] * inv_m + state.gravity) * dt;
        v = v * keep;
        state.positions[i] += v * dt;
        state.velocities[i] = v;
        const Vec3& p = state.positions[i];
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) finite = false;
        max_disp = std::max(max_disp, (v * dt).norm());
    }
    if (!finite)
        throw std::runtime_error("cloth simulation diverged (max displacement " +
                                 std::to_string(max_disp) + " m in one step)");
}

ClothState simulate_hang(const ClothMesh& mesh, int hang_vertex, double yaw, double pitch,
                         double roll, int steps, const SimParams& params) {
    if (hang_vertex < 0 || hang_vertex >= static_cast<int>(mesh.vertices.size()))
        throw std::invalid_argument("simulate_hang: hang vertex out of range");
    if (steps < 1) throw std::invalid_argument("simulate_hang: steps must be >= 1");
    if (params.substeps < 1) throw std::invalid_argument("simulate_hang: substeps must be >= 1");
    if (params.damping < 0 || params.damping >= 1)
        throw std::invalid_argument("simulate_hang: damping must be in [0,1)");

    ClothState state;
    state.pinned_vertex = hang_vertex;
    state.time_step = params.frame_dt / params.substeps;
    // per-substep damping compounds to the per-frame value
    state.damping = 1.0 - std::pow(1.0 - params.damping, 1.0 / params.substeps);
    state.gravity = params.gravity;

    const Mat3 rot = rotation_zyx(yaw, pitch, roll);
    const Vec3 pivot = mesh.vertices[static_cast<std::size_t>(hang_vertex)];
    state.positions.reserve(mesh.vertices.size());
    for (const Vec3& v : mesh.vertices) state.positions.push_back(rot * (v - pivot));
    state.velocities.assign(mesh.vertices.size(), Vec3{});

    for (int frame = 0; frame < steps; ++frame) {
        for (int sub = 0; sub < params.substeps; ++sub) {
            try {
                step(state, mesh, params.stiffness);
            } catch (const std::runtime_error& e) {
                throw std::runtime_error("simulate_hang: frame " + std::to_string(frame) +
                                         ": " + e.what());
            }
        }
    }
    const double ke_per_vertex =
        kinetic_energy(state, mesh) / static_cast<double>(mesh.vertices.size());
    state.not_at_rest_warning = ke_per_vertex > 1e-4;
    return state;
}

std::vector<HangConfig> sample_hang_configs(std::uint64_t seed, int count, int vertex_count) {
    if (count < 1) throw std::invalid_argument("sample_hang_configs: count must be >= 1");
    if (vertex_count < 1)
        throw std::invalid_argument("sample_hang_configs: vertex_count must be >= 1");
    constexpr double kPi = 3.14159265358979323846;
    std::vector<HangConfig> configs;
    configs.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, 0x68616e67ull /*hang*/, static_cast<std::uint64_t>(i)));
        HangConfig c;
        c.hang_vertex =
            static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(vertex_count)));
        c.yaw = rng.uniform(0.0, 2.0 * kPi);
        c.pitch = rng.uniform(-kPi / 6.0, kPi / 6.0);
        c.roll = rng.uniform(-kPi / 6.0, kPi / 6.0);
        configs.push_back(c);
    }
    return configs;
}

double kinetic_energy(const ClothState& state, const ClothMesh& mesh) {
    double e = 0;
    for (const Vec3& v : state.velocities) e += 0.5 * mesh.vertex_mass * v.dot(v);
    return e;
}

double mechanical_energy(const ClothState& state, const ClothMesh& mesh,
                         const Stiffness& stiffness) {
    double e = kinetic_energy(state, mesh);
    for (const Spring& s : mesh.springs) {
        const double len = (state.positions[static_cast<std::size_t>(s.j)] -
                            state.positions[static_cast<std::size_t>(s.i)])
                               .norm();
        const double stretch = len - s.rest_length;
        e += 0.5 * stiffness.of(s.cls) * stretch * stretch;
    }
    const double g = -state.gravity.z;
    for (const Vec3& p : state.positions) e += mesh.vertex_mass * g * p.z;
    return e;
}

void write_obj(const std::filesystem::path& path, const ClothMesh& mesh,
               const std::vector<Vec3>& positions) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_obj: cannot open " + path.string());
    for (const Vec3& p : positions) os << "v " << p.x << " " << p.y << " " << p.z << "\n";
    for (const auto& f : mesh.faces)
        os << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << " " << f[3] + 1 << "\n";
    std::ofstream ls(path.string() + ".labels");
    for (std::size_t i = 0; i < mesh.face_labels.size(); ++i)
        ls << i << " " << static_cast<int>(mesh.face_labels[i]) << "\n";
}

}  // namespace csda

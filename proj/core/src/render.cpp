#include "csda/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace csda {

namespace {

constexpr double kNearPlane = 1e-3;

struct ScreenVertex {
    double u, v;  // continuous pixel coordinates
    double inv_z;
};

}  // namespace

std::vector<LabeledTriangle> triangle_soup(const ClothState& state, const ClothMesh& mesh) {
    std::vector<LabeledTriangle> tris;
    tris.reserve(mesh.faces.size() * 2);
    for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
        const auto& f = mesh.faces[fi];
        const auto label = static_cast<std::uint8_t>(mesh.face_labels[fi]);
        const Vec3& p0 = state.positions[static_cast<std::size_t>(f[0])];
        const Vec3& p1 = state.positions[static_cast<std::size_t>(f[1])];
        const Vec3& p2 = state.positions[static_cast<std::size_t>(f[2])];
        const Vec3& p3 = state.positions[static_cast<std::size_t>(f[3])];
        tris.push_back({p0, p1, p2, label});
        tris.push_back({p0, p2, p3, label});
    }
    return tris;
}

DepthSample render_triangles(const std::vector<LabeledTriangle>& tris, const Camera& cam) {
    const Vec3 fwd = cam.forward();
    const Vec3 right = cam.right();
    const Vec3 down = cam.down();
    const double cx = cam.image_w / 2.0;
    const double cy = cam.image_h / 2.0;

    DepthSample out;
    out.width = cam.image_w;
    out.height = cam.image_h;
    out.depth.assign(static_cast<std::size_t>(cam.image_w) * cam.image_h, 0.0f);
    out.labels.assign(out.depth.size(), 0);
    std::vector<double> zbuf(out.depth.size(), std::numeric_limits<double>::infinity());

    for (const auto& tri : tris) {
        ScreenVertex sv[3];
        bool in_front = true;
        const Vec3* pts[3] = {&tri.a, &tri.b, &tri.c};
        for (int i = 0; i < 3; ++i) {
            const Vec3 q = *pts[i] - cam.position;
            const double z = q.dot(fwd);
            if (z < kNearPlane) {
                in_front = false;
                break;
            }
            sv[i] = {cx + cam.focal_px * q.dot(right) / z, cy + cam.focal_px * q.dot(down) / z,
                     1.0 / z};
        }
        if (!in_front) continue;  // cloth is always fully in front of the ring cameras

        const double area = (sv[1].u - sv[0].u) * (sv[2].v - sv[0].v) -
                            (sv[1].v - sv[0].v) * (sv[2].u - sv[0].u);
        if (area == 0.0) continue;

        const int min_x = std::max(0, static_cast<int>(std::floor(std::min({sv[0].u, sv[1].u, sv[2].u}) - 0.5)));
        const int max_x = std::min(cam.image_w - 1,
                                   static_cast<int>(std::ceil(std::max({sv[0].u, sv[1].u, sv[2].u}))));
        const int min_y = std::max(0, static_cast<int>(std::floor(std::min({sv[0].v, sv[1].v, sv[2].v}) - 0.5)));
        const int max_y = std::min(cam.image_h - 1,
                                   static_cast<int>(std::ceil(std::max({sv[0].v, sv[1].v, sv[2].v}))));

        const double inv_area = 1.0 / area;
        for (int py = min_y; py <= max_y; ++py) {
            const double vy = py + 0.5;
            for (int px = min_x; px <= max_x; ++px) {
                const double ux = px + 0.5;
                // signed edge functions; both orientations fill (cloth faces
                // are visible from either side)
                const double w0 = ((sv[1].u - ux) * (sv[2].v - vy) - (sv[1].v - vy) * (sv[2].u - ux)) * inv_area;
                const double w1 = ((sv[2].u - ux) * (sv[0].v - vy) - (sv[2].v - vy) * (sv[0].u - ux)) * inv_area;
                const double w2 = 1.0 - w0 - w1;
                if (w0 < 0 || w1 < 0 || w2 < 0) continue;
                const double inv_z = w0 * sv[0].inv_z + w1 * sv[1].inv_z + w2 * sv[2].inv_z;
                const double z = 1.0 / inv_z;
                const std::size_t idx = static_cast<std::size_t>(py) * cam.image_w + px;
                if (z < zbuf[idx]) {
                    zbuf[idx] = z;
                    out.depth[idx] = static_cast<float>(z);
                    out.labels[idx] = tri.label;
                }
            }
        }
    }
    return out;
}

DepthSample render(const ClothState& state, const ClothMesh& mesh, const Camera& cam) {
    Aabb box;
    for (const Vec3& p : state.positions) box.expand(p);
    if (box.contains(cam.position))
        throw std::invalid_argument("render: camera lies inside the cloth bounding box");
    return render_triangles(triangle_soup(state, mesh), cam);
}

}  // namespace csda

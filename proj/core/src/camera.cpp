#include "csda/camera.hpp"

#include <cmath>
#include <stdexcept>

namespace csda {

std::vector<Camera> camera_ring(const Vec3& center, double radius, int count, double focal_px,
                                int image_w, int image_h) {
    if (radius <= 0) throw std::invalid_argument("camera_ring: radius must be > 0");
    if (count < 1) throw std::invalid_argument("camera_ring: count must be >= 1");
    if (focal_px <= 0) throw std::invalid_argument("camera_ring: focal must be > 0");
    constexpr double kPi = 3.14159265358979323846;
    std::vector<Camera> ring;
    ring.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double angle = 2.0 * kPi * i / count;
        Camera cam;
        cam.position = center + Vec3{radius * std::cos(angle), radius * std::sin(angle), 0.0};
        cam.look_at = center;
        cam.up = {0, 0, 1};
        cam.focal_px = focal_px;
        cam.image_w = image_w;
        cam.image_h = image_h;
        ring.push_back(cam);
    }
    return ring;
}

}  // namespace csda

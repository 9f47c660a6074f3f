#pragma once

#include <vector>

#include "csda/geometry.hpp"

namespace csda {

// Pinhole camera. The principal point sits at the image centre; depth is
// measured along the view axis.
struct Camera {
    Vec3 position;
    Vec3 look_at;
    Vec3 up{0, 0, 1};
    double focal_px = 420.0;
    int image_w = 256;
    int image_h = 256;

    Vec3 forward() const { return (look_at - position).normalized(); }
    Vec3 right() const { return forward().cross(up).normalized(); }
    Vec3 down() const { return forward().cross(right()); }
};

// `count` cameras evenly spaced on a horizontal circle of the given radius,
// all looking at the centre.
std::vector<Camera> camera_ring(const Vec3& center, double radius = 1.2, int count = 36,
                                double focal_px = 420.0, int image_w = 256, int image_h = 256);

}  // namespace csda

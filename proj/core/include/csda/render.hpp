#pragma once

#include "csda/camera.hpp"
#include "csda/cloth.hpp"
#include "csda/depth_sample.hpp"

namespace csda {

// Z-buffer rasterization of the cloth into a depth/label pair. Quads split
// deterministically along the (0,2) diagonal; depth is the camera-space
// distance along the view axis, perspective-correct per pixel; the label of
// the nearest fragment wins. Throws if the camera sits inside the cloth's
// bounding box.
DepthSample render(const ClothState& state, const ClothMesh& mesh, const Camera& cam);

// Triangle soup variant shared by render() and test oracles.
struct LabeledTriangle {
    Vec3 a, b, c;
    std::uint8_t label = 1;
};

std::vector<LabeledTriangle> triangle_soup(const ClothState& state, const ClothMesh& mesh);
DepthSample render_triangles(const std::vector<LabeledTriangle>& tris, const Camera& cam);

}  // namespace csda

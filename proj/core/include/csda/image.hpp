#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "csda/depth_sample.hpp"
#include "csda/model.hpp"

namespace csda {

// Minimal self-contained PNG writer: 8-bit RGB, zlib stream with stored
// (uncompressed) deflate blocks. No external codec dependency.
void write_png(const std::filesystem::path& path, const std::vector<std::uint8_t>& rgb,
               int width, int height);

// Class palette: background black, body green, edges blue, grasp red.
std::array<std::uint8_t, 3> class_color(std::uint8_t cls);

// Depth raster to grayscale RGB (foreground min..max mapped to 40..255).
std::vector<std::uint8_t> depth_to_rgb(const DepthSample& sample);
std::vector<std::uint8_t> labels_to_rgb(const std::vector<std::uint8_t>& labels);

// Side-by-side composite: depth | ground-truth labels | predicted labels,
// with the most confident grasp prediction drawn as a red dot on the right
// panel. Output is 3W x H.
std::vector<std::uint8_t> compose_viz(const DepthSample& sample,
                                      const std::vector<std::uint8_t>& predicted_labels,
                                      const GraspPrediction& grasp);

}  // namespace csda

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace csda {

enum class Domain : std::uint8_t { synthetic = 0, surrogate_real = 1 };

const char* domain_name(Domain d);
Domain domain_from_name(const std::string& name);

// One rendered view: depth raster in meters (0 = background) with an aligned
// class-label raster (0 = background, 1..5 = cloth classes) and provenance
// metadata. Serialized as ".dsmp": magic "DSMP", version, extents, domain,
// meta block, raw little-endian float32 depths, label bytes.
struct DepthSample {
    int width = 0;
    int height = 0;
    Domain domain = Domain::synthetic;
    std::uint32_t hang_id = 0;
    std::uint16_t camera_index = 0;
    std::uint64_t seed = 0;
    std::vector<float> depth;
    std::vector<std::uint8_t> labels;

    float& depth_at(int row, int col) { return depth[static_cast<std::size_t>(row) * width + col]; }
    float depth_at(int row, int col) const {
        return depth[static_cast<std::size_t>(row) * width + col];
    }
    std::uint8_t& label_at(int row, int col) {
        return labels[static_cast<std::size_t>(row) * width + col];
    }
    std::uint8_t label_at(int row, int col) const {
        return labels[static_cast<std::size_t>(row) * width + col];
    }
    std::size_t foreground_count() const;
};

inline constexpr std::uint32_t kDsmpVersion = 1;

void save_dsmp(const std::filesystem::path& path, const DepthSample& sample);
DepthSample load_dsmp(const std::filesystem::path& path);

// Dataset manifest: one line per sample, "path<TAB>domain<TAB>split".
struct ManifestEntry {
    std::string path;  // relative to the manifest's directory
    Domain domain = Domain::synthetic;
    std::string split;  // train | test
};

void save_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

}  // namespace csda

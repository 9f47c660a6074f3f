#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "csda/depth_sample.hpp"

namespace csda {

inline constexpr int kClassCount = 6;  // background + 5 cloth classes

// Foreground depths mapped linearly to [0,1]; background stays 0; labels
// untouched. Constant-depth foreground maps to 0.5. Rejects all-background
// samples.
DepthSample minmax_normalize(const DepthSample& sample);

// Mean 2x2 covariance of foreground pixel (row, col) coordinates, averaged
// per image over the dataset.
std::array<double, 4> mean_foreground_covariance(const std::vector<DepthSample>& samples);

// sqrt-eigenvalue ratios (vertical, horizontal) that scale the synthetic
// dataset toward the reference ("real") dataset shape. Eigenvalues are taken
// in descending order on both sides.
std::pair<double, double> covariance_scale_factors(const std::vector<DepthSample>& synthetic,
                                                   const std::vector<DepthSample>& reference);

// Anisotropic scaling about the foreground centroid with nearest-neighbour
// resampling of both rasters onto the same canvas. Rejects scale factors
// that leave fewer than 10 foreground pixels.
DepthSample rescale(const DepthSample& sample, double s_vertical, double s_horizontal);

// The individual raster transforms. Depth and labels move together;
// labels resample nearest-neighbour so no class is ever invented.
DepthSample hflip_sample(const DepthSample& sample);
DepthSample rotate_sample(const DepthSample& sample, double theta_deg);
// Crops a scale*H x scale*W window anchored at (row0, col0) and resizes it
// back onto the full canvas.
DepthSample crop_resize_sample(const DepthSample& sample, double scale, int row0, int col0);

struct AugmentOps {
    bool hflip = true;
    bool rotate = true;       // theta in [-15, 15] degrees
    bool crop_resize = true;  // scale in [0.85, 1.0]
};

// Seeded flip/rotate/crop augmentation applied identically to depth and
// labels. A crop that removes all foreground is retried with a fresh
// sub-seed, at most 5 times.
DepthSample augment(const DepthSample& sample, const AugmentOps& ops, std::uint64_t seed);

// Inverse-frequency class weights w_c = N_total / (C * N_c) over classes
// 1..C-1 (plus background 0), normalized to mean 1. Errors name an absent
// class.
std::vector<double> class_weights(const std::vector<std::int64_t>& class_pixel_counts);

// Whole hang configurations go to train or test, never split across both.
struct SplitAssignment {
    std::vector<int> train_configs;
    std::vector<int> test_configs;
};
SplitAssignment make_splits(const std::vector<int>& hang_config_ids, double test_fraction,
                            std::uint64_t seed);

// A manifest-backed dataset held in memory. Label rasters are surrendered
// only through labels_of(), which counts accesses per domain so training
// regimes can prove they never read real-domain annotations.
class Dataset {
public:
    Dataset() = default;
    static Dataset load(const std::filesystem::path& manifest_path, const std::string& split);

    void add(DepthSample sample);

    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }
    const DepthSample& sample(std::size_t i) const { return samples_[i]; }
    // Depth raster access never touches labels.
    const std::vector<float>& depth_of(std::size_t i) const { return samples_[i].depth; }
    const std::vector<std::uint8_t>& labels_of(std::size_t i) const;
    Domain domain_of(std::size_t i) const { return samples_[i].domain; }

    std::vector<DepthSample>& samples() { return samples_; }
    const std::vector<DepthSample>& samples() const { return samples_; }

    std::int64_t label_reads(Domain d) const {
        return label_reads_[static_cast<std::size_t>(d)];
    }
    void reset_label_audit() { label_reads_ = {0, 0}; }

    // Per-class pixel counts over the whole set (reads labels and counts as
    // label accesses).
    std::vector<std::int64_t> class_pixel_counts() const;

private:
    std::vector<DepthSample> samples_;
    mutable std::array<std::int64_t, 2> label_reads_{0, 0};
};

}  // namespace csda

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "csda/tensor.hpp"

namespace csda {

// --- differentiable losses ---

// Weighted soft IoU loss over softmax output and a one-hot ground truth,
// both [N,C,H,W]: per class soft IoU_c = sum(p*g) / sum(p + g - p*g), loss =
// 1 - sum_c (w_c / sum w) IoU_c, averaged over the batch. Rejects ground
// truth whose channel columns are not exactly one-hot.
template <class T>
Tensor<T> soft_iou_loss(Tape<T>& tape, const Tensor<T>& pred, const Tensor<T>& gt_onehot,
                        const std::vector<double>& class_weights);

// Binary cross-entropy averaged over discriminators and batch items;
// probabilities clamped to [1e-7, 1-1e-7]. domains: 1 = real per item.
template <class T>
Tensor<T> da_loss(Tape<T>& tape, const std::vector<Tensor<T>>& domain_probs,
                  const std::vector<int>& domains);

// alpha * l_seg + l_da; l_seg may be absent (real-domain items).
template <class T>
Tensor<T> total_loss(Tape<T>& tape, const Tensor<T>* l_seg, const Tensor<T>& l_da, T alpha);

// Mean squared error between [N,2] predictions and targets.
template <class T>
Tensor<T> mse_loss(Tape<T>& tape, const Tensor<T>& pred, const Tensor<T>& target);

// Builds the one-hot [N,C,H,W] tensor from label rasters.
template <class T>
Tensor<T> one_hot_labels(const std::vector<const std::vector<std::uint8_t>*>& rasters,
                         int height, int width, int classes);

// --- evaluation metrics (plain functions on rasters) ---

// |pred_c ∩ gt_c| / |pred_c ∪ gt_c|; 1.0 when both sets are empty.
double iou_metric(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt,
                  std::uint8_t cls);

struct PixelPoint {
    int row = 0;
    int col = 0;
};

// Euclidean distance from the prediction to the nearest ground-truth point,
// in pixels and centimeters. The ground-truth set must be non-empty.
std::pair<double, double> gp_distance(PixelPoint pred, const std::vector<PixelPoint>& gt_points,
                                      double cm_per_px);

// Centre baseline: foreground centroid snapped to the nearest foreground
// pixel. Random baseline: uniform draw over foreground pixels.
PixelPoint centre_baseline(const std::vector<std::uint8_t>& labels, int height, int width);
PixelPoint random_baseline(const std::vector<std::uint8_t>& labels, int height, int width,
                           std::uint64_t seed);

// --- evaluation report ---

enum class EvalMode { merged_edges, fine_grained };

struct EvalReport {
    std::string regime;
    double background_iou = 0, body_iou = 0;
    double top_iou = 0, middle_iou = 0, bottom_iou = 0;  // fine_grained mode
    double edges_iou = 0;                                // merged_edges mode
    EvalMode mode = EvalMode::merged_edges;
    double gp_px = 0, gp_cm = 0;
    std::int64_t n = 0;  // samples contributing to the GP average

    static const char* csv_header();
    std::string csv_row() const;
};

}  // namespace csda

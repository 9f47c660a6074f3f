#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "csda/checkpoint.hpp"
#include "csda/ops.hpp"

namespace csda {

// Ordered named parameter collection. Construction order is the checkpoint
// block order and the optimizer slot order, so runs are reproducible.
template <class T>
class ParamStore {
public:
    void add(std::string name, Tensor<T> t) {
        params_.emplace_back(std::move(name), std::move(t));
    }
    std::size_t size() const { return params_.size(); }
    const std::string& name(std::size_t i) const { return params_[i].first; }
    Tensor<T>& tensor(std::size_t i) { return params_[i].second; }
    const Tensor<T>& tensor(std::size_t i) const { return params_[i].second; }
    Tensor<T>* find(const std::string& name) {
        for (auto& [n, t] : params_)
            if (n == name) return &t;
        return nullptr;
    }
    std::int64_t parameter_count() const {
        std::int64_t n = 0;
        for (const auto& [_, t] : params_) n += t.numel();
        return n;
    }
    void zero_grads() {
        for (auto& [_, t] : params_) t.zero_grad();
    }

private:
    std::vector<std::pair<std::string, Tensor<T>>> params_;
};

struct ModelMeta {
    int classes = 6;
    std::array<int, 5> widths{16, 32, 64, 128, 256};
    double cov_scale_v = 1.0;  // covariance rescale applied to synthetic inputs
    double cov_scale_h = 1.0;
    std::uint64_t config_hash = 0;
};

struct GraspPrediction {
    int row = 0;
    int col = 0;
    double confidence = 0.0;
};

// U-Net segmenter (four encoder blocks, bottleneck, four decoder blocks with
// skip connections, 1x1 head with channelwise softmax) plus one small domain
// discriminator per encoder block behind a shared gradient-reversal
// coefficient.
template <class T>
class SegModel {
public:
    static constexpr int kEncoderBlocks = 4;
    static constexpr int kDiscChannels = 32;

    SegModel() = default;
    // Fan-in uniform initialization, biases zero, deterministic under seed.
    static SegModel build(int classes, const std::array<int, 5>& widths, std::uint64_t seed);

    struct SegForward {
        Tensor<T> probs;  // [N,C,H,W], softmax over C
        std::array<Tensor<T>, kEncoderBlocks> encoder_features;  // post-pool maps
    };

    // Full pass; H and W must be divisible by 16.
    SegForward forward_segment(Tape<T>& tape, const Tensor<T>& x) const;
    // Encoder side only (what the domain branch needs for unlabeled items).
    std::array<Tensor<T>, kEncoderBlocks> forward_encoder(Tape<T>& tape,
                                                          const Tensor<T>& x) const;
    // Per-block domain probabilities, shape [N,1] each, gradient reversed
    // into the encoder with the given lambda.
    std::array<Tensor<T>, kEncoderBlocks> forward_domain(
        Tape<T>& tape, const std::array<Tensor<T>, kEncoderBlocks>& features, T lambda) const;

    ParamStore<T>& params() { return params_; }
    const ParamStore<T>& params() const { return params_; }
    std::int64_t parameter_count() const { return params_.parameter_count(); }

    ModelMeta& meta() { return meta_; }
    const ModelMeta& meta() const { return meta_; }

    void save(const std::filesystem::path& path) const;
    static SegModel load(const std::filesystem::path& path);

private:
    ParamStore<T> params_;
    ModelMeta meta_;

    struct ConvRef {
        Tensor<T>*weight, *bias;
    };
    ConvRef conv_ref(const std::string& name) const;
};

// Arg-max pixel of the grasp_point channel per batch item, row-major
// tie-break, with its probability.
template <class T>
std::vector<GraspPrediction> predict_grasp_point(const Tensor<T>& seg_probs);

// Coordinate-regression baseline: the same encoder trunk, global average
// pooling and a twoway head squashed to image bounds.
template <class T>
class GraspRegressor {
public:
    static GraspRegressor build(const std::array<int, 5>& widths, std::uint64_t seed);
    // -> [N,2] (row, col), each bounded to [0, extent-1] by a sigmoid.
    Tensor<T> forward(Tape<T>& tape, const Tensor<T>& x) const;
    ParamStore<T>& params() { return params_; }

private:
    ParamStore<T> params_;
    std::array<int, 5> widths_{};
};

extern template class SegModel<float>;
extern template class SegModel<double>;
extern template class GraspRegressor<float>;
extern template class GraspRegressor<double>;
extern template std::vector<GraspPrediction> predict_grasp_point(const Tensor<float>&);
extern template std::vector<GraspPrediction> predict_grasp_point(const Tensor<double>&);

}  // namespace csda

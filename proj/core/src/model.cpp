#include "csda/model.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

#include "csda/rng.hpp"

namespace csda {

namespace {

template <class T>
Tensor<T> init_conv(int cout, int cin, int k, Rng& rng) {
    const double bound = std::sqrt(6.0 / (cin * k * k));
    return Tensor<T>::uniform({cout, cin, k, k}, static_cast<T>(bound), rng, true);
}

template <class T>
Tensor<T> init_linear(int out, int in, Rng& rng) {
    const double bound = std::sqrt(6.0 / in);
    return Tensor<T>::uniform({out, in}, static_cast<T>(bound), rng, true);
}

}  // namespace

template <class T>
SegModel<T> SegModel<T>::build(int classes, const std::array<int, 5>& widths,
                               std::uint64_t seed) {
    if (classes < 2) throw std::invalid_argument("SegModel: need at least 2 classes");
    for (int w : widths)
        if (w < 1) throw std::invalid_argument("SegModel: widths must be positive");

    SegModel m;
    m.meta_.classes = classes;
    m.meta_.widths = widths;
    Rng rng(derive_seed(seed, 0x6d6f64656cull /*model*/));

    auto add_conv = [&](const std::string& name, int cout, int cin, int k) {
        m.params_.add(name + ".weight", init_conv<T>(cout, cin, k, rng));
        m.params_.add(name + ".bias", Tensor<T>::zeros({cout}, true));
    };

    int prev = 1;
    for (int b = 0; b < kEncoderBlocks; ++b) {
        const int w = widths[static_cast<std::size_t>(b)];
        add_conv("enc" + std::to_string(b + 1) + ".conv1", w, prev, 3);
        add_conv("enc" + std::to_string(b + 1) + ".conv2", w, w, 3);
        prev = w;
    }
    add_conv("bottleneck.conv1", widths[4], widths[3], 3);
    add_conv("bottleneck.conv2", widths[4], widths[4], 3);
    prev = widths[4];
    for (int b = kEncoderBlocks - 1; b >= 0; --b) {
        const int w = widths[static_cast<std::size_t>(b)];
        add_conv("dec" + std::to_string(b + 1) + ".conv1", w, prev + w, 3);
        add_conv("dec" + std::to_string(b + 1) + ".conv2", w, w, 3);
        prev = w;
    }
    add_conv("head", classes, widths[0], 1);

    for (int b = 0; b < kEncoderBlocks; ++b) {
        const std::string d = "disc" + std::to_string(b + 1);
        add_conv(d + ".conv", kDiscChannels, widths[static_cast<std::size_t>(b)], 3);
        m.params_.add(d + ".fc.weight", init_linear<T>(1, kDiscChannels, rng));
        m.params_.add(d + ".fc.bias", Tensor<T>::zeros({1}, true));
    }
    return m;
}

template <class T>
typename SegModel<T>::ConvRef SegModel<T>::conv_ref(const std::string& name) const {
    auto* self = const_cast<SegModel<T>*>(this);
    Tensor<T>* w = self->params_.find(name + ".weight");
    Tensor<T>* b = self->params_.find(name + ".bias");
    if (!w || !b) throw std::logic_error("SegModel: missing parameter " + name);
    return {w, b};
}

template <class T>
std::array<Tensor<T>, SegModel<T>::kEncoderBlocks> SegModel<T>::forward_encoder(
    Tape<T>& tape, const Tensor<T>& x) const {
    std::array<Tensor<T>, kEncoderBlocks> feats;
    Tensor<T> cur = x;
    for (int b = 0; b < kEncoderBlocks; ++b) {
        const std::string n = "enc" + std::to_string(b + 1);
        auto c1 = conv_ref(n + ".conv1");
        auto c2 = conv_ref(n + ".conv2");
        cur = conv2d_relu(tape, cur, *c1.weight, *c1.bias, 1, 1);
        cur = conv2d_relu(tape, cur, *c2.weight, *c2.bias, 1, 1);
        cur = max_pool_2x2(tape, cur);
        feats[static_cast<std::size_t>(b)] = cur;
    }
    return feats;
}

template <class T>
typename SegModel<T>::SegForward SegModel<T>::forward_segment(Tape<T>& tape,
                                                              const Tensor<T>& x) const {
    if (x.rank() != 4 || x.dim(1) != 1)
        throw std::invalid_argument("forward_segment: expected [N,1,H,W], got " +
                                    shape_str(x.shape()));
    const int h = x.dim(2), w = x.dim(3);
    if (h % 16 != 0 || w % 16 != 0) {
        const int ph = (h + 15) / 16 * 16, pw = (w + 15) / 16 * 16;
        throw std::invalid_argument(
            "forward_segment: H and W must be divisible by 16; input " + std::to_string(h) +
            "x" + std::to_string(w) + " requires padding to " + std::to_string(ph) + "x" +
            std::to_string(pw));
    }

    SegForward out;
    Tensor<T> cur = x;
    std::array<Tensor<T>, kEncoderBlocks> skips;
    for (int b = 0; b < kEncoderBlocks; ++b) {
        const std::string n = "enc" + std::to_string(b + 1);
        auto c1 = conv_ref(n + ".conv1");
        auto c2 = conv_ref(n + ".conv2");
        cur = conv2d_relu(tape, cur, *c1.weight, *c1.bias, 1, 1);
        cur = conv2d_relu(tape, cur, *c2.weight, *c2.bias, 1, 1);
        skips[static_cast<std::size_t>(b)] = cur;  // pre-pool, feeds the decoder
        cur = max_pool_2x2(tape, cur);
        out.encoder_features[static_cast<std::size_t>(b)] = cur;  // post-pool, feeds DA
    }
    {
        auto c1 = conv_ref("bottleneck.conv1");
        auto c2 = conv_ref("bottleneck.conv2");
        cur = conv2d_relu(tape, cur, *c1.weight, *c1.bias, 1, 1);
        cur = conv2d_relu(tape, cur, *c2.weight, *c2.bias, 1, 1);
    }
    for (int b = kEncoderBlocks - 1; b >= 0; --b) {
        const std::string n = "dec" + std::to_string(b + 1);
        auto c1 = conv_ref(n + ".conv1");
        auto c2 = conv_ref(n + ".conv2");
        cur = upsample_nearest_2x(tape, cur);
        cur = concat_channels(tape, cur, skips[static_cast<std::size_t>(b)]);
        cur = conv2d_relu(tape, cur, *c1.weight, *c1.bias, 1, 1);
        cur = conv2d_relu(tape, cur, *c2.weight, *c2.bias, 1, 1);
    }
    auto head = conv_ref("head");
    out.probs = softmax_channelwise(tape, conv2d(tape, cur, *head.weight, *head.bias, 1, 0));
    return out;
}

template <class T>
std::array<Tensor<T>, SegModel<T>::kEncoderBlocks> SegModel<T>::forward_domain(
    Tape<T>& tape, const std::array<Tensor<T>, kEncoderBlocks>& features, T lambda) const {
    std::array<Tensor<T>, kEncoderBlocks> probs;
    for (int b = 0; b < kEncoderBlocks; ++b) {
        const std::string d = "disc" + std::to_string(b + 1);
        auto cv = conv_ref(d + ".conv");
        auto* fw = const_cast<SegModel<T>*>(this)->params_.find(d + ".fc.weight");
        auto* fb = const_cast<SegModel<T>*>(this)->params_.find(d + ".fc.bias");
        const Tensor<T>& f = features[static_cast<std::size_t>(b)];
        if (f.rank() != 4 ||
            f.dim(1) != meta_.widths[static_cast<std::size_t>(b)])
            throw std::invalid_argument("forward_domain: feature " + std::to_string(b) +
                                        " has shape " + shape_str(f.shape()) +
                                        ", expected channels " +
                                        std::to_string(meta_.widths[static_cast<std::size_t>(b)]));
        Tensor<T> t = grad_reverse(tape, f, lambda);
        t = conv2d_relu(tape, t, *cv.weight, *cv.bias, 2, 1);
        t = global_avg_pool(tape, t);
        t = linear(tape, t, *fw, *fb);
        probs[static_cast<std::size_t>(b)] = sigmoid(tape, t);
    }
    return probs;
}

namespace {

constexpr const char* kMetaBlock = "__meta__";

}  // namespace

template <class T>
void SegModel<T>::save(const std::filesystem::path& path) const {
    std::vector<CheckpointBlock> blocks;
    blocks.reserve(params_.size() + 1);
    CheckpointBlock meta;
    meta.name = kMetaBlock;
    meta.shape = {10};
    meta.data = {static_cast<double>(kCheckpointVersion),
                 static_cast<double>(meta_.classes),
                 static_cast<double>(meta_.widths[0]),
                 static_cast<double>(meta_.widths[1]),
                 static_cast<double>(meta_.widths[2]),
                 static_cast<double>(meta_.widths[3]),
                 static_cast<double>(meta_.widths[4]),
                 meta_.cov_scale_v,
                 meta_.cov_scale_h,
                 std::bit_cast<double>(meta_.config_hash)};
    blocks.push_back(std::move(meta));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto& t = params_.tensor(i);
        CheckpointBlock b;
        b.name = params_.name(i);
        b.shape = t.shape();
        b.data.assign(t.values().begin(), t.values().end());
        blocks.push_back(std::move(b));
    }
    save_checkpoint(path, blocks);
}

template <class T>
SegModel<T> SegModel<T>::load(const std::filesystem::path& path) {
    const auto blocks = load_checkpoint(path);
    if (blocks.empty() || blocks[0].name != kMetaBlock || blocks[0].data.size() != 10)
        throw std::runtime_error("SegModel::load: missing metadata block in " + path.string());
    const auto& md = blocks[0].data;
    const int classes = static_cast<int>(md[1]);
    const std::array<int, 5> widths = {static_cast<int>(md[2]), static_cast<int>(md[3]),
                                       static_cast<int>(md[4]), static_cast<int>(md[5]),
                                       static_cast<int>(md[6])};
    SegModel m = build(classes, widths, 0);
    m.meta_.cov_scale_v = md[7];
    m.meta_.cov_scale_h = md[8];
    m.meta_.config_hash = std::bit_cast<std::uint64_t>(md[9]);
    if (blocks.size() - 1 != m.params_.size())
        throw std::runtime_error("SegModel::load: parameter block count mismatch");
    for (std::size_t i = 0; i < m.params_.size(); ++i) {
        const auto& b = blocks[i + 1];
        auto& t = m.params_.tensor(i);
        if (b.name != m.params_.name(i) || b.shape != t.shape())
            throw std::runtime_error("SegModel::load: block '" + b.name +
                                     "' does not match parameter '" + m.params_.name(i) +
                                     "' " + shape_str(t.shape()));
        for (std::size_t k = 0; k < b.data.size(); ++k)
            t.data()[k] = static_cast<T>(b.data[k]);
    }
    return m;
}

template <class T>
std::vector<GraspPrediction> predict_grasp_point(const Tensor<T>& seg_probs) {
    if (seg_probs.rank() != 4)
        throw std::invalid_argument("predict_grasp_point: expected [N,C,H,W]");
    const int n = seg_probs.dim(0), c = seg_probs.dim(1), h = seg_probs.dim(2),
              w = seg_probs.dim(3);
    const int grasp = c - 1;  // grasp_point is the last class in the palette
    std::vector<GraspPrediction> out;
    out.reserve(static_cast<std::size_t>(n));
    const T* p = seg_probs.data();
    for (int in = 0; in < n; ++in) {
        const T* plane = p + (static_cast<std::int64_t>(in) * c + grasp) * h * w;
        GraspPrediction best{0, 0, static_cast<double>(plane[0])};
        for (int r = 0; r < h; ++r)
            for (int col = 0; col < w; ++col) {
                const double v = plane[r * w + col];
                if (v > best.confidence) best = {r, col, v};
            }
        out.push_back(best);
    }
    return out;
}

template <class T>
GraspRegressor<T> GraspRegressor<T>::build(const std::array<int, 5>& widths,
                                           std::uint64_t seed) {
    GraspRegressor m;
    m.widths_ = widths;
    Rng rng(derive_seed(seed, 0x72656772ull /*regr*/));
    auto add_conv = [&](const std::string& name, int cout, int cin, int k) {
        m.params_.add(name + ".weight", init_conv<T>(cout, cin, k, rng));
        m.params_.add(name + ".bias", Tensor<T>::zeros({cout}, true));
    };
    int prev = 1;
    for (int b = 0; b < 4; ++b) {
        const int w = widths[static_cast<std::size_t>(b)];
        add_conv("enc" + std::to_string(b + 1) + ".conv1", w, prev, 3);
        add_conv("enc" + std::to_string(b + 1) + ".conv2", w, w, 3);
        prev = w;
    }
    add_conv("bottleneck.conv1", widths[4], widths[3], 3);
    add_conv("bottleneck.conv2", widths[4], widths[4], 3);
    m.params_.add("head.weight", init_linear<T>(2, widths[4], rng));
    m.params_.add("head.bias", Tensor<T>::zeros({2}, true));
    return m;
}

template <class T>
Tensor<T> GraspRegressor<T>::forward(Tape<T>& tape, const Tensor<T>& x) const {
    auto* self = const_cast<GraspRegressor<T>*>(this);
    const int h = x.dim(2), w = x.dim(3);
    Tensor<T> cur = x;
    for (int b = 0; b < 4; ++b) {
        const std::string n = "enc" + std::to_string(b + 1);
        cur = conv2d_relu(tape, cur, *self->params_.find(n + ".conv1.weight"),
                          *self->params_.find(n + ".conv1.bias"), 1, 1);
        cur = conv2d_relu(tape, cur, *self->params_.find(n + ".conv2.weight"),
                          *self->params_.find(n + ".conv2.bias"), 1, 1);
        cur = max_pool_2x2(tape, cur);
    }
    cur = conv2d_relu(tape, cur, *self->params_.find("bottleneck.conv1.weight"),
                      *self->params_.find("bottleneck.conv1.bias"), 1, 1);
    cur = conv2d_relu(tape, cur, *self->params_.find("bottleneck.conv2.weight"),
                      *self->params_.find("bottleneck.conv2.bias"), 1, 1);
    cur = global_avg_pool(tape, cur);
    cur = linear(tape, cur, *self->params_.find("head.weight"),
                 *self->params_.find("head.bias"));
    cur = sigmoid(tape, cur);
    // scale rows by H-1, cols by W-1: coordinates always inside the image
    auto bounds = Tensor<T>::zeros({x.dim(0), 2});
    for (int i = 0; i < x.dim(0); ++i) {
        bounds.data()[i * 2] = static_cast<T>(h - 1);
        bounds.data()[i * 2 + 1] = static_cast<T>(w - 1);
    }
    return mul(tape, cur, bounds);
}

template class SegModel<float>;
template class SegModel<double>;
template class GraspRegressor<float>;
template class GraspRegressor<double>;
template std::vector<GraspPrediction> predict_grasp_point(const Tensor<float>&);
template std::vector<GraspPrediction> predict_grasp_point(const Tensor<double>&);

}  // namespace csda

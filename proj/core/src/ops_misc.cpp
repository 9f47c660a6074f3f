#include <algorithm>
#include <cmath>

#include "csda/ops.hpp"

namespace csda {

namespace {

template <class T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <class T>
void check_rank4(const Tensor<T>& a, const char* op) {
    if (a.rank() != 4)
        throw std::invalid_argument(std::string(op) + ": expected [N,C,H,W], got " +
                                    shape_str(a.shape()));
}

}  // namespace

template <class T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "add");
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
    if (tape.recording() && (a.needs_grad() || b.needs_grad())) {
        out.mark_needs_grad();
        tape.record([a = a, b = b, out = out]() mutable {
            auto og = out.grad();
            if (a.needs_grad()) {
                auto ga = a.grad();
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += og[i];
            }
            if (b.needs_grad()) {
                auto gb = b.grad();
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += og[i];
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "sub");
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
    if (tape.recording() && (a.needs_grad() || b.needs_grad())) {
        out.mark_needs_grad();
        tape.record([a = a, b = b, out = out]() mutable {
            auto og = out.grad();
            if (a.needs_grad()) {
                auto ga = a.grad();
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += og[i];
            }
            if (b.needs_grad()) {
                auto gb = b.grad();
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= og[i];
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "mul");
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
    if (tape.recording() && (a.needs_grad() || b.needs_grad())) {
        out.mark_needs_grad();
        tape.record([a = a, b = b, out = out]() mutable {
            auto og = out.grad();
            if (a.needs_grad()) {
                auto ga = a.grad();
                const T* pb2 = b.data();
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += og[i] * pb2[i];
            }
            if (b.needs_grad()) {
                auto gb = b.grad();
                const T* pa2 = a.data();
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += og[i] * pa2[i];
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, T factor) {
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    const T* pa = a.data();
    T* po = out.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] * factor;
    if (tape.recording() && a.needs_grad()) {
        out.mark_needs_grad();
        tape.record([a = a, out = out, factor]() mutable {
            auto og = out.grad();
            auto ga = a.grad();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += og[i] * factor;
        });
    }
    return out;
}

template <class T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& a) {
    Tensor<T> out = Tensor<T>::zeros({});
    T acc = 0;
    const T* pa = a.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) acc += pa[i];
    out.data()[0] = acc;
    if (tape.recording() && a.needs_grad()) {
        out.mark_needs_grad();
        tape.record([a = a, out = out]() mutable {
            const T g = out.grad()[0];
            auto ga = a.grad();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
        });
    }
    return out;
}

template <class T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& a) {
    Tensor<T> s = sum(tape, a);
    return scale(tape, s, static_cast<T>(1.0 / static_cast<double>(a.numel())));
}

template <class T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& a) {
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    const T* pa = a.data();
    T* po = out.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] > T(0) ? pa[i] : T(0);
    if (tape.recording() && a.needs_grad()) {
        out.mark_needs_grad();
        tape.record([a = a, out = out]() mutable {
            auto og = out.grad();
            auto ga = a.grad();
            const T* pa2 = a.data();
            for (std::size_t i = 0; i < ga.size(); ++i)
                if (pa2[i] > T(0)) ga[i] += og[i];
        });
    }
    return out;
}

template <class T>
Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& a) {
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    const T* pa = a.data();
    T* po = out.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) po[i] = T(1) / (T(1) + std::exp(-pa[i]));
    if (tape.recording() && a.needs_grad()) {
        out.mark_needs_grad();
        tape.record([a = a, out = out]() mutable {
            auto og = out.grad();
            auto ga = a.grad();
            const T* po2 = out.data();
            for (std::size_t i = 0; i < ga.size(); ++i)
                ga[i] += og[i] * po2[i] * (T(1) - po2[i]);
        });
    }
    return out;
}

template <class T>
Tensor<T> softmax_channelwise(Tape<T>& tape, const Tensor<T>& a) {
    check_rank4(a, "softmax_channelwise");
    const int n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
    const std::int64_t hw = static_cast<std::int64_t>(h) * w;
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    const T* pa = a.data();
    T* po = out.data();
    for (int in = 0; in < n; ++in) {
        const std::int64_t base = static_cast<std::int64_t>(in) * c * hw;
        for (std::int64_t px = 0; px < hw; ++px) {
            T mx = pa[base + px];
            for (int ic = 1; ic < c; ++ic) mx = std::max(mx, pa[base + ic * hw + px]);
            T denom = 0;
            for (int ic = 0; ic < c; ++ic) {
                const T e = std::exp(pa[base + ic * hw + px] - mx);
                po[base + ic * hw + px] = e;
                denom += e;
            }
            const T inv = T(1) / denom;
            for (int ic = 0; ic < c; ++ic) po[base + ic * hw + px] *= inv;
        }
    }
    if (tape.recording() && a.needs_grad()) {
        out.mark_needs_grad();
        tape.record([a = a, out = out, n, c, hw]() mutable {
            auto og = out.grad();
            auto ga = a.grad();
            const T* po2 = out.data();
            for (int in = 0; in < n; ++in) {
                const std::int64_t base = static_cast<std::int64_t>(in) * c * hw;
                for (std::int64_t px = 0; px < hw; ++px) {
                    T dot = 0;
                    for (int ic = 0; ic < c; ++ic) {
                        const std::int64_t idx = base + ic * hw + px;
                        dot += po2[idx] * og[idx];
                    }
                    for (int ic = 0; ic < c; ++ic) {
                        const std::int64_t idx = base + ic * hw + px;
                        ga[idx] += po2[idx] * (og[idx] - dot);
                    }
                }
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> concat_channels(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    check_rank4(a, "concat_channels");
    check_rank4(b, "concat_channels");
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
        throw std::invalid_argument("concat_channels: batch/spatial mismatch " +
                                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1), h = a.dim(2), w = a.dim(3);
    const std::int64_t hw = static_cast<std::int64_t>(h) * w;
    Tensor<T> out = Tensor<T>::zeros({n, ca + cb, h, w});
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    for (int in = 0; in < n; ++in) {
        std::copy_n(pa + in * ca * hw, ca * hw, po + static_cast<std::int64_t>(in) * (ca + cb) * hw);
        std::copy_n(pb + in * cb * hw, cb * hw,
                    po + static_cast<std::int64_t>(in) * (ca + cb) * hw + ca * hw);
    }
    if (tape.recording() && (a.needs_grad() || b.needs_grad())) {
        out.mark_needs_grad();
        tape.record([a = a, b = b, out = out, n, ca, cb, hw]() mutable {
            auto og = out.grad();
            for (int in = 0; in < n; ++in) {
                const std::int64_t ob = static_cast<std::int64_t>(in) * (ca + cb) * hw;
                if (a.needs_grad()) {
                    auto ga = a.grad();
                    for (std::int64_t i = 0; i < ca * hw; ++i) ga[in * ca * hw + i] += og[ob + i];
                }
                if (b.needs_grad()) {
                    auto gb = b.grad();
                    for (std::int64_t i = 0; i < cb * hw; ++i)
                        gb[in * cb * hw + i] += og[ob + ca * hw + i];
                }
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> max_pool_2x2(Tape<T>& tape, const Tensor<T>& a) {
    check_rank4(a, "max_pool_2x2");
    const int n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
    if (h % 2 != 0 || w % 2 != 0)
        throw std::invalid_argument("max_pool_2x2: H and W must be even, got " +
                                    shape_str(a.shape()));
    const int oh = h / 2, ow = w / 2;
    Tensor<T> out = Tensor<T>::zeros({n, c, oh, ow});
    std::vector<std::int32_t> argmax(static_cast<std::size_t>(out.numel()));
    const T* pa = a.data();
    T* po = out.data();
    std::int64_t oi = 0;
    for (std::int64_t plane = 0; plane < static_cast<std::int64_t>(n) * c; ++plane) {
        const T* src = pa + plane * h * w;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x, ++oi) {
                // first-in-scan-order wins ties
                int best = (2 * y) * w + 2 * x;
                T bv = src[best];
                const int cands[3] = {(2 * y) * w + 2 * x + 1, (2 * y + 1) * w + 2 * x,
                                      (2 * y + 1) * w + 2 * x + 1};
                for (int cand : cands)
                    if (src[cand] > bv) {
                        bv = src[cand];
                        best = cand;
                    }
                po[oi] = bv;
                argmax[static_cast<std::size_t>(oi)] =
                    static_cast<std::int32_t>(plane * h * w + best);
            }
        }
    }
    if (tape.recording() && a.needs_grad()) {
        out.mark_needs_grad();
        tape.record([a = a, out = out, argmax = std::move(argmax)]() mutable {
            auto og = out.grad();
            auto ga = a.grad();
            for (std::size_t i = 0; i < argmax.size(); ++i) ga[argmax[i]] += og[i];
        });
    }
    return out;
}

template <class T>
Tensor<T> upsample_nearest_2x(Tape<T>& tape, const Tensor<T>& a) {
    check_rank4(a, "upsample_nearest_2x");
    const int n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
    Tensor<T> out = Tensor<T>::zeros({n, c, 2 * h, 2 * w});
    const T* pa = a.data();
    T* po = out.data();
    for (std::int64_t plane = 0; plane < static_cast<std::int64_t>(n) * c; ++plane) {
        const T* src = pa + plane * h * w;
        T* dst = po + plane * 4 * h * w;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const T v = src[y * w + x];
                dst[(2 * y) * 2 * w + 2 * x] = v;
                dst[(2 * y) * 2 * w + 2 * x + 1] = v;
                dst[(2 * y + 1) * 2 * w + 2 * x] = v;
                dst[(2 * y + 1) * 2 * w + 2 * x + 1] = v;
            }
        }
    }
    if (tape.recording() && a.needs_grad()) {
        out.mark_needs_grad();
        tape.record([a = a, out = out, n, c, h, w]() mutable {
            auto og = out.grad();
            auto ga = a.grad();
            for (std::int64_t plane = 0; plane < static_cast<std::int64_t>(n) * c; ++plane) {
                const T* gsrc = og.data() + plane * 4 * h * w;
                T* gdst = ga.data() + plane * h * w;
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        gdst[y * w + x] += gsrc[(2 * y) * 2 * w + 2 * x] +
                                           gsrc[(2 * y) * 2 * w + 2 * x + 1] +
                                           gsrc[(2 * y + 1) * 2 * w + 2 * x] +
                                           gsrc[(2 * y + 1) * 2 * w + 2 * x + 1];
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> grad_reverse(Tape<T>& tape, const Tensor<T>& a, T lambda) {
    if (lambda < T(0))
        throw std::invalid_argument("grad_reverse: lambda must be non-negative");
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    std::copy_n(a.data(), a.numel(), out.data());
    if (tape.recording() && a.needs_grad()) {
        out.mark_needs_grad();
        tape.record([a = a, out = out, lambda]() mutable {
            auto og = out.grad();
            auto ga = a.grad();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += -lambda * og[i];
        });
    }
    return out;
}

template <class T>
Tensor<T> global_avg_pool(Tape<T>& tape, const Tensor<T>& a) {
    check_rank4(a, "global_avg_pool");
    const int n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
    const std::int64_t hw = static_cast<std::int64_t>(h) * w;
    Tensor<T> out = Tensor<T>::zeros({n, c});
    const T* pa = a.data();
    T* po = out.data();
    const T inv = static_cast<T>(1.0 / static_cast<double>(hw));
    for (std::int64_t plane = 0; plane < static_cast<std::int64_t>(n) * c; ++plane) {
        T acc = 0;
        const T* src = pa + plane * hw;
        for (std::int64_t i = 0; i < hw; ++i) acc += src[i];
        po[plane] = acc * inv;
    }
    if (tape.recording() && a.needs_grad()) {
        out.mark_needs_grad();
        tape.record([a = a, out = out, hw, inv]() mutable {
            auto og = out.grad();
            auto ga = a.grad();
            for (std::size_t plane = 0; plane < og.size(); ++plane) {
                const T g = og[plane] * inv;
                T* gdst = ga.data() + plane * hw;
                for (std::int64_t i = 0; i < hw; ++i) gdst[i] += g;
            }
        });
    }
    return out;
}

#define CSDA_INSTANTIATE_OPS(T)                                                        \
    template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);             \
    template Tensor<T> sub(Tape<T>&, const Tensor<T>&, const Tensor<T>&);             \
    template Tensor<T> mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);             \
    template Tensor<T> scale(Tape<T>&, const Tensor<T>&, T);                          \
    template Tensor<T> sum(Tape<T>&, const Tensor<T>&);                               \
    template Tensor<T> mean(Tape<T>&, const Tensor<T>&);                              \
    template Tensor<T> relu(Tape<T>&, const Tensor<T>&);                              \
    template Tensor<T> sigmoid(Tape<T>&, const Tensor<T>&);                           \
    template Tensor<T> softmax_channelwise(Tape<T>&, const Tensor<T>&);               \
    template Tensor<T> concat_channels(Tape<T>&, const Tensor<T>&, const Tensor<T>&); \
    template Tensor<T> max_pool_2x2(Tape<T>&, const Tensor<T>&);                      \
    template Tensor<T> upsample_nearest_2x(Tape<T>&, const Tensor<T>&);               \
    template Tensor<T> grad_reverse(Tape<T>&, const Tensor<T>&, T);                   \
    template Tensor<T> global_avg_pool(Tape<T>&, const Tensor<T>&);

CSDA_INSTANTIATE_OPS(float)
CSDA_INSTANTIATE_OPS(double)
#undef CSDA_INSTANTIATE_OPS

}  // namespace csda

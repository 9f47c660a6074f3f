#include <algorithm>
#include <type_traits>
#include <vector>

#include "csda/ops.hpp"
#include "gemm.hpp"
#include "small_gemm.hpp"

namespace csda {

namespace {

// 3x3/stride-1/pad-1 convolutions at large spatial extent go through a
// shift-and-add scheme (one gemm per kernel tap over the padded planes);
// everything else uses batch-folded im2col. The route depends on shapes
// alone, so a layer is bit-reproducible across runs.
constexpr int kTapPathMinHW = 1024;

struct ConvDims {
    int n, cin, h, w, cout, kh, kw, stride, pad, oh, ow;
};

template <class T>
ConvDims conv_check(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                    int stride, int padding) {
    if (input.rank() != 4)
        throw std::invalid_argument("conv2d: input must be [N,Cin,H,W], got " +
                                    shape_str(input.shape()));
    if (kernel.rank() != 4)
        throw std::invalid_argument("conv2d: kernel must be [Cout,Cin,kh,kw], got " +
                                    shape_str(kernel.shape()));
    if (bias.rank() != 1 || bias.dim(0) != kernel.dim(0))
        throw std::invalid_argument("conv2d: bias must be [Cout]=" +
                                    std::to_string(kernel.dim(0)) + ", got " +
                                    shape_str(bias.shape()));
    if (input.dim(1) != kernel.dim(1))
        throw std::invalid_argument("conv2d: input channels " + std::to_string(input.dim(1)) +
                                    " do not match kernel channels " +
                                    std::to_string(kernel.dim(1)));
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
    if (padding < 0) throw std::invalid_argument("conv2d: padding must be >= 0");
    ConvDims d;
    d.n = input.dim(0);
    d.cin = input.dim(1);
    d.h = input.dim(2);
    d.w = input.dim(3);
    d.cout = kernel.dim(0);
    d.kh = kernel.dim(2);
    d.kw = kernel.dim(3);
    d.stride = stride;
    d.pad = padding;
    if (d.kh > d.h + 2 * padding || d.kw > d.w + 2 * padding)
        throw std::invalid_argument("conv2d: kernel " + shape_str(kernel.shape()) +
                                    " larger than padded input " + shape_str(input.shape()));
    d.oh = (d.h + 2 * padding - d.kh) / stride + 1;
    d.ow = (d.w + 2 * padding - d.kw) / stride + 1;
    return d;
}

template <class T>
bool use_tap_path(const ConvDims& d) {
    if (d.kh != 3 || d.kw != 3 || d.stride != 1 || d.pad != 1) return false;
    // the fused direct kernel needs at least one full vector per output row;
    // the tap-gemm fallback only pays off once the plane is large
    if (std::is_same_v<T, float> && detail::kHasSmallGemm) return d.w >= 16;
    return d.h * d.w >= kTapPathMinHW;
}

template <class T>
std::vector<T>& scratch(int which) {
    thread_local std::vector<T> bufs[5];
    return bufs[which];
}

// gemm C[M x N] = A[M x K] * B[K x N], dispatching float to the in-house
// kernel when available
template <class T>
void nn_gemm(int m, std::int64_t n, int k, const T* a, const T* b, T* c) {
    if constexpr (std::is_same_v<T, float>) {
        if (detail::kHasSmallGemm && m <= 128) {
            detail::sgemm_nn(m, n, k, a, k, b, n, c, n);
            return;
        }
    }
    detail::gemm(false, false, m, static_cast<int>(n), k, T(1), a, k, b, static_cast<int>(n),
                 T(0), c, static_cast<int>(n));
}

// --- batch-folded im2col route ---

// col[K = cin*kh*kw][n*oh*ow] over the whole batch.
template <class T>
void im2col_batch(const T* x, const ConvDims& d, T* col) {
    const std::int64_t cols_img = static_cast<std::int64_t>(d.oh) * d.ow;
    const std::int64_t cols = cols_img * d.n;
    for (int ci = 0; ci < d.cin; ++ci) {
        for (int ky = 0; ky < d.kh; ++ky) {
            for (int kx = 0; kx < d.kw; ++kx) {
                T* row = col + (static_cast<std::int64_t>(ci) * d.kh * d.kw + ky * d.kw + kx) *
                                   cols;
                for (int in = 0; in < d.n; ++in) {
                    const T* plane =
                        x + (static_cast<std::int64_t>(in) * d.cin + ci) * d.h * d.w;
                    T* dst = row + static_cast<std::int64_t>(in) * cols_img;
                    for (int oy = 0; oy < d.oh; ++oy) {
                        const int iy = oy * d.stride + ky - d.pad;
                        if (iy < 0 || iy >= d.h) {
                            std::fill_n(dst + static_cast<std::int64_t>(oy) * d.ow, d.ow, T(0));
                            continue;
                        }
                        T* drow = dst + static_cast<std::int64_t>(oy) * d.ow;
                        if (d.stride == 1) {
                            const int ix0 = kx - d.pad;
                            for (int ox = 0; ox < d.ow; ++ox) {
                                const int ix = ix0 + ox;
                                drow[ox] = (ix >= 0 && ix < d.w) ? plane[iy * d.w + ix] : T(0);
                            }
                        } else {
                            for (int ox = 0; ox < d.ow; ++ox) {
                                const int ix = ox * d.stride + kx - d.pad;
                                drow[ox] = (ix >= 0 && ix < d.w) ? plane[iy * d.w + ix] : T(0);
                            }
                        }
                    }
                }
            }
        }
    }
}

template <class T>
void col2im_batch_add(const T* col, const ConvDims& d, T* gx) {
    const std::int64_t cols_img = static_cast<std::int64_t>(d.oh) * d.ow;
    const std::int64_t cols = cols_img * d.n;
    for (int ci = 0; ci < d.cin; ++ci) {
        for (int ky = 0; ky < d.kh; ++ky) {
            for (int kx = 0; kx < d.kw; ++kx) {
                const T* row =
                    col + (static_cast<std::int64_t>(ci) * d.kh * d.kw + ky * d.kw + kx) * cols;
                for (int in = 0; in < d.n; ++in) {
                    T* plane = gx + (static_cast<std::int64_t>(in) * d.cin + ci) * d.h * d.w;
                    const T* src = row + static_cast<std::int64_t>(in) * cols_img;
                    for (int oy = 0; oy < d.oh; ++oy) {
                        const int iy = oy * d.stride + ky - d.pad;
                        if (iy < 0 || iy >= d.h) continue;
                        for (int ox = 0; ox < d.ow; ++ox) {
                            const int ix = ox * d.stride + kx - d.pad;
                            if (ix >= 0 && ix < d.w)
                                plane[iy * d.w + ix] += src[static_cast<std::int64_t>(oy) * d.ow + ox];
                        }
                    }
                }
            }
        }
    }
}

// scatter [cout][n*ohow] gemm output into [n][cout][ohow] (and gather back)
template <class T>
void scatter_y(const T* y2, const ConvDims& d, const T* bias, T* y) {
    const std::int64_t cols_img = static_cast<std::int64_t>(d.oh) * d.ow;
    const std::int64_t cols = cols_img * d.n;
    for (int in = 0; in < d.n; ++in)
        for (int co = 0; co < d.cout; ++co) {
            const T* src = y2 + static_cast<std::int64_t>(co) * cols + in * cols_img;
            T* dst = y + (static_cast<std::int64_t>(in) * d.cout + co) * cols_img;
            const T bv = bias ? bias[co] : T(0);
            for (std::int64_t i = 0; i < cols_img; ++i) dst[i] = src[i] + bv;
        }
}

template <class T>
void gather_gy(const T* gy, const ConvDims& d, T* gy2) {
    const std::int64_t cols_img = static_cast<std::int64_t>(d.oh) * d.ow;
    const std::int64_t cols = cols_img * d.n;
    for (int in = 0; in < d.n; ++in)
        for (int co = 0; co < d.cout; ++co)
            std::copy_n(gy + (static_cast<std::int64_t>(in) * d.cout + co) * cols_img, cols_img,
                        gy2 + static_cast<std::int64_t>(co) * cols + in * cols_img);
}

template <class T>
void conv_forward_im2col(const T* x, const T* w, const T* b, T* y, const ConvDims& d) {
    const std::int64_t k = static_cast<std::int64_t>(d.cin) * d.kh * d.kw;
    const std::int64_t cols = static_cast<std::int64_t>(d.oh) * d.ow * d.n;
    auto& col = scratch<T>(0);
    auto& y2 = scratch<T>(1);
    col.resize(static_cast<std::size_t>(k * cols));
    y2.resize(static_cast<std::size_t>(d.cout * cols));
    im2col_batch(x, d, col.data());
    detail::gemm(false, false, d.cout, static_cast<int>(cols), static_cast<int>(k), T(1), w,
                 static_cast<int>(k), col.data(), static_cast<int>(cols), T(0), y2.data(),
                 static_cast<int>(cols));
    scatter_y(y2.data(), d, b, y);
}

template <class T>
void conv_backward_im2col(const T* x, const T* w, const T* gy, T* gx, T* gw, T* gb,
                          const ConvDims& d) {
    const std::int64_t k = static_cast<std::int64_t>(d.cin) * d.kh * d.kw;
    const std::int64_t cols_img = static_cast<std::int64_t>(d.oh) * d.ow;
    const std::int64_t cols = cols_img * d.n;
    auto& gy2 = scratch<T>(1);
    gy2.resize(static_cast<std::size_t>(d.cout * cols));
    gather_gy(gy, d, gy2.data());
    if (gb) {
        for (int co = 0; co < d.cout; ++co) {
            const T* row = gy2.data() + static_cast<std::int64_t>(co) * cols;
            T acc = 0;
            for (std::int64_t i = 0; i < cols; ++i) acc += row[i];
            gb[co] += acc;
        }
    }
    if (gw) {
        auto& col = scratch<T>(0);
        col.resize(static_cast<std::size_t>(k * cols));
        im2col_batch(x, d, col.data());
        // gw[cout,k] += gy2[cout,cols] * col[k,cols]^T
        detail::gemm(false, true, d.cout, static_cast<int>(k), static_cast<int>(cols), T(1),
                     gy2.data(), static_cast<int>(cols), col.data(), static_cast<int>(cols),
                     T(1), gw, static_cast<int>(k));
    }
    if (gx) {
        auto& dcol = scratch<T>(2);
        dcol.resize(static_cast<std::size_t>(k * cols));
        detail::gemm(true, false, static_cast<int>(k), static_cast<int>(cols), d.cout, T(1), w,
                     static_cast<int>(k), gy2.data(), static_cast<int>(cols), T(0), dcol.data(),
                     static_cast<int>(cols));
        col2im_batch_add(dcol.data(), d, gx);
    }
}

// --- tap (shift-and-add) route, 3x3 stride 1 pad 1 only ---

// [cin][n*(h+2)*(w+2)] zero-framed copy of the batch.
template <class T>
void pad_batch(const T* x, const ConvDims& d, T* xp) {
    const int hp = d.h + 2, wp = d.w + 2;
    const std::int64_t slab = static_cast<std::int64_t>(hp) * wp;
    const std::int64_t ncols = slab * d.n;
    for (int ci = 0; ci < d.cin; ++ci)
        for (int in = 0; in < d.n; ++in) {
            const T* src = x + (static_cast<std::int64_t>(in) * d.cin + ci) * d.h * d.w;
            T* dst = xp + ci * ncols + in * slab;
            std::fill_n(dst, wp, T(0));
            for (int y = 0; y < d.h; ++y) {
                T* row = dst + static_cast<std::int64_t>(y + 1) * wp;
                row[0] = T(0);
                std::copy_n(src + static_cast<std::int64_t>(y) * d.w, d.w, row + 1);
                row[wp - 1] = T(0);
            }
            std::fill_n(dst + static_cast<std::int64_t>(hp - 1) * wp, wp, T(0));
        }
}

template <class T>
void conv_forward_taps(const T* x, const T* w, const T* b, T* y, const ConvDims& d) {
    const int hp = d.h + 2, wp = d.w + 2;
    const std::int64_t slab = static_cast<std::int64_t>(hp) * wp;
    const std::int64_t ncols = slab * d.n;
    auto& xp = scratch<T>(0);
    xp.resize(static_cast<std::size_t>(d.cin * ncols));
    pad_batch(x, d, xp.data());

    if constexpr (std::is_same_v<T, float>) {
        if (detail::kHasSmallGemm) {
            for (int in = 0; in < d.n; ++in)
                detail::sconv3x3_image(d.cout, d.cin, d.h, d.w, w, xp.data() + in * slab,
                                       ncols, b,
                                       y + static_cast<std::int64_t>(in) * d.cout * d.h * d.w,
                                       false);
            return;
        }
    }

    // tap-gemm fallback: one gemm per kernel tap, then shifted accumulation
    auto& ytap = scratch<T>(1);
    ytap.resize(static_cast<std::size_t>(d.cout * ncols));
    for (int in = 0; in < d.n; ++in) {
        T* yi = y + static_cast<std::int64_t>(in) * d.cout * d.h * d.w;
        for (int co = 0; co < d.cout; ++co)
            std::fill_n(yi + static_cast<std::int64_t>(co) * d.h * d.w,
                        static_cast<std::int64_t>(d.h) * d.w, b[co]);
    }
    std::vector<T> wtap(static_cast<std::size_t>(d.cout) * d.cin);
    for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
            for (int co = 0; co < d.cout; ++co)
                for (int ci = 0; ci < d.cin; ++ci)
                    wtap[static_cast<std::size_t>(co) * d.cin + ci] =
                        w[((co * d.cin + ci) * 3 + ky) * 3 + kx];
            nn_gemm(d.cout, ncols, d.cin, wtap.data(), xp.data(), ytap.data());
            for (int co = 0; co < d.cout; ++co) {
                for (int in = 0; in < d.n; ++in) {
                    const T* src = ytap.data() + co * ncols + in * slab;
                    T* dst = y + (static_cast<std::int64_t>(in) * d.cout + co) * d.h * d.w;
                    for (int oy = 0; oy < d.h; ++oy) {
                        const T* s = src + static_cast<std::int64_t>(oy + ky) * wp + kx;
                        T* o = dst + static_cast<std::int64_t>(oy) * d.w;
                        for (int ox = 0; ox < d.w; ++ox) o[ox] += s[ox];
                    }
                }
            }
        }
    }
}

template <class T>
void conv_backward_taps(const T* x, const T* w, const T* gy, T* gx, T* gw, T* gb,
                        const ConvDims& d) {
    const int hp = d.h + 2, wp = d.w + 2;
    const std::int64_t slab = static_cast<std::int64_t>(hp) * wp;
    const std::int64_t ncols = slab * d.n;
    // gy embedded at offset (0,0) of each padded slab, [cout][n*slab]
    auto& gye = scratch<T>(0);
    gye.resize(static_cast<std::size_t>(d.cout * ncols));
    for (int co = 0; co < d.cout; ++co)
        for (int in = 0; in < d.n; ++in) {
            const T* src = gy + (static_cast<std::int64_t>(in) * d.cout + co) * d.h * d.w;
            T* dst = gye.data() + co * ncols + in * slab;
            for (int y = 0; y < d.h; ++y) {
                T* row = dst + static_cast<std::int64_t>(y) * wp;
                std::copy_n(src + static_cast<std::int64_t>(y) * d.w, d.w, row);
                row[d.w] = T(0);
                row[d.w + 1] = T(0);
            }
            std::fill_n(dst + static_cast<std::int64_t>(d.h) * wp, 2 * wp, T(0));
        }

    if (gb) {
        for (int co = 0; co < d.cout; ++co) {
            T acc = 0;
            for (int in = 0; in < d.n; ++in) {
                const T* row = gy + (static_cast<std::int64_t>(in) * d.cout + co) * d.h * d.w;
                for (std::int64_t i = 0; i < static_cast<std::int64_t>(d.h) * d.w; ++i)
                    acc += row[i];
            }
            gb[co] += acc;
        }
    }

    if (gw) {
        auto& xp = scratch<T>(1);
        xp.resize(static_cast<std::size_t>(d.cin * ncols));
        pad_batch(x, d, xp.data());
        bool used_kernel = false;
        if constexpr (std::is_same_v<T, float>) {
            if (detail::kHasSmallGemm) {
                // gw already has the [cout][cin][3][3] layout the tap
                // accumulator expects
                detail::sgemm_nt_taps(d.cout, d.cin, ncols, wp, gye.data(), xp.data(), gw);
                used_kernel = true;
            }
        }
        if (!used_kernel) {
            std::vector<T> gwtap(static_cast<std::size_t>(d.cout) * d.cin);
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    // gy rows are zero outside the embedded region, so the
                    // shifted overlap never crosses into the next image slab
                    const std::int64_t off = static_cast<std::int64_t>(ky) * wp + kx;
                    const std::int64_t kk = ncols - off;
                    detail::gemm(false, true, d.cout, d.cin, static_cast<int>(kk), T(1),
                                 gye.data(), static_cast<int>(ncols), xp.data() + off,
                                 static_cast<int>(ncols), T(0), gwtap.data(), d.cin);
                    for (int co = 0; co < d.cout; ++co)
                        for (int ci = 0; ci < d.cin; ++ci)
                            gw[((co * d.cin + ci) * 3 + ky) * 3 + kx] +=
                                gwtap[static_cast<std::size_t>(co) * d.cin + ci];
                }
            }
        }
    }

    if (gx) {
        if constexpr (std::is_same_v<T, float>) {
            if (detail::kHasSmallGemm) {
                // The input gradient is itself a 3x3 convolution: gy framed at
                // (1,1) convolved with the channel-transposed, spatially
                // flipped kernel, accumulated into gx.
                auto& gyp = scratch<T>(2);
                gyp.resize(static_cast<std::size_t>(d.cout * ncols));
                ConvDims dg = d;
                dg.cin = d.cout;
                pad_batch(gy, dg, gyp.data());
                std::vector<T> wflip(static_cast<std::size_t>(d.cin) * d.cout * 9);
                for (int co = 0; co < d.cout; ++co)
                    for (int ci = 0; ci < d.cin; ++ci)
                        for (int ky = 0; ky < 3; ++ky)
                            for (int kx = 0; kx < 3; ++kx)
                                wflip[((static_cast<std::size_t>(ci) * d.cout + co) * 3 + ky) *
                                          3 +
                                      kx] = w[((co * d.cin + ci) * 3 + (2 - ky)) * 3 + (2 - kx)];
                for (int in = 0; in < d.n; ++in)
                    detail::sconv3x3_image(
                        d.cin, d.cout, d.h, d.w, wflip.data(), gyp.data() + in * slab, ncols,
                        nullptr, gx + static_cast<std::int64_t>(in) * d.cin * d.h * d.w, true);
                return;
            }
        }
        auto& gxtap = scratch<T>(2);
        auto& gxp = scratch<T>(3);
        gxtap.resize(static_cast<std::size_t>(d.cin * ncols));
        gxp.resize(static_cast<std::size_t>(d.cin * ncols));
        std::fill(gxp.begin(), gxp.end(), T(0));
        std::vector<T> wtap(static_cast<std::size_t>(d.cout) * d.cin);
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                // transposed tap: [cin x cout]
                for (int co = 0; co < d.cout; ++co)
                    for (int ci = 0; ci < d.cin; ++ci)
                        wtap[static_cast<std::size_t>(ci) * d.cout + co] =
                            w[((co * d.cin + ci) * 3 + ky) * 3 + kx];
                nn_gemm(d.cin, ncols, d.cout, wtap.data(), gye.data(), gxtap.data());
                const std::int64_t off = static_cast<std::int64_t>(ky) * wp + kx;
                const std::int64_t kk = ncols - off;
                for (int ci = 0; ci < d.cin; ++ci) {
                    T* dp = gxp.data() + ci * ncols + off;
                    const T* sp = gxtap.data() + ci * ncols;
                    for (std::int64_t i = 0; i < kk; ++i) dp[i] += sp[i];
                }
            }
        }
        for (int ci = 0; ci < d.cin; ++ci)
            for (int in = 0; in < d.n; ++in) {
                const T* src = gxp.data() + ci * ncols + in * slab;
                T* dst = gx + (static_cast<std::int64_t>(in) * d.cin + ci) * d.h * d.w;
                for (int y = 0; y < d.h; ++y)
                    for (int xq = 0; xq < d.w; ++xq)
                        dst[static_cast<std::int64_t>(y) * d.w + xq] +=
                            src[static_cast<std::int64_t>(y + 1) * wp + xq + 1];
            }
    }
}

}  // namespace

namespace {

template <class T>
Tensor<T> conv2d_impl(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& kernel,
                      const Tensor<T>& bias, int stride, int padding, bool fused_relu) {
    const ConvDims d = conv_check(input, kernel, bias, stride, padding);
    Tensor<T> out = Tensor<T>::zeros({d.n, d.cout, d.oh, d.ow});
    if (use_tap_path<T>(d))
        conv_forward_taps(input.data(), kernel.data(), bias.data(), out.data(), d);
    else
        conv_forward_im2col(input.data(), kernel.data(), bias.data(), out.data(), d);
    if (fused_relu) {
        T* p = out.data();
        const std::int64_t n = out.numel();
        for (std::int64_t i = 0; i < n; ++i) p[i] = p[i] > T(0) ? p[i] : T(0);
    }

    const bool any = input.needs_grad() || kernel.needs_grad() || bias.needs_grad();
    if (tape.recording() && any) {
        out.mark_needs_grad();
        tape.record([input = input, kernel = kernel, bias = bias, out = out, d,
                     fused_relu]() mutable {
            T* gx = input.needs_grad() ? input.grad_data() : nullptr;
            T* gw = kernel.needs_grad() ? kernel.grad_data() : nullptr;
            T* gb = bias.needs_grad() ? bias.grad_data() : nullptr;
            const T* gy = out.grad_data();
            auto& gym = scratch<T>(4);
            if (fused_relu) {
                // rectifier mask folds into the conv gradient
                const T* o = out.data();
                const std::int64_t n = out.numel();
                gym.resize(static_cast<std::size_t>(n));
                for (std::int64_t i = 0; i < n; ++i) gym[static_cast<std::size_t>(i)] =
                    o[i] > T(0) ? gy[i] : T(0);
                gy = gym.data();
            }
            if (use_tap_path<T>(d))
                conv_backward_taps(input.data(), kernel.data(), gy, gx, gw, gb, d);
            else
                conv_backward_im2col(input.data(), kernel.data(), gy, gx, gw, gb, d);
        });
    }
    return out;
}

}  // namespace

template <class T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& kernel,
                 const Tensor<T>& bias, int stride, int padding) {
    return conv2d_impl(tape, input, kernel, bias, stride, padding, false);
}

template <class T>
Tensor<T> conv2d_relu(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& kernel,
                      const Tensor<T>& bias, int stride, int padding) {
    return conv2d_impl(tape, input, kernel, bias, stride, padding, true);
}

template <class T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weights,
                 const Tensor<T>& bias) {
    if (x.rank() != 2)
        throw std::invalid_argument("linear: input must be [N,F], got " + shape_str(x.shape()));
    if (weights.rank() != 2 || weights.dim(1) != x.dim(1))
        throw std::invalid_argument("linear: weights must be [Out," + std::to_string(x.dim(1)) +
                                    "], got " + shape_str(weights.shape()));
    if (bias.rank() != 1 || bias.dim(0) != weights.dim(0))
        throw std::invalid_argument("linear: bias must be [Out], got " + shape_str(bias.shape()));
    const int n = x.dim(0), f = x.dim(1), o = weights.dim(0);
    Tensor<T> out = Tensor<T>::zeros({n, o});
    // out[n,o] = x[n,f] . w[o,f]
    detail::gemm(false, true, n, o, f, T(1), x.data(), f, weights.data(), f, T(0), out.data(), o);
    {
        T* po = out.data();
        const T* pb = bias.data();
        for (int in = 0; in < n; ++in)
            for (int io = 0; io < o; ++io) po[in * o + io] += pb[io];
    }
    const bool any = x.needs_grad() || weights.needs_grad() || bias.needs_grad();
    if (tape.recording() && any) {
        out.mark_needs_grad();
        tape.record([x = x, weights = weights, bias = bias, out = out, n, f, o]() mutable {
            const T* gy = out.grad_data();
            if (x.needs_grad())
                detail::gemm(false, false, n, f, o, T(1), gy, o, weights.data(), f, T(1),
                             x.grad_data(), f);
            if (weights.needs_grad())
                detail::gemm(true, false, o, f, n, T(1), gy, o, x.data(), f, T(1),
                             weights.grad_data(), f);
            if (bias.needs_grad()) {
                auto gb = bias.grad();
                for (int in = 0; in < n; ++in)
                    for (int io = 0; io < o; ++io) gb[io] += gy[in * o + io];
            }
        });
    }
    return out;
}

#define CSDA_INSTANTIATE_CONV(T)                                                     \
    template Tensor<T> conv2d(Tape<T>&, const Tensor<T>&, const Tensor<T>&,          \
                              const Tensor<T>&, int, int);                           \
    template Tensor<T> conv2d_relu(Tape<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                   const Tensor<T>&, int, int);                      \
    template Tensor<T> linear(Tape<T>&, const Tensor<T>&, const Tensor<T>&,          \
                              const Tensor<T>&);

CSDA_INSTANTIATE_CONV(float)
CSDA_INSTANTIATE_CONV(double)
#undef CSDA_INSTANTIATE_CONV

}  // namespace csda

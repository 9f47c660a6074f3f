#pragma once

// Register-blocked float kernels for the conv tap path: a fused 3x3 direct
// convolution (all nine taps applied while the source rows are cache-hot)
// and a reduction gemm for the weight gradient. Microkernels carry their
// block extents as template parameters so the accumulators stay in
// registers. Row-major throughout. The double path stays on OpenBLAS.

#include <algorithm>
#include <cstdint>
#include <vector>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

namespace csda::detail {

#if defined(__AVX512F__)
inline constexpr bool kHasSmallGemm = true;

// C[MR rows x NV*16 cols] of a 3x3 convolution at one (row, column-chunk)
// position. xp: padded planes, image at (1,1), plane stride between
// channels. wts: [M][K][3][3] with rows m0..m0+MR-1 used.
template <int MR, int NV>
void sconv_tile(int m0, int k, int oy, int ox, int h, int w, const float* wts,
                const float* xp, std::int64_t plane_stride, const float* init, float* out,
                bool accumulate) {
    const int wp = w + 2;
    __m512 acc[MR][NV];
    for (int i = 0; i < MR; ++i)
        for (int j = 0; j < NV; ++j)
            acc[i][j] = accumulate
                            ? _mm512_loadu_ps(out +
                                              (static_cast<std::int64_t>(m0 + i) * h + oy) * w +
                                              ox + 16 * j)
                            : _mm512_set1_ps(init ? init[m0 + i] : 0.0f);
    for (int ci = 0; ci < k; ++ci) {
        const float* plane = xp + static_cast<std::int64_t>(ci) * plane_stride;
        const float* wrow = wts + (static_cast<std::int64_t>(m0) * k + ci) * 9;
        for (int ky = 0; ky < 3; ++ky) {
            const float* row = plane + static_cast<std::int64_t>(oy + ky) * wp + ox;
            for (int kx = 0; kx < 3; ++kx) {
                __m512 bv[NV];
                for (int j = 0; j < NV; ++j) bv[j] = _mm512_loadu_ps(row + kx + 16 * j);
                for (int i = 0; i < MR; ++i) {
                    const __m512 av =
                        _mm512_set1_ps(wrow[static_cast<std::int64_t>(i) * k * 9 + ky * 3 + kx]);
                    for (int j = 0; j < NV; ++j) acc[i][j] = _mm512_fmadd_ps(av, bv[j], acc[i][j]);
                }
            }
        }
    }
    for (int i = 0; i < MR; ++i)
        for (int j = 0; j < NV; ++j)
            _mm512_storeu_ps(out + (static_cast<std::int64_t>(m0 + i) * h + oy) * w + ox + 16 * j,
                             acc[i][j]);
}

template <int MR>
void sconv_tile_nv(int nv, int m0, int k, int oy, int ox, int h, int w, const float* wts,
                   const float* xp, std::int64_t plane_stride, const float* init, float* out,
                   bool accumulate) {
    switch (nv) {
        case 4: sconv_tile<MR, 4>(m0, k, oy, ox, h, w, wts, xp, plane_stride, init, out, accumulate); break;
        case 3: sconv_tile<MR, 3>(m0, k, oy, ox, h, w, wts, xp, plane_stride, init, out, accumulate); break;
        case 2: sconv_tile<MR, 2>(m0, k, oy, ox, h, w, wts, xp, plane_stride, init, out, accumulate); break;
        default: sconv_tile<MR, 1>(m0, k, oy, ox, h, w, wts, xp, plane_stride, init, out, accumulate); break;
    }
}

inline void sconv_tile_dispatch(int mr, int nv, int m0, int k, int oy, int ox, int h, int w,
                                const float* wts, const float* xp, std::int64_t plane_stride,
                                const float* init, float* out, bool accumulate) {
    switch (mr) {
        case 6: sconv_tile_nv<6>(nv, m0, k, oy, ox, h, w, wts, xp, plane_stride, init, out, accumulate); break;
        case 5: sconv_tile_nv<5>(nv, m0, k, oy, ox, h, w, wts, xp, plane_stride, init, out, accumulate); break;
        case 4: sconv_tile_nv<4>(nv, m0, k, oy, ox, h, w, wts, xp, plane_stride, init, out, accumulate); break;
        case 3: sconv_tile_nv<3>(nv, m0, k, oy, ox, h, w, wts, xp, plane_stride, init, out, accumulate); break;
        case 2: sconv_tile_nv<2>(nv, m0, k, oy, ox, h, w, wts, xp, plane_stride, init, out, accumulate); break;
        default: sconv_tile_nv<1>(nv, m0, k, oy, ox, h, w, wts, xp, plane_stride, init, out, accumulate); break;
    }
}

// Fused 3x3 stride-1 direct convolution for one image; out [M x h*w].
inline void sconv3x3_image(int m, int k, int h, int w, const float* wts, const float* xp,
                           std::int64_t plane_stride, const float* init, float* out,
                           bool accumulate) {
    const int wp = w + 2;
    for (int m0 = 0; m0 < m; m0 += 6) {
        const int mr = m - m0 < 6 ? m - m0 : 6;
        for (int oy = 0; oy < h; ++oy) {
            int ox = 0;
            while (w - ox >= 16) {
                const int left = (w - ox) / 16;
                const int nv = left > 4 ? 4 : left;
                sconv_tile_dispatch(mr, nv, m0, k, oy, ox, h, w, wts, xp, plane_stride, init,
                                    out, accumulate);
                ox += 16 * nv;
            }
            for (; ox < w; ++ox) {  // scalar tail
                for (int i = 0; i < mr; ++i) {
                    float acc = accumulate
                                    ? out[(static_cast<std::int64_t>(m0 + i) * h + oy) * w + ox]
                                    : (init ? init[m0 + i] : 0.0f);
                    for (int ci = 0; ci < k; ++ci) {
                        const float* plane = xp + static_cast<std::int64_t>(ci) * plane_stride;
                        const float* wrow =
                            wts + (static_cast<std::int64_t>(m0 + i) * k + ci) * 9;
                        for (int ky = 0; ky < 3; ++ky)
                            for (int kx = 0; kx < 3; ++kx)
                                acc += wrow[ky * 3 + kx] *
                                       plane[static_cast<std::int64_t>(oy + ky) * wp + ox + kx];
                    }
                    out[(static_cast<std::int64_t>(m0 + i) * h + oy) * w + ox] = acc;
                }
            }
        }
    }
}

// --- NT reduction for the weight gradient ---

inline float hsum(__m512 v) { return _mm512_reduce_add_ps(v); }

// accumulates A[m0..][k0,k1) . B[n0..][k0,k1)^T into C
template <int MR, int NR>
void sgemm_nt_tile(int m0, int n0, std::int64_t k0, std::int64_t k1, const float* a,
                   std::int64_t lda, const float* b, std::int64_t ldb, float* c,
                   std::int64_t ldc) {
    __m512 acc[MR][NR];
    for (int i = 0; i < MR; ++i)
        for (int j = 0; j < NR; ++j) acc[i][j] = _mm512_setzero_ps();
    std::int64_t kk = k0;
    for (; kk + 16 <= k1; kk += 16) {
        __m512 av[MR], bv[NR];
        for (int i = 0; i < MR; ++i) av[i] = _mm512_loadu_ps(a + (m0 + i) * lda + kk);
        for (int j = 0; j < NR; ++j) bv[j] = _mm512_loadu_ps(b + (n0 + j) * ldb + kk);
        for (int i = 0; i < MR; ++i)
            for (int j = 0; j < NR; ++j) acc[i][j] = _mm512_fmadd_ps(av[i], bv[j], acc[i][j]);
    }
    for (int i = 0; i < MR; ++i)
        for (int j = 0; j < NR; ++j) {
            float s = hsum(acc[i][j]);
            for (std::int64_t kt = kk; kt < k1; ++kt)
                s += a[(m0 + i) * lda + kt] * b[(n0 + j) * ldb + kt];
            c[static_cast<std::int64_t>(m0 + i) * ldc + n0 + j] += s;
        }
}

template <int MR>
void sgemm_nt_rows(int nr, int m0, int n0, std::int64_t k0, std::int64_t k1, const float* a,
                   std::int64_t lda, const float* b, std::int64_t ldb, float* c,
                   std::int64_t ldc) {
    switch (nr) {
        case 5: sgemm_nt_tile<MR, 5>(m0, n0, k0, k1, a, lda, b, ldb, c, ldc); break;
        case 4: sgemm_nt_tile<MR, 4>(m0, n0, k0, k1, a, lda, b, ldb, c, ldc); break;
        case 3: sgemm_nt_tile<MR, 3>(m0, n0, k0, k1, a, lda, b, ldb, c, ldc); break;
        case 2: sgemm_nt_tile<MR, 2>(m0, n0, k0, k1, a, lda, b, ldb, c, ldc); break;
        default: sgemm_nt_tile<MR, 1>(m0, n0, k0, k1, a, lda, b, ldb, c, ldc); break;
    }
}

// C[M x N] += A[M x K-range] * B[N x K-range]^T over [k0, k1).
inline void sgemm_nt_accum(int m, int n, std::int64_t k0, std::int64_t k1, const float* a,
                           std::int64_t lda, const float* b, std::int64_t ldb, float* c,
                           std::int64_t ldc) {
    for (int m0 = 0; m0 < m; m0 += 4) {
        const int mr = m - m0 < 4 ? m - m0 : 4;
        for (int n0 = 0; n0 < n; n0 += 5) {
            const int nr = n - n0 < 5 ? n - n0 : 5;
            switch (mr) {
                case 4: sgemm_nt_rows<4>(nr, m0, n0, k0, k1, a, lda, b, ldb, c, ldc); break;
                case 3: sgemm_nt_rows<3>(nr, m0, n0, k0, k1, a, lda, b, ldb, c, ldc); break;
                case 2: sgemm_nt_rows<2>(nr, m0, n0, k0, k1, a, lda, b, ldb, c, ldc); break;
                default: sgemm_nt_rows<1>(nr, m0, n0, k0, k1, a, lda, b, ldb, c, ldc); break;
            }
        }
    }
}

// Weight gradient over all nine taps with the reduction blocked so one pass
// of gye/xp through L2 serves every tap: gw_taps[(co*cin+ci)*9 + tap] +=
// sum_q gye[co][q] * xp[ci][q + tap_offset].
inline void sgemm_nt_taps(int cout, int cin, std::int64_t ncols, int wp, const float* gye,
                          const float* xp, float* gw_taps) {
    // keep the cin x chunk panel inside L2 so the m-tile sweeps re-read it
    // cheaply; 1 MB budget
    const std::int64_t kChunk =
        std::clamp<std::int64_t>(262144 / std::max(1, cin), 512, 8192);
    std::vector<float> acc(static_cast<std::size_t>(cout) * cin * 9, 0.0f);
    std::vector<float> tile(static_cast<std::size_t>(cout) * cin);
    for (std::int64_t k0 = 0; k0 < ncols; k0 += kChunk) {
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const std::int64_t off = static_cast<std::int64_t>(ky) * wp + kx;
                const std::int64_t k1 = std::min(ncols - off, k0 + kChunk);
                if (k1 <= k0) continue;
                std::fill(tile.begin(), tile.end(), 0.0f);
                sgemm_nt_accum(cout, cin, k0, k1, gye, ncols, xp + off, ncols, tile.data(),
                               cin);
                float* dst = acc.data() + (static_cast<std::size_t>(ky) * 3 + kx);
                for (int i = 0; i < cout * cin; ++i) dst[static_cast<std::size_t>(i) * 9] +=
                    tile[static_cast<std::size_t>(i)];
            }
        }
    }
    for (std::size_t i = 0; i < acc.size(); ++i) gw_taps[i] += acc[i];
}

// C[M x N] = A[M x K] * B[K x N] (kept for odd tap shapes on the fallback path)
template <int MR, int NV>
void sgemm_nn_tile(int m0, std::int64_t n0, int k, const float* a, int lda, const float* b,
                   std::int64_t ldb, float* c, std::int64_t ldc) {
    __m512 acc[MR][NV];
    for (int i = 0; i < MR; ++i)
        for (int j = 0; j < NV; ++j) acc[i][j] = _mm512_setzero_ps();
    for (int kk = 0; kk < k; ++kk) {
        __m512 bv[NV];
        const float* brow = b + static_cast<std::int64_t>(kk) * ldb + n0;
        for (int j = 0; j < NV; ++j) bv[j] = _mm512_loadu_ps(brow + 16 * j);
        for (int i = 0; i < MR; ++i) {
            const __m512 av = _mm512_set1_ps(a[static_cast<std::int64_t>(i) * lda + kk]);
            for (int j = 0; j < NV; ++j) acc[i][j] = _mm512_fmadd_ps(av, bv[j], acc[i][j]);
        }
    }
    for (int i = 0; i < MR; ++i)
        for (int j = 0; j < NV; ++j)
            _mm512_storeu_ps(c + static_cast<std::int64_t>(m0 + i) * ldc + n0 + 16 * j,
                             acc[i][j]);
}

inline void sgemm_nn(int m, std::int64_t n, int k, const float* a, int lda, const float* b,
                     std::int64_t ldb, float* c, std::int64_t ldc) {
    for (int m0 = 0; m0 < m; m0 += 6) {
        const int mr = m - m0 < 6 ? m - m0 : 6;
        const float* ap = a + static_cast<std::int64_t>(m0) * lda;
        float* cp = c + static_cast<std::int64_t>(m0) * ldc;
        std::int64_t n0 = 0;
        auto tile = [&](int mrr, int nv) {
            switch (mrr) {
                case 6: sgemm_nn_tile<6, 4>(0, n0, k, ap, lda, b, ldb, cp, ldc); break;
                case 5: sgemm_nn_tile<5, 4>(0, n0, k, ap, lda, b, ldb, cp, ldc); break;
                case 4: sgemm_nn_tile<4, 4>(0, n0, k, ap, lda, b, ldb, cp, ldc); break;
                case 3: sgemm_nn_tile<3, 4>(0, n0, k, ap, lda, b, ldb, cp, ldc); break;
                case 2: sgemm_nn_tile<2, 4>(0, n0, k, ap, lda, b, ldb, cp, ldc); break;
                default: sgemm_nn_tile<1, 4>(0, n0, k, ap, lda, b, ldb, cp, ldc); break;
            }
            (void)nv;
        };
        for (; n - n0 >= 64; n0 += 64) tile(mr, 4);
        for (; n0 < n; ++n0) {
            for (int i = 0; i < mr; ++i) {
                float acc = 0;
                for (int kk = 0; kk < k; ++kk)
                    acc += ap[static_cast<std::int64_t>(i) * lda + kk] *
                           b[static_cast<std::int64_t>(kk) * ldb + n0];
                cp[static_cast<std::int64_t>(i) * ldc + n0] = acc;
            }
        }
    }
}

#else
inline constexpr bool kHasSmallGemm = false;

inline void sconv3x3_image(int, int, int, int, const float*, const float*, std::int64_t,
                           const float*, float*, bool) {}
inline void sgemm_nt_taps(int, int, std::int64_t, int, const float*, const float*, float*) {}
inline void sgemm_nn(int, std::int64_t, int, const float*, int, const float*, std::int64_t,
                     float*, std::int64_t) {}
#endif

}  // namespace csda::detail

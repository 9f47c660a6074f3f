#include "csda/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "csda/ops.hpp"
#include "csda/rng.hpp"

namespace csda {

template <class T>
Tensor<T> soft_iou_loss(Tape<T>& tape, const Tensor<T>& pred, const Tensor<T>& gt,
                        const std::vector<double>& class_weights) {
    if (pred.rank() != 4 || gt.shape() != pred.shape())
        throw std::invalid_argument("soft_iou_loss: pred/gt must share an [N,C,H,W] shape");
    const int n = pred.dim(0), c = pred.dim(1);
    const std::int64_t hw = static_cast<std::int64_t>(pred.dim(2)) * pred.dim(3);
    if (static_cast<int>(class_weights.size()) != c)
        throw std::invalid_argument("soft_iou_loss: need one weight per class");

    // ground truth must be exactly one-hot
    const T* g = gt.data();
    for (int in = 0; in < n; ++in)
        for (std::int64_t px = 0; px < hw; ++px) {
            T colsum = 0;
            for (int ic = 0; ic < c; ++ic) {
                const T v = g[(static_cast<std::int64_t>(in) * c + ic) * hw + px];
                if (v != T(0) && v != T(1))
                    throw std::invalid_argument("soft_iou_loss: gt is not binary");
                colsum += v;
            }
            if (colsum != T(1))
                throw std::invalid_argument("soft_iou_loss: gt channel sums must be 1");
        }

    double wsum = 0;
    for (double w : class_weights) {
        if (w <= 0) throw std::invalid_argument("soft_iou_loss: weights must be positive");
        wsum += w;
    }

    // forward: loss = mean_n [ 1 - sum_c (w_c / wsum) * I_nc / U_nc ]
    const T* p = pred.data();
    std::vector<double> inter(static_cast<std::size_t>(n) * c),
        uni(static_cast<std::size_t>(n) * c);
    double loss_acc = 0;
    for (int in = 0; in < n; ++in) {
        double weighted = 0;
        for (int ic = 0; ic < c; ++ic) {
            const std::int64_t base = (static_cast<std::int64_t>(in) * c + ic) * hw;
            double i_acc = 0, u_acc = 0;
            for (std::int64_t px = 0; px < hw; ++px) {
                const double pv = p[base + px];
                const double gv = g[base + px];
                i_acc += pv * gv;
                u_acc += pv + gv - pv * gv;
            }
            inter[static_cast<std::size_t>(in * c + ic)] = i_acc;
            uni[static_cast<std::size_t>(in * c + ic)] = u_acc;
            weighted += class_weights[static_cast<std::size_t>(ic)] / wsum *
                        (u_acc > 0 ? i_acc / u_acc : 1.0);
        }
        loss_acc += 1.0 - weighted;
    }
    Tensor<T> out = Tensor<T>::zeros({});
    out.data()[0] = static_cast<T>(loss_acc / n);

    if (tape.recording() && pred.needs_grad()) {
        out.mark_needs_grad();
        tape.record([pred = pred, gt = gt, out = out, inter = std::move(inter),
                     uni = std::move(uni), class_weights, wsum, n, c, hw]() mutable {
            const T upstream = out.grad()[0];
            auto gp = pred.grad();
            const T* pp = pred.data();
            const T* gg = gt.data();
            for (int in = 0; in < n; ++in) {
                for (int ic = 0; ic < c; ++ic) {
                    const double i_acc = inter[static_cast<std::size_t>(in * c + ic)];
                    const double u_acc = uni[static_cast<std::size_t>(in * c + ic)];
                    if (u_acc <= 0) continue;
                    const double w = class_weights[static_cast<std::size_t>(ic)] / wsum;
                    const std::int64_t base = (static_cast<std::int64_t>(in) * c + ic) * hw;
                    const double inv_u = 1.0 / u_acc;
                    const double iu2 = i_acc * inv_u * inv_u;
                    for (std::int64_t px = 0; px < hw; ++px) {
                        const double gv = gg[base + px];
                        // d(I/U)/dp = (g*U - I*(1-g)) / U^2
                        const double d = gv * inv_u - (1.0 - gv) * iu2;
                        gp[base + px] += upstream * static_cast<T>(-w * d / n);
                    }
                }
            }
            (void)pp;
        });
    }
    return out;
}

template <class T>
Tensor<T> da_loss(Tape<T>& tape, const std::vector<Tensor<T>>& domain_probs,
                  const std::vector<int>& domains) {
    if (domain_probs.empty()) throw std::invalid_argument("da_loss: empty probability list");
    const auto n = static_cast<std::int64_t>(domains.size());
    for (const auto& t : domain_probs)
        if (t.numel() != n)
            throw std::invalid_argument("da_loss: probability tensor shape " +
                                        shape_str(t.shape()) + " does not match batch " +
                                        std::to_string(n));
    constexpr double kClamp = 1e-7;
    const auto d = static_cast<std::int64_t>(domain_probs.size());
    double acc = 0;
    for (const auto& t : domain_probs) {
        const T* p = t.data();
        for (std::int64_t i = 0; i < n; ++i) {
            const double pv = std::clamp(static_cast<double>(p[i]), kClamp, 1.0 - kClamp);
            const double y = domains[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
            acc += -(y * std::log(pv) + (1.0 - y) * std::log(1.0 - pv));
        }
    }
    Tensor<T> out = Tensor<T>::zeros({});
    out.data()[0] = static_cast<T>(acc / static_cast<double>(d * n));

    bool any = false;
    for (const auto& t : domain_probs) any = any || t.needs_grad();
    if (tape.recording() && any) {
        out.mark_needs_grad();
        tape.record([probs = domain_probs, ys = domains, out = out, d, n]() mutable {
            constexpr double kClamp = 1e-7;
            const T upstream = out.grad()[0];
            const double scale = 1.0 / static_cast<double>(d * n);
            for (auto& t : probs) {
                if (!t.needs_grad()) continue;
                auto g = t.grad();
                const T* p = t.data();
                for (std::int64_t i = 0; i < n; ++i) {
                    const double pv =
                        std::clamp(static_cast<double>(p[i]), kClamp, 1.0 - kClamp);
                    const double y = ys[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
                    g[static_cast<std::size_t>(i)] +=
                        upstream * static_cast<T>(scale * (-y / pv + (1.0 - y) / (1.0 - pv)));
                }
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> total_loss(Tape<T>& tape, const Tensor<T>* l_seg, const Tensor<T>& l_da, T alpha) {
    if (alpha <= T(0)) throw std::invalid_argument("total_loss: alpha must be > 0");
    if (!l_seg) return l_da;
    return add(tape, scale(tape, *l_seg, alpha), l_da);
}

template <class T>
Tensor<T> mse_loss(Tape<T>& tape, const Tensor<T>& pred, const Tensor<T>& target) {
    if (pred.shape() != target.shape())
        throw std::invalid_argument("mse_loss: shape mismatch");
    auto diff = sub(tape, pred, target);
    return mean(tape, mul(tape, diff, diff));
}

template <class T>
Tensor<T> one_hot_labels(const std::vector<const std::vector<std::uint8_t>*>& rasters,
                         int height, int width, int classes) {
    const int n = static_cast<int>(rasters.size());
    const std::int64_t hw = static_cast<std::int64_t>(height) * width;
    Tensor<T> out = Tensor<T>::zeros({n, classes, height, width});
    T* o = out.data();
    for (int in = 0; in < n; ++in) {
        const auto& r = *rasters[static_cast<std::size_t>(in)];
        if (static_cast<std::int64_t>(r.size()) != hw)
            throw std::invalid_argument("one_hot_labels: raster size mismatch");
        for (std::int64_t px = 0; px < hw; ++px) {
            const int cls = r[static_cast<std::size_t>(px)];
            if (cls >= classes)
                throw std::invalid_argument("one_hot_labels: class id " + std::to_string(cls) +
                                            " out of range");
            o[(static_cast<std::int64_t>(in) * classes + cls) * hw + px] = T(1);
        }
    }
    return out;
}

double iou_metric(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt,
                  std::uint8_t cls) {
    if (pred.size() != gt.size())
        throw std::invalid_argument("iou_metric: raster size mismatch");
    std::int64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool a = pred[i] == cls, b = gt[i] == cls;
        inter += a && b;
        uni += a || b;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::pair<double, double> gp_distance(PixelPoint pred, const std::vector<PixelPoint>& gt_points,
                                      double cm_per_px) {
    if (gt_points.empty())
        throw std::invalid_argument("gp_distance: ground-truth point set is empty");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : gt_points) {
        const double dr = pred.row - g.row, dc = pred.col - g.col;
        best = std::min(best, std::sqrt(dr * dr + dc * dc));
    }
    return {best, best * cm_per_px};
}

PixelPoint centre_baseline(const std::vector<std::uint8_t>& labels, int height, int width) {
    double mr = 0, mc = 0, n = 0;
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c)
            if (labels[static_cast<std::size_t>(r) * width + c] != 0) {
                mr += r;
                mc += c;
                n += 1;
            }
    if (n == 0) throw std::invalid_argument("centre_baseline: empty foreground");
    mr /= n;
    mc /= n;
    // snap to the nearest foreground pixel
    PixelPoint best{0, 0};
    double best_d = std::numeric_limits<double>::infinity();
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c)
            if (labels[static_cast<std::size_t>(r) * width + c] != 0) {
                const double d = (r - mr) * (r - mr) + (c - mc) * (c - mc);
                if (d < best_d) {
                    best_d = d;
                    best = {r, c};
                }
            }
    return best;
}

PixelPoint random_baseline(const std::vector<std::uint8_t>& labels, int height, int width,
                           std::uint64_t seed) {
    std::vector<PixelPoint> fg;
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c)
            if (labels[static_cast<std::size_t>(r) * width + c] != 0) fg.push_back({r, c});
    if (fg.empty()) throw std::invalid_argument("random_baseline: empty foreground");
    Rng rng(derive_seed(seed, 0x726e6470ull /*rndp*/));
    return fg[static_cast<std::size_t>(rng.uniform_index(fg.size()))];
}

const char* EvalReport::csv_header() {
    return "regime,background_iou,body_iou,top_iou,middle_iou,bottom_iou,edges_iou,gp_px,gp_cm,n";
}

std::string EvalReport::csv_row() const {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed;
    os << regime << "," << background_iou << "," << body_iou << ",";
    if (mode == EvalMode::fine_grained)
        os << top_iou << "," << middle_iou << "," << bottom_iou << ",,";
    else
        os << ",,," << edges_iou << ",";
    os << gp_px << "," << gp_cm << "," << n;
    return os.str();
}

#define CSDA_INSTANTIATE_LOSSES(T)                                                          \
    template Tensor<T> soft_iou_loss(Tape<T>&, const Tensor<T>&, const Tensor<T>&,          \
                                     const std::vector<double>&);                           \
    template Tensor<T> da_loss(Tape<T>&, const std::vector<Tensor<T>>&,                     \
                               const std::vector<int>&);                                    \
    template Tensor<T> total_loss(Tape<T>&, const Tensor<T>*, const Tensor<T>&, T);         \
    template Tensor<T> mse_loss(Tape<T>&, const Tensor<T>&, const Tensor<T>&);              \
    template Tensor<T> one_hot_labels(const std::vector<const std::vector<std::uint8_t>*>&, \
                                      int, int, int);

CSDA_INSTANTIATE_LOSSES(float)
CSDA_INSTANTIATE_LOSSES(double)
#undef CSDA_INSTANTIATE_LOSSES

}  // namespace csda

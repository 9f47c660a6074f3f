#include "csda/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "csda/rng.hpp"

namespace csda {

DepthSample minmax_normalize(const DepthSample& sample) {
    float lo = 0, hi = 0;
    bool any = false;
    for (std::size_t i = 0; i < sample.depth.size(); ++i) {
        if (sample.labels[i] == 0) continue;
        const float d = sample.depth[i];
        if (!any) {
            lo = hi = d;
            any = true;
        } else {
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
    }
    if (!any) throw std::invalid_argument("minmax_normalize: all-background sample");
    DepthSample out = sample;
    const float range = hi - lo;
    for (std::size_t i = 0; i < out.depth.size(); ++i) {
        if (out.labels[i] == 0) continue;
        out.depth[i] = range > 0 ? (out.depth[i] - lo) / range : 0.5f;
    }
    return out;
}

std::array<double, 4> mean_foreground_covariance(const std::vector<DepthSample>& samples) {
    if (samples.empty())
        throw std::invalid_argument("mean_foreground_covariance: empty dataset");
    std::array<double, 4> acc{0, 0, 0, 0};
    for (const auto& s : samples) {
        double mr = 0, mc = 0, n = 0;
        for (int r = 0; r < s.height; ++r)
            for (int c = 0; c < s.width; ++c)
                if (s.label_at(r, c) != 0) {
                    mr += r;
                    mc += c;
                    n += 1;
                }
        if (n == 0) throw std::invalid_argument("mean_foreground_covariance: empty foreground");
        mr /= n;
        mc /= n;
        double vrr = 0, vcc = 0, vrc = 0;
        for (int r = 0; r < s.height; ++r)
            for (int c = 0; c < s.width; ++c)
                if (s.label_at(r, c) != 0) {
                    vrr += (r - mr) * (r - mr);
                    vcc += (c - mc) * (c - mc);
                    vrc += (r - mr) * (c - mc);
                }
        acc[0] += vrr / n;
        acc[1] += vrc / n;
        acc[2] += vrc / n;
        acc[3] += vcc / n;
    }
    for (auto& v : acc) v /= static_cast<double>(samples.size());
    return acc;
}

namespace {

// Eigenvalues of a symmetric 2x2 matrix, descending.
std::pair<double, double> sym_eigenvalues(const std::array<double, 4>& m) {
    const double tr = m[0] + m[3];
    const double det = m[0] * m[3] - m[1] * m[2];
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
    return {tr / 2.0 + disc, tr / 2.0 - disc};
}

}  // namespace

std::pair<double, double> covariance_scale_factors(const std::vector<DepthSample>& synthetic,
                                                   const std::vector<DepthSample>& reference) {
    const auto cs = mean_foreground_covariance(synthetic);
    const auto cr = mean_foreground_covariance(reference);
    const auto [s1, s2] = sym_eigenvalues(cs);
    const auto [r1, r2] = sym_eigenvalues(cr);
    if (s2 <= 1e-12 || r2 <= 1e-12)
        throw std::invalid_argument("covariance_scale_factors: singular averaged covariance");
    return {std::sqrt(r1) / std::sqrt(s1), std::sqrt(r2) / std::sqrt(s2)};
}

DepthSample rescale(const DepthSample& sample, double s_vertical, double s_horizontal) {
    if (s_vertical <= 0 || s_horizontal <= 0)
        throw std::invalid_argument("rescale: factors must be > 0");
    double mr = 0, mc = 0, n = 0;
    for (int r = 0; r < sample.height; ++r)
        for (int c = 0; c < sample.width; ++c)
            if (sample.label_at(r, c) != 0) {
                mr += r;
                mc += c;
                n += 1;
            }
    if (n == 0) throw std::invalid_argument("rescale: empty foreground");
    mr /= n;
    mc /= n;

    DepthSample out = sample;
    std::fill(out.depth.begin(), out.depth.end(), 0.0f);
    std::fill(out.labels.begin(), out.labels.end(), 0);
    std::size_t fg = 0;
    for (int r = 0; r < sample.height; ++r) {
        for (int c = 0; c < sample.width; ++c) {
            // inverse map: source pixel feeding this output pixel
            const long sr = std::lround(mr + (r - mr) / s_vertical);
            const long sc = std::lround(mc + (c - mc) / s_horizontal);
            if (sr < 0 || sr >= sample.height || sc < 0 || sc >= sample.width) continue;
            const auto l = sample.label_at(static_cast<int>(sr), static_cast<int>(sc));
            if (l == 0) continue;
            out.label_at(r, c) = l;
            out.depth_at(r, c) = sample.depth_at(static_cast<int>(sr), static_cast<int>(sc));
            ++fg;
        }
    }
    if (fg < 10)
        throw std::invalid_argument("rescale: fewer than 10 foreground pixels after scaling");
    return out;
}

namespace {

DepthSample remap_nearest(const DepthSample& src, double m00, double m01, double m10,
                          double m11, double cr, double cc) {
    // output(r,c) = src(M * (r-cr, c-cc) + (cr, cc)), rounding nearest
    DepthSample out = src;
    std::fill(out.depth.begin(), out.depth.end(), 0.0f);
    std::fill(out.labels.begin(), out.labels.end(), 0);
    for (int r = 0; r < src.height; ++r) {
        for (int c = 0; c < src.width; ++c) {
            const double dr = r - cr, dc = c - cc;
            const long sr = std::lround(m00 * dr + m01 * dc + cr);
            const long sc = std::lround(m10 * dr + m11 * dc + cc);
            if (sr < 0 || sr >= src.height || sc < 0 || sc >= src.width) continue;
            out.depth_at(r, c) = src.depth_at(static_cast<int>(sr), static_cast<int>(sc));
            out.label_at(r, c) = src.label_at(static_cast<int>(sr), static_cast<int>(sc));
        }
    }
    return out;
}

}  // namespace

DepthSample hflip_sample(const DepthSample& sample) {
    DepthSample out = sample;
    for (int r = 0; r < out.height; ++r)
        for (int c = 0; c < out.width / 2; ++c) {
            std::swap(out.depth_at(r, c), out.depth_at(r, out.width - 1 - c));
            std::swap(out.label_at(r, c), out.label_at(r, out.width - 1 - c));
        }
    return out;
}

DepthSample rotate_sample(const DepthSample& sample, double theta_deg) {
    constexpr double kPi = 3.14159265358979323846;
    const double theta = theta_deg * kPi / 180.0;
    const double ct = std::cos(theta), st = std::sin(theta);
    // inverse rotation about the image centre; exact identity at theta = 0
    return remap_nearest(sample, ct, -st, st, ct, (sample.height - 1) / 2.0,
                         (sample.width - 1) / 2.0);
}

DepthSample crop_resize_sample(const DepthSample& sample, double scale, int row0, int col0) {
    const int ch = std::max(1, static_cast<int>(std::lround(sample.height * scale)));
    const int cw = std::max(1, static_cast<int>(std::lround(sample.width * scale)));
    if (row0 < 0 || col0 < 0 || row0 + ch > sample.height || col0 + cw > sample.width)
        throw std::invalid_argument("crop_resize_sample: window out of bounds");
    DepthSample out = sample;
    std::fill(out.depth.begin(), out.depth.end(), 0.0f);
    std::fill(out.labels.begin(), out.labels.end(), 0);
    for (int r = 0; r < sample.height; ++r) {
        for (int c = 0; c < sample.width; ++c) {
            const long sr = row0 + std::lround(static_cast<double>(r) * (ch - 1) /
                                               std::max(1, sample.height - 1));
            const long sc = col0 + std::lround(static_cast<double>(c) * (cw - 1) /
                                               std::max(1, sample.width - 1));
            out.depth_at(r, c) = sample.depth_at(static_cast<int>(sr), static_cast<int>(sc));
            out.label_at(r, c) = sample.label_at(static_cast<int>(sr), static_cast<int>(sc));
        }
    }
    return out;
}

DepthSample augment(const DepthSample& sample, const AugmentOps& ops, std::uint64_t seed) {
    for (int attempt = 0; attempt < 6; ++attempt) {
        Rng rng(derive_seed(seed, 0x61756700ull /*aug*/, static_cast<std::uint64_t>(attempt)));
        DepthSample out = sample;
        if (ops.hflip && rng.uniform() < 0.5) out = hflip_sample(out);
        if (ops.rotate) out = rotate_sample(out, rng.uniform(-15.0, 15.0));
        if (ops.crop_resize) {
            const double scale = rng.uniform(0.85, 1.0);
            const int ch = std::max(1, static_cast<int>(std::lround(out.height * scale)));
            const int cw = std::max(1, static_cast<int>(std::lround(out.width * scale)));
            const int r0 = static_cast<int>(
                rng.uniform_index(static_cast<std::uint64_t>(out.height - ch + 1)));
            const int c0 = static_cast<int>(
                rng.uniform_index(static_cast<std::uint64_t>(out.width - cw + 1)));
            out = crop_resize_sample(out, scale, r0, c0);
        }
        if (out.foreground_count() > 0) return out;
    }
    throw std::runtime_error("augment: crop removed all foreground after 5 retries");
}

std::vector<double> class_weights(const std::vector<std::int64_t>& counts) {
    const int c = static_cast<int>(counts.size());
    if (c == 0) throw std::invalid_argument("class_weights: no classes");
    std::int64_t total = 0;
    for (int i = 0; i < c; ++i) {
        if (counts[static_cast<std::size_t>(i)] <= 0)
            throw std::invalid_argument("class_weights: class " + std::to_string(i) +
                                        " absent from the training split");
        total += counts[static_cast<std::size_t>(i)];
    }
    std::vector<double> w(static_cast<std::size_t>(c));
    for (int i = 0; i < c; ++i)
        w[static_cast<std::size_t>(i)] =
            static_cast<double>(total) /
            (static_cast<double>(c) * static_cast<double>(counts[static_cast<std::size_t>(i)]));
    const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(c);
    for (auto& v : w) v /= mean;
    return w;
}

SplitAssignment make_splits(const std::vector<int>& hang_config_ids, double test_fraction,
                            std::uint64_t seed) {
    if (hang_config_ids.size() < 2)
        throw std::invalid_argument("make_splits: need at least 2 hang configs");
    if (test_fraction <= 0.0 || test_fraction >= 1.0)
        throw std::invalid_argument("make_splits: test_fraction must be in (0,1)");
    std::vector<int> ids = hang_config_ids;
    // seeded Fisher-Yates
    Rng rng(derive_seed(seed, 0x73706c74ull /*splt*/));
    for (std::size_t i = ids.size() - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_index(i + 1));
        std::swap(ids[i], ids[j]);
    }
    auto n_test = static_cast<std::size_t>(
        std::lround(test_fraction * static_cast<double>(ids.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, ids.size() - 1);
    SplitAssignment split;
    split.test_configs.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train_configs.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test), ids.end());
    std::sort(split.test_configs.begin(), split.test_configs.end());
    std::sort(split.train_configs.begin(), split.train_configs.end());
    return split;
}

Dataset Dataset::load(const std::filesystem::path& manifest_path, const std::string& split) {
    const auto entries = load_manifest(manifest_path);
    const auto dir = manifest_path.parent_path();
    Dataset ds;
    for (const auto& e : entries) {
        if (!split.empty() && e.split != split) continue;
        ds.samples_.push_back(load_dsmp(dir / e.path));
    }
    return ds;
}

void Dataset::add(DepthSample sample) { samples_.push_back(std::move(sample)); }

const std::vector<std::uint8_t>& Dataset::labels_of(std::size_t i) const {
    label_reads_[static_cast<std::size_t>(samples_[i].domain)]++;
    return samples_[i].labels;
}

std::vector<std::int64_t> Dataset::class_pixel_counts() const {
    std::vector<std::int64_t> counts(kClassCount, 0);
    for (std::size_t i = 0; i < samples_.size(); ++i)
        for (std::uint8_t l : labels_of(i)) counts[l]++;
    return counts;
}

}  // namespace csda

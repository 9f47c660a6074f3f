#include "csda/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "csda/rng.hpp"

namespace csda {

DepthSample apply_sensor_model(const DepthSample& sample, SensorProfile profile,
                               std::uint64_t seed, const SensorParams& params) {
    if (profile == SensorProfile::clean) return sample;
    if (sample.domain != Domain::synthetic)
        throw std::invalid_argument("apply_sensor_model: sample is already domain-shifted");

    DepthSample out = sample;
    out.domain = Domain::surrogate_real;
    const int w = sample.width, h = sample.height;

    // Gradient magnitude of the clean depth per foreground pixel; background
    // neighbours count as a large step so silhouettes rank first, mimicking
    // grazing-angle dropout.
    std::vector<std::size_t> fg;
    std::vector<double> weight;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * w + x;
            if (sample.labels[idx] == 0) continue;
            const double d = sample.depth[idx];
            double g = 0;
            const int nx[4] = {x - 1, x + 1, x, x};
            const int ny[4] = {y, y, y - 1, y + 1};
            for (int k = 0; k < 4; ++k) {
                if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) {
                    g = std::max(g, d);
                    continue;
                }
                const float nd = sample.depth_at(ny[k], nx[k]);
                g = std::max(g, nd == 0.0f ? d : std::abs(d - nd));
            }
            fg.push_back(idx);
            weight.push_back(g);
        }
    }

    Rng rng(derive_seed(seed, 0x73656e73ull /*sens*/));
    for (std::size_t i = 0; i < fg.size(); ++i) {
        double d = out.depth[fg[i]] + rng.normal(0.0, params.noise_sigma_m);
        d = std::round(d / params.quant_step_m) * params.quant_step_m;
        d = std::clamp(d, params.min_depth_m, params.max_depth_m);
        out.depth[fg[i]] = static_cast<float>(d);
    }

    // Weighted sampling without replacement via exponential race keys: the K
    // smallest -log(u)/w win. Zero-gradient frames degrade to uniform.
    const auto drop = static_cast<std::size_t>(
        std::llround(params.dropout_fraction * static_cast<double>(fg.size())));
    if (drop > 0 && !fg.empty()) {
        std::vector<std::pair<double, std::size_t>> keys(fg.size());
        for (std::size_t i = 0; i < fg.size(); ++i) {
            const double u = std::max(rng.uniform(), 0x1.0p-53);
            const double wgt = weight[i] + 1e-12;
            keys[i] = {-std::log(u) / wgt, fg[i]};
        }
        const std::size_t k = std::min(drop, keys.size());
        std::nth_element(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(k - 1),
                         keys.end());
        for (std::size_t i = 0; i < k; ++i) {
            out.depth[keys[i].second] = 0.0f;
            out.labels[keys[i].second] = 0;
        }
    }
    return out;
}

}  // namespace csda

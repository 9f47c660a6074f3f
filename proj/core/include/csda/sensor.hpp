#pragma once

#include <cstdint>

#include "csda/depth_sample.hpp"

namespace csda {

enum class SensorProfile { clean, surrogate_real };

struct SensorParams {
    double noise_sigma_m = 0.004;  // gaussian depth noise
    double quant_step_m = 0.001;   // depth quantisation
    double dropout_fraction = 0.02;  // foreground pixels dropped at high-gradient edges
    double min_depth_m = 0.1;
    double max_depth_m = 5.0;
};

// The domain-shift model standing in for a real depth camera. `clean` returns
// the sample unchanged; `surrogate_real` perturbs foreground depths with
// seeded gaussian noise, quantises them, drops a fraction of foreground
// pixels preferring high depth-gradient (silhouette/grazing) locations, and
// retags the sample. Rejects samples that were already shifted.
DepthSample apply_sensor_model(const DepthSample& sample, SensorProfile profile,
                               std::uint64_t seed, const SensorParams& params = {});

}  // namespace csda

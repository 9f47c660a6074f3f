#pragma once

// Central finite-difference gradient oracle. Runs the forward function twice
// per probed entry at +/-step and compares the quotient against the analytic
// gradient delivered by Tape::backward. Independent of any backward rule by
// construction: it only ever calls the forward path.

#include <cmath>
#include <functional>
#include <vector>

#include "csda/tensor.hpp"

namespace csda::testing {

struct FdReport {
    double max_rel_err = 0.0;
    int checked = 0;
};

// forward: builds a fresh graph on the given tape and returns the scalar loss.
// params: leaf tensors whose analytic gradients are checked (all entries, or
// a sample of at most max_probes, stride-sampled deterministically).
inline FdReport fd_check(const std::function<TensorD(Tape<double>&)>& forward,
                         std::vector<TensorD> params, double step = 1e-4,
                         int max_probes = 1 << 30) {
    Tape<double> tape;
    TensorD loss = forward(tape);
    for (auto& p : params) p.zero_grad();
    tape.backward(loss);

    FdReport rep;
    for (auto& p : params) {
        auto analytic = std::vector<double>(p.grad().begin(), p.grad().end());
        const std::int64_t n = p.numel();
        const std::int64_t stride = std::max<std::int64_t>(1, n / max_probes);
        for (std::int64_t i = 0; i < n; i += stride) {
            const double saved = p.data()[i];
            p.data()[i] = saved + step;
            Tape<double> t1(false);
            const double up = forward(t1).scalar();
            p.data()[i] = saved - step;
            Tape<double> t2(false);
            const double dn = forward(t2).scalar();
            p.data()[i] = saved;
            const double numeric = (up - dn) / (2.0 * step);
            const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8});
            rep.max_rel_err = std::max(rep.max_rel_err, std::abs(numeric - analytic[i]) / denom);
            ++rep.checked;
        }
    }
    return rep;
}

}  // namespace csda::testing

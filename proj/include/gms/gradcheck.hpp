#pragma once

#include <functional>

#include "gms/ops.hpp"

namespace gms {

struct GradCheckOptions {
    double h = 1e-5;                   // central-difference step
    size_t max_coords_per_input = 0;   // 0 = check every element
    uint64_t seed = 12345;             // coordinate subsampling stream
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    size_t coords_checked = 0;
    size_t inputs_skipped = 0;  // requires_grad=false inputs
};

// Compares backward() gradients against central finite differences, element
// by element. Relative error uses max(1,|analytic|,|fd|) as denominator so
// near-zero gradients are judged on absolute error. Requires 64-bit tensors;
// reports, never asserts.
inline GradCheckReport grad_check(const std::function<Tensor<double>()>& fn,
                                  const std::vector<Tensor<double>>& inputs,
                                  GradCheckOptions opts = {}) {
    GradCheckReport report;
    Tensor<double> loss = fn();
    if (loss.numel() != 1) throw UsageError("grad_check: fn must return a scalar");
    GradMap<double> gm = backward(loss);
    Rng rng(opts.seed);

    for (const Tensor<double>& input : inputs) {
        if (!input.requires_grad()) {
            ++report.inputs_skipped;
            continue;
        }
        const std::vector<double>& analytic = gm.grad_values(input);
        std::vector<size_t> coords(input.numel());
        for (size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        if (opts.max_coords_per_input > 0 && coords.size() > opts.max_coords_per_input) {
            rng.shuffle(coords);
            coords.resize(opts.max_coords_per_input);
        }
        Tensor<double> probe = input;  // shares storage; leaf mutation is legal between graphs
        for (size_t c : coords) {
            const double saved = probe.data()[c];
            double fplus, fminus;
            {
                NoGradGuard ng;
                probe.data()[c] = saved + opts.h;
                fplus = fn().item();
                probe.data()[c] = saved - opts.h;
                fminus = fn().item();
            }
            probe.data()[c] = saved;
            const double fd = (fplus - fminus) / (2.0 * opts.h);
            const double a = analytic[c];
            const double denom = std::max({1.0, std::abs(a), std::abs(fd)});
            report.max_rel_err = std::max(report.max_rel_err, std::abs(a - fd) / denom);
            ++report.coords_checked;
        }
    }
    return report;
}

}  // namespace gms

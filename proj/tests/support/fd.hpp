#pragma once

// Central finite-difference gradient oracle. Lives in test code and stays
// independent of the tape's backward pass: expected derivatives come from two
// forward evaluations per coordinate. Probes whose branch signature (ReLU
// masks, argmax/nearest-neighbor choices) differs from the base evaluation
// crossed a kink and are skipped rather than compared.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace lila::test {

using Params = std::vector<std::vector<double>>;

struct FdReport {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;
};

// loss_fn(params, &signature) -> loss; grad_fn(params) -> per-array gradients.
inline FdReport fd_check(Params params,
                         const std::function<double(Params&, std::uint64_t*)>& loss_fn,
                         const std::function<Params(Params&)>& grad_fn, double h = 1e-5) {
    std::uint64_t base_sig = 0;
    loss_fn(params, &base_sig);
    const Params grads = grad_fn(params);

    FdReport report;
    for (std::size_t i = 0; i < params.size(); ++i) {
        for (std::size_t j = 0; j < params[i].size(); ++j) {
            const double orig = params[i][j];
            std::uint64_t sig_plus = 0, sig_minus = 0;
            params[i][j] = orig + h;
            const double f_plus = loss_fn(params, &sig_plus);
            params[i][j] = orig - h;
            const double f_minus = loss_fn(params, &sig_minus);
            params[i][j] = orig;
            if (sig_plus != base_sig || sig_minus != base_sig) {
                ++report.skipped;
                continue;
            }
            const double fd = (f_plus - f_minus) / (2.0 * h);
            const double analytic = grads[i][j];
            const double denom = std::max({std::abs(analytic), std::abs(fd), 1e-3});
            report.max_rel_err = std::max(report.max_rel_err, std::abs(analytic - fd) / denom);
            ++report.checked;
        }
    }
    return report;
}

}  // namespace lila::test

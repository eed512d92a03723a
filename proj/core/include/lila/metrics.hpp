#pragma once

#include <span>
#include <string>
#include <vector>

#include "lila/common.hpp"
#include "lila/kdtree.hpp"

namespace lila::metrics {

// Symmetric mean of squared nearest-neighbor distances:
//   (1/|X|) sum_x min_r |x-r|^2 + (1/|R|) sum_r min_x |r-x|^2.
double chamfer(std::span<const Vec3> x, std::span<const Vec3> r);

// Same value via KdTree queries; agrees with chamfer() to 1e-9 relative.
double chamfer_accelerated(std::span<const Vec3> x, std::span<const Vec3> r);

// Minimum over bijections of the mean Euclidean (unsquared) distance,
// computed by the Hungarian algorithm. Requires |x| == |r| <= cap.
double emd_exact(std::span<const Vec3> x, std::span<const Vec3> r, std::size_t cap = 1024);

// Exhaustive minimum over all bijections; oracle-sized inputs only (n <= 8).
double emd_bruteforce(std::span<const Vec3> x, std::span<const Vec3> r);

struct EmdApproxResult {
    double value = 0.0;       // mean cost of the best assignment found
    double epsilon = 0.0;     // final auction epsilon
    bool converged = true;
};

class BudgetError : public RuntimeError {
public:
    BudgetError(const std::string& what, double partial)
        : RuntimeError(what), partial_value_(partial) {}
    double partial_value() const { return partial_value_; }

private:
    double partial_value_;
};

// Auction assignment with epsilon scaling. The reported value is the mean
// cost of a complete assignment, so it upper-bounds emd_exact; the schedule
// is a deterministic prefix extension, which makes the value non-increasing
// as target_epsilon decreases. Throws BudgetError (carrying the best partial
// value) when the bid budget runs out.
EmdApproxResult emd_approx(std::span<const Vec3> x, std::span<const Vec3> r,
                           double target_epsilon = 0.0,
                           std::size_t max_bids_per_stage = 0);

enum class EmdMode { exact, approx };

struct MetricReport {
    double cd = 0.0;
    double emd = 0.0;
    EmdMode emd_mode = EmdMode::exact;
    double wall_time_s = 0.0;
};

// Chamfer plus EMD (exact under the cap, auction above it), with timing.
MetricReport evaluate_pair(std::span<const Vec3> x, std::span<const Vec3> r,
                           std::size_t exact_cap = 1024);

std::string report_to_json(const MetricReport& report);

}  // namespace lila::metrics

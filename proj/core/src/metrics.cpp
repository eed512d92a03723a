#include "lila/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

namespace lila::metrics {

namespace {

constexpr double kInf = std::numeric_limits<double>::max();

void check_nonempty(std::span<const Vec3> x, std::span<const Vec3> r) {
    if (x.empty() || r.empty()) throw RuntimeError("metric on empty point set");
}

double max_pair_extent(std::span<const Vec3> x, std::span<const Vec3> r) {
    Vec3 lo{kInf, kInf, kInf}, hi{-kInf, -kInf, -kInf};
    auto absorb = [&](const Vec3& p) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    };
    for (const Vec3& p : x) absorb(p);
    for (const Vec3& p : r) absorb(p);
    return (hi - lo).norm();
}

}  // namespace

double chamfer(std::span<const Vec3> x, std::span<const Vec3> r) {
    check_nonempty(x, r);
    double sum_x = 0.0;
    for (const Vec3& p : x) {
        double best = kInf;
        for (const Vec3& q : r) best = std::min(best, dist2(p, q));
        sum_x += best;
    }
    double sum_r = 0.0;
    for (const Vec3& q : r) {
        double best = kInf;
        for (const Vec3& p : x) best = std::min(best, dist2(p, q));
        sum_r += best;
    }
    return sum_x / static_cast<double>(x.size()) + sum_r / static_cast<double>(r.size());
}

double chamfer_accelerated(std::span<const Vec3> x, std::span<const Vec3> r) {
    check_nonempty(x, r);
    const KdTree tree_r(r);
    const KdTree tree_x(x);
    double sum_x = 0.0;
    for (const Vec3& p : x) sum_x += tree_r.nearest(p).dist2;
    double sum_r = 0.0;
    for (const Vec3& q : r) sum_r += tree_x.nearest(q).dist2;
    return sum_x / static_cast<double>(x.size()) + sum_r / static_cast<double>(r.size());
}

double emd_exact(std::span<const Vec3> x, std::span<const Vec3> r, std::size_t cap) {
    check_nonempty(x, r);
    if (x.size() != r.size())
        throw RuntimeError("EMD requires equal cardinality (" + std::to_string(x.size()) +
                           " vs " + std::to_string(r.size()) + ")");
    const std::size_t n = x.size();
    if (n > cap)
        throw RuntimeError("emd_exact cap of " + std::to_string(cap) +
                           " exceeded; use emd_approx");

    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = (x[i] - r[j]).norm();

    // Hungarian algorithm with row/column potentials, O(n^3).
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        minv.assign(n + 1, kInf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = match[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    double total = 0.0;
    for (std::size_t j = 1; j <= n; ++j) total += cost[(match[j] - 1) * n + (j - 1)];
    return total / static_cast<double>(n);
}

double emd_bruteforce(std::span<const Vec3> x, std::span<const Vec3> r) {
    check_nonempty(x, r);
    if (x.size() != r.size()) throw RuntimeError("EMD requires equal cardinality");
    const std::size_t n = x.size();
    if (n > 8) throw RuntimeError("emd_bruteforce caps at n = 8");

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = kInf;
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += (x[i] - r[perm[i]]).norm();
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(n);
}

EmdApproxResult emd_approx(std::span<const Vec3> x, std::span<const Vec3> r,
                           double target_epsilon, std::size_t max_bids_per_stage) {
    check_nonempty(x, r);
    if (x.size() != r.size()) throw RuntimeError("EMD requires equal cardinality");
    const std::size_t n = x.size();
    if (n == 1) return {(x[0] - r[0]).norm(), 0.0, true};

    const double scale = std::max(max_pair_extent(x, r), 1e-30);
    if (max_bids_per_stage == 0) max_bids_per_stage = 500 * n + 100000;
    const double eps_floor = std::max(target_epsilon, scale * 1e-7);

    std::vector<double> price(n, 0.0);
    std::vector<int> owner(n, -1);     // object -> person
    std::vector<int> assigned(n, -1);  // person -> object
    auto cost = [&](std::size_t i, std::size_t j) { return (x[i] - r[j]).norm(); };

    double best_value = kInf;
    bool have_complete = false;
    double eps = scale * 0.25;
    double final_eps = eps;

    // Epsilon scaling. Each stage restarts the assignment but keeps prices,
    // so later stages converge quickly from near-optimal duals.
    while (true) {
        final_eps = eps;
        std::fill(owner.begin(), owner.end(), -1);
        std::fill(assigned.begin(), assigned.end(), -1);
        std::size_t unassigned = n;
        std::size_t bids = 0;

        std::vector<std::size_t> queue(n);
        std::iota(queue.begin(), queue.end(), 0);
        std::size_t head = 0;

        while (unassigned > 0) {
            if (++bids > max_bids_per_stage) {
                double partial;
                if (have_complete) {
                    partial = best_value;
                } else {
                    double total = 0.0;
                    std::size_t count = 0;
                    for (std::size_t i = 0; i < n; ++i)
                        if (assigned[i] >= 0) {
                            total += cost(i, static_cast<std::size_t>(assigned[i]));
                            ++count;
                        }
                    partial = count > 0 ? total / static_cast<double>(count) : 0.0;
                }
                throw BudgetError("emd_approx exceeded its bid budget", partial);
            }
            if (head == queue.size()) head = 0;
            const std::size_t i = queue[head++];
            if (assigned[i] >= 0) continue;

            // Best and second-best net value for person i (value = -cost - price).
            double best_v = -kInf, second_v = -kInf;
            std::size_t best_j = 0;
            for (std::size_t j = 0; j < n; ++j) {
                const double v = -cost(i, j) - price[j];
                if (v > best_v) {
                    second_v = best_v;
                    best_v = v;
                    best_j = j;
                } else if (v > second_v) {
                    second_v = v;
                }
            }
            price[best_j] += best_v - second_v + eps;
            if (owner[best_j] >= 0) {
                assigned[static_cast<std::size_t>(owner[best_j])] = -1;
                ++unassigned;
            }
            owner[best_j] = static_cast<int>(i);
            assigned[i] = static_cast<int>(best_j);
            --unassigned;
        }

        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += cost(i, static_cast<std::size_t>(assigned[i]));
        const double value = total / static_cast<double>(n);
        const bool plateau = have_complete && eps <= scale * 1e-4 &&
                             std::abs(value - best_value) <= std::max(1e-12, 1e-6 * best_value);
        best_value = std::min(best_value, value);
        have_complete = true;

        if (eps <= eps_floor || plateau) break;
        eps /= 5.0;
    }
    return {best_value, final_eps, true};
}

MetricReport evaluate_pair(std::span<const Vec3> x, std::span<const Vec3> r,
                           std::size_t exact_cap) {
    const auto start = std::chrono::steady_clock::now();
    MetricReport report;
    report.cd = chamfer_accelerated(x, r);
    if (x.size() == r.size() && x.size() <= exact_cap) {
        report.emd = emd_exact(x, r, exact_cap);
        report.emd_mode = EmdMode::exact;
    } else {
        report.emd = emd_approx(x, r).value;
        report.emd_mode = EmdMode::approx;
    }
    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::string report_to_json(const MetricReport& report) {
    nlohmann::json j;
    j["cd"] = report.cd;
    j["emd"] = report.emd;
    j["emd_mode"] = report.emd_mode == EmdMode::exact ? "exact" : "approx";
    j["wall_time_s"] = report.wall_time_s;
    return j.dump(2);
}

}  // namespace lila::metrics

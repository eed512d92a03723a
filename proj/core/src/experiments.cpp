#include "lila/experiments.hpp"

#include <cstdio>

namespace lila::train {
namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out =
        "variant,cd_true_latent,emd_true_latent,cd_random_latent,emd_random_latent,"
        "param_count\n";
    for (const auto& r : rows) {
        out += std::string(net::to_string(r.variant)) + "," + num(r.cd_true) + "," +
               num(r.emd_true) + "," + num(r.cd_random) + "," + num(r.emd_random) + "," +
               std::to_string(r.param_count) + "\n";
    }
    return out;
}

std::string fraction_summary_csv(const std::vector<FractionRow>& rows) {
    std::string out =
        "fraction,cd_mean,cd_median,cd_q1,cd_q3,cd_outliers,emd_mean,emd_median,emd_q1,"
        "emd_q3,emd_outliers\n";
    for (const auto& r : rows) {
        out += num(r.fraction) + "," + num(r.cd.mean) + "," + num(r.cd.median) + "," +
               num(r.cd.q1) + "," + num(r.cd.q3) + "," + std::to_string(r.cd.outliers) + "," +
               num(r.emd.mean) + "," + num(r.emd.median) + "," + num(r.emd.q1) + "," +
               num(r.emd.q3) + "," + std::to_string(r.emd.outliers) + "\n";
    }
    return out;
}

std::string fraction_runs_csv(const std::vector<FractionRow>& rows) {
    std::string out = "fraction,repeat,cd,emd\n";
    for (const auto& r : rows)
        for (std::size_t rep = 0; rep < r.cd_runs.size(); ++rep)
            out += num(r.fraction) + "," + std::to_string(rep) + "," + num(r.cd_runs[rep]) +
                   "," + num(r.emd_runs[rep]) + "\n";
    return out;
}

std::string cloud_size_csv(const std::vector<CloudSizeRow>& rows) {
    std::string out = "M,inference_time_ms,cd,emd\n";
    for (const auto& r : rows)
        out += std::to_string(r.cloud_size) + "," + num(r.inference_time_ms) + "," +
               num(r.cd) + "," + num(r.emd) + "\n";
    return out;
}

}  // namespace lila::train

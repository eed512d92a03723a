#include "lila/train.hpp"

namespace lila::train {

std::pair<geo::DatasetManifest, geo::DatasetManifest> split_dataset(
    const geo::DatasetManifest& manifest, double fraction, std::uint64_t seed) {
    manifest.validate();
    if (manifest.entries.empty()) throw RuntimeError("cannot split an empty manifest");
    if (fraction <= 0.0 || fraction >= 1.0)
        throw ConfigError("split fraction must lie in (0,1)");

    const std::size_t n = manifest.entries.size();
    const std::size_t n_train = static_cast<std::size_t>(fraction * static_cast<double>(n));
    if (n_train == 0 || n_train == n)
        throw RuntimeError("split fraction leaves one side empty (n=" + std::to_string(n) +
                           ", fraction=" + std::to_string(fraction) + ")");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);

    geo::DatasetManifest train_side, test_side;
    train_side.seed = test_side.seed = seed;
    for (std::size_t i = 0; i < n; ++i) {
        auto entry = manifest.entries[order[i]];
        if (i < n_train) {
            entry.split = geo::Split::train;
            train_side.entries.push_back(std::move(entry));
        } else {
            entry.split = geo::Split::test;
            test_side.entries.push_back(std::move(entry));
        }
    }
    return {std::move(train_side), std::move(test_side)};
}

}  // namespace lila::train

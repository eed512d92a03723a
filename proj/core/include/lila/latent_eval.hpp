#pragma once

#include <algorithm>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lila/model.hpp"
#include "lila/preprocess.hpp"
#include "lila/threading.hpp"

namespace lila::latent {

struct EmbeddingSet {
    std::vector<std::vector<double>> vectors;  // all length L
    std::vector<int> labels;                   // index into class_names
    std::vector<std::string> class_names;

    void validate() const;
    std::size_t dim() const { return vectors.empty() ? 0 : vectors[0].size(); }
};

struct LabeledProcessedCloud {
    pre::ProcessedCloud cloud;
    std::string label;
};

// One latent per cloud from the frozen encoder; labels are required.
template <typename T>
EmbeddingSet embed(net::LiLaNet<T>& model, std::span<const LabeledProcessedCloud> clouds,
                   int threads = 1);

template <typename T>
EmbeddingSet embed(net::LiLaNet<T>& model, std::span<const LabeledProcessedCloud> clouds,
                   int threads) {
    if (clouds.empty()) throw RuntimeError("embed: empty cloud set");
    EmbeddingSet set;
    for (const auto& c : clouds) {
        if (c.label.empty())
            throw RuntimeError("embed: cloud '" + c.cloud.provenance + "' has no label");
        set.class_names.push_back(c.label);
    }
    std::sort(set.class_names.begin(), set.class_names.end());
    set.class_names.erase(std::unique(set.class_names.begin(), set.class_names.end()),
                          set.class_names.end());

    set.vectors.resize(clouds.size());
    set.labels.resize(clouds.size());
    parallel_for(clouds.size(), threads, [&](std::size_t i) {
        const auto& pts = clouds[i].cloud.points;
        const std::int64_t m = static_cast<std::int64_t>(pts.size());
        ad::Tensor<T> x = ad::zeros<T>({1, 3, m});
        for (std::int64_t k = 0; k < m; ++k) {
            x.at(0, 0, k) = static_cast<T>(pts[static_cast<std::size_t>(k)].x);
            x.at(0, 1, k) = static_cast<T>(pts[static_cast<std::size_t>(k)].y);
            x.at(0, 2, k) = static_cast<T>(pts[static_cast<std::size_t>(k)].z);
        }
        ad::Tape<T> tape;
        auto bound = net::bind(model, tape, false);
        auto [latent, feats] = net::encode(model, tape, bound, x, ad::Mode::eval);
        std::vector<double> values(latent.values.size());
        for (std::size_t k = 0; k < values.size(); ++k)
            values[k] = static_cast<double>(latent.values[k]);
        set.vectors[i] = std::move(values);
        const auto it = std::lower_bound(set.class_names.begin(), set.class_names.end(),
                                         clouds[i].label);
        set.labels[i] = static_cast<int>(it - set.class_names.begin());
    });
    set.validate();
    return set;
}

// One-vs-rest linear SVM trained by deterministic full-batch subgradient
// descent with Pegasos step 1/(lambda t); features are standardized with
// train-set statistics.
struct SvmConfig {
    double C = 1.0;
    std::size_t epochs = 100;
    std::uint64_t seed = 0;
};

struct LinearSvmModel {
    std::vector<std::vector<double>> weights;  // one per class, length L
    std::vector<double> biases;
    std::vector<double> feature_mean;          // train standardization
    std::vector<double> feature_std;
    std::vector<std::string> class_names;
    SvmConfig config;
};

LinearSvmModel train_linear_svm(const EmbeddingSet& train, const SvmConfig& cfg = {});

// argmax over per-class scores; ties go to the lowest class index.
std::vector<int> classify(const LinearSvmModel& svm, const EmbeddingSet& embeddings);
double accuracy(const LinearSvmModel& svm, const EmbeddingSet& test);

// count_classes x count_classes matrix, rows = true label.
std::vector<std::vector<std::size_t>> confusion_matrix(const LinearSvmModel& svm,
                                                       const EmbeddingSet& test);

// CSV export: label,v0..v{L-1}.
std::string embeddings_to_csv(const EmbeddingSet& set);
EmbeddingSet embeddings_from_csv(const std::string& text);

// JSON persistence with base64 weight arrays.
std::string svm_to_json(const LinearSvmModel& svm);
LinearSvmModel svm_from_json(const std::string& text);

std::string confusion_to_csv(const std::vector<std::vector<std::size_t>>& matrix,
                             const std::vector<std::string>& class_names);

}  // namespace lila::latent

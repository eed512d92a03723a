#include "lila/latent_eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include <json.hpp>

namespace lila::latent {

void EmbeddingSet::validate() const {
    if (vectors.size() != labels.size())
        throw ConfigError("embedding set: vector/label count mismatch");
    const std::size_t d = dim();
    for (const auto& v : vectors)
        if (v.size() != d) throw ConfigError("embedding set: inconsistent dimensions");
    for (int label : labels)
        if (label < 0 || static_cast<std::size_t>(label) >= class_names.size())
            throw ConfigError("embedding set: label out of range");
}

namespace {

std::vector<double> standardize(const std::vector<double>& x, const std::vector<double>& mean,
                                const std::vector<double>& std_dev) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) / std_dev[i];
    return out;
}

double score(const LinearSvmModel& svm, std::size_t cls, const std::vector<double>& x) {
    const auto& w = svm.weights[cls];
    double s = svm.biases[cls];
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
    return s;
}

std::string base64_encode(const unsigned char* data, std::size_t n) {
    static const char* alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((n + 2) / 3 * 4);
    for (std::size_t i = 0; i < n; i += 3) {
        std::uint32_t v = static_cast<std::uint32_t>(data[i]) << 16;
        if (i + 1 < n) v |= static_cast<std::uint32_t>(data[i + 1]) << 8;
        if (i + 2 < n) v |= data[i + 2];
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        out += i + 1 < n ? alphabet[(v >> 6) & 63] : '=';
        out += i + 2 < n ? alphabet[v & 63] : '=';
    }
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
    auto value = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    std::uint32_t buffer = 0;
    int bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n') continue;
        const int v = value(c);
        if (v < 0) throw ParseError("invalid base64 character");
        buffer = (buffer << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<unsigned char>((buffer >> bits) & 0xFF));
        }
    }
    return out;
}

std::string doubles_to_base64(const std::vector<double>& values) {
    std::vector<unsigned char> bytes(values.size() * 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &values[i], 8);
        for (int b = 0; b < 8; ++b)
            bytes[i * 8 + static_cast<std::size_t>(b)] =
                static_cast<unsigned char>(bits >> (8 * b));
    }
    return base64_encode(bytes.data(), bytes.size());
}

std::vector<double> doubles_from_base64(const std::string& text) {
    const auto bytes = base64_decode(text);
    if (bytes.size() % 8 != 0) throw ParseError("base64 payload is not a double array");
    std::vector<double> values(bytes.size() / 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 7; b >= 0; --b)
            bits = (bits << 8) | bytes[i * 8 + static_cast<std::size_t>(b)];
        std::memcpy(&values[i], &bits, 8);
    }
    return values;
}

}  // namespace

LinearSvmModel train_linear_svm(const EmbeddingSet& train, const SvmConfig& cfg) {
    train.validate();
    if (train.class_names.size() < 2) throw ConfigError("SVM needs at least 2 classes");
    if (cfg.C <= 0.0) throw ConfigError("SVM C must be positive");
    const std::size_t n = train.vectors.size();
    const std::size_t d = train.dim();
    if (n == 0) throw RuntimeError("SVM training set is empty");

    LinearSvmModel svm;
    svm.config = cfg;
    svm.class_names = train.class_names;

    // Standardization statistics from the training set only.
    svm.feature_mean.assign(d, 0.0);
    svm.feature_std.assign(d, 0.0);
    for (const auto& x : train.vectors)
        for (std::size_t i = 0; i < d; ++i) svm.feature_mean[i] += x[i];
    for (std::size_t i = 0; i < d; ++i) svm.feature_mean[i] /= static_cast<double>(n);
    for (const auto& x : train.vectors)
        for (std::size_t i = 0; i < d; ++i) {
            const double delta = x[i] - svm.feature_mean[i];
            svm.feature_std[i] += delta * delta;
        }
    for (std::size_t i = 0; i < d; ++i) {
        svm.feature_std[i] = std::sqrt(svm.feature_std[i] / static_cast<double>(n));
        if (svm.feature_std[i] < 1e-12) svm.feature_std[i] = 1.0;  // constant feature
    }

    std::vector<std::vector<double>> features(n);
    for (std::size_t i = 0; i < n; ++i)
        features[i] = standardize(train.vectors[i], svm.feature_mean, svm.feature_std);

    const double lambda = 1.0 / (cfg.C * static_cast<double>(n));
    const std::size_t n_classes = train.class_names.size();
    svm.weights.assign(n_classes, std::vector<double>(d, 0.0));
    svm.biases.assign(n_classes, 0.0);

    for (std::size_t cls = 0; cls < n_classes; ++cls) {
        auto& w = svm.weights[cls];
        double& b = svm.biases[cls];
        std::vector<double> grad(d);
        for (std::size_t t = 1; t <= cfg.epochs; ++t) {
            const double eta = 1.0 / (lambda * static_cast<double>(t));
            std::fill(grad.begin(), grad.end(), 0.0);
            double grad_b = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double y = train.labels[i] == static_cast<int>(cls) ? 1.0 : -1.0;
                double margin = b;
                const auto& x = features[i];
                for (std::size_t k = 0; k < d; ++k) margin += w[k] * x[k];
                if (y * margin < 1.0) {
                    for (std::size_t k = 0; k < d; ++k) grad[k] -= y * x[k];
                    grad_b -= y;
                }
            }
            const double inv_n = 1.0 / static_cast<double>(n);
            for (std::size_t k = 0; k < d; ++k)
                w[k] -= eta * (lambda * w[k] + grad[k] * inv_n);
            b -= eta * grad_b * inv_n;  // bias is unregularized
        }
    }
    return svm;
}

std::vector<int> classify(const LinearSvmModel& svm, const EmbeddingSet& embeddings) {
    if (embeddings.dim() != svm.feature_mean.size())
        throw ConfigError("latent_dim mismatch: embeddings have " +
                          std::to_string(embeddings.dim()) + " dims, SVM expects " +
                          std::to_string(svm.feature_mean.size()));
    std::vector<int> out;
    out.reserve(embeddings.vectors.size());
    for (const auto& raw : embeddings.vectors) {
        const auto x = standardize(raw, svm.feature_mean, svm.feature_std);
        int best = 0;
        double best_score = score(svm, 0, x);
        for (std::size_t cls = 1; cls < svm.weights.size(); ++cls) {
            const double s = score(svm, cls, x);
            if (s > best_score) {
                best_score = s;
                best = static_cast<int>(cls);
            }
        }
        out.push_back(best);
    }
    return out;
}

double accuracy(const LinearSvmModel& svm, const EmbeddingSet& test) {
    test.validate();
    if (test.vectors.empty()) throw RuntimeError("accuracy on empty set");
    const auto predictions = classify(svm, test);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        correct += predictions[i] == test.labels[i];
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

std::vector<std::vector<std::size_t>> confusion_matrix(const LinearSvmModel& svm,
                                                       const EmbeddingSet& test) {
    test.validate();
    const std::size_t k = svm.class_names.size();
    std::vector<std::vector<std::size_t>> matrix(k, std::vector<std::size_t>(k, 0));
    const auto predictions = classify(svm, test);
    for (std::size_t i = 0; i < predictions.size(); ++i)
        matrix[static_cast<std::size_t>(test.labels[i])]
              [static_cast<std::size_t>(predictions[i])]++;
    return matrix;
}

std::string embeddings_to_csv(const EmbeddingSet& set) {
    set.validate();
    std::string out = "label";
    for (std::size_t i = 0; i < set.dim(); ++i) out += ",v" + std::to_string(i);
    out += "\n";
    char buf[40];
    for (std::size_t i = 0; i < set.vectors.size(); ++i) {
        out += set.class_names[static_cast<std::size_t>(set.labels[i])];
        for (double v : set.vectors[i]) {
            std::snprintf(buf, sizeof(buf), ",%.17g", v);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

EmbeddingSet embeddings_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty embeddings CSV");
    EmbeddingSet set;
    std::vector<std::string> raw_labels;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> values;
        std::size_t pos = line.find(',');
        if (pos == std::string::npos) throw ParseError("embeddings row lacks values", line_no);
        raw_labels.push_back(line.substr(0, pos));
        while (pos != std::string::npos) {
            const std::size_t next = line.find(',', pos + 1);
            const std::string tok =
                line.substr(pos + 1, next == std::string::npos ? next : next - pos - 1);
            double v = 0.0;
            const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (res.ec != std::errc()) throw ParseError("bad embedding value", line_no);
            values.push_back(v);
            pos = next;
        }
        set.vectors.push_back(std::move(values));
    }
    set.class_names = raw_labels;
    std::sort(set.class_names.begin(), set.class_names.end());
    set.class_names.erase(std::unique(set.class_names.begin(), set.class_names.end()),
                          set.class_names.end());
    for (const auto& label : raw_labels) {
        const auto it = std::lower_bound(set.class_names.begin(), set.class_names.end(), label);
        set.labels.push_back(static_cast<int>(it - set.class_names.begin()));
    }
    set.validate();
    return set;
}

std::string svm_to_json(const LinearSvmModel& svm) {
    nlohmann::json j;
    j["class_names"] = svm.class_names;
    j["C"] = svm.config.C;
    j["epochs"] = svm.config.epochs;
    j["seed"] = svm.config.seed;
    j["feature_mean"] = doubles_to_base64(svm.feature_mean);
    j["feature_std"] = doubles_to_base64(svm.feature_std);
    nlohmann::json weights = nlohmann::json::array();
    for (const auto& w : svm.weights) weights.push_back(doubles_to_base64(w));
    j["weights"] = std::move(weights);
    j["biases"] = doubles_to_base64(svm.biases);
    return j.dump(2);
}

LinearSvmModel svm_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("svm json: ") + e.what());
    }
    LinearSvmModel svm;
    svm.class_names = j.at("class_names").get<std::vector<std::string>>();
    svm.config.C = j.at("C").get<double>();
    svm.config.epochs = j.at("epochs").get<std::size_t>();
    svm.config.seed = j.at("seed").get<std::uint64_t>();
    svm.feature_mean = doubles_from_base64(j.at("feature_mean").get<std::string>());
    svm.feature_std = doubles_from_base64(j.at("feature_std").get<std::string>());
    for (const auto& w : j.at("weights"))
        svm.weights.push_back(doubles_from_base64(w.get<std::string>()));
    svm.biases = doubles_from_base64(j.at("biases").get<std::string>());
    if (svm.weights.size() != svm.class_names.size() ||
        svm.biases.size() != svm.class_names.size())
        throw ParseError("svm json: class count mismatch");
    return svm;
}

std::string confusion_to_csv(const std::vector<std::vector<std::size_t>>& matrix,
                             const std::vector<std::string>& class_names) {
    std::string out = "true\\pred";
    for (const auto& name : class_names) out += "," + name;
    out += "\n";
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        out += class_names[i];
        for (std::size_t v : matrix[i]) out += "," + std::to_string(v);
        out += "\n";
    }
    return out;
}

}  // namespace lila::latent

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lila/model_config.hpp"
#include "lila/ops.hpp"
#include "lila/rng.hpp"

namespace lila::net {

// Encoder/decoder parameter store. Activations are shaped by the input at
// call time, so one model serves any point count M.
template <typename T>
struct LiLaNet {
    struct Conv {
        std::int64_t in = 0, out = 0;
        std::vector<T> weight;  // [out, in]
        std::vector<T> bias;    // [out]
    };
    struct Bn {
        std::vector<T> gamma;
        std::vector<T> beta;
        ad::BatchNormState<T> state;
    };

    ModelConfig config;
    std::vector<Conv> enc_conv;
    std::vector<Bn> enc_bn;
    std::vector<Conv> dec_conv;  // last entry is the linear output head
    std::vector<Bn> dec_bn;

    std::size_t stored_param_count() const {
        std::size_t total = 0;
        for (const auto& c : enc_conv) total += c.weight.size() + c.bias.size();
        for (const auto& b : enc_bn) total += b.gamma.size() + b.beta.size();
        for (const auto& c : dec_conv) total += c.weight.size() + c.bias.size();
        for (const auto& b : dec_bn) total += b.gamma.size() + b.beta.size();
        return total;
    }
};

// He-uniform init: W ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)), biases 0,
// gamma 1, beta 0, running stats (0, 1). Deterministic per init_seed.
template <typename T>
LiLaNet<T> build(const ModelConfig& config) {
    config.validate();
    LiLaNet<T> model;
    model.config = config;
    Rng rng(config.init_seed);

    auto make_conv = [&](std::int64_t in, std::int64_t out) {
        typename LiLaNet<T>::Conv conv;
        conv.in = in;
        conv.out = out;
        conv.weight.resize(static_cast<std::size_t>(in * out));
        const double bound = std::sqrt(6.0 / static_cast<double>(in));
        for (T& w : conv.weight) w = static_cast<T>(rng.uniform(-bound, bound));
        conv.bias.assign(static_cast<std::size_t>(out), T(0));
        return conv;
    };
    auto make_bn = [&](std::int64_t channels) {
        typename LiLaNet<T>::Bn bn;
        bn.gamma.assign(static_cast<std::size_t>(channels), T(1));
        bn.beta.assign(static_cast<std::size_t>(channels), T(0));
        bn.state = ad::BatchNormState<T>::identity(channels);
        bn.state.momentum = static_cast<T>(config.bn_momentum);
        bn.state.eps = static_cast<T>(config.bn_eps);
        return bn;
    };

    std::int64_t in = 3;
    for (auto out : config.encoder_widths) {
        model.enc_conv.push_back(make_conv(in, out));
        model.enc_bn.push_back(make_bn(out));
        in = out;
    }
    const std::size_t depth = config.depth();
    for (std::size_t d = 0; d < depth; ++d) {
        const std::int64_t din = decoder_input_width(config, config.skip, d);
        const std::int64_t dout =
            d + 1 < depth ? config.decoder_widths[d] : config.output_channels;
        model.dec_conv.push_back(make_conv(din, dout));
        if (d + 1 < depth) model.dec_bn.push_back(make_bn(dout));
    }
    return model;
}

// Named views over every trainable array, in a fixed order shared by the
// optimizer and the checkpoint format.
template <typename T>
struct ParamRef {
    std::string name;
    std::vector<T>* values;
};

template <typename T>
std::vector<ParamRef<T>> named_params(LiLaNet<T>& model) {
    std::vector<ParamRef<T>> out;
    for (std::size_t k = 0; k < model.enc_conv.size(); ++k) {
        const std::string p = "enc" + std::to_string(k);
        out.push_back({p + ".weight", &model.enc_conv[k].weight});
        out.push_back({p + ".bias", &model.enc_conv[k].bias});
        out.push_back({p + ".bn.gamma", &model.enc_bn[k].gamma});
        out.push_back({p + ".bn.beta", &model.enc_bn[k].beta});
    }
    for (std::size_t d = 0; d < model.dec_conv.size(); ++d) {
        const std::string p = "dec" + std::to_string(d);
        out.push_back({p + ".weight", &model.dec_conv[d].weight});
        out.push_back({p + ".bias", &model.dec_conv[d].bias});
        if (d < model.dec_bn.size()) {
            out.push_back({p + ".bn.gamma", &model.dec_bn[d].gamma});
            out.push_back({p + ".bn.beta", &model.dec_bn[d].beta});
        }
    }
    return out;
}

template <typename T>
std::vector<ParamRef<T>> named_buffers(LiLaNet<T>& model) {
    std::vector<ParamRef<T>> out;
    for (std::size_t k = 0; k < model.enc_bn.size(); ++k) {
        const std::string p = "enc" + std::to_string(k);
        out.push_back({p + ".bn.running_mean", &model.enc_bn[k].state.running_mean});
        out.push_back({p + ".bn.running_var", &model.enc_bn[k].state.running_var});
    }
    for (std::size_t d = 0; d < model.dec_bn.size(); ++d) {
        const std::string p = "dec" + std::to_string(d);
        out.push_back({p + ".bn.running_mean", &model.dec_bn[d].state.running_mean});
        out.push_back({p + ".bn.running_var", &model.dec_bn[d].state.running_var});
    }
    return out;
}

// Per-layer activations kept for skip routing.
template <typename T>
struct EncoderFeatures {
    std::vector<ad::Tensor<T>> layers;
};

// Parameter tensors bound to one tape, plus handles for gradient readout.
template <typename T>
struct BoundModel {
    std::vector<ad::Tensor<T>> enc_w, enc_b, enc_gamma, enc_beta;
    std::vector<ad::Tensor<T>> dec_w, dec_b, dec_gamma, dec_beta;

    struct GradHandle {
        std::string name;
        int node;
        std::vector<T>* values;  // the model array the gradient belongs to
    };
    std::vector<GradHandle> handles;
};

// Materializes parameter tensors; with_grads registers them as tape leaves.
template <typename T>
BoundModel<T> bind(LiLaNet<T>& model, ad::Tape<T>& tape, bool with_grads) {
    BoundModel<T> bound;
    auto attach = [&](const std::string& name, std::vector<T>& values,
                      std::vector<std::int64_t> shape) {
        ad::Tensor<T> tensor(std::move(shape), values);
        if (with_grads) {
            tensor = tape.leaf(std::move(tensor));
            bound.handles.push_back({name, tensor.node, &values});
        }
        return tensor;
    };
    for (std::size_t k = 0; k < model.enc_conv.size(); ++k) {
        auto& conv = model.enc_conv[k];
        const std::string p = "enc" + std::to_string(k);
        bound.enc_w.push_back(attach(p + ".weight", conv.weight, {conv.out, conv.in}));
        bound.enc_b.push_back(attach(p + ".bias", conv.bias, {conv.out}));
        auto& bn = model.enc_bn[k];
        const auto c = static_cast<std::int64_t>(bn.gamma.size());
        bound.enc_gamma.push_back(attach(p + ".bn.gamma", bn.gamma, {c}));
        bound.enc_beta.push_back(attach(p + ".bn.beta", bn.beta, {c}));
    }
    for (std::size_t d = 0; d < model.dec_conv.size(); ++d) {
        auto& conv = model.dec_conv[d];
        const std::string p = "dec" + std::to_string(d);
        bound.dec_w.push_back(attach(p + ".weight", conv.weight, {conv.out, conv.in}));
        bound.dec_b.push_back(attach(p + ".bias", conv.bias, {conv.out}));
        if (d < model.dec_bn.size()) {
            auto& bn = model.dec_bn[d];
            const auto c = static_cast<std::int64_t>(bn.gamma.size());
            bound.dec_gamma.push_back(attach(p + ".bn.gamma", bn.gamma, {c}));
            bound.dec_beta.push_back(attach(p + ".bn.beta", bn.beta, {c}));
        }
    }
    return bound;
}

// Shared conv -> batch norm -> ReLU blocks; latent is the channelwise max
// over points of the last activation, shape [B, L, 1].
template <typename T>
std::pair<ad::Tensor<T>, EncoderFeatures<T>> encode(LiLaNet<T>& model, ad::Tape<T>& tape,
                                                    BoundModel<T>& bound,
                                                    const ad::Tensor<T>& x, ad::Mode mode) {
    EncoderFeatures<T> feats;
    ad::Tensor<T> h = x;
    for (std::size_t k = 0; k < model.enc_conv.size(); ++k) {
        try {
            h = ad::pointwise_linear(tape, h, bound.enc_w[k], bound.enc_b[k]);
            h = ad::batch_norm(tape, h, bound.enc_gamma[k], bound.enc_beta[k],
                               model.enc_bn[k].state, mode);
            h = ad::relu(tape, h);
        } catch (const NumericError& e) {
            throw NumericError("encoder layer " + std::to_string(k) + ": " + e.what());
        }
        feats.layers.push_back(h);
    }
    ad::Tensor<T> latent = ad::max_pool_points(tape, h);
    return {std::move(latent), std::move(feats)};
}

// Decoder layers receiving a skip under `variant` concatenate the routed
// encoder features ahead of their linear map; the head stays linear.
template <typename T>
ad::Tensor<T> decode(LiLaNet<T>& model, ad::Tape<T>& tape, BoundModel<T>& bound,
                     const ad::Tensor<T>& latent, const EncoderFeatures<T>& feats,
                     SkipVariant variant, std::int64_t m, ad::Mode mode) {
    const std::size_t depth = model.config.depth();
    ad::Tensor<T> h = ad::replicate_points(tape, latent, m);
    for (std::size_t d = 0; d < depth; ++d) {
        const int src = skip_source(variant, depth, d);
        if (src >= 0) {
            const auto& skip = feats.layers.at(static_cast<std::size_t>(src));
            if (h.dim(1) + skip.dim(1) != model.dec_conv[d].in)
                throw ConfigError("decoder layer " + std::to_string(d) + " expects width " +
                                  std::to_string(model.dec_conv[d].in) + " but skip yields " +
                                  std::to_string(h.dim(1) + skip.dim(1)));
            h = ad::concat_channels(tape, h, skip);
        } else if (h.dim(1) != model.dec_conv[d].in) {
            throw ConfigError("decoder layer " + std::to_string(d) + " expects width " +
                              std::to_string(model.dec_conv[d].in) + ", got " +
                              std::to_string(h.dim(1)));
        }
        try {
            h = ad::pointwise_linear(tape, h, bound.dec_w[d], bound.dec_b[d]);
            if (d + 1 < depth) {
                h = ad::batch_norm(tape, h, bound.dec_gamma[d], bound.dec_beta[d],
                                   model.dec_bn[d].state, mode);
                h = ad::relu(tape, h);
            }
        } catch (const NumericError& e) {
            throw NumericError("decoder layer " + std::to_string(d) + ": " + e.what());
        }
    }
    return h;
}

template <typename T>
struct ForwardResult {
    ad::Tensor<T> reconstruction;
    ad::Tensor<T> latent;
    BoundModel<T> bound;
};

template <typename T>
ForwardResult<T> forward(LiLaNet<T>& model, ad::Tape<T>& tape, const ad::Tensor<T>& x,
                         ad::Mode mode, bool with_grads = false) {
    BoundModel<T> bound = bind(model, tape, with_grads);
    auto [latent, feats] = encode(model, tape, bound, x, mode);
    ad::Tensor<T> recon =
        decode(model, tape, bound, latent, feats, model.config.skip, x.dim(2), mode);
    return {std::move(recon), std::move(latent), std::move(bound)};
}

// Ablation hook: genuine skip features, latent replaced by seeded N(0,1).
template <typename T>
ForwardResult<T> forward_random_latent(LiLaNet<T>& model, ad::Tape<T>& tape,
                                       const ad::Tensor<T>& x, ad::Mode mode,
                                       std::uint64_t rng_seed) {
    BoundModel<T> bound = bind(model, tape, false);
    auto [latent, feats] = encode(model, tape, bound, x, mode);
    Rng rng(rng_seed);
    ad::Tensor<T> random = ad::zeros<T>({latent.dim(0), latent.dim(1), 1});
    for (T& v : random.values) v = static_cast<T>(rng.normal());
    ad::Tensor<T> recon =
        decode(model, tape, bound, random, feats, model.config.skip, x.dim(2), mode);
    return {std::move(recon), std::move(random), std::move(bound)};
}

}  // namespace lila::net

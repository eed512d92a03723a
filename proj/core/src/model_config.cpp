#include "lila/model_config.hpp"

#include <json.hpp>

namespace lila::net {

const char* to_string(SkipVariant v) {
    switch (v) {
        case SkipVariant::none: return "none";
        case SkipVariant::ss1: return "ss1";
        case SkipVariant::ss2: return "ss2";
        case SkipVariant::ss3: return "ss3";
        default: return "ss4";
    }
}

std::optional<SkipVariant> skip_variant_from_string(const std::string& s) {
    if (s == "none") return SkipVariant::none;
    if (s == "ss1") return SkipVariant::ss1;
    if (s == "ss2") return SkipVariant::ss2;
    if (s == "ss3") return SkipVariant::ss3;
    if (s == "ss4") return SkipVariant::ss4;
    return std::nullopt;
}

void ModelConfig::validate() const {
    if (encoder_widths.empty()) throw ConfigError("encoder_widths must be non-empty");
    for (auto w : encoder_widths)
        if (w < 1) throw ConfigError("encoder widths must be positive");
    for (auto w : decoder_widths)
        if (w < 1) throw ConfigError("decoder widths must be positive");
    if (encoder_widths.back() != latent_dim)
        throw ConfigError("last encoder width (" + std::to_string(encoder_widths.back()) +
                          ") must equal latent_dim (" + std::to_string(latent_dim) + ")");
    // Mirror skip pairing needs one decoder layer per encoder layer; the
    // final decoder layer is the linear output head.
    if (decoder_widths.size() + 1 != encoder_widths.size())
        throw ConfigError("decoder depth (decoder_widths + output layer) must equal encoder depth");
    if (output_channels < 1) throw ConfigError("output_channels must be positive");
    if (points < 1) throw ConfigError("points must be positive");
    if (skip == SkipVariant::ss3 && depth() < 2)
        throw ConfigError("ss3 needs at least two encoder layers");
    if (bn_momentum <= 0.0 || bn_momentum >= 1.0) throw ConfigError("bn_momentum must be in (0,1)");
    if (bn_eps <= 0.0) throw ConfigError("bn_eps must be positive");
}

int skip_source(SkipVariant variant, std::size_t depth, std::size_t dec) {
    switch (variant) {
        case SkipVariant::none:
            return -1;
        case SkipVariant::ss1:
            return static_cast<int>(depth - 1 - dec);
        case SkipVariant::ss2:
            return dec == depth - 1 ? 0 : -1;
        case SkipVariant::ss3:
            return dec == 1 ? 1 : -1;
        default:  // ss4
            return dec == 0 ? static_cast<int>(depth - 1) : -1;
    }
}

std::int64_t decoder_input_width(const ModelConfig& cfg, SkipVariant variant, std::size_t dec) {
    std::int64_t width = dec == 0 ? cfg.latent_dim : cfg.decoder_widths[dec - 1];
    const int src = skip_source(variant, cfg.depth(), dec);
    if (src >= 0) width += cfg.encoder_widths[static_cast<std::size_t>(src)];
    return width;
}

std::size_t param_count(const ModelConfig& cfg) { return param_count(cfg, cfg.skip); }

std::size_t param_count(const ModelConfig& cfg, SkipVariant variant) {
    cfg.validate();
    std::size_t total = 0;
    std::int64_t in = 3;
    for (auto out : cfg.encoder_widths) {
        total += static_cast<std::size_t>(in * out + out);  // conv
        total += static_cast<std::size_t>(2 * out);         // bn gamma/beta
        in = out;
    }
    const std::size_t depth = cfg.depth();
    for (std::size_t d = 0; d < depth; ++d) {
        const std::int64_t din = decoder_input_width(cfg, variant, d);
        const std::int64_t dout =
            d + 1 < depth ? cfg.decoder_widths[d] : cfg.output_channels;
        total += static_cast<std::size_t>(din * dout + dout);
        if (d + 1 < depth) total += static_cast<std::size_t>(2 * dout);
    }
    return total;
}

std::string config_to_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["encoder_widths"] = cfg.encoder_widths;
    j["latent_dim"] = cfg.latent_dim;
    j["decoder_widths"] = cfg.decoder_widths;
    j["output_channels"] = cfg.output_channels;
    j["skip"] = to_string(cfg.skip);
    j["points"] = cfg.points;
    j["init_seed"] = cfg.init_seed;
    j["bn_momentum"] = cfg.bn_momentum;
    j["bn_eps"] = cfg.bn_eps;
    return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("model config: ") + e.what());
    }
    ModelConfig cfg;
    cfg.encoder_widths = j.at("encoder_widths").get<std::vector<std::int64_t>>();
    cfg.latent_dim = j.at("latent_dim").get<std::int64_t>();
    cfg.decoder_widths = j.at("decoder_widths").get<std::vector<std::int64_t>>();
    cfg.output_channels = j.at("output_channels").get<std::int64_t>();
    const auto skip = skip_variant_from_string(j.at("skip").get<std::string>());
    if (!skip) throw ParseError("model config: unknown skip variant");
    cfg.skip = *skip;
    cfg.points = j.at("points").get<std::int64_t>();
    cfg.init_seed = j.at("init_seed").get<std::uint64_t>();
    if (j.contains("bn_momentum")) cfg.bn_momentum = j.at("bn_momentum").get<double>();
    if (j.contains("bn_eps")) cfg.bn_eps = j.at("bn_eps").get<double>();
    cfg.validate();
    return cfg;
}

}  // namespace lila::net

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lila/common.hpp"

namespace lila::net {

// Which encoder layer feeds which decoder layer. With depth 3 the variants
// are: ss1 = all mirror pairs, ss2 = first->last, ss3 = second->second,
// ss4 = last->first (the default bottleneck skip).
enum class SkipVariant { none, ss1, ss2, ss3, ss4 };

const char* to_string(SkipVariant v);
std::optional<SkipVariant> skip_variant_from_string(const std::string& s);

struct ModelConfig {
    std::vector<std::int64_t> encoder_widths{64, 128, 1024};
    std::int64_t latent_dim = 1024;
    std::vector<std::int64_t> decoder_widths{512, 256};
    std::int64_t output_channels = 3;
    SkipVariant skip = SkipVariant::ss4;
    std::int64_t points = 2048;  // M
    std::uint64_t init_seed = 0;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;

    std::size_t depth() const { return encoder_widths.size(); }
    void validate() const;
};

// Encoder layer index routed into decoder layer `dec` (0-based), or -1.
int skip_source(SkipVariant variant, std::size_t depth, std::size_t dec);

// Input channel width of decoder layer `dec` including any skip widening.
std::int64_t decoder_input_width(const ModelConfig& cfg, SkipVariant variant, std::size_t dec);

// Closed-form count of trainable parameters (weights, biases, gamma, beta;
// running statistics are buffers and not counted).
std::size_t param_count(const ModelConfig& cfg);
std::size_t param_count(const ModelConfig& cfg, SkipVariant variant);

// Field names are part of the checkpoint format contract.
std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& text);

}  // namespace lila::net

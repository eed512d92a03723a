#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>

#include "lila/model.hpp"
#include "lila/train.hpp"

namespace lila::train {

// Binary checkpoint: magic "LILA", format version, model config JSON, named
// 32-bit little-endian parameter and buffer arrays (batch-norm running stats
// included), optional Adam state, epoch counter, loss history. A save/load
// round trip reproduces 32-bit forward outputs bit-identically.
inline constexpr char kCheckpointMagic[4] = {'L', 'I', 'L', 'A'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

struct Writer {
    std::ofstream out;
    explicit Writer(const std::filesystem::path& path) : out(path, std::ios::binary) {
        if (!out) throw IoError("cannot write " + path.string());
    }
    void bytes(const void* data, std::size_t n) {
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    }
    void u32(std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
        bytes(b, 4);
    }
    void u64(std::uint64_t v) {
        u32(static_cast<std::uint32_t>(v));
        u32(static_cast<std::uint32_t>(v >> 32));
    }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    template <typename T>
    void array_f32(const std::vector<T>& values) {
        u32(static_cast<std::uint32_t>(values.size()));
        for (const T v : values) f32(static_cast<float>(v));
    }
};

struct Reader {
    std::ifstream in;
    explicit Reader(const std::filesystem::path& path) : in(path, std::ios::binary) {
        if (!in) throw IoError("cannot open " + path.string());
    }
    void bytes(void* data, std::size_t n) {
        in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (in.gcount() != static_cast<std::streamsize>(n))
            throw ParseError("checkpoint truncated");
    }
    std::uint32_t u32() {
        unsigned char b[4];
        bytes(b, 4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) |
               (static_cast<std::uint32_t>(b[3]) << 24);
    }
    std::uint64_t u64() {
        const std::uint64_t lo = u32();
        return lo | (static_cast<std::uint64_t>(u32()) << 32);
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        std::string s(u32(), '\0');
        bytes(s.data(), s.size());
        return s;
    }
    template <typename T>
    void array_f32_into(std::vector<T>& values, const std::string& name) {
        const std::uint32_t n = u32();
        if (n != values.size())
            throw ParseError("checkpoint array '" + name + "' has " + std::to_string(n) +
                             " values, expected " + std::to_string(values.size()));
        for (std::uint32_t i = 0; i < n; ++i) values[i] = static_cast<T>(f32());
    }
};

}  // namespace detail

template <typename T>
void save_checkpoint(net::LiLaNet<T>& model, const Trainer<T>* trainer,
                     const std::filesystem::path& path) {
    detail::Writer w(path);
    w.bytes(kCheckpointMagic, 4);
    w.u32(kCheckpointVersion);
    w.str(net::config_to_json(model.config));

    auto params = net::named_params(model);
    auto buffers = net::named_buffers(model);
    w.u32(static_cast<std::uint32_t>(params.size() + buffers.size()));
    for (const auto& p : params) {
        w.str(p.name);
        w.array_f32(*p.values);
    }
    for (const auto& b : buffers) {
        w.str(b.name);
        w.array_f32(*b.values);
    }

    const bool has_opt = trainer != nullptr && !trainer->opt.empty();
    w.u32(has_opt ? 1 : 0);
    if (has_opt) {
        w.f64(trainer->adam.lr);
        w.f64(trainer->adam.beta1);
        w.f64(trainer->adam.beta2);
        w.f64(trainer->adam.eps);
        w.u32(static_cast<std::uint32_t>(trainer->opt.size()));
        for (const auto& state : trainer->opt) {
            w.u64(static_cast<std::uint64_t>(state.t));
            w.array_f32(state.m);
            w.array_f32(state.v);
        }
    }

    w.u64(trainer ? trainer->epoch : 0);
    const auto& history = trainer ? trainer->loss_history : std::vector<double>{};
    w.u32(static_cast<std::uint32_t>(history.size()));
    for (double v : history) w.f64(v);
    if (!w.out) throw IoError("write failed for " + path.string());
}

template <typename T>
struct LoadedCheckpoint {
    net::LiLaNet<T> model;
    Trainer<T> trainer;  // opt empty when the file carried no optimizer state
    bool has_optimizer = false;
};

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& path) {
    detail::Reader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw ParseError("bad checkpoint magic in " + path.string());
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw ParseError("unsupported checkpoint version " + std::to_string(version));

    LoadedCheckpoint<T> loaded;
    loaded.model = net::build<T>(net::config_from_json(r.str()));

    auto params = net::named_params(loaded.model);
    auto buffers = net::named_buffers(loaded.model);
    const std::uint32_t n_arrays = r.u32();
    if (n_arrays != params.size() + buffers.size())
        throw ParseError("checkpoint array count mismatch");
    auto find = [&](const std::string& name) -> std::vector<T>* {
        for (auto& p : params)
            if (p.name == name) return p.values;
        for (auto& b : buffers)
            if (b.name == name) return b.values;
        throw ParseError("unknown checkpoint array '" + name + "'");
    };
    for (std::uint32_t i = 0; i < n_arrays; ++i) {
        const std::string name = r.str();
        r.array_f32_into(*find(name), name);
    }

    const std::uint32_t has_opt = r.u32();
    if (has_opt) {
        loaded.has_optimizer = true;
        loaded.trainer.adam.lr = r.f64();
        loaded.trainer.adam.beta1 = r.f64();
        loaded.trainer.adam.beta2 = r.f64();
        loaded.trainer.adam.eps = r.f64();
        const std::uint32_t n_states = r.u32();
        if (n_states != params.size()) throw ParseError("optimizer state count mismatch");
        loaded.trainer.init(loaded.model);
        for (std::uint32_t i = 0; i < n_states; ++i) {
            auto& state = loaded.trainer.opt[i];
            state.t = static_cast<std::int64_t>(r.u64());
            r.array_f32_into(state.m, "adam.m");
            r.array_f32_into(state.v, "adam.v");
        }
    }

    loaded.trainer.epoch = static_cast<std::size_t>(r.u64());
    const std::uint32_t history_len = r.u32();
    loaded.trainer.loss_history.resize(history_len);
    for (std::uint32_t i = 0; i < history_len; ++i) loaded.trainer.loss_history[i] = r.f64();
    return loaded;
}

}  // namespace lila::train

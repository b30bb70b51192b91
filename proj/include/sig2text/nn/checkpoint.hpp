#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "json.hpp"
#include "sig2text/nn/model.hpp"

namespace sig2text::nn {

inline constexpr char kCheckpointMagic[] = "S2TCKPT1";

inline nlohmann::json to_json(const ModelConfig& c) {
    return {{"n_layers_enc", c.n_layers_enc}, {"n_layers_dec", c.n_layers_dec}, {"d_model", c.d_model},
            {"d_ff", c.d_ff},                 {"n_heads", c.n_heads},           {"vocab_size", c.vocab_size},
            {"max_len", c.max_len},           {"patch_dims", {c.patch_rows, c.patch_cols}},
            {"image_dims", {c.image_rows, c.image_cols}},                       {"dropout", c.dropout}};
}

/// Missing keys keep their defaults, so partial config files are accepted.
inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    auto get = [&](const char* k, auto& dst) {
        if (j.contains(k)) dst = j.at(k).get<std::decay_t<decltype(dst)>>();
    };
    get("n_layers_enc", c.n_layers_enc);
    get("n_layers_dec", c.n_layers_dec);
    get("d_model", c.d_model);
    get("d_ff", c.d_ff);
    get("n_heads", c.n_heads);
    get("vocab_size", c.vocab_size);
    get("max_len", c.max_len);
    get("dropout", c.dropout);
    if (j.contains("patch_dims")) {
        c.patch_rows = j["patch_dims"].at(0).get<int>();
        c.patch_cols = j["patch_dims"].at(1).get<int>();
    }
    if (j.contains("image_dims")) {
        c.image_rows = j["image_dims"].at(0).get<int>();
        c.image_cols = j["image_dims"].at(1).get<int>();
    }
    c.validate();
    return c;
}

inline nlohmann::json to_json(const StftConfig& s) {
    return {{"fft_len", s.fft_len},
            {"window_len", s.window_len},
            {"hop", s.hop},
            {"target_frames", s.target_frames},
            {"image_rows", s.image_rows},
            {"image_cols", s.image_cols}};
}

inline StftConfig stft_config_from_json(const nlohmann::json& j) {
    StftConfig s;
    s.fft_len = j.value("fft_len", s.fft_len);
    s.window_len = j.value("window_len", s.window_len);
    s.hop = j.value("hop", s.hop);
    s.target_frames = j.value("target_frames", s.target_frames);
    s.image_rows = j.value("image_rows", s.image_rows);
    s.image_cols = j.value("image_cols", s.image_cols);
    return s;
}

inline nlohmann::json to_json(const QuantizationScheme& q) {
    return {{"freq_unit", q.freq_unit}, {"time_unit", q.time_unit}, {"count_unit", q.count_unit}};
}

inline QuantizationScheme quantization_from_json(const nlohmann::json& j) {
    QuantizationScheme q;
    q.freq_unit = j.value("freq_unit", q.freq_unit);
    q.time_unit = j.value("time_unit", q.time_unit);
    q.count_unit = j.value("count_unit", q.count_unit);
    return q;
}

/// A model plus the front-end settings it was trained with.
template <class T>
struct Checkpoint {
    std::unique_ptr<Model<T>> model;
    StftConfig stft;
    QuantizationScheme quant;
};

namespace detail {

inline void put_f32(std::string& out, float v) {
    auto bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

inline float get_f32(const unsigned char* p) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return std::bit_cast<float>(bits);
}

}  // namespace detail

template <class T>
void save_checkpoint(const std::string& path, const Model<T>& model, const StftConfig& stft = {},
                     const QuantizationScheme& quant = {}) {
    nlohmann::json header;
    header["config"] = to_json(model.config());
    header["step"] = model.step;
    header["stft"] = to_json(stft);
    header["quantization"] = to_json(quant);
    header["dtype"] = "float32";
    header["byte_order"] = "little";
    nlohmann::json dir = nlohmann::json::array();
    std::string payload;
    for (const auto& p : model.parameters()) {
        if (!p->value.all_finite()) throw Error(ErrorCode::NonFinite, "non-finite weights in " + p->name);
        dir.push_back({{"name", p->name}, {"shape", p->value.shape}, {"offset", payload.size()}});
        for (T v : p->value.data) detail::put_f32(payload, static_cast<float>(v));
    }
    header["tensors"] = dir;
    header["payload_bytes"] = payload.size();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + path);
    f.write(kCheckpointMagic, 8);
    const std::string h = header.dump() + "\n";
    f.write(h.data(), static_cast<std::streamsize>(h.size()));
    f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!f) throw Error(ErrorCode::Io, "write failed for " + path);
}

template <class T>
Checkpoint<T> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot read " + path);
    char magic[8];
    if (!f.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw Error(ErrorCode::Format, path + " is not a checkpoint");
    std::string line;
    if (!std::getline(f, line)) throw Error(ErrorCode::Format, "truncated checkpoint header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Format, std::string("bad checkpoint header: ") + e.what());
    }
    std::string payload((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (payload.size() != header.at("payload_bytes").get<std::size_t>())
        throw Error(ErrorCode::Format, "checkpoint payload size mismatch");

    Checkpoint<T> ck;
    ck.model = std::make_unique<Model<T>>(model_config_from_json(header.at("config")));
    ck.model->step = header.value("step", std::int64_t{0});
    if (header.contains("stft")) ck.stft = stft_config_from_json(header["stft"]);
    if (header.contains("quantization")) ck.quant = quantization_from_json(header["quantization"]);

    std::map<std::string, const nlohmann::json*> entries;
    for (const auto& e : header.at("tensors")) entries[e.at("name").get<std::string>()] = &e;
    const auto* bytes = reinterpret_cast<const unsigned char*>(payload.data());
    for (const auto& p : ck.model->parameters()) {
        auto it = entries.find(p->name);
        if (it == entries.end()) throw Error(ErrorCode::Format, "checkpoint lacks tensor " + p->name);
        const auto shape = it->second->at("shape").template get<std::vector<std::size_t>>();
        if (shape != p->value.shape)
            throw Error(ErrorCode::ShapeMismatch, "tensor " + p->name + " has shape " + nlohmann::json(shape).dump());
        const auto off = it->second->at("offset").template get<std::size_t>();
        if (off + 4 * p->value.size() > payload.size()) throw Error(ErrorCode::Format, "tensor " + p->name + " overruns payload");
        for (std::size_t i = 0; i < p->value.size(); ++i) p->value.data[i] = T(detail::get_f32(bytes + off + 4 * i));
        if (!p->value.all_finite()) throw Error(ErrorCode::NonFinite, "non-finite weights in " + p->name);
    }
    return ck;
}

}  // namespace sig2text::nn

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sig2text/rng.hpp"
#include "sig2text/symlang.hpp"
#include "sig2text/tfr.hpp"
#include "sig2text/waveform.hpp"

namespace sig2text {

// ---------------------------------------------------------------- spec JSON

inline nlohmann::json spec_to_json(const WaveformSpec& spec) {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : spec.components) {
        nlohmann::json params = nlohmann::json::object();
        for (const auto& [p, v] : c.params) {
            if (is_integer_param(p)) params[std::string(to_string(p))] = std::lround(v);
            else params[std::string(to_string(p))] = v;
        }
        if (c.sub_type == SubType::Costas) params["Code"] = c.code;
        comps.push_back({{"wf_type", to_string(c.wf_type)}, {"sub_type", to_string(c.sub_type)}, {"params", params}});
    }
    return {{"components", comps}};
}

inline WaveformSpec spec_from_json(const nlohmann::json& j) {
    auto fail = [](const std::string& m) -> WaveformSpec { throw Error(ErrorCode::InvalidSpec, "spec JSON: " + m); };
    if (!j.is_object() || !j.contains("components") || !j["components"].is_array()) return fail("missing components");
    WaveformSpec spec;
    for (const auto& cj : j["components"]) {
        WaveformComponent c;
        const auto sub = sub_type_from_string(cj.value("sub_type", std::string{}));
        if (!sub) throw Error(ErrorCode::UnknownSubtype, "spec JSON: unknown sub_type " + cj.value("sub_type", std::string{}));
        c.sub_type = *sub;
        c.wf_type = family_of(*sub);
        if (cj.contains("wf_type")) {
            const auto t = wf_type_from_string(cj["wf_type"].get<std::string>());
            if (!t || *t != c.wf_type) return fail("wf_type does not match sub_type " + std::string(to_string(*sub)));
        }
        const auto params = cj.value("params", nlohmann::json::object());
        for (const auto& [k, v] : params.items()) {
            const auto p = param_from_string(k);
            if (!p) return fail("unknown parameter " + k);
            if (*p == Param::Code) {
                if (!v.is_array()) return fail("Code must be an array");
                c.code = v.get<std::vector<int>>();
            } else {
                if (!v.is_number()) return fail("parameter " + k + " must be a number");
                c.params[*p] = v.get<double>();
            }
        }
        spec.components.push_back(std::move(c));
    }
    validate(spec);
    return spec;
}

// ------------------------------------------------------------ generation

struct DatasetConfig {
    std::vector<SignalClass> classes;
    std::size_t n = 0;
    double snr_min = -10.0;
    double snr_max = 10.0;
    std::uint64_t seed = 0;
    double pulse_width_min = 50e-6;
    double pulse_width_max = 100e-6;
    int adc_bits = 8;  // 0 disables quantization
    SamplerConfig sampler;
};

struct Example {
    std::string id;
    SignalClass cls = SubType::LFM;
    WaveformSpec spec;  // continuous truth
    IQSignal signal;
};

/// Example `index` of the dataset; a pure function of (cfg, index).
inline Example generate_example(const DatasetConfig& cfg, std::size_t index) {
    if (cfg.classes.empty()) throw Error(ErrorCode::InvalidArgument, "no classes selected");
    if (cfg.snr_min > cfg.snr_max || cfg.pulse_width_min > cfg.pulse_width_max)
        throw Error(ErrorCode::InvalidArgument, "empty SNR or pulse-width range");
    if (cfg.pulse_width_min < cfg.sampler.min_pulse_width)
        throw Error(ErrorCode::InvalidArgument, "pulse widths below the sampler's alias-checked minimum");
    Rng rng = substream(cfg.seed, "dataset", index);
    Example ex;
    char id[32];
    std::snprintf(id, sizeof id, "s%06zu", index);
    ex.id = id;
    ex.cls = cfg.classes[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(cfg.classes.size()) - 1))];
    const double snr = cfg.snr_min == cfg.snr_max ? cfg.snr_min : uniform(rng, cfg.snr_min, cfg.snr_max);
    const double pw = cfg.pulse_width_min == cfg.pulse_width_max ? cfg.pulse_width_min
                                                                 : uniform(rng, cfg.pulse_width_min, cfg.pulse_width_max);
    const double phase = uniform(rng, 0.0, detail::kTwoPi);
    const std::uint64_t spec_seed = rng();
    const std::uint64_t noise_seed = rng();
    auto sc = cfg.sampler;
    ex.spec = sample_class(ex.cls, spec_seed, sc);
    ex.signal = synthesize(ex.spec, sc.fs, pw, phase);
    if (std::isfinite(snr)) ex.signal = add_awgn(ex.signal, snr, noise_seed);
    if (cfg.adc_bits > 0) ex.signal = adc_quantize(ex.signal, cfg.adc_bits).signal;
    return ex;
}

// ----------------------------------------------------------------- files

struct ManifestRecord {
    std::string id;
    std::string label_string;
    double snr_db = std::numeric_limits<double>::infinity();
    double fs_hz = 100e6;
    std::size_t n_samples = 0;
    std::uint64_t byte_offset = 0;
    std::optional<WaveformSpec> spec;  // continuous truth when known
    std::string cls;
    double pulse_width_s = 0;
    int adc_bits = 0;
};

inline nlohmann::json to_json(const ManifestRecord& r) {
    nlohmann::json j{{"id", r.id},
                     {"label_string", r.label_string},
                     {"snr_db", std::isfinite(r.snr_db) ? nlohmann::json(r.snr_db) : nlohmann::json(nullptr)},
                     {"fs_hz", r.fs_hz},
                     {"n_samples", r.n_samples},
                     {"byte_offset", r.byte_offset}};
    if (!r.cls.empty()) j["class"] = r.cls;
    if (r.pulse_width_s > 0) j["pulse_width_s"] = r.pulse_width_s;
    if (r.adc_bits > 0) j["adc_bits"] = r.adc_bits;
    if (r.spec) j["spec"] = spec_to_json(*r.spec);
    return j;
}

inline ManifestRecord manifest_record_from_json(const nlohmann::json& j) {
    try {
        ManifestRecord r;
        r.id = j.at("id").get<std::string>();
        r.label_string = j.at("label_string").get<std::string>();
        r.snr_db = j.at("snr_db").is_null() ? std::numeric_limits<double>::infinity() : j.at("snr_db").get<double>();
        r.fs_hz = j.at("fs_hz").get<double>();
        r.n_samples = j.at("n_samples").get<std::size_t>();
        r.byte_offset = j.at("byte_offset").get<std::uint64_t>();
        r.cls = j.value("class", std::string{});
        r.pulse_width_s = j.value("pulse_width_s", 0.0);
        r.adc_bits = j.value("adc_bits", 0);
        if (j.contains("spec")) r.spec = spec_from_json(j["spec"]);
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Format, std::string("manifest record: ") + e.what());
    }
}

inline std::filesystem::path manifest_path(const std::filesystem::path& dir) { return dir / "manifest.jsonl"; }
inline std::filesystem::path signals_path(const std::filesystem::path& dir) { return dir / "signals.bin"; }

/// Appends records to signals.bin (float32 LE I,Q interleaved) and
/// manifest.jsonl.
class DatasetWriter {
public:
    explicit DatasetWriter(const std::filesystem::path& dir, Vocabulary vocab = {}, QuantizationScheme q = {})
        : vocab_(std::move(vocab)), q_(q) {
        std::filesystem::create_directories(dir);
        bin_.open(signals_path(dir), std::ios::binary | std::ios::trunc);
        man_.open(manifest_path(dir), std::ios::trunc);
        if (!bin_ || !man_) throw Error(ErrorCode::Io, "cannot create dataset files in " + dir.string());
    }

    ManifestRecord write(const Example& ex) {
        ManifestRecord r;
        r.id = ex.id;
        r.label_string = to_label_string(serialize(ex.spec, vocab_, q_), vocab_, q_);
        r.snr_db = ex.signal.snr_db;
        r.fs_hz = ex.signal.fs;
        r.n_samples = ex.signal.size();
        r.byte_offset = offset_;
        r.spec = ex.spec;
        r.cls = to_string(ex.cls);
        r.pulse_width_s = ex.signal.pulse_width;
        r.adc_bits = ex.signal.adc_bits;
        std::string buf;
        buf.reserve(ex.signal.size() * 8);
        for (const auto& s : ex.signal.samples) {
            for (float v : {static_cast<float>(s.real()), static_cast<float>(s.imag())}) {
                const auto bits = std::bit_cast<std::uint32_t>(v);
                for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
            }
        }
        bin_.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        offset_ += buf.size();
        man_ << to_json(r).dump() << '\n';
        if (!bin_ || !man_) throw Error(ErrorCode::Io, "dataset write failed");
        return r;
    }

private:
    Vocabulary vocab_;
    QuantizationScheme q_;
    std::ofstream bin_;
    std::ofstream man_;
    std::uint64_t offset_ = 0;
};

class DatasetReader {
public:
    explicit DatasetReader(const std::filesystem::path& dir) {
        std::ifstream man(manifest_path(dir));
        if (!man) throw Error(ErrorCode::Io, "cannot read " + manifest_path(dir).string());
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(man, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorCode::Format, "manifest line " + std::to_string(lineno) + ": " + e.what());
            }
            records_.push_back(manifest_record_from_json(j));
        }
        bin_.open(signals_path(dir), std::ios::binary);
        if (!bin_) throw Error(ErrorCode::Io, "cannot read " + signals_path(dir).string());
        bin_.seekg(0, std::ios::end);
        bin_size_ = static_cast<std::uint64_t>(bin_.tellg());
        for (const auto& r : records_) {
            if (r.byte_offset + 8 * r.n_samples > bin_size_)
                throw Error(ErrorCode::Format, "record " + r.id + " extends past the end of signals.bin");
        }
    }

    const std::vector<ManifestRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }

    IQSignal signal(std::size_t i) {
        const auto& r = records_.at(i);
        std::string buf(8 * r.n_samples, '\0');
        bin_.seekg(static_cast<std::streamoff>(r.byte_offset));
        bin_.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!bin_) throw Error(ErrorCode::Io, "short read for record " + r.id);
        IQSignal s;
        s.fs = r.fs_hz;
        s.pulse_width = r.pulse_width_s > 0 ? r.pulse_width_s : static_cast<double>(r.n_samples) / r.fs_hz;
        s.snr_db = r.snr_db;
        s.adc_bits = r.adc_bits;
        s.samples.resize(r.n_samples);
        const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
        auto f32 = [](const unsigned char* b) {
            std::uint32_t bits = 0;
            for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(b[k]) << (8 * k);
            return static_cast<double>(std::bit_cast<float>(bits));
        };
        for (std::size_t k = 0; k < r.n_samples; ++k) s.samples[k] = {f32(p + 8 * k), f32(p + 8 * k + 4)};
        return s;
    }

    /// Truth spec for record i: the stored continuous spec if present,
    /// otherwise the parsed label string.
    WaveformSpec truth(std::size_t i, const Vocabulary& vocab = {}, const QuantizationScheme& q = {}) const {
        const auto& r = records_.at(i);
        if (r.spec) return *r.spec;
        auto res = parse(from_label_string(r.label_string, vocab, q), vocab, q);
        if (!res.ok()) throw Error(ErrorCode::Format, "record " + r.id + " has an unparsable label: " + res.message);
        return *res.spec;
    }

private:
    std::vector<ManifestRecord> records_;
    std::ifstream bin_;
    std::uint64_t bin_size_ = 0;
};

/// Generates cfg.n examples into dir.
inline std::vector<ManifestRecord> write_dataset(const std::filesystem::path& dir, const DatasetConfig& cfg) {
    DatasetWriter w(dir);
    std::vector<ManifestRecord> out;
    for (std::size_t i = 0; i < cfg.n; ++i) out.push_back(w.write(generate_example(cfg, i)));
    return out;
}

// ------------------------------------------------------------ features

/// The model's input: STFT image resized to the grid, cut into patches.
inline PatchSequence featurize(const IQSignal& s, const StftConfig& stft, int patch_rows, int patch_cols) {
    return patchify(signal_to_image(s, stft), patch_rows, patch_cols);
}

}  // namespace sig2text

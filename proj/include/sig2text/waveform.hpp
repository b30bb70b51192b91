#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "sig2text/costas.hpp"
#include "sig2text/error.hpp"
#include "sig2text/rng.hpp"

namespace sig2text {

enum class WfType { FM, PM, FC };

enum class SubType { LFM, Sin, Tri, Frank, P1, P2, P3, P4, T1, T2, T3, T4, Costas };

inline constexpr std::array<SubType, 13> kAllSubTypes = {
    SubType::LFM, SubType::Sin, SubType::Tri, SubType::Frank, SubType::P1, SubType::P2, SubType::P3,
    SubType::P4,  SubType::T1,  SubType::T2,  SubType::T3,    SubType::T4, SubType::Costas};

/// Waveform parameters. Frequencies are in MHz, `T` in microseconds,
/// counts are dimensionless. `Code` is the Costas hop sequence and lives in
/// WaveformComponent::code rather than in the scalar map.
enum class Param { cf, B, T, FH, Code, seg_num, phasestate_num, deltaF, code_length };

inline constexpr std::array<Param, 9> kAllParams = {Param::cf,      Param::B,
                                                    Param::T,       Param::FH,
                                                    Param::Code,    Param::seg_num,
                                                    Param::phasestate_num, Param::deltaF,
                                                    Param::code_length};

inline std::string_view to_string(WfType t) {
    switch (t) {
        case WfType::FM: return "FM";
        case WfType::PM: return "PM";
        case WfType::FC: return "FC";
    }
    return "?";
}

inline std::string_view to_string(SubType s) {
    switch (s) {
        case SubType::LFM: return "LFM";
        case SubType::Sin: return "Sin";
        case SubType::Tri: return "Tri";
        case SubType::Frank: return "Frank";
        case SubType::P1: return "P1";
        case SubType::P2: return "P2";
        case SubType::P3: return "P3";
        case SubType::P4: return "P4";
        case SubType::T1: return "T1";
        case SubType::T2: return "T2";
        case SubType::T3: return "T3";
        case SubType::T4: return "T4";
        case SubType::Costas: return "Costas";
    }
    return "?";
}

inline std::string_view to_string(Param p) {
    switch (p) {
        case Param::cf: return "cf";
        case Param::B: return "B";
        case Param::T: return "T";
        case Param::FH: return "FH";
        case Param::Code: return "Code";
        case Param::seg_num: return "seg_num";
        case Param::phasestate_num: return "phasestate_num";
        case Param::deltaF: return "deltaF";
        case Param::code_length: return "code_length";
    }
    return "?";
}

inline std::optional<WfType> wf_type_from_string(std::string_view s) {
    for (WfType t : {WfType::FM, WfType::PM, WfType::FC}) {
        if (to_string(t) == s) return t;
    }
    return std::nullopt;
}

inline std::optional<SubType> sub_type_from_string(std::string_view s) {
    for (SubType t : kAllSubTypes) {
        if (to_string(t) == s) return t;
    }
    return std::nullopt;
}

inline std::optional<Param> param_from_string(std::string_view s) {
    for (Param p : kAllParams) {
        if (to_string(p) == s) return p;
    }
    return std::nullopt;
}

/// The waveform family a subtype belongs to.
inline WfType family_of(SubType s) {
    switch (s) {
        case SubType::LFM:
        case SubType::Sin:
        case SubType::Tri: return WfType::FM;
        case SubType::Costas: return WfType::FC;
        default: return WfType::PM;
    }
}

/// Parameters carried by a subtype, in the order they are written out.
inline std::vector<Param> required_params(SubType s) {
    switch (s) {
        case SubType::LFM: return {Param::cf, Param::B};
        case SubType::Sin:
        case SubType::Tri: return {Param::cf, Param::B, Param::T};
        case SubType::Costas: return {Param::cf, Param::FH, Param::Code};
        case SubType::T1:
        case SubType::T2: return {Param::cf, Param::seg_num, Param::phasestate_num};
        case SubType::T3:
        case SubType::T4: return {Param::cf, Param::seg_num, Param::phasestate_num, Param::deltaF};
        default: return {Param::cf, Param::code_length};
    }
}

inline bool is_integer_param(Param p) {
    return p == Param::seg_num || p == Param::phasestate_num || p == Param::code_length ||
           p == Param::Code;
}

struct WaveformComponent {
    WfType wf_type = WfType::FM;
    SubType sub_type = SubType::LFM;
    std::map<Param, double> params;
    std::vector<int> code;  // Costas only

    double get(Param p) const {
        auto it = params.find(p);
        if (it == params.end()) {
            throw Error(ErrorCode::InvalidSpec,
                        std::string(to_string(sub_type)) + " is missing parameter " +
                            std::string(to_string(p)));
        }
        return it->second;
    }

    bool operator==(const WaveformComponent&) const = default;
};

struct WaveformSpec {
    std::vector<WaveformComponent> components;

    bool operator==(const WaveformSpec&) const = default;
};

enum class Combination { Single, Sequential, Multiplicative };

/// Components of one family are laid end to end in time; components of
/// different families modulate the same pulse.
inline Combination combination(const WaveformSpec& spec) {
    if (spec.components.size() <= 1) return Combination::Single;
    const WfType first = spec.components.front().wf_type;
    for (const auto& c : spec.components) {
        if (c.wf_type != first) return Combination::Multiplicative;
    }
    return Combination::Sequential;
}

inline WaveformComponent make_component(SubType s, std::map<Param, double> params,
                                        std::vector<int> code = {}) {
    return WaveformComponent{family_of(s), s, std::move(params), std::move(code)};
}

/// Throws Error(InvalidSpec) unless every component has a legal
/// (type, subtype) pair and exactly the parameters its subtype needs.
inline void validate(const WaveformSpec& spec) {
    if (spec.components.empty()) throw Error(ErrorCode::InvalidSpec, "spec has no components");
    for (const auto& c : spec.components) {
        const std::string name(to_string(c.sub_type));
        if (family_of(c.sub_type) != c.wf_type) {
            throw Error(ErrorCode::InvalidSpec,
                        name + " is not a subtype of " + std::string(to_string(c.wf_type)));
        }
        const auto want = required_params(c.sub_type);
        std::size_t scalar_count = 0;
        for (Param p : want) {
            if (p == Param::Code) {
                if (c.code.empty()) throw Error(ErrorCode::InvalidSpec, name + " needs a code sequence");
                continue;
            }
            ++scalar_count;
            auto it = c.params.find(p);
            if (it == c.params.end()) {
                throw Error(ErrorCode::InvalidSpec,
                            name + " is missing parameter " + std::string(to_string(p)));
            }
            const double v = it->second;
            if (!std::isfinite(v) || v < 0.0) {
                throw Error(ErrorCode::InvalidSpec,
                            name + " parameter " + std::string(to_string(p)) + " must be finite and >= 0");
            }
            if (is_integer_param(p) && (v != std::round(v) || v < 1.0)) {
                throw Error(ErrorCode::InvalidSpec,
                            name + " parameter " + std::string(to_string(p)) + " must be a positive integer");
            }
        }
        if (c.params.size() != scalar_count) {
            throw Error(ErrorCode::InvalidSpec, name + " carries parameters it does not use");
        }
        if (c.sub_type != SubType::Costas && !c.code.empty()) {
            throw Error(ErrorCode::InvalidSpec, name + " cannot carry a code sequence");
        }
        if (c.sub_type == SubType::Sin || c.sub_type == SubType::Tri) {
            if (c.get(Param::T) <= 0.0) throw Error(ErrorCode::InvalidSpec, name + " needs T > 0");
        }
        if ((c.sub_type >= SubType::T1 && c.sub_type <= SubType::T4) && c.get(Param::phasestate_num) < 2) {
            throw Error(ErrorCode::InvalidSpec, name + " needs phasestate_num >= 2");
        }
        for (int v : c.code) {
            if (v < 1) throw Error(ErrorCode::InvalidSpec, "Costas code entries must be >= 1");
        }
    }
}

// ---------------------------------------------------------------------------
// Signals

struct IQSignal {
    std::vector<std::complex<double>> samples;
    double fs = 100e6;
    double pulse_width = 0.0;
    double snr_db = std::numeric_limits<double>::infinity();  // +inf: noiseless
    int adc_bits = 0;                                          // 0: not quantized

    std::size_t size() const { return samples.size(); }
};

inline double mean_power(const std::vector<std::complex<double>>& x) {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& v : x) acc += std::norm(v);
    return acc / static_cast<double>(x.size());
}

namespace detail {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline int to_int(double v) { return static_cast<int>(std::lround(v)); }

// Chip index of sample k when n samples are split into `chips` equal chips.
inline std::size_t chip_of(std::size_t k, std::size_t n, std::size_t chips) {
    return std::min(chips - 1, k * chips / n);
}

// Polytime phase: integer number of phase steps reduced mod n_states.
inline double phase_state(double steps, int n_states) {
    long long m = static_cast<long long>(std::floor(steps));
    m %= n_states;
    if (m < 0) m += n_states;
    return kTwoPi * static_cast<double>(m) / n_states;
}

}  // namespace detail

/// Chip phases (radians) of the polyphase codes. Frank, P1 and P2 take the
/// base M and return M*M chips ordered group by group; P3 and P4 take the
/// total length N.
inline std::vector<double> polyphase_chips(SubType s, int code_length) {
    using detail::kPi;
    if (code_length < 1) throw Error(ErrorCode::InvalidSpec, "code_length must be >= 1");
    std::vector<double> phi;
    const double m = code_length;
    switch (s) {
        case SubType::Frank:
        case SubType::P1:
        case SubType::P2:
            phi.reserve(static_cast<std::size_t>(code_length * code_length));
            for (int j = 1; j <= code_length; ++j) {
                for (int i = 1; i <= code_length; ++i) {
                    if (s == SubType::Frank) {
                        phi.push_back(2.0 * kPi * (i - 1) * (j - 1) / m);
                    } else if (s == SubType::P1) {
                        phi.push_back(-(kPi / m) * (m - (2.0 * j - 1.0)) * ((j - 1.0) * m + (i - 1.0)));
                    } else {
                        phi.push_back(-(kPi / (2.0 * m)) * (2.0 * i - 1.0 - m) * (2.0 * j - 1.0 - m));
                    }
                }
            }
            break;
        case SubType::P3:
        case SubType::P4:
            phi.reserve(static_cast<std::size_t>(code_length));
            for (int i = 1; i <= code_length; ++i) {
                double v = kPi * (i - 1.0) * (i - 1.0) / m;
                if (s == SubType::P4) v -= kPi * (i - 1.0);
                phi.push_back(v);
            }
            break;
        default:
            throw Error(ErrorCode::UnknownSubtype,
                        std::string(to_string(s)) + " is not a polyphase code");
    }
    return phi;
}

/// Modulation phase (radians, carrier excluded) of one component over `n`
/// samples at rate `fs`. The component occupies the whole `n`-sample span.
inline std::vector<double> modulation_phase(const WaveformComponent& c, std::size_t n, double fs) {
    using detail::kPi;
    using detail::kTwoPi;
    std::vector<double> theta(n, 0.0);
    if (n == 0) return theta;
    const double duration = static_cast<double>(n) / fs;
    switch (c.sub_type) {
        case SubType::LFM: {
            const double b = c.get(Param::B) * 1e6;
            for (std::size_t k = 0; k < n; ++k) {
                const double t = static_cast<double>(k) / fs;
                theta[k] = kTwoPi * (-0.5 * b * t + 0.5 * b * t * t / duration);
            }
            break;
        }
        case SubType::Sin: {
            const double b = c.get(Param::B) * 1e6;
            const double period = c.get(Param::T) * 1e-6;
            for (std::size_t k = 0; k < n; ++k) {
                const double t = static_cast<double>(k) / fs;
                theta[k] = 0.5 * b * period * (1.0 - std::cos(kTwoPi * t / period));
            }
            break;
        }
        case SubType::Tri: {
            // Offset frequency rises from -B/2 to +B/2 over the first half
            // period and falls back over the second; each period integrates to 0.
            const double b = c.get(Param::B) * 1e6;
            const double period = c.get(Param::T) * 1e-6;
            const double half = 0.5 * period;
            for (std::size_t k = 0; k < n; ++k) {
                const double t = static_cast<double>(k) / fs;
                const double tau = t - period * std::floor(t / period);
                double cycles;
                if (tau < half) {
                    cycles = -0.5 * b * tau + b * tau * tau / period;
                } else {
                    const double u = tau - half;
                    cycles = 0.5 * b * u - b * u * u / period;
                }
                theta[k] = kTwoPi * cycles;
            }
            break;
        }
        case SubType::Costas: {
            const std::size_t chips = c.code.size();
            const double hop = c.get(Param::FH) * 1e6;
            const double centre = 0.5 * (static_cast<double>(chips) + 1.0);
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                theta[k] = acc;
                const auto chip = detail::chip_of(k, n, chips);
                acc += kTwoPi * (c.code[chip] - centre) * hop / fs;
            }
            break;
        }
        case SubType::Frank:
        case SubType::P1:
        case SubType::P2:
        case SubType::P3:
        case SubType::P4: {
            const auto chips = polyphase_chips(c.sub_type, detail::to_int(c.get(Param::code_length)));
            for (std::size_t k = 0; k < n; ++k) theta[k] = chips[detail::chip_of(k, n, chips.size())];
            break;
        }
        case SubType::T1:
        case SubType::T2:
        case SubType::T3:
        case SubType::T4: {
            const int segs = detail::to_int(c.get(Param::seg_num));
            const int states = detail::to_int(c.get(Param::phasestate_num));
            const double ns = states;
            const double df = c.sub_type >= SubType::T3 ? c.get(Param::deltaF) * 1e6 : 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double t = static_cast<double>(k) / fs;
                const double j = static_cast<double>(
                    std::min<std::size_t>(static_cast<std::size_t>(segs) - 1, k * segs / n));
                double steps = 0.0;
                switch (c.sub_type) {
                    case SubType::T1:
                        steps = (segs * t - j * duration) * (j * ns / duration);
                        break;
                    case SubType::T2:
                        steps = (segs * t - j * duration) * ((2.0 * j - segs + 1.0) / duration) * (ns / 2.0);
                        break;
                    case SubType::T3:
                        steps = ns * df * t * t / (2.0 * duration);
                        break;
                    default:
                        steps = ns * df * t * t / (2.0 * duration) - ns * df * t / 2.0;
                        break;
                }
                theta[k] = detail::phase_state(steps, states);
            }
            break;
        }
    }
    return theta;
}

/// Instantaneous-frequency excursion (Hz) of a component around its carrier,
/// as {lowest, highest}. Polyphase codes are treated as carrier-only.
inline std::pair<double, double> frequency_extent(const WaveformComponent& c, double duration) {
    switch (c.sub_type) {
        case SubType::LFM:
        case SubType::Sin:
        case SubType::Tri: {
            const double half = 0.5 * c.get(Param::B) * 1e6;
            return {-half, half};
        }
        case SubType::Costas: {
            const double span = 0.5 * (static_cast<double>(c.code.size()) - 1.0) * c.get(Param::FH) * 1e6;
            return {-span, span};
        }
        case SubType::T1: {
            const double k = c.get(Param::seg_num);
            return {0.0, k * (k - 1.0) / duration};
        }
        case SubType::T2: {
            const double k = c.get(Param::seg_num);
            const double half = k * (k - 1.0) / (2.0 * duration);
            return {-half, half};
        }
        case SubType::T3: return {0.0, c.get(Param::deltaF) * 1e6};
        case SubType::T4: {
            const double half = 0.5 * c.get(Param::deltaF) * 1e6;
            return {-half, half};
        }
        default: return {0.0, 0.0};
    }
}

/// Largest |instantaneous frequency| (Hz) the synthesized pulse reaches.
inline double max_instantaneous_frequency(const WaveformSpec& spec, double pulse_width) {
    const double carrier = spec.components.front().get(Param::cf) * 1e6;
    const auto comb = combination(spec);
    const double seg_duration =
        comb == Combination::Sequential ? pulse_width / static_cast<double>(spec.components.size())
                                        : pulse_width;
    double worst = 0.0;
    if (comb == Combination::Multiplicative) {
        double lo = 0.0, hi = 0.0;
        for (const auto& c : spec.components) {
            const auto [l, h] = frequency_extent(c, seg_duration);
            lo += l;
            hi += h;
        }
        worst = std::max(std::abs(carrier + lo), std::abs(carrier + hi));
    } else {
        for (const auto& c : spec.components) {
            const auto [l, h] = frequency_extent(c, seg_duration);
            worst = std::max({worst, std::abs(carrier + l), std::abs(carrier + h)});
        }
    }
    return worst;
}

/// Noiseless unit-modulus pulse for `spec`. The carrier is taken from the
/// first component; later `cf` values do not contribute. Sequential
/// components split the pulse into equal segments (boundary i at
/// round(n / count) * i), multiplicative components add their phases.
inline IQSignal synthesize(const WaveformSpec& spec, double fs, double pulse_width,
                           double phase_offset = 0.0) {
    validate(spec);
    if (!(fs > 0.0) || !(pulse_width > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "fs and pulse_width must be positive");
    }
    const auto n = static_cast<std::size_t>(std::llround(pulse_width * fs));
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "pulse has zero samples");
    const double fmax = max_instantaneous_frequency(spec, pulse_width);
    if (fmax >= 0.5 * fs) {
        throw Error(ErrorCode::Aliasing, "instantaneous frequency " + std::to_string(fmax * 1e-6) +
                                             " MHz reaches fs/2 = " + std::to_string(0.5e-6 * fs) + " MHz");
    }

    std::vector<double> theta(n, 0.0);
    const auto comb = combination(spec);
    if (comb == Combination::Sequential) {
        const std::size_t count = spec.components.size();
        const auto step = static_cast<std::size_t>(std::llround(static_cast<double>(n) / count));
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t begin = std::min(n, step * i);
            const std::size_t end = i + 1 == count ? n : std::min(n, step * (i + 1));
            const auto seg = modulation_phase(spec.components[i], end - begin, fs);
            std::copy(seg.begin(), seg.end(), theta.begin() + static_cast<std::ptrdiff_t>(begin));
        }
    } else {
        for (const auto& c : spec.components) {
            const auto part = modulation_phase(c, n, fs);
            for (std::size_t k = 0; k < n; ++k) theta[k] += part[k];
        }
    }

    const double carrier = spec.components.front().get(Param::cf) * 1e6;
    IQSignal out;
    out.fs = fs;
    out.pulse_width = pulse_width;
    out.samples.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        // Reduce the carrier phase per sample so long pulses keep precision.
        const double cycles = carrier * static_cast<double>(k) / fs;
        const double carrier_phase = detail::kTwoPi * (cycles - std::floor(cycles));
        out.samples[k] = std::polar(1.0, theta[k] + carrier_phase + phase_offset);
    }
    return out;
}

/// Adds complex white Gaussian noise with total variance P_signal / 10^(snr/10)
/// split equally between I and Q. snr_db = +inf returns the input unchanged.
inline IQSignal add_awgn(const IQSignal& signal, double snr_db, std::uint64_t rng_seed) {
    IQSignal out = signal;
    if (std::isinf(snr_db) && snr_db > 0) return out;
    const double p = mean_power(signal.samples);
    const double sigma = std::sqrt(p / std::pow(10.0, snr_db / 10.0) / 2.0);
    Rng rng = substream(rng_seed, "awgn");
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& v : out.samples) {
        const double i = gauss(rng);
        const double q = gauss(rng);
        v += std::complex<double>(sigma * i, sigma * q);
    }
    out.snr_db = snr_db;
    return out;
}

struct QuantizeResult {
    IQSignal signal;
    bool all_zero = false;  // input had no energy; returned unchanged
};

/// Receiver ADC model. I and Q are quantized independently onto 2^bits
/// midrise levels spaced 2A/(2^bits - 1) apart, where A is the largest |I| or
/// |Q| in the signal, so the extreme levels sit exactly on +-A. Because A is
/// reproduced exactly, quantizing twice equals quantizing once.
inline QuantizeResult adc_quantize(const IQSignal& signal, int bits) {
    if (bits < 2 || bits > 16) throw Error(ErrorCode::OutOfRange, "ADC bits must be in [2, 16]");
    QuantizeResult res{signal, false};
    double peak = 0.0;
    for (const auto& v : signal.samples) peak = std::max({peak, std::abs(v.real()), std::abs(v.imag())});
    if (peak == 0.0) {
        res.all_zero = true;
        return res;
    }
    const long long levels = 1LL << bits;
    const double step = 2.0 * peak / static_cast<double>(levels - 1);
    const auto quantize = [&](double x) {
        const double m = std::clamp(std::floor(x / step), -static_cast<double>(levels / 2),
                                    static_cast<double>(levels / 2 - 1));
        return (m + 0.5) * step;
    };
    for (auto& v : res.signal.samples) v = {quantize(v.real()), quantize(v.imag())};
    res.signal.adc_bits = bits;
    return res;
}

// ---------------------------------------------------------------------------
// Random specs

enum class HybridFamily { FmFm, FmPm, FmFc, PmFc, PmPm };

inline constexpr std::array<HybridFamily, 5> kAllHybridFamilies = {
    HybridFamily::FmFm, HybridFamily::FmPm, HybridFamily::FmFc, HybridFamily::PmFc, HybridFamily::PmPm};

inline std::string_view to_string(HybridFamily h) {
    switch (h) {
        case HybridFamily::FmFm: return "FM+FM";
        case HybridFamily::FmPm: return "FM+PM";
        case HybridFamily::FmFc: return "FM+FC";
        case HybridFamily::PmFc: return "PM+FC";
        case HybridFamily::PmPm: return "PM+PM";
    }
    return "?";
}

inline std::optional<HybridFamily> hybrid_family_from_string(std::string_view s) {
    for (auto h : kAllHybridFamilies) {
        if (to_string(h) == s) return h;
    }
    return std::nullopt;
}

/// A basic subtype or a hybrid family; the unit of class selection.
using SignalClass = std::variant<SubType, HybridFamily>;

inline std::string to_string(const SignalClass& c) {
    return std::visit([](auto v) { return std::string(to_string(v)); }, c);
}

inline std::optional<SignalClass> signal_class_from_string(std::string_view s) {
    if (auto t = sub_type_from_string(s)) return SignalClass{*t};
    if (auto h = hybrid_family_from_string(s)) return SignalClass{*h};
    return std::nullopt;
}

struct SamplerConfig {
    double fs = 100e6;
    double min_pulse_width = 50e-6;  // aliasing is checked against the shortest pulse
    double cf_min = 10.0, cf_max = 40.0;
    double lfm_b_min = 2.0, lfm_b_max = 10.0;
    double sintri_b_min = 10.0, sintri_b_max = 20.0;
    double t_min = 5.0, t_max = 20.0;
    double fh_min = 0.5, fh_max = 2.0;
    int seg_min = 1, seg_max = 4;
    int phase_states_min = 2, phase_states_max = 4;
    double delta_f_min = 1.0, delta_f_max = 10.0;
    int code_length_min = 3, code_length_max = 10;
    int costas_order_min = kMinCostasOrder, costas_order_max = kMaxCostasOrder;
    int max_attempts = 1000;
};

namespace detail {

inline WaveformComponent sample_component(SubType s, double cf, Rng& rng, const SamplerConfig& cfg) {
    std::map<Param, double> p{{Param::cf, cf}};
    std::vector<int> code;
    switch (s) {
        case SubType::LFM:
            p[Param::B] = uniform(rng, cfg.lfm_b_min, cfg.lfm_b_max);
            break;
        case SubType::Sin:
        case SubType::Tri:
            p[Param::B] = uniform(rng, cfg.sintri_b_min, cfg.sintri_b_max);
            p[Param::T] = uniform(rng, cfg.t_min, cfg.t_max);
            break;
        case SubType::Costas: {
            const int order = uniform_int(rng, cfg.costas_order_min, cfg.costas_order_max);
            const auto& table = costas_arrays(order);
            code = table[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(table.size()) - 1))];
            p[Param::FH] = uniform(rng, cfg.fh_min, cfg.fh_max);
            break;
        }
        case SubType::T1:
        case SubType::T2:
        case SubType::T3:
        case SubType::T4:
            p[Param::seg_num] = uniform_int(rng, cfg.seg_min, cfg.seg_max);
            p[Param::phasestate_num] = uniform_int(rng, cfg.phase_states_min, cfg.phase_states_max);
            if (s == SubType::T3 || s == SubType::T4) {
                p[Param::deltaF] = uniform(rng, cfg.delta_f_min, cfg.delta_f_max);
            }
            break;
        default:
            p[Param::code_length] = uniform_int(rng, cfg.code_length_min, cfg.code_length_max);
            break;
    }
    return make_component(s, std::move(p), std::move(code));
}

inline SubType pick(Rng& rng, const std::vector<SubType>& from) {
    return from[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(from.size()) - 1))];
}

// Draws until the pulse stays below Nyquist at the shortest pulse width.
template <class Draw>
WaveformSpec draw_until_valid(Rng& rng, const SamplerConfig& cfg, Draw draw) {
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        WaveformSpec spec = draw(rng);
        if (max_instantaneous_frequency(spec, cfg.min_pulse_width) < 0.5 * cfg.fs) return spec;
    }
    throw Error(ErrorCode::InvalidArgument, "sampler could not find an alias-free spec");
}

}  // namespace detail

/// One basic waveform: subtype uniform over `class_filter`, parameters
/// uniform over their configured ranges.
inline WaveformSpec sample_spec(const std::set<SubType>& class_filter, std::uint64_t rng_seed,
                                const SamplerConfig& cfg = {}) {
    if (class_filter.empty()) throw Error(ErrorCode::InvalidArgument, "class filter is empty");
    const std::vector<SubType> classes(class_filter.begin(), class_filter.end());
    Rng rng = substream(rng_seed, "spec");
    const SubType s = detail::pick(rng, classes);
    return detail::draw_until_valid(rng, cfg, [&](Rng& r) {
        const double cf = uniform(r, cfg.cf_min, cfg.cf_max);
        return WaveformSpec{{detail::sample_component(s, cf, r, cfg)}};
    });
}

/// Two-component hybrid of the given family. Both components share the
/// carrier frequency.
inline WaveformSpec sample_hybrid(HybridFamily family, std::uint64_t rng_seed, const SamplerConfig& cfg = {}) {
    static const std::vector<SubType> polyphase_any = {SubType::P1, SubType::P2, SubType::P3, SubType::P4,
                                                       SubType::T1, SubType::T2, SubType::T3, SubType::T4,
                                                       SubType::Frank};
    static const std::vector<SubType> polyphase_p = {SubType::P1, SubType::P2, SubType::P3, SubType::P4,
                                                     SubType::Frank};
    Rng rng = substream(rng_seed, "hybrid");
    SubType first = SubType::LFM;
    SubType second = SubType::LFM;
    switch (family) {
        case HybridFamily::FmFm: break;
        case HybridFamily::FmPm: second = detail::pick(rng, polyphase_any); break;
        case HybridFamily::FmFc: second = SubType::Costas; break;
        case HybridFamily::PmFc:
            first = detail::pick(rng, polyphase_any);
            second = SubType::Costas;
            break;
        case HybridFamily::PmPm:
            first = detail::pick(rng, polyphase_p);
            second = detail::pick(rng, polyphase_p);
            break;
    }
    return detail::draw_until_valid(rng, cfg, [&](Rng& r) {
        const double cf = uniform(r, cfg.cf_min, cfg.cf_max);
        WaveformSpec spec;
        spec.components.push_back(detail::sample_component(first, cf, r, cfg));
        spec.components.push_back(detail::sample_component(second, cf, r, cfg));
        return spec;
    });
}

inline WaveformSpec sample_class(const SignalClass& cls, std::uint64_t rng_seed, const SamplerConfig& cfg = {}) {
    if (const auto* s = std::get_if<SubType>(&cls)) return sample_spec({*s}, rng_seed, cfg);
    return sample_hybrid(std::get<HybridFamily>(cls), rng_seed, cfg);
}

}  // namespace sig2text

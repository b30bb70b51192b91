#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sig2text/error.hpp"
#include "sig2text/grammar.hpp"
#include "sig2text/lr_parser.hpp"
#include "sig2text/waveform.hpp"

namespace sig2text {

/// Token ids of one description, normally <sos> ... <eos>.
using TokenSequence = std::vector<int>;

inline constexpr int kDefaultMaxLen = 50;

// ---------------------------------------------------------------------------
// Grammar

/// Production list of the description language. Each entry pairs a family
/// keyword with one of its subtypes and that subtype's parameter list;
/// entries concatenate through the recursive start rule.
inline const char* kRadarGrammarText = R"(S -> Entry S | Entry
Entry -> FM LFM LFMpara
Entry -> FM SinTri SinTripara
Entry -> PM PCode Ppara
Entry -> PM T12 T12para
Entry -> PM T34 T34para
Entry -> FC Costas Costaspara
SinTri -> Sin | Tri
PCode -> P1 | P2 | P3 | P4 | Frank
T12 -> T1 | T2
T34 -> T3 | T4
LFMpara -> cf Cf B Bv
SinTripara -> cf Cf B Bv T Tv
Costaspara -> cf Cf FH FHv Code CS
T12para -> cf Cf seg_num SN phasestate_num PSN
T34para -> cf Cf seg_num SN phasestate_num PSN deltaF DF
Ppara -> cf Cf code_length CL
Cf -> Number
Bv -> Number
Tv -> Number
FHv -> Number
CS -> Number | Number CS
SN -> Number
PSN -> Number
DF -> Number
CL -> Number
)";

inline const Grammar& radar_grammar() {
    static const Grammar g = grammar_from_text(kRadarGrammarText);
    return g;
}

inline const LrTable& radar_lr_table() {
    static const LrTable table(radar_grammar());
    return table;
}

inline const CnfGrammar& radar_cnf() {
    static const CnfGrammar cnf = to_cnf(radar_grammar());
    return cnf;
}

// ---------------------------------------------------------------------------
// Vocabulary

inline constexpr std::array<std::string_view, 25> kKeywords = {
    "FM", "PM", "FC", "LFM", "Sin", "Tri", "Costas", "T1", "T2", "T3", "T4", "P1", "P2",
    "P3", "P4", "Frank", "cf", "B", "T", "FH", "Code", "seg_num", "phasestate_num", "deltaF", "code_length"};

/// Dense token ids: <pad>, <sos>, <eos>, the keywords, then NUM_0..NUM_{n-1}.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kSos = 1;
    static constexpr int kEos = 2;
    static constexpr int kFirstKeyword = 3;

    Vocabulary() : Vocabulary(1024) {}
    explicit Vocabulary(int numeric_count) : numeric_count_(numeric_count) {
        if (numeric_count <= 0) throw Error(ErrorCode::InvalidArgument, "numeric token count must be positive");
        names_ = {"<pad>", "<sos>", "<eos>"};
        for (auto k : kKeywords) names_.emplace_back(k);
        for (int i = 0; i < numeric_count; ++i) names_.push_back("NUM_" + std::to_string(i));
        for (std::size_t i = 0; i < names_.size(); ++i) ids_.emplace(names_[i], static_cast<int>(i));
    }

    int size() const { return static_cast<int>(names_.size()); }
    int numeric_count() const { return numeric_count_; }
    int first_numeric() const { return kFirstKeyword + static_cast<int>(kKeywords.size()); }

    bool is_special(int id) const { return id >= 0 && id < kFirstKeyword; }
    bool is_keyword(int id) const { return id >= kFirstKeyword && id < first_numeric(); }
    bool is_numeric(int id) const { return id >= first_numeric() && id < size(); }

    int numeric_id(long long value) const {
        if (value < 0 || value >= numeric_count_) {
            throw Error(ErrorCode::OutOfRange, "value " + std::to_string(value) + " has no numeric token (0.." +
                                                   std::to_string(numeric_count_ - 1) + ")");
        }
        return first_numeric() + static_cast<int>(value);
    }
    int numeric_value(int id) const { return id - first_numeric(); }

    const std::string& name(int id) const {
        if (id < 0 || id >= size()) throw Error(ErrorCode::OutOfRange, "token id " + std::to_string(id) + " out of range");
        return names_[static_cast<std::size_t>(id)];
    }

    std::optional<int> id(std::string_view name) const {
        auto it = ids_.find(std::string(name));
        if (it == ids_.end()) return std::nullopt;
        return it->second;
    }

    int keyword_id(std::string_view kw) const {
        auto v = id(kw);
        if (!v || !is_keyword(*v)) throw Error(ErrorCode::InvalidArgument, "unknown keyword " + std::string(kw));
        return *v;
    }

    /// Grammar terminal of a token: its keyword, "Number", or -1 for specials.
    int terminal_of(int id, const LrTable& table) const {
        if (is_keyword(id)) return table.terminal_id(names_[static_cast<std::size_t>(id)]);
        if (is_numeric(id)) return table.terminal_id("Number");
        return -1;
    }
    int terminal_of(int id, const CnfGrammar& cnf) const {
        if (is_keyword(id)) return cnf.terminal_id(names_[static_cast<std::size_t>(id)]);
        if (is_numeric(id)) return cnf.terminal_id("Number");
        return -1;
    }

private:
    int numeric_count_;
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> ids_;
};

// ---------------------------------------------------------------------------
// Quantization

/// Unit per parameter class. quantize(x) = round(x / unit).
struct QuantizationScheme {
    double freq_unit = 0.1;   // MHz: cf, B, FH, deltaF
    double time_unit = 0.1;   // us: T
    double count_unit = 1.0;  // seg_num, phasestate_num, code_length, Code entries

    double unit(Param p) const {
        switch (p) {
            case Param::cf:
            case Param::B:
            case Param::FH:
            case Param::deltaF: return freq_unit;
            case Param::T: return time_unit;
            default: return count_unit;
        }
    }

    long long quantize(Param p, double x) const { return std::llround(x / unit(p)); }
    double dequantize(Param p, long long q) const { return static_cast<double>(q) * unit(p); }
};

/// `spec` with every continuous parameter snapped to its quantization grid.
inline WaveformSpec quantized(const WaveformSpec& spec, const QuantizationScheme& q) {
    WaveformSpec out = spec;
    for (auto& c : out.components) {
        for (auto& [p, v] : c.params) v = q.dequantize(p, q.quantize(p, v));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

/// <sos>, then each component as family, subtype and its parameters in
/// production order, then <eos>. Every component writes its own cf.
inline TokenSequence serialize(const WaveformSpec& spec, const Vocabulary& vocab,
                               const QuantizationScheme& q = {}, int max_len = kDefaultMaxLen) {
    validate(spec);
    TokenSequence out{Vocabulary::kSos};
    for (const auto& c : spec.components) {
        out.push_back(vocab.keyword_id(to_string(c.wf_type)));
        out.push_back(vocab.keyword_id(to_string(c.sub_type)));
        for (Param p : required_params(c.sub_type)) {
            out.push_back(vocab.keyword_id(to_string(p)));
            if (p == Param::Code) {
                for (int v : c.code) out.push_back(vocab.numeric_id(q.quantize(p, v)));
            } else {
                out.push_back(vocab.numeric_id(q.quantize(p, c.get(p))));
            }
        }
    }
    out.push_back(Vocabulary::kEos);
    if (max_len > 0 && static_cast<int>(out.size()) > max_len) {
        throw Error(ErrorCode::OutOfRange, "description needs " + std::to_string(out.size()) +
                                               " tokens, more than max_len " + std::to_string(max_len));
    }
    return out;
}

struct ParseResult {
    std::optional<WaveformSpec> spec;
    int error_position = -1;  // index into the content tokens (after <sos>)
    std::string message;

    bool ok() const { return spec.has_value(); }
};

namespace detail {

inline ParseResult reject(int position, std::string message) {
    return ParseResult{std::nullopt, position, std::move(message)};
}

// Builds one component from the tokens of a reduced Entry.
inline WaveformComponent component_from_tokens(const std::vector<int>& toks, const Vocabulary& vocab,
                                               const QuantizationScheme& q) {
    WaveformComponent c;
    c.wf_type = *wf_type_from_string(vocab.name(toks[0]));
    c.sub_type = *sub_type_from_string(vocab.name(toks[1]));
    std::optional<Param> current;
    for (std::size_t i = 2; i < toks.size(); ++i) {
        if (vocab.is_keyword(toks[i])) {
            current = param_from_string(vocab.name(toks[i]));
            continue;
        }
        const long long value = vocab.numeric_value(toks[i]);
        if (*current == Param::Code) {
            c.code.push_back(static_cast<int>(std::llround(q.dequantize(Param::Code, value))));
        } else {
            c.params[*current] = q.dequantize(*current, value);
        }
    }
    return c;
}

}  // namespace detail

/// Bottom-up parse of a token sequence into a spec. A leading <sos> and a
/// trailing <eos> are optional; any other special token is a syntax error.
/// Repeated carrier frequencies resolve to the first one. Nothing is
/// recovered from a malformed sequence.
inline ParseResult parse(const TokenSequence& tokens, const Vocabulary& vocab, const QuantizationScheme& q = {}) {
    std::size_t begin = 0;
    std::size_t end = tokens.size();
    if (begin < end && tokens[begin] == Vocabulary::kSos) ++begin;
    if (end > begin && tokens[end - 1] == Vocabulary::kEos) --end;

    const LrTable& table = radar_lr_table();
    LrParser parser(table);
    for (std::size_t i = begin; i < end; ++i) {
        const int id = tokens[i];
        const int pos = static_cast<int>(i - begin);
        if (id < 0 || id >= vocab.size()) return detail::reject(pos, "token id out of range");
        if (!parser.feed(vocab.terminal_of(id, table))) {
            return detail::reject(pos, "unexpected token '" + vocab.name(id) + "'");
        }
    }
    if (!parser.finish()) {
        return detail::reject(static_cast<int>(end - begin), "unexpected end of description");
    }

    WaveformSpec spec;
    for (const auto& red : parser.reductions()) {
        if (table.nonterminal_name(table.lhs(red.production)) != "Entry") continue;
        std::vector<int> toks(tokens.begin() + static_cast<std::ptrdiff_t>(begin + static_cast<std::size_t>(red.begin)),
                              tokens.begin() + static_cast<std::ptrdiff_t>(begin + static_cast<std::size_t>(red.end)));
        spec.components.push_back(detail::component_from_tokens(toks, vocab, q));
    }
    const double cf = spec.components.front().params.at(Param::cf);
    for (auto& c : spec.components) c.params[Param::cf] = cf;
    return ParseResult{std::move(spec), -1, {}};
}

/// Exact CFG membership by CYK; the independent check on `parse`.
inline bool membership(const TokenSequence& tokens, const Vocabulary& vocab) {
    std::size_t begin = 0;
    std::size_t end = tokens.size();
    if (begin < end && tokens[begin] == Vocabulary::kSos) ++begin;
    if (end > begin && tokens[end - 1] == Vocabulary::kEos) --end;
    const CnfGrammar& cnf = radar_cnf();
    std::vector<int> terms;
    for (std::size_t i = begin; i < end; ++i) {
        if (tokens[i] < 0 || tokens[i] >= vocab.size()) return false;
        terms.push_back(vocab.terminal_of(tokens[i], cnf));
    }
    return cyk_accepts(cnf, terms);
}

// ---------------------------------------------------------------------------
// Surface strings

/// Whitespace-separated token names, e.g. "<sos> FM LFM cf NUM_1000 ...".
inline std::string detokenize(const TokenSequence& tokens, const Vocabulary& vocab) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += vocab.name(tokens[i]);
    }
    return out;
}

inline TokenSequence tokenize(std::string_view text, const Vocabulary& vocab) {
    TokenSequence out;
    std::istringstream in{std::string(text)};
    for (std::string w; in >> w;) {
        auto id = vocab.id(w);
        if (!id) throw Error(ErrorCode::Format, "unknown token '" + w + "'");
        out.push_back(*id);
    }
    return out;
}

namespace detail {

inline int decimals_for(double unit) {
    if (unit >= 1.0) return 0;
    return static_cast<int>(std::ceil(-std::log10(unit) - 1e-9));
}

}  // namespace detail

/// Human-readable form with physical values, e.g.
/// "FM LFM cf 100.0 B 10.0". Specials are dropped; a number with no
/// preceding parameter keyword is written as its NUM_k token.
inline std::string to_label_string(const TokenSequence& tokens, const Vocabulary& vocab,
                                   const QuantizationScheme& q = {}) {
    std::string out;
    std::optional<Param> current;
    for (int id : tokens) {
        if (vocab.is_special(id)) continue;
        if (!out.empty()) out += ' ';
        if (vocab.is_keyword(id)) {
            current = param_from_string(vocab.name(id));
            out += vocab.name(id);
        } else if (current) {
            char buf[64];
            const double v = q.dequantize(*current, vocab.numeric_value(id));
            std::snprintf(buf, sizeof buf, "%.*f", detail::decimals_for(q.unit(*current)), v);
            out += buf;
        } else {
            out += vocab.name(id);
        }
    }
    return out;
}

/// Inverse of to_label_string; wraps the result in <sos>/<eos>.
inline TokenSequence from_label_string(std::string_view text, const Vocabulary& vocab,
                                       const QuantizationScheme& q = {}) {
    TokenSequence out{Vocabulary::kSos};
    std::optional<Param> current;
    std::istringstream in{std::string(text)};
    for (std::string w; in >> w;) {
        if (auto id = vocab.id(w)) {
            if (vocab.is_special(*id)) continue;
            if (vocab.is_keyword(*id)) current = param_from_string(w);
            out.push_back(*id);
            continue;
        }
        char* endp = nullptr;
        const double v = std::strtod(w.c_str(), &endp);
        if (endp == w.c_str() || *endp != '\0' || !std::isfinite(v)) {
            throw Error(ErrorCode::Format, "unknown word '" + w + "'");
        }
        const Param p = current.value_or(Param::Code);
        out.push_back(vocab.numeric_id(q.quantize(p, v)));
    }
    out.push_back(Vocabulary::kEos);
    return out;
}

}  // namespace sig2text

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sig2text/dataset.hpp"
#include "sig2text/nn/checkpoint.hpp"
#include "sig2text/symlang.hpp"

namespace sig2text::infer {

/// Maps a batch of equal-length prefixes to next-token log-probabilities,
/// one row per prefix.
using NextLogProbs = std::function<std::vector<std::vector<double>>(const std::vector<std::vector<int>>&)>;

struct BeamOptions {
    int beam = 1;
    int max_len = kDefaultMaxLen;  // total length including <sos> and <eos>
    int sos = Vocabulary::kSos;
    int eos = Vocabulary::kEos;
    bool stop_on_any_frozen = false;  // the literal reading: stop as soon as any beam ends
};

struct BeamResult {
    TokenSequence tokens;              // starts with <sos>; ends with <eos> when terminated
    double log_likelihood = 0;
    std::vector<double> step_log_probs;  // one per generated token
    bool terminated = false;
};

namespace detail {

struct Hyp {
    TokenSequence tokens;
    std::vector<double> steps;
    double score = 0;
    bool frozen = false;
};

inline std::vector<double> log_softmax(const double* z, std::size_t n) {
    const double mx = *std::max_element(z, z + n);
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(z[i] - mx);
    const double lse = mx + std::log(s);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = z[i] - lse;
    return out;
}

inline BeamResult finish(const Hyp& h) {
    return {h.tokens, h.score, h.steps, h.frozen};
}

}  // namespace detail

/// Beam search ranked by raw summed log-likelihood. Ties go to the lower
/// token id, then the earlier beam. Ended beams keep their slot. Search stops
/// when the best beam has ended or the length limit is reached.
inline BeamResult beam_search(const NextLogProbs& next, const BeamOptions& opt) {
    if (opt.beam < 1) throw Error(ErrorCode::InvalidArgument, "beam width must be at least 1");
    if (opt.max_len < 2) throw Error(ErrorCode::InvalidArgument, "max_len must allow <sos> and one token");
    std::vector<detail::Hyp> beams{{{opt.sos}, {}, 0.0, false}};
    struct Cand {
        double score;
        int token;  // -1 for an ended beam carried forward
        std::size_t parent;
    };
    while (static_cast<int>(beams[0].tokens.size()) < opt.max_len) {
        if (beams[0].frozen) break;
        if (opt.stop_on_any_frozen &&
            std::any_of(beams.begin(), beams.end(), [](const detail::Hyp& h) { return h.frozen; }))
            break;
        std::vector<std::vector<int>> live;
        std::vector<std::size_t> live_idx;
        for (std::size_t b = 0; b < beams.size(); ++b) {
            if (!beams[b].frozen) {
                live.push_back(beams[b].tokens);
                live_idx.push_back(b);
            }
        }
        const auto lp = next(live);
        if (lp.size() != live.size()) throw Error(ErrorCode::ShapeMismatch, "next-token model returned wrong batch");
        std::vector<Cand> cands;
        for (std::size_t b = 0; b < beams.size(); ++b)
            if (beams[b].frozen) cands.push_back({beams[b].score, -1, b});
        for (std::size_t i = 0; i < live.size(); ++i)
            for (std::size_t v = 0; v < lp[i].size(); ++v)
                cands.push_back({beams[live_idx[i]].score + lp[i][v], static_cast<int>(v), live_idx[i]});
        const auto keep = std::min(cands.size(), static_cast<std::size_t>(opt.beam));
        std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                          [](const Cand& a, const Cand& b) {
                              if (a.score != b.score) return a.score > b.score;
                              if (a.token != b.token) return a.token < b.token;
                              return a.parent < b.parent;
                          });
        std::vector<detail::Hyp> next_beams;
        for (std::size_t k = 0; k < keep; ++k) {
            const auto& c = cands[k];
            detail::Hyp h = beams[c.parent];
            if (c.token >= 0) {
                const std::size_t li =
                    static_cast<std::size_t>(std::find(live_idx.begin(), live_idx.end(), c.parent) - live_idx.begin());
                h.tokens.push_back(c.token);
                h.steps.push_back(lp[li][static_cast<std::size_t>(c.token)]);
                h.score = c.score;
                h.frozen = c.token == opt.eos;
            }
            next_beams.push_back(std::move(h));
        }
        beams = std::move(next_beams);
    }
    return detail::finish(beams[0]);
}

/// Step-wise argmax; ties go to the lower token id.
inline BeamResult greedy_decode(const NextLogProbs& next, const BeamOptions& opt) {
    detail::Hyp h{{opt.sos}, {}, 0.0, false};
    while (static_cast<int>(h.tokens.size()) < opt.max_len && !h.frozen) {
        const auto lp = next({h.tokens});
        const auto& row = lp.at(0);
        const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        h.tokens.push_back(static_cast<int>(best));
        h.steps.push_back(row[best]);
        h.score += row[best];
        h.frozen = static_cast<int>(best) == opt.eos;
    }
    return detail::finish(h);
}

/// Next-token log-probabilities from a model over one encoded signal.
template <class T>
NextLogProbs model_next(nn::Model<T>& model, const nn::Var<T>& memory) {
    return [&model, memory](const std::vector<std::vector<int>>& prefixes) {
        nn::NoGradGuard ng;
        const auto logits = model.decode_step(memory, prefixes);
        std::vector<std::vector<double>> out;
        std::vector<double> z(logits.cols());
        for (std::size_t b = 0; b < logits.rows(); ++b) {
            for (std::size_t c = 0; c < z.size(); ++c) z[c] = static_cast<double>(logits(b, c));
            out.push_back(detail::log_softmax(z.data(), z.size()));
        }
        return out;
    };
}

struct Prediction {
    BeamResult beam;
    ParseResult parsed;  // rejection when the output is not in the grammar
};

template <class T>
BeamResult decode_signal(nn::Model<T>& model, const IQSignal& signal, const StftConfig& stft, BeamOptions opt) {
    nn::NoGradGuard ng;
    const auto& c = model.config();
    opt.max_len = std::min(opt.max_len, c.max_len);
    const auto ps = featurize(signal, stft, c.patch_rows, c.patch_cols);
    const auto memory = model.encode(ps);
    return beam_search(model_next(model, memory), opt);
}

/// Parses a decoded sequence; unterminated output is a rejection.
inline Prediction interpret(BeamResult beam, const Vocabulary& vocab = {}, const QuantizationScheme& q = {}) {
    Prediction p;
    p.beam = std::move(beam);
    if (!p.beam.terminated) {
        p.parsed.error_position = static_cast<int>(p.beam.tokens.size()) - 1;
        p.parsed.message = "output did not terminate within max_len";
    } else {
        p.parsed = parse(p.beam.tokens, vocab, q);
    }
    return p;
}

/// Decode, then parse into a spec.
template <class T>
Prediction predict(nn::Model<T>& model, const IQSignal& signal, const StftConfig& stft, const BeamOptions& opt,
                   const Vocabulary& vocab = {}, const QuantizationScheme& q = {}) {
    return interpret(decode_signal(model, signal, stft, opt), vocab, q);
}

inline nlohmann::json prediction_to_json(const std::string& id, const Prediction& p, const Vocabulary& vocab = {},
                                         const QuantizationScheme& q = {}) {
    nlohmann::json j{{"id", id},
                     {"predicted_string", to_label_string(p.beam.tokens, vocab, q)},
                     {"tokens", detokenize(p.beam.tokens, vocab)},
                     {"log_likelihood", p.beam.log_likelihood},
                     {"terminated", p.beam.terminated}};
    if (p.parsed.ok()) j["parsed"] = spec_to_json(*p.parsed.spec);
    else {
        j["parsed"] = nullptr;
        j["error"] = p.parsed.message;
    }
    return j;
}

}  // namespace sig2text::infer

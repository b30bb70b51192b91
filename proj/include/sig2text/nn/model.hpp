#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sig2text/nn/autograd.hpp"
#include "sig2text/rng.hpp"
#include "sig2text/symlang.hpp"
#include "sig2text/tfr.hpp"

namespace sig2text::nn {

struct ModelConfig {
    int n_layers_enc = 3;
    int n_layers_dec = 3;
    int d_model = 128;
    int d_ff = 512;
    int n_heads = 8;
    int vocab_size = 1052;
    int max_len = kDefaultMaxLen;
    int patch_rows = 16;
    int patch_cols = 16;
    int image_rows = 128;
    int image_cols = 128;
    double dropout = 0.0;

    int num_patches() const { return (image_rows / patch_rows) * (image_cols / patch_cols); }
    int patch_size() const { return patch_rows * patch_cols; }

    void validate() const {
        auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidArgument, "model config: " + m); };
        if (n_layers_enc < 0 || n_layers_dec < 1) bad("layer counts");
        if (d_model <= 0 || d_ff <= 0 || n_heads <= 0) bad("widths must be positive");
        if (d_model % n_heads != 0) bad("d_model must be divisible by n_heads");
        if (vocab_size < 3) bad("vocab_size");
        if (max_len < 2) bad("max_len");
        if (patch_rows <= 0 || patch_cols <= 0 || image_rows % patch_rows || image_cols % patch_cols)
            bad("patch dims must tile the image");
        if (dropout < 0 || dropout >= 1) bad("dropout must be in [0, 1)");
    }

    bool operator==(const ModelConfig&) const = default;
};

/// One parameter shape entry of the canonical architecture list.
struct ParamSpec {
    std::string name;
    std::vector<std::size_t> shape;
    enum class Init { Xavier, Zero, One, Positional } init;
};

inline std::vector<ParamSpec> canonical_parameters(const ModelConfig& c) {
    using I = ParamSpec::Init;
    const auto D = static_cast<std::size_t>(c.d_model), F = static_cast<std::size_t>(c.d_ff);
    const auto V = static_cast<std::size_t>(c.vocab_size);
    std::vector<ParamSpec> out;
    auto lin = [&](const std::string& p, std::size_t in, std::size_t o) {
        out.push_back({p + ".weight", {in, o}, I::Xavier});
        out.push_back({p + ".bias", {1, o}, I::Zero});
    };
    auto norm = [&](const std::string& p) {
        out.push_back({p + ".gamma", {1, D}, I::One});
        out.push_back({p + ".beta", {1, D}, I::Zero});
    };
    auto attn = [&](const std::string& p) {
        for (const char* w : {".q", ".k", ".v", ".o"}) lin(p + w, D, D);
    };
    lin("patch_embed", static_cast<std::size_t>(c.patch_size()), D);
    out.push_back({"enc_pos", {static_cast<std::size_t>(c.num_patches()), D}, I::Positional});
    for (int l = 0; l < c.n_layers_enc; ++l) {
        const std::string p = "enc." + std::to_string(l);
        attn(p + ".attn");
        norm(p + ".ln1");
        lin(p + ".ff1", D, F);
        lin(p + ".ff2", F, D);
        norm(p + ".ln2");
    }
    out.push_back({"tok_embed", {V, D}, I::Xavier});
    out.push_back({"dec_pos", {static_cast<std::size_t>(c.max_len), D}, I::Positional});
    for (int l = 0; l < c.n_layers_dec; ++l) {
        const std::string p = "dec." + std::to_string(l);
        attn(p + ".self");
        norm(p + ".ln1");
        attn(p + ".cross");
        norm(p + ".ln2");
        lin(p + ".ff1", D, F);
        lin(p + ".ff2", F, D);
        norm(p + ".ln3");
    }
    lin("out", D, V);
    return out;
}

/// Padded teacher-forcing batch: tokens is batch x width row-major, each row
/// <sos> ... <eos> followed by <pad>.
struct TokenBatch {
    std::size_t batch = 0;
    std::size_t width = 0;
    std::vector<int> tokens;
    int at(std::size_t b, std::size_t t) const { return tokens[b * width + t]; }
};

/// Encoder-decoder transformer over patch sequences.
template <class T>
class Model {
public:
    explicit Model(ModelConfig cfg, std::uint64_t seed = 0) : cfg_(std::move(cfg)) {
        cfg_.validate();
        for (const auto& ps : canonical_parameters(cfg_)) {
            index_[ps.name] = params_.size();
            params_.push_back(parameter(Tensor<T>(ps.shape), ps.name));
        }
        initialize(seed);
    }

    const ModelConfig& config() const { return cfg_; }
    const std::vector<Var<T>>& parameters() const { return params_; }
    std::int64_t step = 0;

    Var<T>& param(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw Error(ErrorCode::InvalidArgument, "unknown parameter " + name);
        return params_[it->second];
    }
    const Var<T>& param(const std::string& name) const { return const_cast<Model*>(this)->param(name); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p->value.size();
        return n;
    }

    /// Xavier-uniform linear weights and embeddings, N(0, 0.02) positional
    /// tables, unit gains, zero biases.
    void initialize(std::uint64_t seed) {
        const auto specs = canonical_parameters(cfg_);
        for (std::size_t i = 0; i < specs.size(); ++i) {
            auto rng = substream(seed, "init", i);
            auto& t = params_[i]->value;
            switch (specs[i].init) {
                case ParamSpec::Init::Xavier: {
                    const double a = std::sqrt(6.0 / static_cast<double>(t.shape[0] + t.shape[1]));
                    std::uniform_real_distribution<double> u(-a, a);
                    for (auto& v : t.data) v = T(u(rng));
                    break;
                }
                case ParamSpec::Init::Positional: {
                    std::normal_distribution<double> n(0.0, 0.02);
                    for (auto& v : t.data) v = T(n(rng));
                    break;
                }
                case ParamSpec::Init::One: std::fill(t.data.begin(), t.data.end(), T(1)); break;
                case ParamSpec::Init::Zero: std::fill(t.data.begin(), t.data.end(), T(0)); break;
            }
        }
    }

    void zero_grad() {
        for (auto& p : params_) {
            p->ensure_grad();
            p->zero_grad();
        }
    }

    /// Throws NonFinite naming the first parameter whose gradient holds NaN/Inf.
    void check_gradients() const {
        for (const auto& p : params_) {
            if (!p->grad.all_finite()) throw Error(ErrorCode::NonFinite, "non-finite gradient in " + p->name);
        }
    }

    /// Enables dropout. Off by default, so forwards are deterministic.
    void set_training(bool on, std::uint64_t seed = 0) {
        training_ = on;
        dropout_rng_.seed(seed);
    }

    /// Records attention probabilities of every subsequent forward.
    void set_probe(std::vector<Tensor<T>>* probe) { probe_ = probe; }

    /// patches: (batch * L) x patch_size. Returns (batch * L) x d_model.
    Var<T> encode(const Var<T>& patches, std::size_t batch) {
        const auto L = static_cast<std::size_t>(cfg_.num_patches());
        if (patches->value.rows() != batch * L)
            throw Error(ErrorCode::ShapeMismatch, "encode: expected " + std::to_string(batch * L) +
                                                      " patch rows, got " + std::to_string(patches->value.rows()));
        if (patches->value.cols() != static_cast<std::size_t>(cfg_.patch_size()))
            throw Error(ErrorCode::ShapeMismatch, "encode: patch size mismatch");
        auto x = linear(patches, param("patch_embed.weight"), param("patch_embed.bias"));
        x = add_positional(x, param("enc_pos"), L);
        const AttentionShape self{batch, L, L, static_cast<std::size_t>(cfg_.n_heads), false};
        for (int l = 0; l < cfg_.n_layers_enc; ++l) {
            const std::string p = "enc." + std::to_string(l);
            x = norm(add(x, drop(mha(p + ".attn", x, x, self))), p + ".ln1");
            x = norm(add(x, drop(feed_forward(p, x))), p + ".ln2");
        }
        return x;
    }

    Var<T> encode(const PatchSequence& ps) { return encode(constant(patches_tensor({&ps})), 1); }

    /// memory: (batch * L) x d_model. tokens: batch x width decoder inputs.
    /// Returns (batch * width) x vocab_size logits.
    Var<T> decode(const Var<T>& memory, const std::vector<int>& tokens, std::size_t batch, std::size_t width) {
        const auto L = static_cast<std::size_t>(cfg_.num_patches());
        if (width == 0 || width > static_cast<std::size_t>(cfg_.max_len))
            throw Error(ErrorCode::OutOfRange, "decode: prefix length " + std::to_string(width) + " exceeds max_len " +
                                                   std::to_string(cfg_.max_len));
        if (tokens.size() != batch * width) throw Error(ErrorCode::ShapeMismatch, "decode: token count");
        if (memory->value.rows() != batch * L) throw Error(ErrorCode::ShapeMismatch, "decode: memory rows");
        auto y = embedding(param("tok_embed"), tokens);
        y = add_positional(y, param("dec_pos"), width);
        const auto H = static_cast<std::size_t>(cfg_.n_heads);
        const AttentionShape self{batch, width, width, H, true};
        const AttentionShape cross{batch, width, L, H, false};
        for (int l = 0; l < cfg_.n_layers_dec; ++l) {
            const std::string p = "dec." + std::to_string(l);
            y = norm(add(y, drop(mha(p + ".self", y, y, self))), p + ".ln1");
            y = norm(add(y, drop(mha(p + ".cross", y, memory, cross))), p + ".ln2");
            y = norm(add(y, drop(feed_forward(p, y))), p + ".ln3");
        }
        return linear(y, param("out.weight"), param("out.bias"));
    }

    /// Next-token logits for each of `batch` equal-length prefixes sharing
    /// one encoded signal (memory has L rows). Returns batch x vocab.
    Tensor<T> decode_step(const Var<T>& memory, const std::vector<std::vector<int>>& prefixes) {
        if (prefixes.empty()) throw Error(ErrorCode::InvalidArgument, "decode_step: no prefixes");
        const std::size_t width = prefixes[0].size();
        const auto L = static_cast<std::size_t>(cfg_.num_patches());
        std::vector<int> flat;
        for (const auto& p : prefixes) {
            if (p.size() != width) throw Error(ErrorCode::ShapeMismatch, "decode_step: ragged prefixes");
            flat.insert(flat.end(), p.begin(), p.end());
        }
        Var<T> mem = memory;
        if (memory->value.rows() == L && prefixes.size() > 1) {
            Tensor<T> rep(prefixes.size() * L, memory->value.cols());
            for (std::size_t b = 0; b < prefixes.size(); ++b)
                std::copy(memory->value.data.begin(), memory->value.data.end(),
                          rep.data.begin() + static_cast<std::ptrdiff_t>(b * memory->value.size()));
            mem = constant(std::move(rep));
        }
        const auto logits = decode(mem, flat, prefixes.size(), width);
        const std::size_t V = logits->value.cols();
        Tensor<T> out(prefixes.size(), V);
        for (std::size_t b = 0; b < prefixes.size(); ++b)
            std::copy_n(logits->value.row(b * width + width - 1), V, out.row(b));
        return out;
    }

    std::vector<T> decode_step(const Var<T>& memory, const std::vector<int>& prefix) {
        const auto t = decode_step(memory, std::vector<std::vector<int>>{prefix});
        return {t.data.begin(), t.data.end()};
    }

    /// Teacher-forced loss: mean over sequences of summed token NLL. Inputs
    /// are targets shifted right; pad targets are masked out.
    Var<T> loss_teacher_forcing(const Var<T>& patches, const TokenBatch& tb, CrossEntropyStats* stats = nullptr) {
        if (tb.width < 2) throw Error(ErrorCode::InvalidArgument, "loss: sequences need at least two tokens");
        const std::size_t w = tb.width - 1;
        std::vector<int> inputs(tb.batch * w), targets(tb.batch * w);
        std::vector<T> weights(tb.batch * w);
        for (std::size_t b = 0; b < tb.batch; ++b) {
            for (std::size_t t = 0; t < w; ++t) {
                inputs[b * w + t] = tb.at(b, t);
                const int tgt = tb.at(b, t + 1);
                targets[b * w + t] = tgt;
                weights[b * w + t] = tgt == Vocabulary::kPad ? T(0) : T(1);
            }
        }
        const auto memory = encode(patches, tb.batch);
        const auto logits = decode(memory, inputs, tb.batch, w);
        return cross_entropy(logits, targets, weights, T(1) / T(tb.batch), stats);
    }

    /// Stacks patch sequences into one (batch * L) x patch_size tensor.
    Tensor<T> patches_tensor(const std::vector<const PatchSequence*>& seqs) const {
        const auto L = static_cast<std::size_t>(cfg_.num_patches());
        const auto P = static_cast<std::size_t>(cfg_.patch_size());
        Tensor<T> t(seqs.size() * L, P);
        for (std::size_t b = 0; b < seqs.size(); ++b) {
            const auto& ps = *seqs[b];
            if (static_cast<std::size_t>(ps.count()) != L || static_cast<std::size_t>(ps.patch_size()) != P)
                throw Error(ErrorCode::ShapeMismatch, "patch sequence does not match the model's patch grid");
            for (std::size_t i = 0; i < L * P; ++i) t.data[b * L * P + i] = T(ps.data[i]);
        }
        return t;
    }

private:
    Var<T> mha(const std::string& p, const Var<T>& xq, const Var<T>& xkv, const AttentionShape& s) {
        auto q = linear(xq, param(p + ".q.weight"), param(p + ".q.bias"));
        auto k = linear(xkv, param(p + ".k.weight"), param(p + ".k.bias"));
        auto v = linear(xkv, param(p + ".v.weight"), param(p + ".v.bias"));
        auto o = attention(q, k, v, s, probe_);
        return linear(o, param(p + ".o.weight"), param(p + ".o.bias"));
    }

    Var<T> feed_forward(const std::string& p, const Var<T>& x) {
        auto h = relu(linear(x, param(p + ".ff1.weight"), param(p + ".ff1.bias")));
        return linear(h, param(p + ".ff2.weight"), param(p + ".ff2.bias"));
    }

    Var<T> norm(const Var<T>& x, const std::string& p) {
        return layer_norm(x, param(p + ".gamma"), param(p + ".beta"));
    }

    Var<T> drop(const Var<T>& x) { return training_ ? dropout(x, cfg_.dropout, dropout_rng_) : x; }

    ModelConfig cfg_;
    std::vector<Var<T>> params_;
    std::map<std::string, std::size_t> index_;
    bool training_ = false;
    std::mt19937_64 dropout_rng_;
    std::vector<Tensor<T>>* probe_ = nullptr;
};

/// Copies weights between models of possibly different scalar types.
template <class To, class From>
void copy_weights(Model<To>& dst, const Model<From>& src) {
    if (!(dst.config() == src.config())) throw Error(ErrorCode::ShapeMismatch, "copy_weights: config mismatch");
    for (std::size_t i = 0; i < src.parameters().size(); ++i) {
        const auto& s = src.parameters()[i]->value.data;
        auto& d = dst.parameters()[i]->value.data;
        for (std::size_t j = 0; j < s.size(); ++j) d[j] = To(s[j]);
    }
    dst.step = src.step;
}

}  // namespace sig2text::nn

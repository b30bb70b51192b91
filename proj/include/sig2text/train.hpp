#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "sig2text/dataset.hpp"
#include "sig2text/nn/model.hpp"
#include "sig2text/rng.hpp"

namespace sig2text::train {

using nn::CrossEntropyStats;
using nn::Model;
using nn::Tensor;
using nn::TokenBatch;

struct TrainConfig {
    std::size_t batch_size = 128;
    double lr = 1e-3;
    int lr_halving_period = 20;
    double weight_decay = 0.01;
    int max_epochs = 100;
    int patience = 10;
    std::uint64_t seed = 0;
    double val_fraction = 0.1;  // used when no explicit validation set is given
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double grad_clip = 1.0;  // global norm; <= 0 disables
    double min_improvement = 1e-5;
    int warmup_steps = 0;

    void validate() const {
        auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidArgument, "train config: " + m); };
        if (batch_size == 0) bad("batch_size must be positive");
        if (!(lr > 0)) bad("lr must be positive");
        if (lr_halving_period <= 0) bad("lr_halving_period must be positive");
        if (weight_decay < 0) bad("weight_decay must be non-negative");
        if (max_epochs <= 0 || patience <= 0) bad("max_epochs and patience must be positive");
        if (patience > max_epochs) bad("patience exceeds max_epochs");
        if (val_fraction < 0 || val_fraction >= 1) bad("val_fraction must be in [0, 1)");
        if (warmup_steps < 0) bad("warmup_steps must be non-negative");
    }
};

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.lr_halving_period = j.value("lr_halving_period", c.lr_halving_period);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
    c.val_fraction = j.value("val_fraction", c.val_fraction);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.min_improvement = j.value("min_improvement", c.min_improvement);
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
    c.validate();
    return c;
}

/// Learning rate for a 0-indexed epoch: halved every `lr_halving_period`.
inline double learning_rate(const TrainConfig& c, int epoch) {
    return c.lr * std::pow(0.5, epoch / c.lr_halving_period);
}

/// One training pair: patch features (row-major L x patch_size) and the
/// serialized target <sos> ... <eos>.
struct Sample {
    std::string id;
    std::vector<float> patches;  // L x patch_size, row-major
    std::vector<int> tokens;
    std::size_t patch_size = 0;  // 0: one row per sample
};

inline std::vector<float> to_float(const PatchSequence& ps) { return {ps.data.begin(), ps.data.end()}; }

/// Features for `signal` under the model's patch grid plus the tokenized label.
inline Sample make_sample(std::string id, const IQSignal& signal, const TokenSequence& tokens,
                          const nn::ModelConfig& mc, const StftConfig& stft) {
    if (stft.image_rows != mc.image_rows || stft.image_cols != mc.image_cols)
        throw Error(ErrorCode::ShapeMismatch, "STFT image size does not match the model's image dims");
    return {std::move(id), to_float(featurize(signal, stft, mc.patch_rows, mc.patch_cols)), tokens,
            static_cast<std::size_t>(mc.patch_size())};
}

/// Every record of a dataset directory, labelled from its label string.
inline std::vector<Sample> load_samples(DatasetReader& reader, const nn::ModelConfig& mc, const StftConfig& stft,
                                        const Vocabulary& vocab = {}, const QuantizationScheme& q = {}) {
    std::vector<Sample> out;
    out.reserve(reader.size());
    for (std::size_t i = 0; i < reader.size(); ++i) {
        const auto& r = reader.records()[i];
        auto tokens = from_label_string(r.label_string, vocab, q);
        if (static_cast<int>(tokens.size()) > mc.max_len)
            throw Error(ErrorCode::OutOfRange, "record " + r.id + " label exceeds max_len");
        out.push_back(make_sample(r.id, reader.signal(i), tokens, mc, stft));
    }
    return out;
}

struct Batch {
    Tensor<float> patches;         // (batch * L) x patch_size
    TokenBatch tokens;             // right-padded with <pad>
    std::vector<float> loss_mask;  // batch x (width - 1); 1 where the target is real
};

inline Batch batch_collate(const std::vector<const Sample*>& samples) {
    if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "cannot collate an empty batch");
    const std::size_t feat = samples[0]->patches.size();
    const std::size_t cols = samples[0]->patch_size ? samples[0]->patch_size : feat;
    if (!feat || feat % cols) throw Error(ErrorCode::ShapeMismatch, "sample " + samples[0]->id + " has a ragged patch grid");
    std::size_t width = 0;
    for (const auto* s : samples) {
        if (s->patches.size() != feat || (s->patch_size ? s->patch_size : feat) != cols)
            throw Error(ErrorCode::ShapeMismatch, "samples have different feature sizes");
        if (s->tokens.size() < 2) throw Error(ErrorCode::InvalidArgument, "sample " + s->id + " has under two tokens");
        width = std::max(width, s->tokens.size());
    }
    Batch b;
    b.tokens = TokenBatch{samples.size(), width, std::vector<int>(samples.size() * width, Vocabulary::kPad)};
    b.loss_mask.assign(samples.size() * (width - 1), 0.0f);
    b.patches = Tensor<float>(samples.size() * feat / cols, cols);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = *samples[i];
        std::copy(s.tokens.begin(), s.tokens.end(), b.tokens.tokens.begin() + static_cast<std::ptrdiff_t>(i * width));
        for (std::size_t t = 1; t < s.tokens.size(); ++t) b.loss_mask[i * (width - 1) + t - 1] = 1.0f;
        std::copy(s.patches.begin(), s.patches.end(), b.patches.data.begin() + static_cast<std::ptrdiff_t>(i * feat));
    }
    return b;
}

/// Decoupled-weight-decay Adam over a model's parameters. Decay applies to
/// tensors whose name ends in ".weight".
class AdamW {
public:
    AdamW(Model<float>& model, const TrainConfig& cfg) : model_(model), cfg_(cfg) {
        for (const auto& p : model.parameters()) {
            m_.emplace_back(p->value.size(), 0.0f);
            v_.emplace_back(p->value.size(), 0.0f);
            const auto& n = p->name;
            decay_.push_back(n.size() > 7 && n.compare(n.size() - 7, 7, ".weight") == 0);
        }
    }

    /// Global gradient norm before clipping.
    double step(double lr) {
        auto& params = model_.parameters();
        double sq = 0;
        for (const auto& p : params)
            for (float g : p->grad.data) sq += static_cast<double>(g) * g;
        const double norm = std::sqrt(sq);
        if (!std::isfinite(norm)) model_.check_gradients();
        const double clip = cfg_.grad_clip > 0 && norm > cfg_.grad_clip ? cfg_.grad_clip / norm : 1.0;
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        const auto b1 = static_cast<float>(cfg_.beta1), b2 = static_cast<float>(cfg_.beta2);
        const auto step_size = static_cast<float>(lr / bc1);
        const auto inv_bc2 = static_cast<float>(1.0 / bc2);
        const auto eps = static_cast<float>(cfg_.eps);
        const auto c = static_cast<float>(clip);
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& w = params[i]->value.data;
            const auto& g = params[i]->grad.data;
            auto& m = m_[i];
            auto& v = v_[i];
            const float wd = decay_[i] ? static_cast<float>(lr * cfg_.weight_decay) : 0.0f;
            for (std::size_t j = 0; j < w.size(); ++j) {
                const float gj = g[j] * c;
                m[j] = b1 * m[j] + (1.0f - b1) * gj;
                v[j] = b2 * v[j] + (1.0f - b2) * gj * gj;
                w[j] -= wd * w[j];
                w[j] -= step_size * m[j] / (std::sqrt(v[j] * inv_bc2) + eps);
            }
        }
        return norm;
    }

    std::int64_t steps() const { return t_; }

private:
    Model<float>& model_;
    TrainConfig cfg_;
    std::vector<std::vector<float>> m_, v_;
    std::vector<bool> decay_;
    std::int64_t t_ = 0;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0;
    double val_loss = 0;
    double lr = 0;
    double train_token_acc = 0;
    double val_token_acc = 0;
    double seconds = 0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    int best_epoch = -1;
    double best_val_loss = 0;
    bool stopped_early = false;
    bool stopped_by_callback = false;
};

inline void write_history_csv(std::ostream& os, const std::vector<EpochRecord>& h) {
    os << "epoch,train_loss,val_loss,lr\n";
    os.precision(10);
    for (const auto& r : h) os << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.lr << '\n';
}

/// Loss and token accuracy over a sample set, no gradient.
struct EvalStats {
    double loss = 0;  // mean per sequence of summed NLL
    double token_acc = 0;
};

inline EvalStats evaluate(Model<float>& model, const std::vector<Sample>& data, std::size_t batch_size) {
    nn::NoGradGuard ng;
    double nll = 0;
    std::size_t tokens = 0, correct = 0;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        std::vector<const Sample*> chunk;
        for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) chunk.push_back(&data[i]);
        auto b = batch_collate(chunk);
        CrossEntropyStats st;
        model.loss_teacher_forcing(nn::constant(std::move(b.patches)), b.tokens, &st);
        nll += st.nll_sum;
        tokens += st.tokens;
        correct += st.correct;
    }
    EvalStats e;
    if (!data.empty()) e.loss = nll / static_cast<double>(data.size());
    if (tokens) e.token_acc = static_cast<double>(correct) / static_cast<double>(tokens);
    return e;
}

/// Splits off a validation set by shuffled index; the two parts are disjoint.
inline std::pair<std::vector<Sample>, std::vector<Sample>> split_validation(std::vector<Sample> all, double fraction,
                                                                            std::uint64_t seed) {
    std::vector<std::size_t> idx(all.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto rng = substream(seed, "split");
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(all.size())));
    std::vector<Sample> tr, va;
    for (std::size_t k = 0; k < idx.size(); ++k) (k < n_val ? va : tr).push_back(std::move(all[idx[k]]));
    return {std::move(tr), std::move(va)};
}

/// Plateau rule: stop once `patience` consecutive epochs fail to beat the
/// best loss by more than `min_improvement`.
class EarlyStopping {
public:
    EarlyStopping(int patience, double min_improvement) : patience_(patience), min_improvement_(min_improvement) {}

    enum class Verdict { Improved, Continue, Stop };

    Verdict update(double loss) {
        if (loss < best_ - min_improvement_) {
            best_ = loss;
            since_best_ = 0;
            return Verdict::Improved;
        }
        return ++since_best_ >= patience_ ? Verdict::Stop : Verdict::Continue;
    }

    double best() const { return best_; }

private:
    int patience_;
    double min_improvement_;
    double best_ = std::numeric_limits<double>::infinity();
    int since_best_ = 0;
};

/// Called after every epoch; returning false ends training after that epoch.
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Teacher-forced training with AdamW, a step-halving schedule and early
/// stopping on validation loss. On return the model holds the weights of the
/// best epoch. With an empty validation set the training loss drives
/// selection.
inline TrainResult train(Model<float>& model, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                         const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
    cfg.validate();
    if (train_set.empty()) throw Error(ErrorCode::InvalidArgument, "training set is empty");
    const auto V = model.config().vocab_size;
    const auto feat = static_cast<std::size_t>(model.config().num_patches() * model.config().patch_size());
    for (const auto* set : {&train_set, &val_set}) {
        for (const auto& s : *set) {
            for (int t : s.tokens)
                if (t < 0 || t >= V) throw Error(ErrorCode::OutOfRange, "sample " + s.id + " has a token outside the model vocabulary");
            if (static_cast<int>(s.tokens.size()) > model.config().max_len)
                throw Error(ErrorCode::OutOfRange, "sample " + s.id + " is longer than max_len");
            if (s.patches.size() != feat) throw Error(ErrorCode::ShapeMismatch, "sample " + s.id + " has the wrong feature size");
        }
    }

    AdamW opt(model, cfg);
    TrainResult res;
    std::vector<nn::AlignedVector<float>> best(model.parameters().size());
    auto snapshot = [&] {
        for (std::size_t i = 0; i < best.size(); ++i) best[i] = model.parameters()[i]->value.data;
    };
    EarlyStopping stopper(cfg.patience, cfg.min_improvement);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = learning_rate(cfg, epoch);
        auto rng = substream(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch));
        std::shuffle(order.begin(), order.end(), rng);
        double nll = 0;
        std::size_t tokens = 0, correct = 0;
        model.set_training(true, substream(cfg.seed, "dropout", static_cast<std::uint64_t>(epoch))());
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::vector<const Sample*> chunk;
            for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k)
                chunk.push_back(&train_set[order[k]]);
            auto b = batch_collate(chunk);
            CrossEntropyStats st;
            model.zero_grad();
            auto loss = model.loss_teacher_forcing(nn::constant(std::move(b.patches)), b.tokens, &st);
            if (!std::isfinite(loss->value.data[0])) throw Error(ErrorCode::NonFinite, "training loss is not finite");
            nn::backward(loss);
            model.check_gradients();
            double step_lr = lr;
            if (cfg.warmup_steps > 0 && opt.steps() < cfg.warmup_steps)
                step_lr *= static_cast<double>(opt.steps() + 1) / cfg.warmup_steps;
            opt.step(step_lr);
            ++model.step;
            nll += st.nll_sum;
            tokens += st.tokens;
            correct += st.correct;
        }
        model.set_training(false);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.train_loss = nll / static_cast<double>(train_set.size());
        rec.train_token_acc = tokens ? static_cast<double>(correct) / static_cast<double>(tokens) : 0.0;
        if (!val_set.empty()) {
            const auto ev = evaluate(model, val_set, cfg.batch_size);
            rec.val_loss = ev.loss;
            rec.val_token_acc = ev.token_acc;
        } else {
            rec.val_loss = rec.train_loss;
            rec.val_token_acc = rec.train_token_acc;
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.history.push_back(rec);
        const bool keep_going = !on_epoch || on_epoch(rec);

        const auto verdict = stopper.update(rec.val_loss);
        if (verdict == EarlyStopping::Verdict::Improved) {
            res.best_epoch = epoch;
            snapshot();
        } else if (verdict == EarlyStopping::Verdict::Stop) {
            res.stopped_early = true;
            break;
        }
        if (!keep_going) {
            res.stopped_by_callback = true;
            break;
        }
    }
    for (std::size_t i = 0; i < best.size(); ++i)
        if (!best[i].empty()) model.parameters()[i]->value.data = best[i];
    res.best_val_loss = stopper.best();
    return res;
}

}  // namespace sig2text::train

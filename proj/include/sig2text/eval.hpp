#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "sig2text/dataset.hpp"
#include "sig2text/waveform.hpp"

namespace sig2text::eval {

/// A prediction is either a parsed spec or a rejection (nullopt).
using MaybeSpec = std::optional<WaveformSpec>;

struct MatchOptions {
    bool order_sensitive = false;
};

namespace detail {

using Key = std::tuple<int, int, std::vector<int>>;

inline Key key_of(const WaveformComponent& c) {
    return {static_cast<int>(c.wf_type), static_cast<int>(c.sub_type), c.sub_type == SubType::Costas ? c.code : std::vector<int>{}};
}

// Components in matching order: as written when order matters, otherwise
// sorted by key (stable, so equal keys keep their written order).
inline std::vector<const WaveformComponent*> arranged(const WaveformSpec& s, const MatchOptions& o) {
    std::vector<const WaveformComponent*> v;
    for (const auto& c : s.components) v.push_back(&c);
    if (!o.order_sensitive)
        std::stable_sort(v.begin(), v.end(), [](auto* a, auto* b) { return key_of(*a) < key_of(*b); });
    return v;
}

inline void check_aligned(std::size_t a, std::size_t b) {
    if (a != b) throw Error(ErrorCode::ShapeMismatch, "predictions and truths differ in length");
}

}  // namespace detail

/// True when the (type, subtype, Costas code) multiset matches.
inline bool type_correct(const MaybeSpec& pred, const WaveformSpec& truth, const MatchOptions& o = {}) {
    if (!pred || pred->components.size() != truth.components.size()) return false;
    const auto a = detail::arranged(*pred, o);
    const auto b = detail::arranged(truth, o);
    for (std::size_t i = 0; i < a.size(); ++i)
        if (detail::key_of(*a[i]) != detail::key_of(*b[i])) return false;
    return true;
}

inline double type_accuracy(const std::vector<MaybeSpec>& preds, const std::vector<WaveformSpec>& truths,
                            const MatchOptions& o = {}) {
    detail::check_aligned(preds.size(), truths.size());
    if (truths.empty()) throw Error(ErrorCode::InvalidArgument, "no records to score");
    std::size_t ok = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) ok += type_correct(preds[i], truths[i], o);
    return static_cast<double>(ok) / static_cast<double>(truths.size());
}

/// Mean squared error of parameter p over type-correct records that carry
/// it. Within a record, squared errors of matched components are averaged.
/// nullopt when no record is eligible.
inline std::optional<double> param_mse(const std::vector<MaybeSpec>& preds, const std::vector<WaveformSpec>& truths,
                                       Param p, const MatchOptions& o = {}) {
    detail::check_aligned(preds.size(), truths.size());
    if (p == Param::Code) throw Error(ErrorCode::InvalidArgument, "Code is scored by type accuracy, not MSE");
    double total = 0;
    std::size_t records = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (!type_correct(preds[i], truths[i], o)) continue;
        const auto a = detail::arranged(*preds[i], o);
        const auto b = detail::arranged(truths[i], o);
        double se = 0;
        std::size_t n = 0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            auto pa = a[k]->params.find(p);
            auto pb = b[k]->params.find(p);
            if (pa == a[k]->params.end() || pb == b[k]->params.end()) continue;
            se += (pa->second - pb->second) * (pa->second - pb->second);
            ++n;
        }
        if (n) {
            total += se / static_cast<double>(n);
            ++records;
        }
    }
    if (!records) return std::nullopt;
    return total / static_cast<double>(records);
}

inline constexpr std::array<Param, 8> kMseParams = {Param::cf,      Param::B,      Param::T,
                                                    Param::FH,      Param::deltaF, Param::seg_num,
                                                    Param::phasestate_num, Param::code_length};

struct SweepRow {
    double snr_db = 0;
    std::size_t n = 0;
    double type_acc = 0;
    std::array<std::optional<double>, kMseParams.size()> mse{};
};

inline void write_metrics_header(std::ostream& os) {
    os << "snr_db,n,type_acc";
    for (Param p : kMseParams) os << ",mse_" << to_string(p);
    os << '\n';
}

/// Row with an arbitrary label in the snr_db column (e.g. "all").
inline void write_metrics_row(std::ostream& os, const std::string& label, const SweepRow& r) {
    os.precision(10);
    os << label << ',' << r.n << ',' << r.type_acc;
    for (const auto& m : r.mse) {
        os << ',';
        if (m) os << *m;
        else os << "NA";
    }
    os << '\n';
}

inline void write_metrics_row(std::ostream& os, const SweepRow& r) {
    std::ostringstream label;
    label.precision(10);
    label << r.snr_db;
    write_metrics_row(os, label.str(), r);
}

inline SweepRow score(double snr_db, const std::vector<MaybeSpec>& preds, const std::vector<WaveformSpec>& truths,
                      const MatchOptions& o = {}) {
    SweepRow r;
    r.snr_db = snr_db;
    r.n = truths.size();
    r.type_acc = type_accuracy(preds, truths, o);
    for (std::size_t k = 0; k < kMseParams.size(); ++k) r.mse[k] = param_mse(preds, truths, kMseParams[k], o);
    return r;
}

using Predictor = std::function<MaybeSpec(const IQSignal&)>;

/// Fresh seeded test sets at each SNR, scored against continuous truths.
inline std::vector<SweepRow> snr_sweep(const Predictor& predict, const DatasetConfig& base,
                                       const std::vector<double>& snr_grid, std::size_t n_per_point,
                                       const MatchOptions& o = {}) {
    if (snr_grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty SNR grid");
    std::vector<SweepRow> rows;
    for (std::size_t g = 0; g < snr_grid.size(); ++g) {
        DatasetConfig cfg = base;
        cfg.snr_min = cfg.snr_max = snr_grid[g];
        cfg.n = n_per_point;
        cfg.seed = substream(base.seed, "sweep", g)();
        std::vector<MaybeSpec> preds;
        std::vector<WaveformSpec> truths;
        for (std::size_t i = 0; i < n_per_point; ++i) {
            auto ex = generate_example(cfg, i);
            preds.push_back(predict(ex.signal));
            truths.push_back(std::move(ex.spec));
        }
        rows.push_back(score(snr_grid[g], preds, truths, o));
    }
    return rows;
}

}  // namespace sig2text::eval

// sig2text command-line tool: dataset generation, training, inference,
// scoring, and string <-> spec conversion.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "sig2text/eval.hpp"
#include "sig2text/infer.hpp"
#include "sig2text/nn/checkpoint.hpp"
#include "sig2text/train.hpp"

using namespace sig2text;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Format, path + ": " + e.what());
    }
}

std::vector<SignalClass> parse_classes(const std::string& list) {
    std::vector<SignalClass> out;
    std::stringstream ss(list);
    for (std::string name; std::getline(ss, name, ',');) {
        if (name.empty()) continue;
        const auto c = signal_class_from_string(name);
        if (!c) throw Error(ErrorCode::UnknownSubtype, "unknown class " + name);
        out.push_back(*c);
    }
    if (out.empty()) throw Error(ErrorCode::InvalidArgument, "no classes given");
    return out;
}

// Output stream that is stdout unless a path is given.
struct Output {
    std::ofstream file;
    std::ostream* os = &std::cout;
    explicit Output(const std::string& path) {
        if (path.empty() || path == "-") return;
        file.open(path);
        if (!file) throw Error(ErrorCode::Io, "cannot write " + path);
        os = &file;
    }
};

// ---------------------------------------------------------------- gen

struct GenArgs {
    std::string classes;
    std::size_t n = 0;
    double snr_min = -10, snr_max = 10;
    std::uint64_t seed = 0;
    std::string out;
    double pw_min_us = 50, pw_max_us = 100;
    int adc_bits = 8;
};

int run_gen(const GenArgs& a) {
    DatasetConfig c;
    if (a.classes.empty()) c.classes.assign(kAllSubTypes.begin(), kAllSubTypes.end());
    else c.classes = parse_classes(a.classes);
    if (a.snr_min > a.snr_max) throw Error(ErrorCode::InvalidArgument, "--snr-min exceeds --snr-max");
    if (a.pw_min_us > a.pw_max_us || a.pw_min_us <= 0)
        throw Error(ErrorCode::InvalidArgument, "pulse width range is empty or non-positive");
    c.n = a.n;
    c.snr_min = a.snr_min;
    c.snr_max = a.snr_max;
    c.seed = a.seed;
    c.pulse_width_min = a.pw_min_us * 1e-6;
    c.pulse_width_max = a.pw_max_us * 1e-6;
    c.sampler.min_pulse_width = c.pulse_width_min;
    c.adc_bits = a.adc_bits;
    write_dataset(a.out, c);
    std::cout << json{{"written", a.n}, {"dir", a.out}}.dump() << '\n';
    return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string data, val_data, model_config, train_config, out, history;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

int run_train(const TrainArgs& a) {
    const json mj = a.model_config.empty() ? json::object() : read_json_file(a.model_config);
    const auto mc = nn::model_config_from_json(mj);
    StftConfig stft;
    stft.image_rows = mc.image_rows;
    stft.image_cols = mc.image_cols;
    if (mj.contains("stft")) stft = nn::stft_config_from_json(mj["stft"]);
    auto tc = a.train_config.empty() ? train::TrainConfig{} : train::train_config_from_json(read_json_file(a.train_config));
    if (a.seed) tc.seed = *a.seed;

    const Vocabulary vocab;
    const QuantizationScheme q;
    DatasetReader reader(a.data);
    auto all = train::load_samples(reader, mc, stft, vocab, q);
    std::vector<train::Sample> tr, va;
    if (!a.val_data.empty()) {
        DatasetReader vr(a.val_data);
        tr = std::move(all);
        va = train::load_samples(vr, mc, stft, vocab, q);
    } else {
        std::tie(tr, va) = train::split_validation(std::move(all), tc.val_fraction, tc.seed);
    }

    nn::Model<float> model(mc, tc.seed);
    const auto res = train::train(model, tr, va, tc, [&](const train::EpochRecord& e) {
        if (!a.quiet)
            std::cerr << json{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss},
                              {"lr", e.lr}, {"val_token_acc", e.val_token_acc}, {"seconds", e.seconds}}
                             .dump()
                      << '\n';
        return true;
    });
    nn::save_checkpoint(a.out, model, stft, q);
    const std::string hist = a.history.empty() ? a.out + ".history.csv" : a.history;
    Output h(hist);
    train::write_history_csv(*h.os, res.history);
    std::cout << json{{"checkpoint", a.out},
                      {"history", hist},
                      {"best_epoch", res.best_epoch},
                      {"best_val_loss", res.best_val_loss},
                      {"stopped_early", res.stopped_early},
                      {"train_size", tr.size()},
                      {"val_size", va.size()}}
                     .dump()
              << '\n';
    return 0;
}

// ---------------------------------------------------------------- infer

struct InferArgs {
    std::string ckpt, data, out;
    int beam = 1;
    int max_len = kDefaultMaxLen;
};

int run_infer(const InferArgs& a) {
    auto ck = nn::load_checkpoint<float>(a.ckpt);
    DatasetReader reader(a.data);
    const Vocabulary vocab;
    infer::BeamOptions opt;
    opt.beam = a.beam;
    opt.max_len = a.max_len;
    Output out(a.out);
    for (std::size_t i = 0; i < reader.size(); ++i) {
        const auto p = infer::predict(*ck.model, reader.signal(i), ck.stft, opt, vocab, ck.quant);
        *out.os << infer::prediction_to_json(reader.records()[i].id, p, vocab, ck.quant).dump() << '\n';
    }
    return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    std::string pred, truth, out;
    bool by_snr = false;
    bool order_sensitive = false;
};

int run_eval(const EvalArgs& a) {
    std::map<std::string, eval::MaybeSpec> preds;
    {
        std::ifstream in(a.pred);
        if (!in) throw Error(ErrorCode::Io, "cannot read " + a.pred);
        std::size_t lineno = 0;
        for (std::string line; std::getline(in, line);) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                const auto j = json::parse(line);
                const auto& p = j.at("parsed");
                preds[j.at("id").get<std::string>()] = p.is_null() ? eval::MaybeSpec{} : eval::MaybeSpec{spec_from_json(p)};
            } catch (const json::exception& e) {
                throw Error(ErrorCode::Format, a.pred + " line " + std::to_string(lineno) + ": " + e.what());
            }
        }
    }
    DatasetReader reader(a.truth);
    // Groups keyed by label, kept in numeric order of SNR.
    std::map<double, std::pair<std::vector<eval::MaybeSpec>, std::vector<WaveformSpec>>> groups;
    for (std::size_t i = 0; i < reader.size(); ++i) {
        const auto& r = reader.records()[i];
        auto it = preds.find(r.id);
        if (it == preds.end()) throw Error(ErrorCode::Format, "no prediction for record " + r.id);
        const double key = a.by_snr ? std::round(r.snr_db) : 0.0;
        groups[key].first.push_back(it->second);
        groups[key].second.push_back(reader.truth(i));
    }
    if (groups.empty()) throw Error(ErrorCode::InvalidArgument, "truth dataset is empty");
    const eval::MatchOptions mo{a.order_sensitive};
    Output out(a.out);
    eval::write_metrics_header(*out.os);
    for (const auto& [snr, g] : groups) {
        const auto row = eval::score(snr, g.first, g.second, mo);
        if (a.by_snr) eval::write_metrics_row(*out.os, row);
        else eval::write_metrics_row(*out.os, "all", row);
    }
    return 0;
}

// ---------------------------------------------------------------- parse / serialize

// Label strings on stdin, one per line; spec JSON lines on stdout.
int run_parse() {
    const Vocabulary vocab;
    int status = 0;
    for (std::string line; std::getline(std::cin, line);) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json out;
        try {
            const auto r = parse(from_label_string(line, vocab), vocab);
            if (r.ok()) {
                out = spec_to_json(*r.spec);
            } else {
                out = {{"error", "rejected"}, {"position", r.error_position}, {"message", r.message}};
                status = 1;
            }
        } catch (const Error& e) {
            out = {{"error", to_string(e.code())}, {"message", e.what()}};
            status = 1;
        }
        std::cout << out.dump() << '\n';
    }
    return status;
}

// Spec JSON on stdin, one object per line; label strings on stdout.
int run_serialize() {
    const Vocabulary vocab;
    int status = 0;
    for (std::string line; std::getline(std::cin, line);) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            json j;
            try {
                j = json::parse(line);
            } catch (const json::exception& e) {
                throw Error(ErrorCode::Format, e.what());
            }
            std::cout << to_label_string(serialize(spec_from_json(j), vocab), vocab) << '\n';
        } catch (const Error& e) {
            std::cout << json{{"error", to_string(e.code())}, {"message", e.what()}}.dump() << '\n';
            status = 1;
        }
    }
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Radar waveform recognition as sequence generation"};
    app.require_subcommand(1);

    GenArgs ga;
    auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
    gen->add_option("--classes", ga.classes, "Comma-separated subtypes or hybrid families (default: all 13 subtypes)");
    gen->add_option("--n", ga.n, "Number of records")->required();
    gen->add_option("--snr-min", ga.snr_min, "Lowest SNR in dB");
    gen->add_option("--snr-max", ga.snr_max, "Highest SNR in dB");
    gen->add_option("--seed", ga.seed, "Random seed");
    gen->add_option("--out", ga.out, "Output directory")->required();
    gen->add_option("--pw-min", ga.pw_min_us, "Shortest pulse width in microseconds");
    gen->add_option("--pw-max", ga.pw_max_us, "Longest pulse width in microseconds");
    gen->add_option("--adc-bits", ga.adc_bits, "ADC resolution; 0 disables quantization");

    TrainArgs ta;
    auto* trn = app.add_subcommand("train", "Train a model on a dataset");
    trn->add_option("--data", ta.data, "Training dataset directory")->required();
    trn->add_option("--val-data", ta.val_data, "Validation dataset directory (default: split from --data)");
    trn->add_option("--model-config", ta.model_config, "Model config JSON");
    trn->add_option("--train-config", ta.train_config, "Training config JSON");
    trn->add_option("--seed", ta.seed, "Overrides the training config seed");
    trn->add_option("--out", ta.out, "Checkpoint path")->required();
    trn->add_option("--history", ta.history, "History CSV path (default: <out>.history.csv)");
    trn->add_flag("--quiet", ta.quiet, "No per-epoch progress on stderr");

    InferArgs ia;
    auto* inf = app.add_subcommand("infer", "Decode every record of a dataset");
    inf->add_option("--ckpt", ia.ckpt, "Checkpoint path")->required();
    inf->add_option("--data", ia.data, "Dataset directory")->required();
    inf->add_option("--beam", ia.beam, "Beam width")->check(CLI::PositiveNumber);
    inf->add_option("--max-len", ia.max_len, "Maximum output length")->check(CLI::Range(2, 100000));
    inf->add_option("--out", ia.out, "Predictions JSONL (default: stdout)");

    EvalArgs ea;
    auto* evl = app.add_subcommand("eval", "Score predictions against a dataset");
    evl->add_option("--pred", ea.pred, "Predictions JSONL")->required();
    evl->add_option("--truth", ea.truth, "Dataset directory")->required();
    evl->add_option("--out", ea.out, "Metrics CSV (default: stdout)");
    evl->add_flag("--by-snr", ea.by_snr, "One row per SNR rounded to 1 dB");
    evl->add_flag("--order-sensitive", ea.order_sensitive, "Match hybrid components in written order");

    auto* prs = app.add_subcommand("parse", "Label strings on stdin to spec JSON on stdout");
    auto* ser = app.add_subcommand("serialize", "Spec JSON on stdin to label strings on stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return run_gen(ga);
        if (trn->parsed()) return run_train(ta);
        if (inf->parsed()) return run_infer(ia);
        if (evl->parsed()) return run_eval(ea);
        if (prs->parsed()) return run_parse();
        if (ser->parsed()) return run_serialize();
    } catch (const Error& e) {
        std::cerr << json{{"error", to_string(e.code())}, {"message", e.what()}}.dump() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
    return 0;
}

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "sig2text/infer.hpp"
#include "support/nn_fixtures.hpp"
#include "support/toy_lm.hpp"

using namespace sig2text;
using namespace sig2text::infer;
using sig2text::testing::Toy;
using sig2text::testing::exhaustive;
using sig2text::testing::hand_built;
using sig2text::testing::random_toy;

namespace {

BeamOptions toy_options(int beam, int max_len = 5) {
    BeamOptions o;
    o.beam = beam;
    o.max_len = max_len;
    o.sos = 3;
    o.eos = 2;
    return o;
}

}  // namespace

TEST(Beam, GreedyMissesWhatWiderBeamsFind) {
    auto toy = hand_built();
    const auto [opt_seq, opt_score] = exhaustive(toy, 3, 2, 5);
    EXPECT_EQ(opt_seq, (std::vector<int>{3, 1, 2}));
    const auto g = greedy_decode(toy.fn(), toy_options(1));
    EXPECT_EQ(g.tokens[1], 0);  // greedy commits to 'a'
    EXPECT_LT(g.log_likelihood, opt_score);
    for (int k : {2, 3, 4}) {
        const auto r = beam_search(toy.fn(), toy_options(k));
        EXPECT_EQ(r.tokens, opt_seq) << "K=" << k;
        EXPECT_NEAR(r.log_likelihood, opt_score, 1e-12);
        EXPECT_TRUE(r.terminated);
    }
}

TEST(Beam, WiderBeamNeverScoresWorseOnTheToy) {
    auto toy = hand_built();
    double prev = -std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 6; ++k) {
        const auto r = beam_search(toy.fn(), toy_options(k));
        EXPECT_GE(r.log_likelihood, prev - 1e-15);
        prev = r.log_likelihood;
    }
}

TEST(Beam, WidthOneEqualsGreedyOnRandomToys) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto toy = random_toy(seed, 6);
        BeamOptions o = toy_options(1, 10);
        o.sos = 6;
        const auto a = beam_search(toy.fn(), o);
        const auto b = greedy_decode(toy.fn(), o);
        ASSERT_EQ(a.tokens, b.tokens);
        ASSERT_EQ(a.log_likelihood, b.log_likelihood);
    }
}

TEST(Beam, ScoreIsTheSumOfRecomputedStepLogProbs) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto toy = random_toy(seed, 5);
        BeamOptions o = toy_options(3, 8);
        o.sos = 5;
        const auto r = beam_search(toy.fn(), o);
        double s = 0;
        for (std::size_t t = 1; t < r.tokens.size(); ++t) {
            const std::vector<int> prefix(r.tokens.begin(), r.tokens.begin() + static_cast<std::ptrdiff_t>(t));
            const double lp = toy.fn()({prefix})[0][static_cast<std::size_t>(r.tokens[t])];
            EXPECT_LE(lp, 0.0);
            s += lp;
        }
        EXPECT_NEAR(r.log_likelihood, s, 1e-10);
        ASSERT_EQ(r.step_log_probs.size(), r.tokens.size() - 1);
    }
}

TEST(Beam, LengthLimitFlagsUnterminated) {
    Toy t;
    auto row = std::vector<double>{std::log(0.9), std::log(0.09), std::log(0.01)};
    t.logp = {row, row, row, row};
    const auto r = beam_search(t.fn(), toy_options(2, 6));
    EXPECT_EQ(r.tokens.size(), 6u);
    EXPECT_FALSE(r.terminated);
    EXPECT_THROW(beam_search(t.fn(), toy_options(0)), Error);
}

TEST(Beam, LiteralStopRuleCanEndEarly) {
    // With the literal rule the search halts once any beam ends, even when a
    // live beam still outranks it.
    auto toy = hand_built();
    auto o = toy_options(2);
    const auto standard = beam_search(toy.fn(), o);
    o.stop_on_any_frozen = true;
    const auto literal = beam_search(toy.fn(), o);
    EXPECT_TRUE(standard.terminated);
    EXPECT_LE(literal.log_likelihood, standard.log_likelihood + 1e-15);
}

TEST(Beam, TiesGoToTheLowerToken) {
    Toy t;
    const double l = std::log(1.0 / 3);
    t.logp = {{l, l, l}, {l, l, l}, {l, l, l}, {l, l, l}};
    const auto r = beam_search(t.fn(), toy_options(1, 4));
    EXPECT_EQ(r.tokens, (std::vector<int>{3, 0, 0, 0}));
}

TEST(Beam, ModelWidthOneEqualsGreedy) {
    auto cfg = sig2text::testing::tiny_config();
    cfg.image_rows = cfg.image_cols = 16;
    cfg.patch_rows = cfg.patch_cols = 8;
    StftConfig stft;
    stft.image_rows = stft.image_cols = 16;
    DatasetConfig dc;
    dc.classes = {SubType::LFM, SubType::P1};
    dc.seed = 1;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        nn::Model<double> m(cfg, seed);
        const auto sig = generate_example(dc, seed).signal;
        nn::NoGradGuard ng;
        const auto mem = m.encode(featurize(sig, stft, 8, 8));
        BeamOptions o;
        o.max_len = cfg.max_len;
        const auto a = beam_search(model_next(m, mem), o);
        const auto b = greedy_decode(model_next(m, mem), o);
        ASSERT_EQ(a.tokens, b.tokens);
        EXPECT_EQ(decode_signal(m, sig, stft, o).tokens, a.tokens);
    }
}

TEST(Predict, InterpretsDecodedSequences) {
    const Vocabulary vocab;
    auto beam_of = [&](const std::string& label, bool terminated = true) {
        BeamResult b;
        b.tokens = from_label_string(label, vocab);
        if (!terminated) b.tokens.pop_back();
        b.terminated = terminated;
        return b;
    };
    const auto ok = interpret(beam_of("FM LFM cf 20.0 B 5.0"));
    ASSERT_TRUE(ok.parsed.ok());
    EXPECT_EQ(ok.parsed.spec->components[0].sub_type, SubType::LFM);

    const auto bad = interpret(beam_of("FM cf LFM B 5.0"));
    EXPECT_FALSE(bad.parsed.ok());

    const auto hybrid = interpret(beam_of("FM LFM cf 100.0 B 10.0 PM P1 cf 100.0 code_length 10"));
    ASSERT_TRUE(hybrid.parsed.ok());
    EXPECT_EQ(hybrid.parsed.spec->components.size(), 2u);

    const auto cut = interpret(beam_of("FM LFM cf 20.0 B 5.0", false));
    EXPECT_FALSE(cut.parsed.ok());

    const auto j = prediction_to_json("x", ok, vocab);
    EXPECT_EQ(j["predicted_string"], "FM LFM cf 20.0 B 5.0");
    EXPECT_TRUE(j["parsed"].is_object());
    EXPECT_TRUE(prediction_to_json("y", bad, vocab)["parsed"].is_null());
}

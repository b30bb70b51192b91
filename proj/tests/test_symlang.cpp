#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "sig2text/symlang.hpp"

using namespace sig2text;

namespace {

const Vocabulary& vocab() {
    static const Vocabulary v;
    return v;
}

TokenSequence words(std::initializer_list<const char*> w) {
    TokenSequence out;
    for (const char* s : w) out.push_back(*vocab().id(s));
    return out;
}

bool parser_accepts(const TokenSequence& t) { return parse(t, vocab()).ok(); }

void expect_close(const WaveformSpec& got, const WaveformSpec& want, const QuantizationScheme& q) {
    ASSERT_EQ(got.components.size(), want.components.size());
    for (std::size_t i = 0; i < got.components.size(); ++i) {
        const auto& g = got.components[i];
        const auto& w = want.components[i];
        EXPECT_EQ(g.wf_type, w.wf_type);
        EXPECT_EQ(g.sub_type, w.sub_type);
        EXPECT_EQ(g.code, w.code);
        ASSERT_EQ(g.params.size(), w.params.size());
        for (const auto& [p, v] : w.params) {
            if (is_integer_param(p)) EXPECT_EQ(g.params.at(p), v);
            else EXPECT_LE(std::abs(g.params.at(p) - v), q.unit(p) / 2 + 1e-9);
        }
    }
}

}  // namespace

TEST(Vocabulary, LayoutAndRoundTrip) {
    const auto& v = vocab();
    EXPECT_EQ(v.size(), 3 + 25 + 1024);
    EXPECT_EQ(v.name(Vocabulary::kPad), "<pad>");
    EXPECT_EQ(v.name(Vocabulary::kSos), "<sos>");
    EXPECT_EQ(v.name(Vocabulary::kEos), "<eos>");
    for (int id = 0; id < v.size(); ++id) ASSERT_EQ(*v.id(v.name(id)), id);
    EXPECT_THROW(v.numeric_id(1024), Error);
    EXPECT_THROW(v.numeric_id(-1), Error);
}

TEST(Tokenize, RoundTrips) {
    for (const char* text : {"<sos> <eos> <pad>", "FM LFM cf B Code deltaF code_length", "NUM_0 NUM_234 NUM_1023"}) {
        EXPECT_EQ(detokenize(tokenize(text, vocab()), vocab()), text);
    }
    EXPECT_THROW(tokenize("FM bogus", vocab()), Error);
}

TEST(Serialize, LfmExample) {
    WaveformSpec s{{make_component(SubType::LFM, {{Param::cf, 100.0}, {Param::B, 10.0}})}};
    const auto t = serialize(s, vocab());
    EXPECT_EQ(detokenize(t, vocab()), "<sos> FM LFM cf NUM_1000 B NUM_100 <eos>");
    EXPECT_EQ(to_label_string(t, vocab()), "FM LFM cf 100.0 B 10.0");
}

TEST(Serialize, QuantizesToNearestUnit) {
    WaveformSpec s{{make_component(SubType::LFM, {{Param::cf, 20.0}, {Param::B, 23.43}})}};
    const auto t = serialize(s, vocab());
    EXPECT_EQ(vocab().name(t[6]), "NUM_234");
}

TEST(Serialize, Errors) {
    EXPECT_THROW(serialize(WaveformSpec{}, vocab()), Error);
    WaveformSpec too_big{{make_component(SubType::LFM, {{Param::cf, 200.0}, {Param::B, 5.0}})}};
    try {
        serialize(too_big, vocab());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OutOfRange);
    }
}

TEST(Serialize, CostasLabelString) {
    const std::string text = "FC Costas cf 100.0 FH 1.0 Code 7 6 2 10 1 4 8 9 11 5 3";
    const auto t = from_label_string(text, vocab());
    EXPECT_EQ(to_label_string(t, vocab()), text);
    const auto r = parse(t, vocab());
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.spec->components[0].code, (std::vector<int>{7, 6, 2, 10, 1, 4, 8, 9, 11, 5, 3}));
    EXPECT_DOUBLE_EQ(r.spec->components[0].params.at(Param::FH), 1.0);
}

TEST(Parse, HybridExampleKeepsFirstCarrier) {
    const auto t = from_label_string("FM LFM cf 100.0 B 10.0 PM P1 cf 100.0 code_length 10", vocab());
    const auto r = parse(t, vocab());
    ASSERT_TRUE(r.ok()) << r.message;
    ASSERT_EQ(r.spec->components.size(), 2u);
    EXPECT_EQ(r.spec->components[0].sub_type, SubType::LFM);
    EXPECT_EQ(r.spec->components[1].sub_type, SubType::P1);
    EXPECT_DOUBLE_EQ(r.spec->components[0].params.at(Param::cf), 100.0);
    EXPECT_DOUBLE_EQ(r.spec->components[1].params.at(Param::cf), 100.0);
    EXPECT_DOUBLE_EQ(r.spec->components[1].params.at(Param::code_length), 10.0);
}

TEST(Parse, DifferingCarriersResolveToTheFirst) {
    const auto t = from_label_string("PM P3 cf 21.5 code_length 4 PM Frank cf 33.0 code_length 5", vocab());
    const auto r = parse(t, vocab());
    ASSERT_TRUE(r.ok());
    for (const auto& c : r.spec->components) EXPECT_DOUBLE_EQ(c.params.at(Param::cf), 21.5);
}

TEST(Parse, RejectsWithPosition) {
    auto r = parse(words({"B", "FM", "cf"}), vocab());
    EXPECT_FALSE(r.ok());
    EXPECT_EQ(r.error_position, 0);
    EXPECT_FALSE(membership(words({"B", "FM", "cf"}), vocab()));

    // Numeric where a keyword is expected.
    r = parse(words({"<sos>", "FM", "NUM_3", "cf", "<eos>"}), vocab());
    EXPECT_FALSE(r.ok());
    EXPECT_EQ(r.error_position, 1);

    // Truncated: fails at end of input.
    r = parse(words({"<sos>", "FM", "LFM", "cf", "NUM_3", "B", "<eos>"}), vocab());
    EXPECT_FALSE(r.ok());
    EXPECT_EQ(r.error_position, 5);

    // Interior special token.
    r = parse(words({"FM", "LFM", "cf", "<pad>", "B", "NUM_1"}), vocab());
    EXPECT_FALSE(r.ok());
    EXPECT_EQ(r.error_position, 3);

    // Wrong subtype for the family.
    r = parse(words({"PM", "LFM", "cf", "NUM_1", "B", "NUM_1"}), vocab());
    EXPECT_FALSE(r.ok());
    EXPECT_EQ(r.error_position, 1);
}

TEST(Parse, EmptyIsRejectedByBoth) {
    EXPECT_FALSE(parser_accepts({}));
    EXPECT_FALSE(parser_accepts({Vocabulary::kSos, Vocabulary::kEos}));
    EXPECT_FALSE(membership({}, vocab()));
}

TEST(Parse, RoundTripsSampledSpecs) {
    const QuantizationScheme q;
    std::set<SubType> all(kAllSubTypes.begin(), kAllSubTypes.end());
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        const auto s = seed % 3 == 0 ? sample_hybrid(kAllHybridFamilies[seed % 5], seed) : sample_spec(all, seed);
        const auto t = serialize(s, vocab(), q);
        EXPECT_TRUE(membership(t, vocab()));
        const auto r = parse(t, vocab(), q);
        ASSERT_TRUE(r.ok()) << detokenize(t, vocab());
        expect_close(*r.spec, s, q);
        EXPECT_EQ(*r.spec, quantized(s, q));
        // The label string carries the same information.
        EXPECT_EQ(from_label_string(to_label_string(t, vocab(), q), vocab(), q), t);
    }
}

TEST(Parse, AgreesWithCykOnKeywordShuffles) {
    std::mt19937_64 rng(7);
    std::set<SubType> all(kAllSubTypes.begin(), kAllSubTypes.end());
    int accepted = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        auto t = serialize(sample_spec(all, static_cast<std::uint64_t>(trial)), vocab());
        TokenSequence body(t.begin() + 1, t.end() - 1);
        // Shuffle a few positions; sometimes leave it intact.
        const int swaps = static_cast<int>(rng() % 3);
        for (int s = 0; s < swaps; ++s) std::swap(body[rng() % body.size()], body[rng() % body.size()]);
        const bool p = parser_accepts(body);
        ASSERT_EQ(p, membership(body, vocab())) << detokenize(body, vocab());
        accepted += p;
    }
    EXPECT_GT(accepted, 1000);
    EXPECT_LT(accepted, 10000);
}

TEST(Parse, AgreesWithCykOnAllShortStrings) {
    // Every string up to length 3 over the keywords plus one numeric token.
    std::vector<int> alphabet;
    for (int id = Vocabulary::kFirstKeyword; id < vocab().first_numeric(); ++id) alphabet.push_back(id);
    alphabet.push_back(vocab().numeric_id(5));
    std::vector<int> cur;
    std::function<void(int)> rec = [&](int depth) {
        if (!cur.empty()) {
            ASSERT_EQ(parser_accepts(cur), membership(cur, vocab()));
        }
        if (depth == 0) return;
        for (int a : alphabet) {
            cur.push_back(a);
            rec(depth - 1);
            cur.pop_back();
        }
    };
    rec(3);
}

TEST(Grammar, TextRoundTripAndShape) {
    const auto& g = radar_grammar();
    EXPECT_EQ(g.start, "S");
    const auto again = grammar_from_text(to_text(g));
    EXPECT_EQ(again.productions, g.productions);
    const auto terms = g.terminals();
    EXPECT_EQ(terms.size(), 26u);  // 25 keywords + Number
    // The recursive start rule is present.
    EXPECT_NE(std::find(g.productions.begin(), g.productions.end(), Production{"S", {"Entry", "S"}}),
              g.productions.end());
    EXPECT_GT(radar_lr_table().state_count(), 10u);
}

TEST(Grammar, CykOnATextbookGrammar) {
    // a^n b^n, n >= 1.
    const auto g = grammar_from_text("S -> a S b | a b");
    const auto cnf = to_cnf(g);
    const int a = cnf.terminal_id("a"), b = cnf.terminal_id("b");
    EXPECT_TRUE(cyk_accepts(cnf, {a, b}));
    EXPECT_TRUE(cyk_accepts(cnf, {a, a, a, b, b, b}));
    EXPECT_FALSE(cyk_accepts(cnf, {a, a, b}));
    EXPECT_FALSE(cyk_accepts(cnf, {b, a}));
    EXPECT_FALSE(cyk_accepts(cnf, {}));
    const LrTable table(g);
    LrParser p(table);
    for (int t : {a, a, b, b}) ASSERT_TRUE(p.feed(table.terminal_id(t == a ? "a" : "b")));
    EXPECT_TRUE(p.finish());
}

TEST(Grammar, AmbiguousGrammarIsNotLr1) {
    EXPECT_THROW(LrTable(grammar_from_text("E -> E + E | n")), Error);
}

#pragma once

#include <algorithm>
#include <bitset>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sig2text/error.hpp"

namespace sig2text {

struct Production {
    std::string lhs;
    std::vector<std::string> rhs;

    bool operator==(const Production&) const = default;
};

/// Context-free grammar over string symbols. A symbol is a non-terminal iff
/// it appears on the left of some production.
struct Grammar {
    std::string start;
    std::vector<Production> productions;

    bool is_nonterminal(const std::string& s) const {
        return std::any_of(productions.begin(), productions.end(),
                           [&](const Production& p) { return p.lhs == s; });
    }

    std::vector<std::string> nonterminals() const {
        std::vector<std::string> out;
        for (const auto& p : productions) {
            if (std::find(out.begin(), out.end(), p.lhs) == out.end()) out.push_back(p.lhs);
        }
        return out;
    }

    std::vector<std::string> terminals() const {
        const auto nts = nonterminals();
        std::vector<std::string> out;
        for (const auto& p : productions) {
            for (const auto& s : p.rhs) {
                if (std::find(nts.begin(), nts.end(), s) == nts.end() &&
                    std::find(out.begin(), out.end(), s) == out.end()) {
                    out.push_back(s);
                }
            }
        }
        return out;
    }
};

/// One `LHS -> RHS` per line; the first line's LHS is the start symbol.
inline std::string to_text(const Grammar& g) {
    std::ostringstream os;
    for (const auto& p : g.productions) {
        os << p.lhs << " ->";
        for (const auto& s : p.rhs) os << ' ' << s;
        os << '\n';
    }
    return os.str();
}

/// Inverse of to_text. Blank lines and lines starting with '#' are skipped;
/// `A -> x | y` is accepted as shorthand for two productions.
inline Grammar grammar_from_text(const std::string& text) {
    Grammar g;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::vector<std::string> words;
        for (std::string w; ls >> w;) words.push_back(w);
        if (words.empty() || words.front().front() == '#') continue;
        if (words.size() < 3 || words[1] != "->") {
            throw Error(ErrorCode::Format, "grammar line " + std::to_string(lineno) + " is not `LHS -> RHS`");
        }
        if (g.start.empty()) g.start = words[0];
        Production cur{words[0], {}};
        for (std::size_t i = 2; i < words.size(); ++i) {
            if (words[i] == "|") {
                g.productions.push_back(cur);
                cur.rhs.clear();
            } else {
                cur.rhs.push_back(words[i]);
            }
        }
        g.productions.push_back(cur);
    }
    for (const auto& p : g.productions) {
        if (p.rhs.empty()) throw Error(ErrorCode::Format, "empty production for " + p.lhs);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Chomsky normal form and CYK

inline constexpr std::size_t kMaxCnfSymbols = 256;
using NtSet = std::bitset<kMaxCnfSymbols>;

/// The grammar rewritten into CNF (A -> B C, A -> a) over dense ids.
/// Terminal ids follow Grammar::terminals() order.
struct CnfGrammar {
    std::vector<std::string> nonterminals;
    std::vector<std::string> terminals;
    int start = 0;
    struct Binary {
        int lhs, left, right;
    };
    std::vector<Binary> binary;
    std::vector<NtSet> lexical;                       // per terminal: A with A -> a
    std::vector<std::vector<std::pair<int, int>>> by_left;  // left -> (right, lhs)

    int terminal_id(const std::string& s) const {
        auto it = std::find(terminals.begin(), terminals.end(), s);
        return it == terminals.end() ? -1 : static_cast<int>(it - terminals.begin());
    }
};

/// Converts an epsilon-free grammar to CNF: terminals inside long right
/// sides get proxy non-terminals, long right sides are binarized, and unit
/// productions are folded away.
inline CnfGrammar to_cnf(const Grammar& g) {
    CnfGrammar cnf;
    cnf.terminals = g.terminals();
    std::map<std::string, int> nt_id;
    const auto intern = [&](const std::string& name) {
        auto [it, fresh] = nt_id.emplace(name, static_cast<int>(cnf.nonterminals.size()));
        if (fresh) cnf.nonterminals.push_back(name);
        return it->second;
    };
    for (const auto& name : g.nonterminals()) intern(name);
    const auto is_nt = [&](const std::string& s) { return nt_id.count(s) != 0; };

    // Each rule: lhs -> symbols where a symbol is +(nt id + 1) or -(terminal id + 1).
    struct Rule {
        int lhs;
        std::vector<int> rhs;
    };
    std::vector<Rule> rules;
    for (const auto& p : g.productions) {
        if (p.rhs.empty()) throw Error(ErrorCode::InvalidArgument, "CNF conversion needs an epsilon-free grammar");
        Rule r{nt_id.at(p.lhs), {}};
        for (const auto& s : p.rhs) {
            r.rhs.push_back(is_nt(s) ? nt_id.at(s) + 1 : -(cnf.terminal_id(s) + 1));
        }
        rules.push_back(std::move(r));
    }

    // Proxies for terminals in right sides longer than one.
    std::map<int, int> proxy;
    const std::size_t original = rules.size();
    for (std::size_t i = 0; i < original; ++i) {
        if (rules[i].rhs.size() < 2) continue;
        for (auto& sym : rules[i].rhs) {
            if (sym > 0) continue;
            const int t = -sym - 1;
            auto it = proxy.find(t);
            if (it == proxy.end()) {
                const int id = intern("<" + cnf.terminals[static_cast<std::size_t>(t)] + ">");
                it = proxy.emplace(t, id).first;
                rules.push_back({id, {sym}});
            }
            sym = it->second + 1;
        }
    }

    // Binarize.
    std::vector<Rule> bin;
    int fresh = 0;
    for (auto& r : rules) {
        if (r.rhs.size() <= 2) {
            bin.push_back(r);
            continue;
        }
        int lhs = r.lhs;
        for (std::size_t k = 0; k + 2 < r.rhs.size(); ++k) {
            const int tail = intern(cnf.nonterminals[static_cast<std::size_t>(r.lhs)] + "#" + std::to_string(fresh++));
            bin.push_back({lhs, {r.rhs[k], tail + 1}});
            lhs = tail;
        }
        bin.push_back({lhs, {r.rhs[r.rhs.size() - 2], r.rhs.back()}});
    }

    const std::size_t n = cnf.nonterminals.size();
    if (n > kMaxCnfSymbols) throw Error(ErrorCode::OutOfRange, "grammar too large for the CYK bitset");

    // Unit closure: reach[a] = { b : a =>* b via unit productions }.
    std::vector<NtSet> reach(n);
    for (std::size_t a = 0; a < n; ++a) reach[a].set(a);
    for (bool changed = true; changed;) {
        changed = false;
        for (const auto& r : bin) {
            if (r.rhs.size() != 1 || r.rhs[0] < 0) continue;
            const auto b = static_cast<std::size_t>(r.rhs[0] - 1);
            for (std::size_t a = 0; a < n; ++a) {
                if (reach[a].test(static_cast<std::size_t>(r.lhs)) && (reach[a] | reach[b]) != reach[a]) {
                    reach[a] |= reach[b];
                    changed = true;
                }
            }
        }
    }

    cnf.lexical.assign(cnf.terminals.size(), NtSet{});
    std::set<std::tuple<int, int, int>> seen;
    for (std::size_t a = 0; a < n; ++a) {
        for (const auto& r : bin) {
            if (!reach[a].test(static_cast<std::size_t>(r.lhs))) continue;
            if (r.rhs.size() == 1 && r.rhs[0] < 0) {
                cnf.lexical[static_cast<std::size_t>(-r.rhs[0] - 1)].set(a);
            } else if (r.rhs.size() == 2) {
                const int b = r.rhs[0] - 1;
                const int c = r.rhs[1] - 1;
                if (seen.emplace(static_cast<int>(a), b, c).second) {
                    cnf.binary.push_back({static_cast<int>(a), b, c});
                }
            }
        }
    }
    cnf.by_left.assign(n, {});
    for (const auto& b : cnf.binary) {
        cnf.by_left[static_cast<std::size_t>(b.left)].emplace_back(b.right, b.lhs);
    }
    cnf.start = nt_id.at(g.start);
    return cnf;
}

/// Incremental CYK chart: push terminals one at a time and query whether
/// the current string is derivable from the start symbol. Each push fills
/// only the cells ending at the new position.
class CykRecognizer {
public:
    explicit CykRecognizer(const CnfGrammar& g) : g_(&g) {}

    /// `terminal` < 0 marks a symbol outside the grammar's alphabet.
    void push(int terminal) {
        const std::size_t j = len_;
        ++len_;
        // cells_[i] holds the column for substrings ending at i: cell(i, j) = span [i, j].
        cols_.emplace_back(len_);
        auto& col = cols_.back();
        col[j] = terminal >= 0 && static_cast<std::size_t>(terminal) < g_->lexical.size()
                     ? g_->lexical[static_cast<std::size_t>(terminal)]
                     : NtSet{};
        for (std::size_t i = j; i-- > 0;) {
            NtSet acc;
            for (std::size_t k = i; k < j; ++k) {
                const NtSet& left = cols_[k][i];   // span [i, k]
                const NtSet& right = col[k + 1];   // span [k+1, j]
                if (left.none() || right.none()) continue;
                for (std::size_t b = left._Find_first(); b < kMaxCnfSymbols; b = left._Find_next(b)) {
                    for (const auto& [c, a] : g_->by_left[b]) {
                        if (right.test(static_cast<std::size_t>(c))) acc.set(static_cast<std::size_t>(a));
                    }
                }
            }
            col[i] = acc;
        }
    }

    void pop() {
        if (len_ == 0) return;
        cols_.pop_back();
        --len_;
    }

    bool accepts() const { return len_ > 0 && cols_.back()[0].test(static_cast<std::size_t>(g_->start)); }
    std::size_t size() const { return len_; }

private:
    const CnfGrammar* g_;
    std::size_t len_ = 0;
    std::vector<std::vector<NtSet>> cols_;
};

/// Exact membership of a terminal-id string by CYK.
inline bool cyk_accepts(const CnfGrammar& g, const std::vector<int>& terminals) {
    CykRecognizer rec(g);
    for (int t : terminals) rec.push(t);
    return rec.accepts();
}

}  // namespace sig2text

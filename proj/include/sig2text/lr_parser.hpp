#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "sig2text/error.hpp"
#include "sig2text/grammar.hpp"

namespace sig2text {

/// Canonical LR(1) tables for an epsilon-free grammar. Terminal ids follow
/// Grammar::terminals() order; end-of-input is terminals().size().
class LrTable {
public:
    enum class Kind : unsigned char { Error, Shift, Reduce, Accept };
    struct Action {
        Kind kind = Kind::Error;
        int target = 0;  // state for Shift, production for Reduce
    };

    explicit LrTable(const Grammar& g) { build(g); }

    int terminal_id(const std::string& s) const {
        auto it = std::find(terminals_.begin(), terminals_.end(), s);
        return it == terminals_.end() ? -1 : static_cast<int>(it - terminals_.begin());
    }
    int end_marker() const { return static_cast<int>(terminals_.size()); }
    const std::vector<std::string>& terminals() const { return terminals_; }

    const Action& action(int state, int terminal) const {
        return actions_[static_cast<std::size_t>(state) * (terminals_.size() + 1) + static_cast<std::size_t>(terminal)];
    }
    int goto_state(int state, int nonterminal) const {
        return gotos_[static_cast<std::size_t>(state) * nonterminals_.size() + static_cast<std::size_t>(nonterminal)];
    }

    /// Production p of the original grammar: lhs id and right-side length.
    int lhs(int p) const { return prod_lhs_[static_cast<std::size_t>(p)]; }
    int rhs_len(int p) const { return prod_len_[static_cast<std::size_t>(p)]; }
    const std::string& nonterminal_name(int nt) const { return nonterminals_[static_cast<std::size_t>(nt)]; }
    std::size_t state_count() const { return state_count_; }

private:
    // Symbols: terminals [0, T), end marker T, non-terminals T+1+i.
    struct Item {
        int prod, dot, look;
        auto operator<=>(const Item&) const = default;
    };

    void build(const Grammar& g) {
        terminals_ = g.terminals();
        nonterminals_ = g.nonterminals();
        const int nt_base = static_cast<int>(terminals_.size()) + 1;
        const auto sym = [&](const std::string& s) {
            auto it = std::find(nonterminals_.begin(), nonterminals_.end(), s);
            if (it != nonterminals_.end()) return nt_base + static_cast<int>(it - nonterminals_.begin());
            return terminal_id(s);
        };
        // Production 0..P-1 from the grammar, P is the augmented S' -> S.
        std::vector<std::vector<int>> rhs;
        for (const auto& p : g.productions) {
            if (p.rhs.empty()) throw Error(ErrorCode::InvalidArgument, "LR construction needs an epsilon-free grammar");
            std::vector<int> r;
            for (const auto& s : p.rhs) r.push_back(sym(s));
            rhs.push_back(r);
            prod_lhs_.push_back(sym(p.lhs) - nt_base);
            prod_len_.push_back(static_cast<int>(p.rhs.size()));
        }
        const int augmented = static_cast<int>(rhs.size());
        rhs.push_back({sym(g.start)});

        const std::size_t nts = nonterminals_.size();
        std::vector<std::vector<int>> by_lhs(nts);
        for (int p = 0; p < augmented; ++p) by_lhs[static_cast<std::size_t>(prod_lhs_[static_cast<std::size_t>(p)])].push_back(p);

        // FIRST of each non-terminal (no nullable symbols).
        std::vector<std::set<int>> first(nts);
        for (bool changed = true; changed;) {
            changed = false;
            for (int p = 0; p < augmented; ++p) {
                const int a = prod_lhs_[static_cast<std::size_t>(p)];
                const int x = rhs[static_cast<std::size_t>(p)][0];
                const std::size_t before = first[static_cast<std::size_t>(a)].size();
                if (x < nt_base) {
                    first[static_cast<std::size_t>(a)].insert(x);
                } else {
                    const auto& fx = first[static_cast<std::size_t>(x - nt_base)];
                    first[static_cast<std::size_t>(a)].insert(fx.begin(), fx.end());
                }
                changed |= first[static_cast<std::size_t>(a)].size() != before;
            }
        }

        const auto closure = [&](std::set<Item> items) {
            std::vector<Item> work(items.begin(), items.end());
            while (!work.empty()) {
                const Item it = work.back();
                work.pop_back();
                const auto& r = rhs[static_cast<std::size_t>(it.prod)];
                if (it.dot >= static_cast<int>(r.size())) continue;
                const int x = r[static_cast<std::size_t>(it.dot)];
                if (x < nt_base) continue;
                std::set<int> looks;
                if (it.dot + 1 < static_cast<int>(r.size())) {
                    const int y = r[static_cast<std::size_t>(it.dot + 1)];
                    if (y < nt_base) looks.insert(y);
                    else looks = first[static_cast<std::size_t>(y - nt_base)];
                } else {
                    looks.insert(it.look);
                }
                for (int p : by_lhs[static_cast<std::size_t>(x - nt_base)]) {
                    for (int la : looks) {
                        const Item ni{p, 0, la};
                        if (items.insert(ni).second) work.push_back(ni);
                    }
                }
            }
            return items;
        };

        std::map<std::set<Item>, int> index;
        std::vector<std::set<Item>> states;
        std::vector<std::map<int, int>> transitions;
        states.push_back(closure({Item{augmented, 0, end_marker()}}));
        index.emplace(states[0], 0);
        transitions.emplace_back();
        for (std::size_t s = 0; s < states.size(); ++s) {
            std::map<int, std::set<Item>> kernels;
            for (const auto& it : states[s]) {
                const auto& r = rhs[static_cast<std::size_t>(it.prod)];
                if (it.dot < static_cast<int>(r.size())) {
                    kernels[r[static_cast<std::size_t>(it.dot)]].insert({it.prod, it.dot + 1, it.look});
                }
            }
            for (auto& [x, kernel] : kernels) {
                auto full = closure(std::move(kernel));
                auto [pos, fresh] = index.emplace(full, static_cast<int>(states.size()));
                if (fresh) {
                    states.push_back(std::move(full));
                    transitions.emplace_back();
                }
                transitions[s][x] = pos->second;
            }
        }

        state_count_ = states.size();
        const std::size_t width = terminals_.size() + 1;
        actions_.assign(state_count_ * width, Action{});
        gotos_.assign(state_count_ * nts, -1);
        const auto set_action = [&](std::size_t s, int t, Action a) {
            Action& slot = actions_[s * width + static_cast<std::size_t>(t)];
            if (slot.kind != Kind::Error && (slot.kind != a.kind || slot.target != a.target)) {
                throw Error(ErrorCode::InvalidArgument, "grammar is not LR(1): conflict on " +
                                                            (t == end_marker() ? std::string("$") : terminals_[static_cast<std::size_t>(t)]));
            }
            slot = a;
        };
        for (std::size_t s = 0; s < state_count_; ++s) {
            for (const auto& [x, to] : transitions[s]) {
                if (x < nt_base) set_action(s, x, {Kind::Shift, to});
                else gotos_[s * nts + static_cast<std::size_t>(x - nt_base)] = to;
            }
            for (const auto& it : states[s]) {
                if (it.dot != static_cast<int>(rhs[static_cast<std::size_t>(it.prod)].size())) continue;
                if (it.prod == augmented) set_action(s, end_marker(), {Kind::Accept, 0});
                else set_action(s, it.look, {Kind::Reduce, it.prod});
            }
        }
    }

    std::vector<std::string> terminals_;
    std::vector<std::string> nonterminals_;
    std::vector<int> prod_lhs_;
    std::vector<int> prod_len_;
    std::vector<Action> actions_;
    std::vector<int> gotos_;
    std::size_t state_count_ = 0;
};

/// Shift-reduce driver. Feed terminal ids one at a time; the driver reports
/// an error at the first token that cannot extend a viable prefix. Every
/// reduction is recorded with the token span it covers.
class LrParser {
public:
    struct Reduction {
        int production;
        int begin, end;  // token span [begin, end)
    };

    explicit LrParser(const LrTable& table) : table_(&table) { states_.push_back({0, 0}); }

    /// Returns false (and stays failed) if `terminal` is not a legal next token.
    bool feed(int terminal) {
        if (failed_) return false;
        if (terminal < 0 || terminal >= table_->end_marker()) return fail();
        if (!step(terminal)) return fail();
        ++consumed_;
        return true;
    }

    /// Signals end of input; true iff the tokens fed so far form a sentence.
    bool finish() {
        if (failed_) return false;
        if (!step(table_->end_marker())) return fail();
        return accepted_;
    }

    bool failed() const { return failed_; }
    /// Index of the offending token (== count fed when the input ended early).
    int error_position() const { return error_at_; }
    int consumed() const { return consumed_; }
    const std::vector<Reduction>& reductions() const { return reductions_; }

private:
    struct Frame {
        int state;
        int begin;  // first token covered by the symbol that led here
    };

    bool fail() {
        failed_ = true;
        error_at_ = consumed_;
        return false;
    }

    bool step(int terminal) {
        for (;;) {
            const auto& act = table_->action(states_.back().state, terminal);
            switch (act.kind) {
                case LrTable::Kind::Error: return false;
                case LrTable::Kind::Accept: accepted_ = true; return true;
                case LrTable::Kind::Shift:
                    states_.push_back({act.target, consumed_});
                    return true;
                case LrTable::Kind::Reduce: {
                    const int len = table_->rhs_len(act.target);
                    const int begin = states_[states_.size() - static_cast<std::size_t>(len)].begin;
                    states_.resize(states_.size() - static_cast<std::size_t>(len));
                    const int to = table_->goto_state(states_.back().state, table_->lhs(act.target));
                    if (to < 0) return false;
                    states_.push_back({to, begin});
                    reductions_.push_back({act.target, begin, consumed_});
                    break;
                }
            }
        }
    }

    const LrTable* table_;
    std::vector<Frame> states_;
    std::vector<Reduction> reductions_;
    int consumed_ = 0;
    int error_at_ = -1;
    bool failed_ = false;
    bool accepted_ = false;
};

}  // namespace sig2text

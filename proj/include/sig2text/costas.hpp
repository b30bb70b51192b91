#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <set>
#include <utility>
#include <vector>

#include "sig2text/error.hpp"

namespace sig2text {

inline constexpr int kMinCostasOrder = 3;
inline constexpr int kMaxCostasOrder = 12;

/// True iff `code` is a permutation of 1..L whose displacement vectors
/// (index difference, value difference) over all ordered pairs are distinct.
/// The empty and single-element codes are trivially valid.
inline bool validate_costas(const std::vector<int>& code) {
    const int n = static_cast<int>(code.size());
    std::vector<bool> seen(n + 1, false);
    for (int v : code) {
        if (v < 1 || v > n || seen[v]) return false;
        seen[v] = true;
    }
    std::set<std::pair<int, int>> vectors;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (!vectors.emplace(j - i, code[j] - code[i]).second) return false;
        }
    }
    return true;
}

namespace detail {

// Row-by-row backtracking. diff_used[d][delta + n] marks the value difference
// `delta` already taken at index distance `d`.
class CostasSearch {
public:
    explicit CostasSearch(int n) : n_(n), perm_(n), used_(n + 1, false),
        diff_used_(n, std::vector<std::uint8_t>(2 * n + 1, 0)) {}

    std::vector<std::vector<int>> run() {
        place(0);
        return std::move(found_);
    }

private:
    void place(int row) {
        if (row == n_) {
            found_.push_back(perm_);
            return;
        }
        for (int v = 1; v <= n_; ++v) {
            if (used_[v]) continue;
            bool ok = true;
            int d = 1;
            for (; d <= row; ++d) {
                if (diff_used_[d][v - perm_[row - d] + n_]) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            for (d = 1; d <= row; ++d) diff_used_[d][v - perm_[row - d] + n_] = 1;
            used_[v] = true;
            perm_[row] = v;
            place(row + 1);
            used_[v] = false;
            for (d = 1; d <= row; ++d) diff_used_[d][v - perm_[row - d] + n_] = 0;
        }
    }

    int n_;
    std::vector<int> perm_;
    std::vector<bool> used_;
    std::vector<std::vector<std::uint8_t>> diff_used_;
    std::vector<std::vector<int>> found_;
};

}  // namespace detail

/// All Costas arrays of order `n` in lexicographic order, found by exhaustive
/// search and cached for the life of the process.
inline const std::vector<std::vector<int>>& costas_arrays(int n) {
    if (n < 1 || n > kMaxCostasOrder) {
        throw Error(ErrorCode::OutOfRange, "Costas order must be in [1, 12], got " + std::to_string(n));
    }
    static std::mutex mutex;
    static std::map<int, std::vector<std::vector<int>>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, detail::CostasSearch(n).run()).first;
    return it->second;
}

}  // namespace sig2text

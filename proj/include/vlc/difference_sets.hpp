// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vlc/error.hpp"

namespace vlc {

enum class SeedMethod { difference_set, exhaustive, hill_climb };

constexpr const char* to_string(SeedMethod m)
{
    switch (m) {
    case SeedMethod::difference_set: return "difference_set";
    case SeedMethod::exhaustive: return "exhaustive";
    case SeedMethod::hill_climb: return "hill_climb";
    }
    return "unknown";
}

struct EppmSeed {
    std::vector<std::uint8_t> word;  // Q entries, K of them 1
    SeedMethod method = SeedMethod::exhaustive;
    std::optional<int> lambda;        // set when word is a cyclic difference set
    int max_overlap = 0;              // max |S ∩ (S+t)| over t != 0
    int min_distance = 0;             // 2 (K - max_overlap)
};

namespace detail {

inline std::vector<std::uint8_t> indicator(std::span<const int> set, int q)
{
    std::vector<std::uint8_t> w(static_cast<std::size_t>(q), 0);
    for (int e : set)
        w[static_cast<std::size_t>(((e % q) + q) % q)] = 1;
    return w;
}

inline bool is_prime(int n)
{
    if (n < 2)
        return false;
    for (int d = 2; d * d <= n; ++d)
        if (n % d == 0)
            return false;
    return true;
}

// Overlap profile of a binary word with each of its nonzero cyclic shifts.
inline std::vector<int> shift_overlaps(std::span<const std::uint8_t> w)
{
    const std::size_t q = w.size();
    std::vector<int> ov(q, 0);
    for (std::size_t t = 1; t < q; ++t) {
        int acc = 0;
        for (std::size_t j = 0; j < q; ++j)
            acc += w[j] & w[(j + t) % q];
        ov[t] = acc;
    }
    return ov;
}

struct SeedScore {
    int max_overlap;
    int count_at_max;
    bool operator<(const SeedScore& o) const
    {
        return max_overlap != o.max_overlap ? max_overlap < o.max_overlap : count_at_max < o.count_at_max;
    }
};

inline SeedScore score(std::span<const std::uint8_t> w)
{
    const auto ov = shift_overlaps(w);
    int mx = 0, cnt = 0;
    for (std::size_t t = 1; t < ov.size(); ++t) {
        if (ov[t] > mx) {
            mx = ov[t];
            cnt = 1;
        } else if (ov[t] == mx) {
            ++cnt;
        }
    }
    return {mx, cnt};
}

// Known cyclic (v, k, 1) Singer sets and the PG(3,2) hyperplane set. Each is
// verified before use, so a bad entry is skipped rather than trusted.
inline const std::vector<std::pair<int, std::vector<int>>>& singer_table()
{
    static const std::vector<std::pair<int, std::vector<int>>> table = {
        {7, {0, 1, 3}},
        {13, {0, 1, 3, 9}},
        {15, {0, 1, 2, 4, 5, 8, 10}},
        {21, {0, 1, 4, 14, 16}},
        {31, {1, 5, 11, 24, 25, 27}},
        {57, {0, 1, 3, 13, 32, 36, 43, 52}},
        {73, {0, 1, 3, 7, 15, 31, 36, 54, 63}},
    };
    return table;
}

} // namespace detail

/// Returns lambda when every nonzero residue mod q occurs exactly lambda
/// times as a difference of two elements of the word's support.
inline std::optional<int> difference_set_lambda(std::span<const std::uint8_t> word)
{
    const int q = static_cast<int>(word.size());
    if (q < 2)
        return std::nullopt;
    std::vector<int> support;
    for (int i = 0; i < q; ++i)
        if (word[static_cast<std::size_t>(i)])
            support.push_back(i);
    std::vector<int> hits(static_cast<std::size_t>(q), 0);
    for (int a : support)
        for (int b : support)
            if (a != b)
                ++hits[static_cast<std::size_t>(((a - b) % q + q) % q)];
    for (int r = 2; r < q; ++r)
        if (hits[static_cast<std::size_t>(r)] != hits[1])
            return std::nullopt;
    return hits[1];
}

/// Quadratic residues mod a prime q ≡ 3 (mod 4); a (q, (q-1)/2, (q-3)/4) design.
inline std::vector<int> quadratic_residues(int q)
{
    std::vector<int> qr;
    std::vector<bool> seen(static_cast<std::size_t>(q), false);
    for (int x = 1; x < q; ++x) {
        const int r = static_cast<int>((static_cast<long long>(x) * x) % q);
        if (!seen[static_cast<std::size_t>(r)]) {
            seen[static_cast<std::size_t>(r)] = true;
            qr.push_back(r);
        }
    }
    std::sort(qr.begin(), qr.end());
    return qr;
}

/// Cyclic difference sets of size k mod q that this library knows how to
/// build, in preference order (quadratic residues first, then Singer sets,
/// then complements and the trivial k = 1 / k = q-1 designs).
inline std::vector<std::vector<std::uint8_t>> known_difference_sets(int q, int k)
{
    std::vector<std::vector<std::uint8_t>> base;
    if (detail::is_prime(q) && q % 4 == 3)
        base.push_back(detail::indicator(quadratic_residues(q), q));
    for (const auto& [v, set] : detail::singer_table())
        if (v == q)
            base.push_back(detail::indicator(set, q));
    base.push_back(detail::indicator(std::vector<int>{0}, q));

    std::vector<std::vector<std::uint8_t>> out;
    auto consider = [&](std::vector<std::uint8_t> w) {
        const int weight = std::accumulate(w.begin(), w.end(), 0);
        if (weight != k || !difference_set_lambda(w))
            return;
        if (std::find(out.begin(), out.end(), w) == out.end())
            out.push_back(std::move(w));
    };
    for (const auto& w : base)
        consider(w);
    for (const auto& w : base) {
        auto c = w;
        for (auto& b : c)
            b = static_cast<std::uint8_t>(1 - b);
        consider(std::move(c));
    }
    return out;
}

/// Chooses the EPPM seed word: a known difference set when one matches
/// (q, k); otherwise exhaustive search over words containing slot 0 for
/// q <= 20, and seeded hill climbing above. The objective is the largest
/// overlap with a nonzero cyclic shift (then its multiplicity), minimized.
inline EppmSeed choose_eppm_seed(int q, int k, std::uint64_t search_seed = 0)
{
    require(q >= 2 && k >= 1 && k < q, ErrorKind::invalid_parameter,
            "EPPM needs 1 <= K < Q (got Q=" + std::to_string(q) + ", K=" + std::to_string(k) + ")");

    EppmSeed out;
    auto finish = [&](std::vector<std::uint8_t> w, SeedMethod m) {
        const auto s = detail::score(w);
        out.word = std::move(w);
        out.method = m;
        out.max_overlap = s.max_overlap;
        out.min_distance = 2 * (k - s.max_overlap);
        out.lambda = difference_set_lambda(out.word);
        return out;
    };

    if (auto ds = known_difference_sets(q, k); !ds.empty())
        return finish(std::move(ds.front()), SeedMethod::difference_set);

    if (q <= 20) {
        // Choose k-1 further positions from 1..q-1 in lexicographic order.
        std::vector<int> pos(static_cast<std::size_t>(k - 1));
        std::iota(pos.begin(), pos.end(), 1);
        std::vector<std::uint8_t> best;
        detail::SeedScore best_score{q + 1, 0};
        std::vector<std::uint8_t> w(static_cast<std::size_t>(q));
        while (true) {
            std::fill(w.begin(), w.end(), 0);
            w[0] = 1;
            for (int p : pos)
                w[static_cast<std::size_t>(p)] = 1;
            const auto s = detail::score(w);
            if (s < best_score) {
                best_score = s;
                best = w;
            }
            // next combination
            int i = k - 2;
            while (i >= 0 && pos[static_cast<std::size_t>(i)] == q - (k - 1) + i)
                --i;
            if (i < 0)
                break;
            ++pos[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < k - 1; ++j)
                pos[static_cast<std::size_t>(j)] = pos[static_cast<std::size_t>(j - 1)] + 1;
        }
        return finish(std::move(best), SeedMethod::exhaustive);
    }

    std::mt19937_64 rng(search_seed);
    std::vector<std::uint8_t> best;
    detail::SeedScore best_score{q + 1, 0};
    constexpr int restarts = 8;
    const int iterations = 200 * q;
    for (int r = 0; r < restarts; ++r) {
        std::vector<std::uint8_t> w(static_cast<std::size_t>(q), 0);
        std::fill(w.begin(), w.begin() + k, 1);
        std::shuffle(w.begin(), w.end(), rng);
        auto cur = detail::score(w);
        for (int it = 0; it < iterations; ++it) {
            std::uniform_int_distribution<int> pick(0, q - 1);
            int a = pick(rng), b = pick(rng);
            if (w[static_cast<std::size_t>(a)] == w[static_cast<std::size_t>(b)])
                continue;
            std::swap(w[static_cast<std::size_t>(a)], w[static_cast<std::size_t>(b)]);
            const auto s = detail::score(w);
            if (s < cur || (!(cur < s)))
                cur = s;
            else
                std::swap(w[static_cast<std::size_t>(a)], w[static_cast<std::size_t>(b)]);
        }
        if (cur < best_score) {
            best_score = cur;
            best = w;
        }
    }
    return finish(std::move(best), SeedMethod::hill_climb);
}

} // namespace vlc

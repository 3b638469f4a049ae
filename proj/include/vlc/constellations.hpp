// SPDX-License-Identifier: Apache-2.0
#pragma once

// Pulse-position constellations: PPM, multipulse PPM, expurgated PPM and
// multilevel EPPM, with their bit mappings and distance/PAPR statistics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vlc/difference_sets.hpp"
#include "vlc/error.hpp"

namespace vlc {

enum class Scheme { ppm, mppm, eppm, meppm };

constexpr std::string_view to_string(Scheme s)
{
    switch (s) {
    case Scheme::ppm: return "ppm";
    case Scheme::mppm: return "mppm";
    case Scheme::eppm: return "eppm";
    case Scheme::meppm: return "meppm";
    }
    return "unknown";
}

inline std::optional<Scheme> scheme_from_string(std::string_view s)
{
    if (s == "ppm") return Scheme::ppm;
    if (s == "mppm") return Scheme::mppm;
    if (s == "eppm") return Scheme::eppm;
    if (s == "meppm") return Scheme::meppm;
    return std::nullopt;
}

/// One symbol: the amplitude (number of unit pulses) in each of Q slots.
struct Codeword {
    std::vector<std::uint8_t> slots;

    std::size_t size() const noexcept { return slots.size(); }
    int weight() const { return std::accumulate(slots.begin(), slots.end(), 0); }
    int peak() const { return slots.empty() ? 0 : *std::max_element(slots.begin(), slots.end()); }
    bool binary() const
    {
        return std::all_of(slots.begin(), slots.end(), [](std::uint8_t v) { return v <= 1; });
    }
    friend bool operator==(const Codeword&, const Codeword&) = default;
};

inline Codeword complement(const Codeword& c)
{
    Codeword out = c;
    for (auto& v : out.slots)
        v = static_cast<std::uint8_t>(1 - v);
    return out;
}

inline int l1_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b)
{
    int d = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d += std::abs(int(a[i]) - int(b[i]));
    return d;
}

namespace detail {

using u128 = unsigned __int128;

// Constellations (and any count fed to the bit mapping) stay below this.
inline constexpr std::uint64_t size_cap = std::uint64_t{1} << 62;
inline constexpr u128 saturated = u128{1} << 120;

inline u128 sat_add(u128 a, u128 b) { return (a >= saturated || b >= saturated || a + b >= saturated) ? saturated : a + b; }

inline u128 binom(int n, int k)
{
    if (k < 0 || n < 0 || k > n)
        return 0;
    k = std::min(k, n - k);
    u128 c = 1;
    for (int i = 0; i < k; ++i) {
        if (c >= saturated / static_cast<u128>(n))
            return saturated;
        c = c * static_cast<u128>(n - i) / static_cast<u128>(i + 1);
    }
    return c;
}

inline std::uint64_t to_u64_checked(u128 v, const char* what)
{
    require(v <= size_cap, ErrorKind::capacity_exceeded, std::string(what) + ": constellation too large");
    return static_cast<std::uint64_t>(v);
}

inline std::string key_of(std::span<const std::uint8_t> s) { return std::string(s.begin(), s.end()); }

class Codebook {
public:
    virtual ~Codebook() = default;
    virtual std::uint64_t size() const = 0;
    virtual void symbol(std::uint64_t index, std::span<std::uint8_t> out) const = 0;
    virtual std::optional<std::uint64_t> index_of(std::span<const std::uint8_t> slots) const = 0;
    /// Canonical multiset (counts over the component alphabet); MEPPM only.
    virtual std::vector<int> counts(std::uint64_t) const { fail(ErrorKind::invalid_state, "not a multilevel constellation"); }
    virtual bool structured() const { return false; }
};

class PpmBook final : public Codebook {
public:
    explicit PpmBook(int q) : q_(q) {}
    std::uint64_t size() const override { return static_cast<std::uint64_t>(q_); }
    void symbol(std::uint64_t i, std::span<std::uint8_t> out) const override
    {
        std::fill(out.begin(), out.end(), 0);
        out[i] = 1;
    }
    std::optional<std::uint64_t> index_of(std::span<const std::uint8_t> s) const override
    {
        std::optional<std::uint64_t> pos;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (s[j] > 1 || (s[j] == 1 && pos))
                return std::nullopt;
            if (s[j] == 1)
                pos = j;
        }
        return pos;
    }

private:
    int q_;
};

// Weight-K words indexed by the colex rank of their pulse positions.
class MppmBook final : public Codebook {
public:
    MppmBook(int q, int k) : q_(q), k_(k), size_(to_u64_checked(binom(q, k), "MPPM")) {}
    std::uint64_t size() const override { return size_; }
    void symbol(std::uint64_t r, std::span<std::uint8_t> out) const override
    {
        std::fill(out.begin(), out.end(), 0);
        int p = q_ - 1;
        for (int i = k_; i >= 1; --i) {
            while (binom(p, i) > r)
                --p;
            out[static_cast<std::size_t>(p)] = 1;
            r -= static_cast<std::uint64_t>(binom(p, i));
            --p;
        }
    }
    std::optional<std::uint64_t> index_of(std::span<const std::uint8_t> s) const override
    {
        u128 r = 0;
        int i = 0;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (s[j] > 1)
                return std::nullopt;
            if (s[j] == 1)
                r += binom(static_cast<int>(j), ++i);
        }
        if (i != k_)
            return std::nullopt;
        return static_cast<std::uint64_t>(r);
    }

private:
    int q_, k_;
    std::uint64_t size_;
};

// Symbol i is the seed cyclically delayed by i slots.
class EppmBook final : public Codebook {
public:
    explicit EppmBook(std::vector<std::uint8_t> seed) : seed_(std::move(seed)) {}
    std::uint64_t size() const override { return seed_.size(); }
    void symbol(std::uint64_t i, std::span<std::uint8_t> out) const override
    {
        const std::size_t q = seed_.size();
        for (std::size_t j = 0; j < q; ++j)
            out[j] = seed_[(j + q - i) % q];
    }
    std::optional<std::uint64_t> index_of(std::span<const std::uint8_t> s) const override
    {
        const std::size_t q = seed_.size();
        for (std::size_t i = 0; i < q; ++i) {
            bool match = true;
            for (std::size_t j = 0; j < q && match; ++j)
                match = s[j] == seed_[(j + q - i) % q];
            if (match)
                return i;
        }
        return std::nullopt;
    }

private:
    std::vector<std::uint8_t> seed_;
};

class ExplicitBook final : public Codebook {
public:
    ExplicitBook(std::size_t q, std::size_t alphabet) : q_(q), alphabet_(alphabet) {}

    bool add(std::span<const std::uint8_t> sum, std::span<const int> counts)
    {
        auto [it, inserted] = lookup_.emplace(key_of(sum), size_);
        if (!inserted)
            return false;
        flat_.insert(flat_.end(), sum.begin(), sum.end());
        counts_.insert(counts_.end(), counts.begin(), counts.end());
        ++size_;
        return true;
    }

    std::uint64_t size() const override { return size_; }
    void symbol(std::uint64_t i, std::span<std::uint8_t> out) const override
    {
        std::copy_n(flat_.begin() + static_cast<std::ptrdiff_t>(i * q_), q_, out.begin());
    }
    std::optional<std::uint64_t> index_of(std::span<const std::uint8_t> s) const override
    {
        auto it = lookup_.find(key_of(s));
        if (it == lookup_.end())
            return std::nullopt;
        return it->second;
    }
    std::vector<int> counts(std::uint64_t i) const override
    {
        auto first = counts_.begin() + static_cast<std::ptrdiff_t>(i * alphabet_);
        return {first, first + static_cast<std::ptrdiff_t>(alphabet_)};
    }

private:
    std::size_t q_, alphabet_;
    std::uint64_t size_ = 0;
    std::vector<std::uint8_t> flat_;
    std::vector<int> counts_;
    std::unordered_map<std::string, std::uint64_t> lookup_;
};

/// Ranks canonical MEPPM multisets. Items 0..Q-1 are the EPPM codewords and
/// Q..2Q-1 their complements. Multisets are ordered as sorted index tuples
/// (equivalently: larger count at the first differing item comes first).
/// When the codeword matrix is invertible and Q != 2K, a multiset is the
/// lexicographically smallest preimage of its sum iff no item i >= 1 is used
/// together with its own complement.
class MeppmRanker {
public:
    MeppmRanker(int q, int n, bool complements) : q_(q), n_(n), comps_(complements)
    {
        comp_.assign(static_cast<std::size_t>((q_ + 1) * (n_ + 1)), 0);
        for (int a = 0; a <= q_; ++a)
            for (int r = 0; r <= n_; ++r)
                comp_[idx2(a, r)] = a == 0 ? (r == 0 ? 1 : 0) : binom(r + a - 1, a - 1);
        f_.assign(static_cast<std::size_t>((q_ + 1) * (n_ + 1) * q_), 0);
        for (int r = 0; r <= n_; ++r)
            for (int u = 0; u < q_; ++u)
                f_[idx3(q_, r, u)] = comps_ ? comp(q_ - u, r) : (r == 0 ? 1 : 0);
        for (int t = q_ - 1; t >= 0; --t)
            for (int r = 0; r <= n_; ++r)
                for (int u = 0; u < std::max(t, 1); ++u) {
                    u128 acc = 0;
                    for (int c = 0; c <= r; ++c)
                        acc = sat_add(acc, f(t + 1, r - c, u + ((t >= 1 && c > 0) ? 1 : 0)));
                    f_[idx3(t, r, u)] = acc;
                }
    }

    u128 size() const { return f(0, n_, 0); }

    std::uint64_t rank(std::span<const int> counts) const
    {
        u128 idx = 0;
        int r = n_, u = 0;
        for (int t = 0; t < q_; ++t) {
            const int a = counts[static_cast<std::size_t>(t)];
            for (int c = r; c > a; --c)
                idx += f(t + 1, r - c, u + ((t >= 1 && c > 0) ? 1 : 0));
            r -= a;
            if (t >= 1 && a > 0)
                ++u;
        }
        if (comps_) {
            const auto avail = availability(counts);
            for (int p = 0; p < q_; ++p) {
                if (!available(counts, p))
                    continue;
                const int a = counts[static_cast<std::size_t>(q_ + p)];
                for (int c = r; c > a; --c)
                    idx += comp(avail[static_cast<std::size_t>(p + 1)], r - c);
                r -= a;
            }
        }
        return static_cast<std::uint64_t>(idx);
    }

    std::vector<int> unrank(std::uint64_t index) const
    {
        u128 idx = index;
        std::vector<int> counts(static_cast<std::size_t>(comps_ ? 2 * q_ : q_), 0);
        int r = n_, u = 0;
        for (int t = 0; t < q_; ++t) {
            for (int c = r; c >= 0; --c) {
                const u128 cnt = f(t + 1, r - c, u + ((t >= 1 && c > 0) ? 1 : 0));
                if (idx < cnt) {
                    counts[static_cast<std::size_t>(t)] = c;
                    break;
                }
                idx -= cnt;
            }
            const int a = counts[static_cast<std::size_t>(t)];
            r -= a;
            if (t >= 1 && a > 0)
                ++u;
        }
        if (comps_) {
            const auto avail = availability(counts);
            for (int p = 0; p < q_; ++p) {
                if (!available(counts, p))
                    continue;
                for (int c = r; c >= 0; --c) {
                    const u128 cnt = comp(avail[static_cast<std::size_t>(p + 1)], r - c);
                    if (idx < cnt) {
                        counts[static_cast<std::size_t>(q_ + p)] = c;
                        break;
                    }
                    idx -= cnt;
                }
                r -= counts[static_cast<std::size_t>(q_ + p)];
            }
        }
        return counts;
    }

    /// Folds every codeword/complement pair of item i >= 1 onto item 0.
    std::vector<int> canonicalize(std::vector<int> counts) const
    {
        if (!comps_)
            return counts;
        for (int i = 1; i < q_; ++i) {
            const int s = std::min(counts[static_cast<std::size_t>(i)], counts[static_cast<std::size_t>(q_ + i)]);
            counts[static_cast<std::size_t>(i)] -= s;
            counts[static_cast<std::size_t>(q_ + i)] -= s;
            counts[0] += s;
            counts[static_cast<std::size_t>(q_)] += s;
        }
        return counts;
    }

private:
    std::size_t idx2(int a, int r) const { return static_cast<std::size_t>(a * (n_ + 1) + r); }
    std::size_t idx3(int t, int r, int u) const { return static_cast<std::size_t>((t * (n_ + 1) + r) * q_ + u); }
    u128 comp(int a, int r) const { return comp_[idx2(a, r)]; }
    u128 f(int t, int r, int u) const { return f_[idx3(t, r, u)]; }

    bool available(std::span<const int> counts, int p) const { return p == 0 || counts[static_cast<std::size_t>(p)] == 0; }

    // avail[p] = number of available complement items in [p, Q).
    std::vector<int> availability(std::span<const int> counts) const
    {
        std::vector<int> avail(static_cast<std::size_t>(q_ + 1), 0);
        for (int p = q_ - 1; p >= 0; --p)
            avail[static_cast<std::size_t>(p)] = avail[static_cast<std::size_t>(p + 1)] + (available(counts, p) ? 1 : 0);
        return avail;
    }

    int q_, n_;
    bool comps_;
    std::vector<u128> comp_;
    std::vector<u128> f_;
};

// Square solve with partial pivoting; used to invert the circulant codeword
// matrix when mapping an MEPPM sum back to its multiset.
class DenseLu {
public:
    explicit DenseLu(std::vector<double> a, std::size_t n) : n_(n), lu_(std::move(a)), piv_(n)
    {
        std::iota(piv_.begin(), piv_.end(), 0);
        for (std::size_t k = 0; k < n_; ++k) {
            std::size_t p = k;
            for (std::size_t i = k + 1; i < n_; ++i)
                if (std::abs(at(i, k)) > std::abs(at(p, k)))
                    p = i;
            if (p != k) {
                for (std::size_t j = 0; j < n_; ++j)
                    std::swap(at(p, j), at(k, j));
                std::swap(piv_[p], piv_[k]);
            }
            for (std::size_t i = k + 1; i < n_; ++i) {
                at(i, k) /= at(k, k);
                for (std::size_t j = k + 1; j < n_; ++j)
                    at(i, j) -= at(i, k) * at(k, j);
            }
        }
    }

    std::vector<double> solve(std::span<const double> b) const
    {
        std::vector<double> x(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            double s = b[piv_[i]];
            for (std::size_t j = 0; j < i; ++j)
                s -= at(i, j) * x[j];
            x[i] = s;
        }
        for (std::size_t i = n_; i-- > 0;) {
            double s = x[i];
            for (std::size_t j = i + 1; j < n_; ++j)
                s -= at(i, j) * x[j];
            x[i] = s / at(i, i);
        }
        return x;
    }

private:
    double& at(std::size_t i, std::size_t j) { return lu_[i * n_ + j]; }
    double at(std::size_t i, std::size_t j) const { return lu_[i * n_ + j]; }
    std::size_t n_;
    std::vector<double> lu_;
    std::vector<std::size_t> piv_;
};

// Full rank modulo a prime implies full rank over the rationals.
inline bool circulant_invertible(std::span<const std::uint8_t> seed)
{
    constexpr std::int64_t p = 2147483647;
    const std::size_t q = seed.size();
    std::vector<std::int64_t> m(q * q);
    for (std::size_t j = 0; j < q; ++j)
        for (std::size_t i = 0; i < q; ++i)
            m[j * q + i] = seed[(j + q - i) % q];
    auto inv = [&](std::int64_t a) {
        std::int64_t r = 1, e = p - 2;
        a %= p;
        while (e) {
            if (e & 1) r = r * a % p;
            a = a * a % p;
            e >>= 1;
        }
        return r;
    };
    for (std::size_t k = 0; k < q; ++k) {
        std::size_t piv = k;
        while (piv < q && m[piv * q + k] == 0)
            ++piv;
        if (piv == q)
            return false;
        for (std::size_t j = 0; j < q; ++j)
            std::swap(m[piv * q + j], m[k * q + j]);
        const std::int64_t iv = inv(m[k * q + k]);
        for (std::size_t i = k + 1; i < q; ++i) {
            const std::int64_t fct = m[i * q + k] * iv % p;
            if (fct == 0)
                continue;
            for (std::size_t j = k; j < q; ++j)
                m[i * q + j] = ((m[i * q + j] - fct * m[k * q + j]) % p + p) % p;
        }
    }
    return true;
}

class StructuredMeppmBook final : public Codebook {
public:
    StructuredMeppmBook(std::vector<std::uint8_t> seed, int k, int n, bool complements)
        : seed_(std::move(seed)), q_(static_cast<int>(seed_.size())), k_(k), n_(n), comps_(complements),
          ranker_(q_, n_, comps_), size_(to_u64_checked(ranker_.size(), "MEPPM")), lu_(matrix(), seed_.size())
    {
    }

    std::uint64_t size() const override { return size_; }
    bool structured() const override { return true; }

    void symbol(std::uint64_t i, std::span<std::uint8_t> out) const override { sum_into(ranker_.unrank(i), out); }

    std::vector<int> counts(std::uint64_t i) const override { return ranker_.unrank(i); }

    std::optional<std::uint64_t> index_of(std::span<const std::uint8_t> s) const override
    {
        auto c = counts_of(s);
        if (!c)
            return std::nullopt;
        return ranker_.rank(*c);
    }

    std::optional<std::vector<int>> counts_of(std::span<const std::uint8_t> s) const
    {
        if (s.size() != seed_.size())
            return std::nullopt;
        const int w = std::accumulate(s.begin(), s.end(), 0);
        int b = 0;
        if (comps_) {
            const int num = w - k_ * n_, den = q_ - 2 * k_;
            if (num % den != 0)
                return std::nullopt;
            b = num / den;
            if (b < 0 || b > n_)
                return std::nullopt;
        } else if (w != k_ * n_) {
            return std::nullopt;
        }
        std::vector<double> rhs(s.size());
        for (std::size_t j = 0; j < s.size(); ++j)
            rhs[j] = double(s[j]) - b;
        const auto x = lu_.solve(rhs);
        std::vector<int> d(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            d[i] = static_cast<int>(std::lround(x[i]));
        const std::size_t q = seed_.size();
        for (std::size_t j = 0; j < q; ++j) {
            int acc = 0;
            for (std::size_t i = 0; i < q; ++i)
                acc += d[i] * seed_[(j + q - i) % q];
            if (acc != int(s[j]) - b)
                return std::nullopt;
        }
        int pos = 0, neg = 0;
        for (int v : d) {
            pos += std::max(v, 0);
            neg += std::max(-v, 0);
        }
        const int rest = n_ - b - pos;
        if (rest < 0 || neg + rest != b || (!comps_ && neg > 0))
            return std::nullopt;
        std::vector<int> counts(static_cast<std::size_t>(comps_ ? 2 * q_ : q_), 0);
        for (int i = 0; i < q_; ++i) {
            counts[static_cast<std::size_t>(i)] = std::max(d[static_cast<std::size_t>(i)], 0);
            if (comps_)
                counts[static_cast<std::size_t>(q_ + i)] = std::max(-d[static_cast<std::size_t>(i)], 0);
        }
        counts[0] += rest;
        if (comps_)
            counts[static_cast<std::size_t>(q_)] += rest;
        return counts;
    }

    const MeppmRanker& ranker() const { return ranker_; }

private:
    std::vector<double> matrix() const
    {
        const std::size_t q = seed_.size();
        std::vector<double> a(q * q);
        for (std::size_t j = 0; j < q; ++j)
            for (std::size_t i = 0; i < q; ++i)
                a[j * q + i] = seed_[(j + q - i) % q];
        return a;
    }

    void sum_into(std::span<const int> counts, std::span<std::uint8_t> out) const
    {
        const std::size_t q = seed_.size();
        std::fill(out.begin(), out.end(), 0);
        for (std::size_t i = 0; i < q; ++i) {
            const int cw = counts[i];
            const int cc = comps_ ? counts[q + i] : 0;
            if (cw == 0 && cc == 0)
                continue;
            for (std::size_t j = 0; j < q; ++j) {
                const int bit = seed_[(j + q - i) % q];
                out[j] = static_cast<std::uint8_t>(out[j] + cw * bit + cc * (1 - bit));
            }
        }
    }

    std::vector<std::uint8_t> seed_;
    int q_, k_, n_;
    bool comps_;
    MeppmRanker ranker_;
    std::uint64_t size_;
    DenseLu lu_;
};

inline int floor_log2(std::uint64_t v)
{
    int b = -1;
    while (v) {
        v >>= 1;
        ++b;
    }
    return b;
}

} // namespace detail

/// How MEPPM symbols are indexed. `automatic` uses the closed-form ranking
/// whenever its preconditions hold and falls back to enumeration otherwise;
/// `enumerate` always materializes the codebook.
enum class MeppmIndexing { automatic, enumerate };

/// An immutable constellation. Copies share the underlying codebook.
class Constellation {
public:
    Constellation() = default;

    Scheme scheme() const { return scheme_; }
    int Q() const { return q_; }
    /// Pulses per binary codeword; 0 for PPM (one pulse).
    int K() const { return scheme_ == Scheme::ppm ? 0 : k_; }
    int pulses() const { return k_; }
    int N() const { return n_; }
    bool use_complements() const { return use_complements_; }
    const std::vector<std::uint8_t>& seed_word() const { return seed_.word; }
    const EppmSeed& seed() const { return seed_; }
    std::uint64_t size() const { return book_ ? book_->size() : 0; }
    int bits_per_symbol() const { return bits_; }
    bool empty() const { return !book_; }
    /// True when MEPPM indexing is closed-form rather than a stored table.
    bool structured() const { return book_ && book_->structured(); }

    Codeword symbol(std::uint64_t index) const
    {
        check_ready();
        require(index < size(), ErrorKind::invalid_input, "symbol index out of range");
        Codeword c;
        c.slots.assign(static_cast<std::size_t>(q_), 0);
        book_->symbol(index, c.slots);
        return c;
    }

    void symbol_into(std::uint64_t index, std::span<std::uint8_t> out) const { book_->symbol(index, out); }

    std::optional<std::uint64_t> index_of(std::span<const std::uint8_t> slots) const
    {
        check_ready();
        if (slots.size() != static_cast<std::size_t>(q_))
            return std::nullopt;
        return book_->index_of(slots);
    }
    std::optional<std::uint64_t> index_of(const Codeword& c) const { return index_of(std::span<const std::uint8_t>(c.slots)); }

    /// All symbols in index order (bounded to desk-scale sizes).
    std::vector<Codeword> symbols() const
    {
        check_ready();
        require(size() <= (std::uint64_t{1} << 20), ErrorKind::capacity_exceeded,
                "constellation too large to list; use symbol(index)");
        std::vector<Codeword> out;
        out.reserve(static_cast<std::size_t>(size()));
        for (std::uint64_t i = 0; i < size(); ++i)
            out.push_back(symbol(i));
        return out;
    }

    /// Component alphabet for multilevel EPPM: the Q EPPM codewords followed
    /// by their complements when enabled. For EPPM, just the Q codewords.
    const std::vector<Codeword>& components() const { return components_; }

    /// Canonical component multiset of a MEPPM symbol.
    std::vector<int> canonical_counts(std::uint64_t index) const
    {
        check_ready();
        return book_->counts(index);
    }

    /// Slot-wise sum of a component multiset.
    Codeword sum_of(std::span<const int> counts) const
    {
        Codeword out;
        out.slots.assign(static_cast<std::size_t>(q_), 0);
        for (std::size_t i = 0; i < counts.size(); ++i)
            for (std::size_t j = 0; j < out.slots.size(); ++j)
                out.slots[j] = static_cast<std::uint8_t>(out.slots[j] + counts[i] * components_[i].slots[j]);
        return out;
    }

    /// Every symbol carries the same number of unit pulses.
    bool constant_weight() const { return scheme_ != Scheme::meppm || !use_complements_; }

    /// Every symbol has the same squared norm (binary constant-weight codes).
    bool equal_energy() const { return scheme_ != Scheme::meppm; }

private:
    void check_ready() const { require(book_ != nullptr, ErrorKind::invalid_state, "empty constellation"); }

    friend Constellation build_ppm(int);
    friend Constellation build_mppm(int, int);
    friend Constellation build_eppm_from_seed(std::vector<std::uint8_t>);
    friend Constellation build_eppm(int, int, std::uint64_t);
    friend Constellation build_meppm_from(const Constellation&, int, bool, MeppmIndexing);

    void finalize()
    {
        require(size() >= 2, ErrorKind::invalid_parameter, "constellation has fewer than 2 symbols");
        bits_ = detail::floor_log2(size());
    }

    Scheme scheme_ = Scheme::ppm;
    int q_ = 0, k_ = 0, n_ = 1;
    bool use_complements_ = false;
    EppmSeed seed_;
    std::vector<Codeword> components_;
    std::shared_ptr<const detail::Codebook> book_;
    int bits_ = 0;
};

inline Constellation build_ppm(int q)
{
    require(q >= 2, ErrorKind::invalid_parameter, "PPM needs Q >= 2");
    Constellation c;
    c.scheme_ = Scheme::ppm;
    c.q_ = q;
    c.k_ = 1;
    c.book_ = std::make_shared<detail::PpmBook>(q);
    c.finalize();
    return c;
}

inline Constellation build_mppm(int q, int k)
{
    require(q >= 2 && k >= 1 && k < q, ErrorKind::invalid_parameter,
            "MPPM needs 1 <= K < Q (got Q=" + std::to_string(q) + ", K=" + std::to_string(k) + ")");
    Constellation c;
    c.scheme_ = Scheme::mppm;
    c.q_ = q;
    c.k_ = k;
    c.book_ = std::make_shared<detail::MppmBook>(q, k);
    c.finalize();
    return c;
}

/// EPPM from an explicit seed word (used when importing a constellation).
inline Constellation build_eppm_from_seed(std::vector<std::uint8_t> word)
{
    const int q = static_cast<int>(word.size());
    const int k = std::accumulate(word.begin(), word.end(), 0);
    require(q >= 2 && k >= 1 && k < q, ErrorKind::invalid_parameter, "EPPM seed must have 1 <= weight < Q");
    require(std::all_of(word.begin(), word.end(), [](auto v) { return v <= 1; }), ErrorKind::invalid_parameter,
            "EPPM seed must be binary");
    const auto score = detail::score(word);
    require(score.max_overlap < k, ErrorKind::invalid_parameter, "EPPM seed is periodic; its shifts repeat");

    Constellation c;
    c.scheme_ = Scheme::eppm;
    c.q_ = q;
    c.k_ = k;
    c.seed_.word = word;
    c.seed_.max_overlap = score.max_overlap;
    c.seed_.min_distance = 2 * (k - score.max_overlap);
    c.seed_.lambda = difference_set_lambda(word);
    c.seed_.method = c.seed_.lambda ? SeedMethod::difference_set : SeedMethod::exhaustive;
    auto book = std::make_shared<detail::EppmBook>(word);
    for (int i = 0; i < q; ++i) {
        Codeword cw;
        cw.slots.resize(static_cast<std::size_t>(q));
        book->symbol(static_cast<std::uint64_t>(i), cw.slots);
        c.components_.push_back(std::move(cw));
    }
    c.book_ = std::move(book);
    c.finalize();
    return c;
}

inline Constellation build_eppm(int q, int k, std::uint64_t search_seed = 0)
{
    auto seed = choose_eppm_seed(q, k, search_seed);
    require(seed.max_overlap < k, ErrorKind::invalid_parameter, "no aperiodic EPPM seed found");
    const auto method = seed.method;
    Constellation c = build_eppm_from_seed(seed.word);
    c.seed_.method = method;
    return c;
}

/// Multilevel EPPM over the codewords of an existing EPPM constellation.
inline Constellation build_meppm_from(const Constellation& eppm, int n, bool use_complements,
                                      MeppmIndexing indexing = MeppmIndexing::automatic)
{
    require(eppm.scheme() == Scheme::eppm, ErrorKind::invalid_parameter, "MEPPM components must come from EPPM");
    require(n >= 1 && n <= 255, ErrorKind::invalid_parameter, "MEPPM needs 1 <= N <= 255");
    const int q = eppm.Q(), k = eppm.pulses();

    Constellation c;
    c.scheme_ = Scheme::meppm;
    c.q_ = q;
    c.k_ = k;
    c.n_ = n;
    c.use_complements_ = use_complements;
    c.seed_ = eppm.seed_;
    c.components_ = eppm.components_;
    if (use_complements)
        for (int i = 0; i < q; ++i)
            c.components_.push_back(complement(eppm.components_[static_cast<std::size_t>(i)]));

    const bool closed_form = indexing == MeppmIndexing::automatic && detail::circulant_invertible(c.seed_.word) &&
                             (!use_complements || q != 2 * k);
    if (closed_form) {
        c.book_ = std::make_shared<detail::StructuredMeppmBook>(c.seed_.word, k, n, use_complements);
        c.finalize();
        return c;
    }

    // Enumerate multisets in canonical order; the first multiset reaching a
    // given sum is its lexicographically smallest preimage.
    const int alphabet = static_cast<int>(c.components_.size());
    const auto multisets = detail::binom(alphabet + n - 1, n);
    require(multisets <= (detail::u128{1} << 24), ErrorKind::capacity_exceeded,
            "MEPPM too large to enumerate and closed-form indexing does not apply");
    auto book = std::make_shared<detail::ExplicitBook>(static_cast<std::size_t>(q), static_cast<std::size_t>(alphabet));
    std::vector<int> counts(static_cast<std::size_t>(alphabet), 0);
    std::vector<std::uint8_t> sum(static_cast<std::size_t>(q), 0);
    auto add_item = [&](int item, int times) {
        const auto& s = c.components_[static_cast<std::size_t>(item)].slots;
        for (std::size_t j = 0; j < sum.size(); ++j)
            sum[j] = static_cast<std::uint8_t>(sum[j] + times * s[j]);
    };
    auto recurse = [&](auto&& self, int item, int remaining) -> void {
        if (item == alphabet - 1) {
            counts[static_cast<std::size_t>(item)] = remaining;
            add_item(item, remaining);
            book->add(sum, counts);
            add_item(item, -remaining);
            counts[static_cast<std::size_t>(item)] = 0;
            return;
        }
        for (int cnt = remaining; cnt >= 0; --cnt) {
            counts[static_cast<std::size_t>(item)] = cnt;
            add_item(item, cnt);
            self(self, item + 1, remaining - cnt);
            add_item(item, -cnt);
        }
        counts[static_cast<std::size_t>(item)] = 0;
    };
    recurse(recurse, 0, n);

    c.book_ = std::move(book);
    c.finalize();
    return c;
}

inline Constellation build_meppm(int q, int k, int n, bool use_complements, std::uint64_t search_seed = 0,
                                 MeppmIndexing indexing = MeppmIndexing::automatic)
{
    require(n >= 1 && n <= 255, ErrorKind::invalid_parameter, "MEPPM needs 1 <= N <= 255");
    return build_meppm_from(build_eppm(q, k, search_seed), n, use_complements, indexing);
}

// ---------------------------------------------------------------------------
// Statistics

struct CodeStats {
    double papr = 0.0;
    std::uint64_t min_distance = 0;
    std::uint64_t size = 0;
    /// Grand mean slot amplitude over the constellation.
    double mean_amplitude = 0.0;
    int peak = 0;
    /// False when the constellation is too large for an exhaustive pair scan;
    /// min_distance is then the smallest single-component swap distance,
    /// an upper bound on the true minimum.
    bool min_distance_exact = true;
};

namespace detail {
inline constexpr std::uint64_t stats_enumeration_cap = std::uint64_t{1} << 20;
inline constexpr std::uint64_t pairwise_cap = std::uint64_t{1} << 14;
} // namespace detail

inline CodeStats code_stats(const Constellation& c)
{
    require(!c.empty(), ErrorKind::invalid_state, "empty constellation");
    CodeStats st;
    st.size = c.size();
    const int q = c.Q();

    if (c.size() <= detail::stats_enumeration_cap) {
        std::vector<std::uint8_t> buf(static_cast<std::size_t>(q));
        int peak = 0;
        long double total = 0;
        for (std::uint64_t i = 0; i < c.size(); ++i) {
            c.symbol_into(i, buf);
            for (auto v : buf) {
                peak = std::max(peak, int(v));
                total += v;
            }
        }
        const long double mean = total / (static_cast<long double>(c.size()) * q);
        st.papr = static_cast<double>(peak / mean);
        st.mean_amplitude = static_cast<double>(mean);
        st.peak = peak;
    } else if (c.scheme() == Scheme::ppm) {
        st.papr = q;
        st.mean_amplitude = 1.0 / q;
        st.peak = 1;
    } else if (c.scheme() == Scheme::mppm) {
        st.papr = double(q) / c.pulses();
        st.mean_amplitude = double(c.pulses()) / q;
        st.peak = 1;
    } else {
        // Closed-form MEPPM: peak N, and the number of canonical symbols with
        // exactly b complement components is
        //   sum_u C(Q-1, u) C(N-b, u) C(b+Q-u-1, Q-u-1).
        const int n = c.N(), k = c.pulses();
        long double weighted = 0, count = 0;
        for (int b = 0; b <= (c.use_complements() ? n : 0); ++b) {
            long double nb = 0;
            for (int u = 0; u < q; ++u) {
                const long double comp = c.use_complements() ? static_cast<long double>(detail::binom(b + q - u - 1, q - u - 1))
                                                             : (b == 0 ? 1.0L : 0.0L);
                nb += static_cast<long double>(detail::binom(q - 1, u)) * static_cast<long double>(detail::binom(n - b, u)) * comp;
            }
            count += nb;
            weighted += nb * (static_cast<long double>(k) * n + static_cast<long double>(q - 2 * k) * b);
        }
        const long double mean_slot = weighted / count / q;
        st.papr = static_cast<double>(n / mean_slot);
        st.mean_amplitude = static_cast<double>(mean_slot);
        st.peak = n;
    }

    if (c.size() <= detail::pairwise_cap) {
        const auto syms = c.symbols();
        int best = std::numeric_limits<int>::max();
        for (std::size_t i = 0; i < syms.size(); ++i)
            for (std::size_t j = i + 1; j < syms.size(); ++j)
                best = std::min(best, l1_distance(syms[i].slots, syms[j].slots));
        st.min_distance = static_cast<std::uint64_t>(best);
    } else if (c.scheme() == Scheme::ppm || c.scheme() == Scheme::mppm) {
        st.min_distance = 2;
    } else {
        const auto& comps = c.components();
        int best = std::numeric_limits<int>::max();
        for (std::size_t i = 0; i < comps.size(); ++i)
            for (std::size_t j = i + 1; j < comps.size(); ++j)
                best = std::min(best, l1_distance(comps[i].slots, comps[j].slots));
        st.min_distance = static_cast<std::uint64_t>(best);
        st.min_distance_exact = false;
    }
    return st;
}

/// Histogram of pairwise L1 distances (unordered pairs).
inline std::map<int, std::uint64_t> distance_spectrum(const Constellation& c)
{
    require(c.size() <= detail::pairwise_cap, ErrorKind::capacity_exceeded, "constellation too large for a distance spectrum");
    const auto syms = c.symbols();
    std::map<int, std::uint64_t> hist;
    for (std::size_t i = 0; i < syms.size(); ++i)
        for (std::size_t j = i + 1; j < syms.size(); ++j)
            ++hist[l1_distance(syms[i].slots, syms[j].slots)];
    return hist;
}

// ---------------------------------------------------------------------------
// Bit mapping

using Bits = std::vector<std::uint8_t>;

struct EncodedFrame {
    std::vector<std::uint64_t> indices;
    std::vector<Codeword> symbols;
    std::size_t pad_bits = 0;
    int bits_per_symbol = 0;
};

inline int resolve_payload_bits(const Constellation& c, int payload_bits)
{
    require(!c.empty(), ErrorKind::invalid_state, "empty constellation");
    if (payload_bits <= 0)
        return c.bits_per_symbol();
    require(payload_bits <= c.bits_per_symbol(), ErrorKind::invalid_parameter,
            "payload bits exceed constellation capacity of " + std::to_string(c.bits_per_symbol()));
    return payload_bits;
}

/// Maps bits (MSB first) onto symbol indices, zero-padding the tail to a
/// symbol boundary. payload_bits <= 0 uses the full bits_per_symbol.
inline EncodedFrame encode_bits(const Constellation& c, std::span<const std::uint8_t> bits, int payload_bits = 0)
{
    const int b = resolve_payload_bits(c, payload_bits);
    EncodedFrame f;
    f.bits_per_symbol = b;
    const std::size_t nsym = (bits.size() + static_cast<std::size_t>(b) - 1) / static_cast<std::size_t>(b);
    f.pad_bits = nsym * static_cast<std::size_t>(b) - bits.size();
    f.indices.reserve(nsym);
    f.symbols.reserve(nsym);
    for (std::size_t s = 0; s < nsym; ++s) {
        std::uint64_t idx = 0;
        for (int i = 0; i < b; ++i) {
            const std::size_t pos = s * static_cast<std::size_t>(b) + static_cast<std::size_t>(i);
            idx = (idx << 1) | (pos < bits.size() ? (bits[pos] & 1u) : 0u);
        }
        f.indices.push_back(idx);
        f.symbols.push_back(c.symbol(idx));
    }
    return f;
}

inline Bits decode_bits(const Constellation& c, std::span<const std::uint64_t> indices, std::size_t pad_bits = 0,
                        int payload_bits = 0)
{
    const int b = resolve_payload_bits(c, payload_bits);
    Bits out;
    out.reserve(indices.size() * static_cast<std::size_t>(b));
    for (auto idx : indices) {
        require(idx < (std::uint64_t{1} << b), ErrorKind::invalid_input, "symbol index outside the bit mapping");
        for (int i = b - 1; i >= 0; --i)
            out.push_back(static_cast<std::uint8_t>((idx >> i) & 1u));
    }
    require(pad_bits <= out.size(), ErrorKind::invalid_input, "pad longer than frame");
    out.resize(out.size() - pad_bits);
    return out;
}

/// Decodes codewords back to bits; every codeword must belong to c.
inline Bits decode_bits(const Constellation& c, std::span<const Codeword> symbols, std::size_t pad_bits = 0, int payload_bits = 0)
{
    std::vector<std::uint64_t> idx;
    idx.reserve(symbols.size());
    for (const auto& s : symbols) {
        auto i = c.index_of(s);
        require(i.has_value(), ErrorKind::invalid_input, "codeword is not a symbol of this constellation");
        idx.push_back(*i);
    }
    return decode_bits(c, idx, pad_bits, payload_bits);
}

} // namespace vlc

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vlc/constellations.hpp"
#include "vlc/error.hpp"
#include "vlc/waveform.hpp"

namespace vlc {

struct SlotStatistics {
    std::vector<double> values;
    int slots_per_symbol = 0;
};

/// Integral of each slot (sample sum times the sample period).
inline SlotStatistics slot_integrals(const Waveform& y)
{
    const int s = y.geometry.samples_per_slot;
    require(s > 0 && y.samples.size() % static_cast<std::size_t>(s) == 0, ErrorKind::invalid_input,
            "waveform length is not a whole number of slots");
    const double dt = 1.0 / y.sample_rate;
    SlotStatistics out;
    out.slots_per_symbol = y.slots_per_symbol;
    out.values.resize(y.samples.size() / static_cast<std::size_t>(s));
    for (std::size_t j = 0; j < out.values.size(); ++j) {
        double acc = 0;
        for (int i = 0; i < s; ++i)
            acc += y.samples[j * static_cast<std::size_t>(s) + static_cast<std::size_t>(i)];
        out.values[j] = acc * dt;
    }
    return out;
}

/// Slot integrals for F = 1; for F > 1 the correlation with the F-slot
/// rectangular pulse launched at each slot.
inline SlotStatistics slot_statistics(const Waveform& y, const SlotGeometry& g)
{
    require(y.geometry.samples_per_slot == g.samples_per_slot, ErrorKind::invalid_input, "waveform and geometry disagree on sampling");
    auto base = slot_integrals(y);
    if (g.overlap_factor == 1)
        return base;
    SlotStatistics out;
    out.slots_per_symbol = base.slots_per_symbol;
    out.values.assign(base.values.size(), 0.0);
    for (std::size_t j = 0; j < base.values.size(); ++j) {
        const std::size_t end = std::min(base.values.size(), j + static_cast<std::size_t>(g.overlap_factor));
        double acc = 0;
        for (std::size_t t = j; t < end; ++t)
            acc += base.values[t];
        out.values[j] = acc;
    }
    return out;
}

inline std::vector<double> deinterleave(std::span<const double> stream, const InterleaverSpec& spec, int q)
{
    return deinterleave_slots<double>(stream, spec, q);
}

// ---------------------------------------------------------------------------
// Expected statistics

/// Expected slot statistics of a symbol: s = M x, with M row-major Q x Q.
struct SlotModel {
    int q = 0;
    std::vector<double> m;

    static SlotModel identity(int q, double gain = 1.0)
    {
        SlotModel s{q, std::vector<double>(static_cast<std::size_t>(q * q), 0.0)};
        for (int i = 0; i < q; ++i)
            s.m[static_cast<std::size_t>(i * q + i)] = gain;
        return s;
    }

    /// M[j][i] = response[j - i + lead] where defined, zero elsewhere.
    static SlotModel from_response(std::span<const double> response, int lead, int q)
    {
        SlotModel s{q, std::vector<double>(static_cast<std::size_t>(q * q), 0.0)};
        for (int j = 0; j < q; ++j)
            for (int i = 0; i < q; ++i) {
                const int k = j - i + lead;
                if (k >= 0 && k < static_cast<int>(response.size()))
                    s.m[static_cast<std::size_t>(j * q + i)] = response[static_cast<std::size_t>(k)];
            }
        return s;
    }

    /// Noiseless pulse-correlation statistics for an F-slot pulse of area gain.
    static SlotModel overlap(int q, int f, double gain = 1.0)
    {
        std::vector<double> r(static_cast<std::size_t>(2 * f - 1));
        for (int k = -(f - 1); k <= f - 1; ++k)
            r[static_cast<std::size_t>(k + f - 1)] = gain * (f - std::abs(k));
        return from_response(r, f - 1, q);
    }

    double at(int j, int i) const { return m[static_cast<std::size_t>(j * q + i)]; }

    template <class X>
    void apply(std::span<const X> x, std::span<double> out) const
    {
        for (int j = 0; j < q; ++j) {
            double acc = 0;
            for (int i = 0; i < q; ++i)
                acc += at(j, i) * double(x[static_cast<std::size_t>(i)]);
            out[static_cast<std::size_t>(j)] = acc;
        }
    }
};

// ---------------------------------------------------------------------------
// Decoders

namespace detail {

inline std::vector<double> centered(std::span<const double> s)
{
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    std::vector<double> c(s.begin(), s.end());
    for (auto& v : c)
        v -= mean;
    return c;
}

inline double dot_u8(std::span<const double> s, std::span<const std::uint8_t> x)
{
    double acc = 0;
    for (std::size_t j = 0; j < s.size(); ++j)
        acc += s[j] * x[j];
    return acc;
}

inline constexpr std::uint64_t exhaustive_cap = std::uint64_t{1} << 20;

} // namespace detail

/// Argmax of the inner product between the slot statistics and the
/// mean-removed symbol vector, lowest index on ties.
inline std::uint64_t decode_correlation(std::span<const double> s, const Constellation& c)
{
    require(!c.empty(), ErrorKind::invalid_state, "empty constellation");
    const int q = c.Q();
    require(static_cast<int>(s.size()) == q, ErrorKind::invalid_input, "statistics length must equal Q");
    const auto sc = detail::centered(s);

    if (c.scheme() == Scheme::ppm) {
        return static_cast<std::uint64_t>(std::max_element(sc.begin(), sc.end()) - sc.begin());
    }
    if (c.scheme() == Scheme::eppm) {
        std::vector<int> support;
        for (int j = 0; j < q; ++j)
            if (c.seed_word()[static_cast<std::size_t>(j)])
                support.push_back(j);
        std::uint64_t best = 0;
        double best_v = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < q; ++i) {
            double v = 0;
            for (int p : support)
                v += sc[static_cast<std::size_t>((p + i) % q)];
            if (v > best_v) {
                best_v = v;
                best = static_cast<std::uint64_t>(i);
            }
        }
        return best;
    }
    if (c.size() <= detail::exhaustive_cap) {
        std::vector<std::uint8_t> buf(static_cast<std::size_t>(q));
        std::uint64_t best = 0;
        double best_v = -std::numeric_limits<double>::infinity();
        for (std::uint64_t i = 0; i < c.size(); ++i) {
            c.symbol_into(i, buf);
            const double v = detail::dot_u8(sc, buf);
            if (v > best_v) {
                best_v = v;
                best = i;
            }
        }
        return best;
    }
    // Linear objective over a large code: MPPM picks the K strongest slots,
    // MEPPM stacks N copies of the best component.
    Codeword x;
    x.slots.assign(static_cast<std::size_t>(q), 0);
    if (c.scheme() == Scheme::mppm) {
        std::vector<int> order(static_cast<std::size_t>(q));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sc[static_cast<std::size_t>(a)] > sc[static_cast<std::size_t>(b)]; });
        for (int t = 0; t < c.pulses(); ++t)
            x.slots[static_cast<std::size_t>(order[static_cast<std::size_t>(t)])] = 1;
    } else {
        const auto& comps = c.components();
        std::size_t best = 0;
        double best_v = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < comps.size(); ++i) {
            const double v = detail::dot_u8(sc, comps[i].slots);
            if (v > best_v) {
                best_v = v;
                best = i;
            }
        }
        std::vector<int> counts(comps.size(), 0);
        counts[best] = c.N();
        x = c.sum_of(counts);
    }
    return *c.index_of(x);
}

/// Minimum Euclidean distance to the expected statistics M x over indices
/// below `limit` (0 = all), lowest index on ties.
inline std::uint64_t decode_ml(std::span<const double> s, const Constellation& c, const SlotModel& model, std::uint64_t limit = 0)
{
    require(!c.empty(), ErrorKind::invalid_state, "empty constellation");
    require(c.size() <= detail::exhaustive_cap, ErrorKind::capacity_exceeded,
            "exhaustive ML is limited to 2^20 symbols (size " + std::to_string(c.size()) + ")");
    const int q = c.Q();
    require(static_cast<int>(s.size()) == q && model.q == q, ErrorKind::invalid_input, "statistics length must equal Q");
    const std::uint64_t n = limit ? std::min(limit, c.size()) : c.size();
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(q));
    std::vector<double> e(static_cast<std::size_t>(q));
    std::uint64_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::uint64_t i = 0; i < n; ++i) {
        c.symbol_into(i, buf);
        model.apply<std::uint8_t>(buf, e);
        double d = 0;
        for (int j = 0; j < q; ++j) {
            const double r = s[static_cast<std::size_t>(j)] - e[static_cast<std::size_t>(j)];
            d += r * r;
        }
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

inline std::uint64_t decode_ml(std::span<const double> s, const Constellation& c)
{
    return decode_ml(s, c, SlotModel::identity(c.Q()));
}

namespace detail {

struct ComponentSearch {
    const Constellation& c;
    const SlotModel& model;
    std::span<const double> s;
    std::vector<std::vector<double>> t;  // M applied to each component
    std::vector<double> tt;

    ComponentSearch(const Constellation& c_, const SlotModel& m, std::span<const double> s_) : c(c_), model(m), s(s_)
    {
        const auto& comps = c.components();
        t.resize(comps.size());
        tt.resize(comps.size());
        for (std::size_t i = 0; i < comps.size(); ++i) {
            t[i].resize(static_cast<std::size_t>(c.Q()));
            model.apply<std::uint8_t>(comps[i].slots, t[i]);
            tt[i] = std::inner_product(t[i].begin(), t[i].end(), t[i].begin(), 0.0);
        }
    }

    double distance(std::span<const std::uint8_t> x) const
    {
        std::vector<double> e(x.size());
        model.apply<std::uint8_t>(x, e);
        double d = 0;
        for (std::size_t j = 0; j < e.size(); ++j)
            d += (s[j] - e[j]) * (s[j] - e[j]);
        return d;
    }

    std::vector<int> greedy() const
    {
        std::vector<int> counts(t.size(), 0);
        std::vector<double> r(s.begin(), s.end());
        for (int step = 0; step < c.N(); ++step) {
            std::size_t best = 0;
            double best_v = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < t.size(); ++i) {
                const double v = 2.0 * std::inner_product(r.begin(), r.end(), t[i].begin(), 0.0) - tt[i];
                if (v > best_v) {
                    best_v = v;
                    best = i;
                }
            }
            ++counts[best];
            for (std::size_t j = 0; j < r.size(); ++j)
                r[j] -= t[best][j];
        }
        return counts;
    }

    // Replace one component by another while that strictly lowers the residual.
    void refine(std::vector<int>& counts) const
    {
        std::vector<double> r(s.begin(), s.end());
        for (std::size_t i = 0; i < counts.size(); ++i)
            for (std::size_t j = 0; j < r.size(); ++j)
                r[j] -= counts[i] * t[i][j];
        double cur = std::inner_product(r.begin(), r.end(), r.begin(), 0.0);
        for (int pass = 0; pass < 4 * c.N() + 8; ++pass) {
            double best = cur;
            std::size_t ba = 0, bb = 0;
            for (std::size_t a = 0; a < counts.size(); ++a) {
                if (!counts[a])
                    continue;
                for (std::size_t b = 0; b < counts.size(); ++b) {
                    if (b == a)
                        continue;
                    double d = 0;
                    for (std::size_t j = 0; j < r.size(); ++j) {
                        const double v = r[j] + t[a][j] - t[b][j];
                        d += v * v;
                    }
                    if (d < best) {
                        best = d;
                        ba = a;
                        bb = b;
                    }
                }
            }
            if (!(best < cur))
                return;
            --counts[ba];
            ++counts[bb];
            for (std::size_t j = 0; j < r.size(); ++j)
                r[j] += t[ba][j] - t[bb][j];
            cur = best;
        }
    }
};

} // namespace detail

/// Successive component decoding for multilevel EPPM: take the component
/// that most reduces the residual, N times, then improve by single swaps.
/// Indices at or above `limit` (unused codewords) are replaced by the best
/// single-swap neighbour below it.
inline std::uint64_t decode_meppm_components(std::span<const double> s, const Constellation& c, const SlotModel& model,
                                             std::uint64_t limit = 0)
{
    require(!c.empty(), ErrorKind::invalid_state, "empty constellation");
    require(c.scheme() == Scheme::meppm || c.scheme() == Scheme::eppm, ErrorKind::invalid_input,
            "component decoding needs an EPPM-based constellation");
    const int q = c.Q();
    require(static_cast<int>(s.size()) == q && model.q == q, ErrorKind::invalid_input, "statistics length must equal Q");
    const std::uint64_t cap = limit ? std::min(limit, c.size()) : c.size();

    detail::ComponentSearch search(c, model, s);
    auto counts = search.greedy();
    if (c.N() > 1)
        search.refine(counts);
    Codeword x = c.sum_of(counts);
    double best_d = search.distance(x.slots);
    std::optional<std::uint64_t> best = c.index_of(x);

    // Rounded zero-forcing estimate as a second candidate.
    if (c.N() > 1) {
        detail::DenseLu lu(model.m, static_cast<std::size_t>(q));
        const auto z = lu.solve(s);
        Codeword r;
        r.slots.resize(static_cast<std::size_t>(q));
        bool finite = true;
        for (int j = 0; j < q; ++j) {
            if (!std::isfinite(z[static_cast<std::size_t>(j)]))
                finite = false;
            r.slots[static_cast<std::size_t>(j)] =
                static_cast<std::uint8_t>(std::clamp<long>(std::lround(finite ? z[static_cast<std::size_t>(j)] : 0.0), 0, c.N()));
        }
        if (finite)
            if (auto idx = c.index_of(r); idx && *idx < cap) {
                const double d = search.distance(r.slots);
                if (d < best_d || !best || *best >= cap) {
                    best_d = d;
                    best = idx;
                    counts = c.canonical_counts(*idx);
                }
            }
    }
    if (best && *best < cap)
        return *best;

    std::uint64_t fallback = 0;
    double fallback_d = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < counts.size(); ++a) {
        if (!counts[a])
            continue;
        for (std::size_t b = 0; b < counts.size(); ++b) {
            if (b == a)
                continue;
            --counts[a];
            ++counts[b];
            const Codeword y = c.sum_of(counts);
            if (auto idx = c.index_of(y); idx && *idx < cap) {
                const double d = search.distance(y.slots);
                if (d < fallback_d) {
                    fallback_d = d;
                    fallback = *idx;
                }
            }
            ++counts[a];
            --counts[b];
        }
    }
    return fallback;
}

inline std::uint64_t decode_meppm_components(std::span<const double> s, const Constellation& c)
{
    return decode_meppm_components(s, c, SlotModel::identity(c.Q()));
}

// ---------------------------------------------------------------------------
// Sphere search

namespace detail {

// Depth-first Schnorr-Euchner search over integer slot levels. The
// observation is y = W v + noise with v = (current symbol levels, nuisance
// levels); only the current symbol must be a valid codeword.
class SphereSearch {
public:
    SphereSearch(std::span<const double> y, std::span<const double> w, std::size_t rows, std::size_t vars, std::span<const int> vmax,
                 const Constellation& c, std::uint64_t cap, std::uint64_t budget)
        : n_(vars), q_(static_cast<std::size_t>(c.Q())), c_(c), cap_(cap), budget_(budget)
    {
        // Columns in search order: nuisance first, current symbol last, so
        // the current symbol is fixed (and checked) at the top of the tree.
        order_.resize(n_);
        for (std::size_t k = 0; k < n_ - q_; ++k)
            order_[k] = q_ + k;
        for (std::size_t k = 0; k < q_; ++k)
            order_[n_ - q_ + k] = k;
        std::vector<double> a(rows * n_);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t k = 0; k < n_; ++k)
                a[r * n_ + k] = w[r * n_ + order_[k]];
        std::vector<double> b(y.begin(), y.end());
        householder(a, b, rows);
        r_.assign(n_ * n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t k = i; k < n_; ++k)
                r_[i * n_ + k] = a[i * n_ + k];
        yt_.assign(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(n_));
        vmax_.resize(n_);
        for (std::size_t k = 0; k < n_; ++k)
            vmax_[k] = vmax[order_[k]];
        v_.assign(n_, 0);
        sym_.resize(q_);
    }

    // Start from a known valid decision so the search only looks for better ones.
    void seed(std::uint64_t idx, double dist)
    {
        best_ = idx;
        best_d_ = dist;
    }

    std::optional<std::uint64_t> run()
    {
        search(n_, 0.0);
        return best_;
    }

private:
    void householder(std::vector<double>& a, std::vector<double>& b, std::size_t rows) const
    {
        for (std::size_t k = 0; k < n_ && k < rows; ++k) {
            double norm = 0;
            for (std::size_t r = k; r < rows; ++r)
                norm += a[r * n_ + k] * a[r * n_ + k];
            norm = std::sqrt(norm);
            if (norm == 0)
                continue;
            const double alpha = a[k * n_ + k] > 0 ? -norm : norm;
            std::vector<double> u(rows - k);
            for (std::size_t r = k; r < rows; ++r)
                u[r - k] = a[r * n_ + k];
            u[0] -= alpha;
            double uu = 0;
            for (double x : u)
                uu += x * x;
            if (uu == 0)
                continue;
            for (std::size_t col = k; col < n_; ++col) {
                double d = 0;
                for (std::size_t r = k; r < rows; ++r)
                    d += u[r - k] * a[r * n_ + col];
                d *= 2 / uu;
                for (std::size_t r = k; r < rows; ++r)
                    a[r * n_ + col] -= d * u[r - k];
            }
            double d = 0;
            for (std::size_t r = k; r < rows; ++r)
                d += u[r - k] * b[r];
            d *= 2 / uu;
            for (std::size_t r = k; r < rows; ++r)
                b[r] -= d * u[r - k];
        }
    }

    // Levels k..n-1 are fixed; `dist` is their share of the metric.
    void search(std::size_t level, double dist)
    {
        if (level == 0) {
            if (dist < best_d_) {
                best_d_ = dist;
                best_ = cur_;
            }
            return;
        }
        const std::size_t k = level - 1;
        double acc = yt_[k];
        for (std::size_t l = k + 1; l < n_; ++l)
            acc -= r_[k * n_ + l] * v_[l];
        const double rkk = r_[k * n_ + k];
        const double center = std::fabs(rkk) > 1e-300 ? acc / rkk : 0.0;
        const int hi = vmax_[k];
        int x = static_cast<int>(std::clamp(std::lround(center), 0L, static_cast<long>(hi)));
        // Zig-zag outward from the rounded center, stepping into whichever
        // side is nearer until both sides leave the box or the radius.
        int up = x, down = x - 1;
        while (up <= hi || down >= 0) {
            int pick;
            if (up > hi)
                pick = down--;
            else if (down < 0)
                pick = up++;
            else if (std::fabs(up - center) <= std::fabs(center - down))
                pick = up++;
            else
                pick = down--;
            const double e = rkk * (pick - center);
            const double d = dist + e * e;
            if (d >= best_d_)
                break;
            if (++nodes_ > budget_)
                return;
            v_[k] = pick;
            if (k == n_ - q_) {
                if (!symbol_ok())
                    continue;
            }
            search(k, d);
            if (nodes_ > budget_)
                return;
        }
    }

    bool symbol_ok()
    {
        for (std::size_t j = 0; j < q_; ++j)
            sym_[j] = static_cast<std::uint8_t>(v_[n_ - q_ + j]);
        const auto idx = c_.index_of(std::span<const std::uint8_t>(sym_));
        if (!idx || *idx >= cap_)
            return false;
        cur_ = *idx;
        return true;
    }

    std::size_t n_, q_;
    const Constellation& c_;
    std::uint64_t cap_, budget_, nodes_ = 0;
    std::vector<std::size_t> order_;
    std::vector<double> r_, yt_;
    std::vector<int> vmax_, v_;
    std::vector<std::uint8_t> sym_;
    double best_d_ = std::numeric_limits<double>::infinity();
    std::uint64_t cur_ = 0;
    std::optional<std::uint64_t> best_;
};

inline int peak_level(const Constellation& c)
{
    return c.scheme() == Scheme::meppm ? c.N() : 1;
}

} // namespace detail

inline constexpr std::uint64_t sphere_node_budget = 20000;
inline constexpr std::uint64_t ml_seed_cap = 256;

/// ML decision by sphere search over a window of `rows` observations and
/// `vars` >= Q unknown slot levels, row-major W (rows x vars). The first Q
/// levels form the current symbol; the rest are nuisance levels bounded by
/// `nuisance_max`. The search starts from the in-symbol decision, so a
/// spent node budget returns the best symbol found so far.
inline std::uint64_t decode_sphere_window(std::span<const double> y, std::span<const double> w, std::size_t rows, std::size_t vars,
                                          std::span<const int> nuisance_max, const Constellation& c, std::uint64_t limit = 0,
                                          std::uint64_t budget = sphere_node_budget)
{
    const auto q = static_cast<std::size_t>(c.Q());
    require(vars >= q && rows >= vars && y.size() == rows && w.size() == rows * vars && nuisance_max.size() == vars - q,
            ErrorKind::invalid_input, "sphere window dimensions do not match");
    const std::uint64_t cap = limit ? std::min(limit, c.size()) : c.size();
    std::vector<int> vmax(vars, detail::peak_level(c));
    for (std::size_t k = q; k < vars; ++k)
        vmax[k] = nuisance_max[k - q];
    // Seed: component or ML decision on the in-symbol rows, nuisance levels
    // filled in by rounded back-substitution.
    SlotModel m{c.Q(), std::vector<double>(q * q)};
    for (std::size_t j = 0; j < q; ++j)
        for (std::size_t i = 0; i < q; ++i)
            m.m[j * q + i] = w[j * vars + i];
    std::uint64_t first;
    if (c.size() <= ml_seed_cap)
        first = decode_ml(y.first(q), c, m, limit);
    else if (c.scheme() == Scheme::meppm || c.scheme() == Scheme::eppm)
        first = decode_meppm_components(y.first(q), c, m, limit);
    else
        first = decode_correlation(y.first(q), c);
    std::vector<double> v(vars, 0.0);
    {
        const auto sym = c.symbol(first);
        for (std::size_t j = 0; j < q; ++j)
            v[j] = sym.slots[j];
        for (std::size_t t = q; t < vars; ++t) {
            double acc = y[t];
            for (std::size_t i = 0; i < t; ++i)
                acc -= w[t * vars + i] * v[i];
            const double d = w[t * vars + t];
            v[t] = d != 0 ? std::clamp(std::round(acc / d), 0.0, double(vmax[t])) : 0.0;
        }
    }
    double dist = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        double e = y[r];
        for (std::size_t i = 0; i < vars; ++i)
            e -= w[r * vars + i] * v[i];
        dist += e * e;
    }
    detail::SphereSearch s(y, w, rows, vars, vmax, c, cap, budget);
    s.seed(first, dist);
    return *s.run();
}

/// Sphere search ML over one symbol window with a square slot model.
inline std::uint64_t decode_sphere(std::span<const double> s, const Constellation& c, const SlotModel& model, std::uint64_t limit = 0)
{
    const auto q = static_cast<std::size_t>(c.Q());
    require(s.size() == q && model.q == c.Q(), ErrorKind::invalid_input, "statistics length must equal Q");
    return decode_sphere_window(s, model.m, q, q, std::span<const int>{}, c, limit);
}

// ---------------------------------------------------------------------------
// Frame demodulation

enum class DecoderKind { automatic, correlation, ml, components, sphere };

inline const char* to_string(DecoderKind k)
{
    switch (k) {
    case DecoderKind::automatic: return "auto";
    case DecoderKind::correlation: return "correlation";
    case DecoderKind::ml: return "ml";
    case DecoderKind::components: return "components";
    case DecoderKind::sphere: return "sphere";
    }
    return "unknown";
}

inline std::optional<DecoderKind> decoder_from_string(std::string_view s)
{
    if (s == "auto") return DecoderKind::automatic;
    if (s == "correlation") return DecoderKind::correlation;
    if (s == "ml") return DecoderKind::ml;
    if (s == "components") return DecoderKind::components;
    if (s == "sphere") return DecoderKind::sphere;
    return std::nullopt;
}

inline constexpr std::uint64_t ml_auto_cap = std::uint64_t{1} << 12;

/// Correlation for equal-energy codes over an identity slot model, ML at
/// desk scale, component decoding for large multilevel codes over an
/// identity model and sphere search for large codes over a smeared one.
inline DecoderKind resolve_decoder(DecoderKind k, const Constellation& c, bool linear_identity)
{
    if (k != DecoderKind::automatic)
        return k;
    if (c.equal_energy() && linear_identity)
        return DecoderKind::correlation;
    if (c.size() <= ml_auto_cap)
        return DecoderKind::ml;
    if (!linear_identity)
        return DecoderKind::sphere;
    if (c.scheme() == Scheme::meppm || c.scheme() == Scheme::eppm)
        return DecoderKind::components;
    return DecoderKind::correlation;
}

inline std::uint64_t decode_symbol(std::span<const double> s, const Constellation& c, DecoderKind k, const SlotModel& model,
                                   std::uint64_t limit)
{
    switch (k) {
    case DecoderKind::correlation: return decode_correlation(s, c);
    case DecoderKind::ml: return decode_ml(s, c, model, limit);
    case DecoderKind::components: return decode_meppm_components(s, c, model, limit);
    case DecoderKind::sphere: return decode_sphere(s, c, model, limit);
    case DecoderKind::automatic: break;
    }
    fail(ErrorKind::invalid_state, "decoder kind not resolved");
}

/// Symbol-by-symbol decoding of a slot statistics stream: optional block
/// deinterleaving, then one decision per Q-slot window. Symbol m uses
/// models[m % models.size()].
inline std::vector<std::uint64_t> demodulate_symbols(std::span<const double> stats, std::size_t n_symbols, const Constellation& c,
                                                     DecoderKind k, std::span<const SlotModel> models, int stride,
                                                     const InterleaverSpec& spec = {}, std::uint64_t limit = 0)
{
    const int q = c.Q();
    require(!models.empty(), ErrorKind::invalid_input, "no slot model");
    require(stride >= q, ErrorKind::invalid_input, "symbol stride shorter than Q");
    require(stats.size() >= n_symbols * static_cast<std::size_t>(stride), ErrorKind::invalid_input, "statistics shorter than the frame");
    std::vector<double> data;
    const int depth = spec.depth;
    if (depth > 1) {
        require(stride == q, ErrorKind::invalid_input, "interleaving needs symbols without guard slots");
        data = deinterleave(stats.first(n_symbols * static_cast<std::size_t>(q)), spec, q);
    } else {
        data.assign(stats.begin(), stats.end());
    }
    const int step = depth > 1 ? q : stride;
    std::vector<std::uint64_t> out(n_symbols);
    for (std::size_t m = 0; m < n_symbols; ++m)
        out[m] = decode_symbol(std::span<const double>(data).subspan(m * static_cast<std::size_t>(step), static_cast<std::size_t>(q)), c, k,
                               models[m % models.size()], limit);
    return out;
}

inline std::vector<std::uint64_t> demodulate_symbols(std::span<const double> stats, std::size_t n_symbols, const Constellation& c,
                                                     DecoderKind k, const SlotModel& model, int stride, int depth = 1,
                                                     std::uint64_t limit = 0)
{
    return demodulate_symbols(stats, n_symbols, c, k, std::span<const SlotModel>(&model, 1), stride, InterleaverSpec{depth}, limit);
}

/// Decision-feedback decoding of per-slot integrals z = r * x + noise, where
/// r is the slot-integrated response to one unit pulse launched at slot 0.
/// Contributions of already decided symbols are subtracted before each
/// decision. The ML and component decoders use only the in-symbol part of
/// r; the sphere decoder also looks `lookahead` slots past the symbol and
/// treats the levels found there as unknowns.
inline std::vector<std::uint64_t> demodulate_feedback(std::span<const double> z, std::size_t n_symbols, const Constellation& c,
                                                      DecoderKind k, std::span<const double> response, int stride,
                                                      std::uint64_t limit = 0, int lookahead = 0)
{
    const int q = c.Q();
    require(k == DecoderKind::ml || k == DecoderKind::components || k == DecoderKind::sphere, ErrorKind::invalid_parameter,
            "decision feedback needs the ML, component or sphere decoder");
    require(stride >= q && z.size() >= n_symbols * static_cast<std::size_t>(stride), ErrorKind::invalid_input,
            "integrals shorter than the frame");
    require(lookahead >= 0, ErrorKind::invalid_parameter, "lookahead must be >= 0");
    const SlotModel model = SlotModel::from_response(response, 0, q);
    const std::size_t uq = static_cast<std::size_t>(q);
    const std::size_t frame_end = n_symbols * static_cast<std::size_t>(stride);
    std::vector<double> isi(z.size(), 0.0);
    std::vector<double> res;
    std::vector<double> w;
    std::vector<int> nmax;
    std::vector<std::uint8_t> x(uq);
    std::vector<std::uint64_t> out(n_symbols);
    const int peak = detail::peak_level(c);
    for (std::size_t m = 0; m < n_symbols; ++m) {
        const std::size_t base = m * static_cast<std::size_t>(stride);
        const std::size_t look =
            k == DecoderKind::sphere ? std::min(static_cast<std::size_t>(lookahead), z.size() - base - uq) : 0;
        const std::size_t n = uq + look;
        res.resize(n);
        for (std::size_t j = 0; j < n; ++j)
            res[j] = z[base + j] - isi[base + j];
        std::uint64_t idx;
        if (k == DecoderKind::sphere) {
            w.assign(n * n, 0.0);
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t i = 0; i <= j; ++i)
                    if (j - i < response.size())
                        w[j * n + i] = response[j - i];
            // Lookahead slots outside symbols (guards, frame end) carry nothing.
            nmax.assign(look, 0);
            for (std::size_t t = 0; t < look; ++t) {
                const std::size_t pos = base + uq + t;
                if (pos < frame_end && pos % static_cast<std::size_t>(stride) < uq)
                    nmax[t] = peak;
            }
            idx = decode_sphere_window(res, w, n, n, nmax, c, limit);
        } else {
            idx = decode_symbol(std::span<const double>(res).first(uq), c, k, model, limit);
        }
        out[m] = idx;
        c.symbol_into(idx, x);
        const std::size_t from = base + uq;
        for (int i = 0; i < q; ++i) {
            if (!x[static_cast<std::size_t>(i)])
                continue;
            const std::size_t start = base + static_cast<std::size_t>(i);
            for (std::size_t t = std::max(start, from); t < z.size() && t - start < response.size(); ++t)
                isi[t] += x[static_cast<std::size_t>(i)] * response[t - start];
        }
    }
    return out;
}

} // namespace vlc

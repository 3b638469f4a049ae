// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vlc/constellations.hpp"
#include "vlc/error.hpp"

namespace vlc {

struct SlotGeometry {
    double slot_duration = 1e-9;  // seconds
    int samples_per_slot = 2;
    int overlap_factor = 1;       // F: pulse width in slots
    // When false every symbol is followed by an F-1 slot guard so that no
    // pulse spills into the next symbol.
    bool cross_symbol_boundaries = true;

    double sample_rate() const { return samples_per_slot / slot_duration; }
    double sample_period() const { return slot_duration / samples_per_slot; }
    int guard_slots() const { return cross_symbol_boundaries ? 0 : overlap_factor - 1; }

    void validate() const
    {
        require(slot_duration > 0, ErrorKind::invalid_parameter, "slot_duration must be positive");
        require(overlap_factor >= 1, ErrorKind::invalid_parameter, "overlap_factor must be >= 1");
        require(samples_per_slot >= 2 * overlap_factor, ErrorKind::invalid_parameter, "samples_per_slot must be >= 2 * overlap_factor");
    }
};

struct Waveform {
    std::vector<double> samples;  // optical watts, or amps after detection
    double sample_rate = 0.0;
    SlotGeometry geometry;
    int slots_per_symbol = 0;     // symbol stride in slots, guard included
    // Set by synthesize: every sample is an integer multiple of this value.
    double unit = 0.0;

    std::size_t slots() const
    {
        return geometry.samples_per_slot > 0 ? samples.size() / static_cast<std::size_t>(geometry.samples_per_slot) : 0;
    }
    double duration() const { return sample_rate > 0 ? samples.size() / sample_rate : 0.0; }
};

namespace detail {

inline int uniform_q(std::span<const Codeword> cw)
{
    if (cw.empty())
        return 0;
    const std::size_t q = cw.front().size();
    for (const auto& c : cw)
        require(c.size() == q, ErrorKind::invalid_input, "codewords have differing Q");
    return static_cast<int>(q);
}

// Number of pulses covering each slot of the stream (before sampling).
inline std::vector<int> pulse_levels(std::span<const Codeword> cw, const SlotGeometry& g, int q)
{
    const int stride = q + g.guard_slots();
    const int f = g.overlap_factor;
    const std::size_t total = cw.size() * static_cast<std::size_t>(stride) + (cw.empty() ? 0 : static_cast<std::size_t>(f - 1));
    std::vector<int> level(total, 0);
    for (std::size_t s = 0; s < cw.size(); ++s)
        for (int j = 0; j < q; ++j) {
            const int a = cw[s].slots[static_cast<std::size_t>(j)];
            if (!a)
                continue;
            const std::size_t start = s * static_cast<std::size_t>(stride) + static_cast<std::size_t>(j);
            for (int t = 0; t < f; ++t)
                level[start + static_cast<std::size_t>(t)] += a;
        }
    if (!g.cross_symbol_boundaries && f > 1 && !cw.empty())
        level.resize(level.size() - static_cast<std::size_t>(f - 1));
    return level;
}

} // namespace detail

/// Renders a codeword stream: each unit of slot amplitude launches a
/// rectangular pulse F slots wide at its slot boundary. Streams with F > 1
/// end with F-1 slots of tail.
inline Waveform synthesize(std::span<const Codeword> codewords, const SlotGeometry& g, double peak_power_per_unit)
{
    g.validate();
    const int q = detail::uniform_q(codewords);
    const auto level = detail::pulse_levels(codewords, g, q);
    Waveform w;
    w.geometry = g;
    w.sample_rate = g.sample_rate();
    w.slots_per_symbol = q + g.guard_slots();
    w.unit = peak_power_per_unit;
    w.samples.reserve(level.size() * static_cast<std::size_t>(g.samples_per_slot));
    for (int l : level)
        for (int i = 0; i < g.samples_per_slot; ++i)
            w.samples.push_back(l * peak_power_per_unit);
    return w;
}

inline Waveform synthesize(const std::vector<Codeword>& codewords, const SlotGeometry& g, double peak_power_per_unit)
{
    return synthesize(std::span<const Codeword>(codewords), g, peak_power_per_unit);
}

// ---------------------------------------------------------------------------
// Interleaving

enum class Permutation { row_column, random };

struct InterleaverSpec {
    int depth = 1;  // D symbols per block
    Permutation permutation = Permutation::row_column;
    std::uint64_t seed = 0;  // random permutation only
};

inline const char* to_string(Permutation p) { return p == Permutation::random ? "random" : "row_column"; }

/// Row-column permutation of a D x Q block: out[p] = in[perm[p]], with
/// symbols as rows and slots read out column by column.
inline std::vector<std::size_t> interleaver_permutation(int depth, int q)
{
    require(depth >= 1 && q >= 1, ErrorKind::invalid_parameter, "interleaver needs depth >= 1 and Q >= 1");
    std::vector<std::size_t> perm;
    perm.reserve(static_cast<std::size_t>(depth * q));
    for (int col = 0; col < q; ++col)
        for (int row = 0; row < depth; ++row)
            perm.push_back(static_cast<std::size_t>(row * q + col));
    return perm;
}

/// The block permutation for `spec`. The random kind is a seeded
/// Fisher-Yates shuffle, identical on every platform.
inline std::vector<std::size_t> interleaver_permutation(const InterleaverSpec& spec, int q)
{
    auto perm = interleaver_permutation(spec.depth, q);
    if (spec.permutation == Permutation::random && spec.depth > 1) {
        std::mt19937_64 rng(spec.seed);
        for (std::size_t i = perm.size() - 1; i > 0; --i)
            std::swap(perm[i], perm[static_cast<std::size_t>(rng() % (i + 1))]);
    }
    return perm;
}

/// Position in transmit order of every block slot: inverse of the permutation.
inline std::vector<std::size_t> interleaver_positions(const InterleaverSpec& spec, int q)
{
    const auto perm = interleaver_permutation(spec, q);
    std::vector<std::size_t> pos(perm.size());
    for (std::size_t p = 0; p < perm.size(); ++p)
        pos[perm[p]] = p;
    return pos;
}

template <class T>
std::vector<T> interleave_slots(std::span<const T> stream, const InterleaverSpec& spec, int q)
{
    const std::size_t block = static_cast<std::size_t>(spec.depth) * static_cast<std::size_t>(q);
    require(block > 0 && stream.size() % block == 0, ErrorKind::invalid_input, "stream is not a whole number of interleaver blocks");
    const auto perm = interleaver_permutation(spec, q);
    std::vector<T> out(stream.size());
    for (std::size_t b = 0; b < stream.size(); b += block)
        for (std::size_t p = 0; p < block; ++p)
            out[b + p] = stream[b + perm[p]];
    return out;
}

template <class T>
std::vector<T> deinterleave_slots(std::span<const T> stream, const InterleaverSpec& spec, int q)
{
    const std::size_t block = static_cast<std::size_t>(spec.depth) * static_cast<std::size_t>(q);
    require(block > 0 && stream.size() % block == 0, ErrorKind::invalid_input, "stream is not a whole number of interleaver blocks");
    const auto perm = interleaver_permutation(spec, q);
    std::vector<T> out(stream.size());
    for (std::size_t b = 0; b < stream.size(); b += block)
        for (std::size_t p = 0; p < block; ++p)
            out[b + perm[p]] = stream[b + p];
    return out;
}

template <class T>
std::vector<T> interleave_slots(std::span<const T> stream, int depth, int q)
{
    return interleave_slots(stream, InterleaverSpec{depth}, q);
}

template <class T>
std::vector<T> deinterleave_slots(std::span<const T> stream, int depth, int q)
{
    return deinterleave_slots(stream, InterleaverSpec{depth}, q);
}

inline std::vector<Codeword> interleave(std::span<const Codeword> codewords, const InterleaverSpec& spec)
{
    require(spec.depth >= 1, ErrorKind::invalid_parameter, "interleaver depth must be >= 1");
    require(codewords.size() % static_cast<std::size_t>(spec.depth) == 0, ErrorKind::invalid_input,
            "codeword count is not a multiple of the interleaver depth");
    if (codewords.empty())
        return {};
    const int q = detail::uniform_q(codewords);
    std::vector<std::uint8_t> flat;
    flat.reserve(codewords.size() * static_cast<std::size_t>(q));
    for (const auto& c : codewords)
        flat.insert(flat.end(), c.slots.begin(), c.slots.end());
    const auto mixed = interleave_slots<std::uint8_t>(flat, spec, q);
    std::vector<Codeword> out(codewords.size());
    for (std::size_t s = 0; s < out.size(); ++s)
        out[s].slots.assign(mixed.begin() + static_cast<std::ptrdiff_t>(s * q), mixed.begin() + static_cast<std::ptrdiff_t>((s + 1) * q));
    return out;
}

inline std::vector<Codeword> deinterleave(std::span<const Codeword> codewords, const InterleaverSpec& spec)
{
    require(codewords.size() % static_cast<std::size_t>(spec.depth) == 0, ErrorKind::invalid_input,
            "codeword count is not a multiple of the interleaver depth");
    if (codewords.empty())
        return {};
    const int q = detail::uniform_q(codewords);
    std::vector<std::uint8_t> flat;
    for (const auto& c : codewords)
        flat.insert(flat.end(), c.slots.begin(), c.slots.end());
    const auto back = deinterleave_slots<std::uint8_t>(flat, spec, q);
    std::vector<Codeword> out(codewords.size());
    for (std::size_t s = 0; s < out.size(); ++s)
        out[s].slots.assign(back.begin() + static_cast<std::ptrdiff_t>(s * q), back.begin() + static_cast<std::ptrdiff_t>((s + 1) * q));
    return out;
}

// ---------------------------------------------------------------------------
// Dimming

struct DimmingResult {
    Constellation constellation;
    double peak_scale = 1.0;      // multiplier on peak_power_per_unit
    double achieved_ratio = 0.0;  // mean power / nominal peak power
    int k_prime = 0;              // rebuilt pulse count, 0 when scaled instead
    bool peak_scaled = false;     // true for PPM and MEPPM
};

/// Sets the average-to-peak ratio. Binary constant-weight schemes are rebuilt
/// with K' = round(target * Q); PPM and MEPPM keep their code and scale the
/// per-unit power instead, which only reaches targets below 1/PAPR.
inline DimmingResult apply_dimming(const Constellation& c, const SlotGeometry& g, double target_fraction,
                                   std::uint64_t search_seed = 0)
{
    require(!c.empty(), ErrorKind::invalid_state, "empty constellation");
    require(target_fraction > 0.0 && target_fraction <= 1.0, ErrorKind::invalid_parameter, "dimming target must be in (0, 1]");
    (void)g;
    DimmingResult r;
    const int q = c.Q();
    if (c.scheme() == Scheme::eppm || c.scheme() == Scheme::mppm) {
        const int kp = static_cast<int>(std::lround(target_fraction * q));
        require(kp >= 1 && kp <= q - 1, ErrorKind::invalid_parameter,
                "dimming target needs K'=" + std::to_string(kp) + " outside [1, Q-1]");
        r.constellation = c.scheme() == Scheme::eppm ? build_eppm(q, kp, search_seed) : build_mppm(q, kp);
        r.k_prime = kp;
        r.achieved_ratio = double(kp) / q;
        return r;
    }
    const auto st = code_stats(c);
    const double natural = 1.0 / st.papr;
    require(target_fraction <= natural * (1 + 1e-12), ErrorKind::invalid_parameter,
            "dimming target above the constellation's natural ratio 1/PAPR=" + std::to_string(natural));
    r.constellation = c;
    r.peak_scale = target_fraction / natural;
    r.peak_scaled = true;
    r.achieved_ratio = target_fraction;
    return r;
}

// ---------------------------------------------------------------------------
// LED array splitting

/// Per-LED binary drive streams. Each unit pulse goes to the next LED in
/// round-robin order that is idle for the whole pulse.
struct ArraySplit {
    std::vector<std::vector<Codeword>> drives;  // [led][symbol]
};

inline ArraySplit array_split(std::span<const Codeword> codewords, int n_leds, const SlotGeometry& g = {})
{
    require(n_leds >= 1, ErrorKind::invalid_parameter, "need at least one LED");
    const int q = detail::uniform_q(codewords);
    const int stride = q + g.guard_slots();
    const int f = g.overlap_factor;
    ArraySplit out;
    out.drives.assign(static_cast<std::size_t>(n_leds), std::vector<Codeword>(codewords.size()));
    for (auto& led : out.drives)
        for (auto& c : led)
            c.slots.assign(static_cast<std::size_t>(q), 0);
    std::vector<long long> busy_until(static_cast<std::size_t>(n_leds), std::numeric_limits<long long>::min());
    int next = 0;
    for (std::size_t s = 0; s < codewords.size(); ++s)
        for (int j = 0; j < q; ++j) {
            const long long slot = static_cast<long long>(s) * stride + j;
            for (int u = 0; u < codewords[s].slots[static_cast<std::size_t>(j)]; ++u) {
                int chosen = -1;
                for (int t = 0; t < n_leds; ++t) {
                    const int led = (next + t) % n_leds;
                    if (busy_until[static_cast<std::size_t>(led)] <= slot) {
                        chosen = led;
                        break;
                    }
                }
                require(chosen >= 0, ErrorKind::capacity_exceeded,
                        "array of " + std::to_string(n_leds) + " LEDs cannot carry the stream's overlapping pulses");
                busy_until[static_cast<std::size_t>(chosen)] = slot + f;
                out.drives[static_cast<std::size_t>(chosen)][s].slots[static_cast<std::size_t>(j)] = 1;
                next = (chosen + 1) % n_leds;
            }
        }
    return out;
}

inline ArraySplit array_split(const std::vector<Codeword>& codewords, int n_leds, const SlotGeometry& g = {})
{
    return array_split(std::span<const Codeword>(codewords), n_leds, g);
}

// ---------------------------------------------------------------------------
// Export

inline nlohmann::json geometry_json(const SlotGeometry& g)
{
    return {{"slot_duration", g.slot_duration},
            {"samples_per_slot", g.samples_per_slot},
            {"overlap_factor", g.overlap_factor},
            {"cross_symbol_boundaries", g.cross_symbol_boundaries}};
}

/// Writes one sample per line to `csv_path` and a sidecar `csv_path.json`.
inline void write_waveform_csv(const std::string& csv_path, const Waveform& w)
{
    std::ofstream out(csv_path);
    require(bool(out), ErrorKind::invalid_input, "cannot open " + csv_path);
    out << "power\n";
    char buf[32];
    for (double v : w.samples) {
        std::snprintf(buf, sizeof buf, "%.9e\n", v);
        out << buf;
    }
    std::ofstream side(csv_path + ".json");
    side << nlohmann::json{{"sample_rate", w.sample_rate},
                           {"samples", w.samples.size()},
                           {"slots_per_symbol", w.slots_per_symbol},
                           {"geometry", geometry_json(w.geometry)}}
                .dump(2)
         << "\n";
}

} // namespace vlc

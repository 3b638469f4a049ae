// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "vlc/analog_chain.hpp"
#include "vlc/config.hpp"
#include "vlc/constellations.hpp"
#include "vlc/error.hpp"
#include "vlc/ofdm.hpp"
#include "vlc/receiver.hpp"
#include "vlc/version.hpp"
#include "vlc/waveform.hpp"

namespace vlc {

// ---------------------------------------------------------------------------
// Link budget and rates

inline double illuminance_to_power(const LinkBudget& b)
{
    require(b.illuminance > 0 && b.aperture_area > 0 && b.luminous_efficacy > 0, ErrorKind::invalid_parameter,
            "illuminance, aperture and efficacy must be positive");
    return b.illuminance * b.aperture_area / b.luminous_efficacy;
}

struct RateAccounting {
    double bits_per_slot = 0;
    double slot_rate = 0;       // Hz
    double per_color_rate = 0;  // b/s
    int n_colors = 1;
    double aggregate_rate = 0;  // b/s
};

/// Slot rate is the overlap factor times the LED bandwidth. payload_bits > 0
/// counts only the bits actually mapped per symbol.
inline RateAccounting rate_accounting(const Constellation& c, const SlotGeometry& g, const LedModel& led, int n_colors,
                                      int payload_bits = 0)
{
    require(n_colors >= 1, ErrorKind::invalid_parameter, "n_colors must be >= 1");
    RateAccounting r;
    r.bits_per_slot = double(resolve_payload_bits(c, payload_bits)) / c.Q();
    r.slot_rate = g.overlap_factor * led.bandwidth_3db;
    r.per_color_rate = r.bits_per_slot * r.slot_rate;
    r.n_colors = n_colors;
    r.aggregate_rate = n_colors * r.per_color_rate;
    return r;
}

// ---------------------------------------------------------------------------
// Flicker

/// Largest relative deviation of a window mean from the global mean, over
/// windows starting at symbol boundaries.
inline double flicker_metric(const Waveform& w, double window)
{
    require(!w.samples.empty(), ErrorKind::invalid_input, "empty waveform");
    const auto len = static_cast<std::size_t>(std::llround(window * w.sample_rate));
    const auto spp = static_cast<std::size_t>(std::max(1, w.geometry.samples_per_slot));
    require(len >= spp, ErrorKind::invalid_parameter, "window shorter than one slot");
    require(len <= w.samples.size(), ErrorKind::invalid_parameter, "window longer than the waveform");
    const std::size_t step = w.slots_per_symbol > 0 ? static_cast<std::size_t>(w.slots_per_symbol) * spp : spp;

    // Exact integer path for freshly synthesized waveforms.
    bool integral = w.unit > 0;
    std::vector<std::int64_t> level;
    if (integral) {
        level.reserve(w.samples.size());
        for (double v : w.samples) {
            const double k = std::round(v / w.unit);
            if (k * w.unit != v) {
                integral = false;
                break;
            }
            level.push_back(static_cast<std::int64_t>(k));
        }
    }
    double worst = 0;
    if (integral) {
        std::vector<std::int64_t> prefix(level.size() + 1, 0);
        for (std::size_t i = 0; i < level.size(); ++i)
            prefix[i + 1] = prefix[i] + level[i];
        const auto total = prefix.back();
        require(total > 0, ErrorKind::invalid_input, "waveform carries no power");
        const auto n = static_cast<std::int64_t>(level.size());
        for (std::size_t s = 0; s + len <= level.size(); s += step) {
            const std::int64_t ws = prefix[s + len] - prefix[s];
            const std::int64_t num = ws * n - total * static_cast<std::int64_t>(len);
            if (num != 0)
                worst = std::max(worst, std::abs(double(num)) / (double(total) * double(len)));
        }
        return worst;
    }
    std::vector<long double> prefix(w.samples.size() + 1, 0);
    for (std::size_t i = 0; i < w.samples.size(); ++i)
        prefix[i + 1] = prefix[i] + w.samples[i];
    const long double mean = prefix.back() / w.samples.size();
    require(mean > 0, ErrorKind::invalid_input, "waveform carries no power");
    for (std::size_t s = 0; s + len <= w.samples.size(); s += step) {
        const long double wm = (prefix[s + len] - prefix[s]) / len;
        worst = std::max(worst, static_cast<double>(std::fabs(wm - mean) / mean));
    }
    return worst;
}

inline Constellation build_constellation(const SchemeSpec& s)
{
    switch (s.scheme) {
    case Scheme::ppm: return build_ppm(s.Q);
    case Scheme::mppm: return build_mppm(s.Q, s.K);
    case Scheme::eppm: return build_eppm(s.Q, s.K, s.search_seed);
    case Scheme::meppm: return build_meppm(s.Q, s.K, s.N, s.use_complements, s.search_seed);
    }
    fail(ErrorKind::invalid_parameter, "unknown scheme");
}

inline std::string scheme_id(const SchemeSpec& s)
{
    std::string id(to_string(s.scheme));
    id += "-q" + std::to_string(s.Q);
    if (s.scheme != Scheme::ppm)
        id += "-k" + std::to_string(s.K);
    if (s.scheme == Scheme::meppm)
        id += "-n" + std::to_string(s.N) + (s.use_complements ? "c" : "");
    return id;
}

// ---------------------------------------------------------------------------
// Prepared link

namespace detail {

inline std::mt19937_64 trial_rng(std::uint64_t master, std::uint64_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

// Samples for the LED low-pass to decay below 1e-9 of its input.
inline std::size_t lowpass_tail(const LedModel& led, double sample_rate)
{
    if (!led.lowpass)
        return 0;
    const double a = lowpass_coefficient(led.bandwidth_3db, sample_rate);
    return static_cast<std::size_t>(std::ceil(std::log(1e-9) / std::log(1.0 - a)));
}

} // namespace detail

/// Slot-integrated detector output for one pulse of `level` watts of drive
/// lasting `width` slots, launched at slot 0. Noise free.
inline std::vector<double> pulse_response(const SlotGeometry& g, const LedModel& led, const ChannelModel& ch, const DetectorModel& det,
                                          double level, int width)
{
    const auto s = static_cast<std::size_t>(g.samples_per_slot);
    const double fs = g.sample_rate();
    const std::size_t tail = detail::lowpass_tail(led, fs) + channel_min_length(ch, fs);
    const std::size_t slots = static_cast<std::size_t>(width) + (tail + s - 1) / s + 1;
    Waveform w;
    w.geometry = g;
    w.sample_rate = fs;
    w.samples.assign(slots * s, 0.0);
    std::fill(w.samples.begin(), w.samples.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(width) * s), level);
    w = led_transfer(w, led);
    const auto h = channel_impulse_response(ch, fs, channel_min_length(ch, fs));
    const auto rx = convolve_causal(w.samples, h);
    Waveform y = w;
    for (std::size_t i = 0; i < rx.size(); ++i)
        y.samples[i] = det.responsivity * rx[i];
    auto r = slot_integrals(y).values;
    double peak = 0;
    for (double v : r)
        peak = std::max(peak, std::abs(v));
    while (r.size() > 1 && std::abs(r.back()) <= 1e-12 * peak)
        r.pop_back();
    return r;
}

/// Everything a trial needs, resolved once per run.
struct PreparedLink {
    ExperimentConfig cfg;
    Constellation constellation;
    int payload_bits = 0;
    std::uint64_t limit = 0;      // 2^payload_bits, the used index range
    double unit_power = 0;        // W of drive per unit pulse
    double mean_drive = 0;        // W, mean transmitter drive
    int stride = 0;
    ReceiverMode mode = ReceiverMode::symbol;
    DecoderKind decoder = DecoderKind::correlation;
    std::vector<double> response;  // per-slot integrals of one unit pulse
    std::vector<SlotModel> models;  // one per interleaver row
    int lookahead = 0;              // feedback sphere decoding only
    nlohmann::json dimming;        // dimming record when applied
};

inline bool channel_dispersive(const ChannelModel& ch) { return ch.nlos_gain > 0 || ch.los_delay > 0 || ch.shadowed; }

inline PreparedLink prepare_link(const ExperimentConfig& cfg)
{
    PreparedLink p;
    p.cfg = cfg;
    auto& g = p.cfg.link.geometry;
    g.validate();
    p.cfg.led.validate();
    p.cfg.channel.validate();
    p.cfg.detector.validate();

    Constellation c = build_constellation(cfg.scheme);
    p.payload_bits = resolve_payload_bits(c, cfg.scheme.payload_bits);

    const double gain = p.cfg.channel.total_gain();
    require(gain > 0, ErrorKind::invalid_config, "channel passes no signal");
    double unit = cfg.link.peak_power_per_unit;
    if (cfg.budget)
        p.cfg.link.received_power = illuminance_to_power(*cfg.budget);
    if (p.cfg.link.received_power > 0) {
        const double mean_amp = code_stats(c).mean_amplitude;
        unit = p.cfg.link.received_power / (gain * p.cfg.led.linear_gain * g.overlap_factor * mean_amp);
    }
    if (cfg.link.dimming > 0) {
        const auto d = apply_dimming(c, g, cfg.link.dimming, cfg.scheme.search_seed);
        c = d.constellation;
        unit *= d.peak_scale;
        p.payload_bits = cfg.scheme.payload_bits > 0 ? std::min(cfg.scheme.payload_bits, c.bits_per_symbol()) : c.bits_per_symbol();
        p.dimming = {{"target", cfg.link.dimming},     {"achieved_ratio", d.achieved_ratio},
                     {"k_prime", d.k_prime},          {"peak_scaled", d.peak_scaled},
                     {"peak_scale", d.peak_scale}};
    }
    p.constellation = c;
    p.limit = std::uint64_t{1} << p.payload_bits;
    p.unit_power = unit;
    p.mean_drive = unit * g.overlap_factor * code_stats(c).mean_amplitude;
    p.stride = c.Q() + g.guard_slots();

    if (cfg.link.saturation_ratio > 0)
        p.cfg.led.saturation_power = cfg.link.saturation_ratio * p.mean_drive;
    else if (cfg.saturation_auto) {
        // Overlapping pulses stack up to F deep on a single device; a split
        // array keeps every LED on-off.
        const int stack = cfg.link.n_leds > 0 ? 1 : g.overlap_factor * code_stats(c).peak;
        p.cfg.led.saturation_power = 2.0 * unit * stack;
    }

    // Slot SNR A^2 / sigma^2 at the integrator, A the slot integral of one
    // unit pulse through the ideal link.
    if (std::isfinite(cfg.link.snr_db)) {
        const double a = p.cfg.detector.responsivity * unit * gain * g.slot_duration;
        const double snr = std::pow(10.0, cfg.link.snr_db / 10.0);
        p.cfg.detector.thermal_noise_density = 2.0 * a * a / (snr * g.slot_duration);
    }

    p.mode = cfg.receiver.mode;
    const bool smeared = g.overlap_factor > 1 || p.cfg.led.lowpass || channel_dispersive(p.cfg.channel);
    if (p.mode == ReceiverMode::automatic)
        p.mode = smeared && cfg.interleaver.depth == 1 && g.cross_symbol_boundaries ? ReceiverMode::feedback : ReceiverMode::symbol;
    require(p.mode != ReceiverMode::feedback || cfg.interleaver.depth == 1, ErrorKind::invalid_config,
            "decision feedback cannot be combined with interleaving");
    require(cfg.interleaver.depth >= 1 && cfg.run.frame_symbols % cfg.interleaver.depth == 0, ErrorKind::invalid_config,
            "frame_symbols must be a multiple of the interleaver depth");
    require(cfg.interleaver.depth == 1 || g.cross_symbol_boundaries, ErrorKind::invalid_config,
            "interleaving needs symbols without guard slots");

    p.response = pulse_response(g, p.cfg.led, p.cfg.channel, p.cfg.detector, unit, g.overlap_factor);
    if (p.mode == ReceiverMode::symbol) {
        const int f = g.overlap_factor;
        std::vector<double> rc(p.response.size() + static_cast<std::size_t>(f - 1), 0.0);
        for (std::size_t k = 0; k < rc.size(); ++k) {
            const long lag = static_cast<long>(k) - (f - 1);
            for (int t = 0; t < f; ++t) {
                const long idx = lag + t;
                if (idx >= 0 && idx < static_cast<long>(p.response.size()))
                    rc[k] += p.response[static_cast<std::size_t>(idx)];
            }
        }
        const int q = c.Q();
        const int depth = cfg.interleaver.depth;
        if (depth == 1) {
            p.models.push_back(SlotModel::from_response(rc, f - 1, q));
        } else {
            // Slots of one symbol sit at scattered transmit positions.
            const auto pos = interleaver_positions(cfg.interleaver, q);
            for (int row = 0; row < depth; ++row) {
                SlotModel m{q, std::vector<double>(static_cast<std::size_t>(q * q), 0.0)};
                for (int j = 0; j < q; ++j)
                    for (int i = 0; i < q; ++i) {
                        const long k = static_cast<long>(pos[static_cast<std::size_t>(row * q + j)]) -
                                       static_cast<long>(pos[static_cast<std::size_t>(row * q + i)]) + (f - 1);
                        if (k >= 0 && k < static_cast<long>(rc.size()))
                            m.m[static_cast<std::size_t>(j * q + i)] = rc[static_cast<std::size_t>(k)];
                    }
                p.models.push_back(std::move(m));
            }
        }
        bool diagonal = true;
        for (const auto& m : p.models)
            for (int j = 0; j < q; ++j)
                for (int i = 0; i < q; ++i)
                    if (i != j && m.at(j, i) != 0.0)
                        diagonal = false;
        p.decoder = resolve_decoder(cfg.receiver.decoder, c, diagonal);
    } else {
        p.models.push_back(SlotModel::from_response(p.response, 0, c.Q()));
        p.decoder = cfg.receiver.decoder == DecoderKind::automatic ? DecoderKind::sphere : cfg.receiver.decoder;
        if (p.decoder == DecoderKind::correlation)
            p.decoder = c.size() <= ml_auto_cap ? DecoderKind::ml : DecoderKind::components;
        const int tail = static_cast<int>(p.response.size()) - 1;
        p.lookahead = cfg.receiver.lookahead >= 0 ? cfg.receiver.lookahead : std::min(c.Q(), tail);
    }
    return p;
}

// ---------------------------------------------------------------------------
// Trials

struct TrialOutcome {
    std::uint64_t bits = 0, bit_errors = 0, symbols = 0, symbol_errors = 0;
};

namespace detail {

inline Waveform transmit(const PreparedLink& p, std::span<const Codeword> tx)
{
    const auto& g = p.cfg.link.geometry;
    if (p.cfg.link.n_leds <= 0)
        return led_transfer(synthesize(tx, g, p.unit_power), p.cfg.led);
    const auto split = array_split(tx, p.cfg.link.n_leds, g);
    Waveform sum;
    for (const auto& drive : split.drives) {
        auto out = led_transfer(synthesize(drive, g, p.unit_power), p.cfg.led);
        if (sum.samples.empty())
            sum = std::move(out);
        else
            for (std::size_t i = 0; i < sum.samples.size(); ++i)
                sum.samples[i] += out.samples[i];
    }
    return sum;
}

} // namespace detail

inline TrialOutcome run_one_trial(const PreparedLink& p, std::uint64_t master, std::uint64_t index)
{
    auto rng = detail::trial_rng(master, index);
    const auto& c = p.constellation;
    const std::size_t nsym = static_cast<std::size_t>(p.cfg.run.frame_symbols);
    Bits bits(nsym * static_cast<std::size_t>(p.payload_bits));
    for (std::size_t i = 0; i < bits.size(); i += 64) {
        const std::uint64_t r = rng();
        for (std::size_t b = 0; b < 64 && i + b < bits.size(); ++b)
            bits[i + b] = static_cast<std::uint8_t>((r >> b) & 1u);
    }
    const auto frame = encode_bits(c, bits, p.payload_bits);
    const int depth = p.cfg.interleaver.depth;
    const auto tx = depth > 1 ? interleave(frame.symbols, p.cfg.interleaver) : frame.symbols;

    const auto optical = detail::transmit(p, tx);
    const auto y = propagate_and_detect(optical, p.cfg.channel, p.cfg.detector, rng);

    std::vector<std::uint64_t> decided;
    if (p.mode == ReceiverMode::feedback) {
        const auto z = slot_integrals(y);
        decided = demodulate_feedback(z.values, nsym, c, p.decoder, p.response, p.stride, p.limit, p.lookahead);
    } else {
        const auto s = slot_statistics(y, p.cfg.link.geometry);
        decided = demodulate_symbols(s.values, nsym, c, p.decoder, p.models, p.stride, p.cfg.interleaver, p.limit);
    }

    TrialOutcome out;
    out.symbols = nsym;
    out.bits = bits.size();
    for (std::size_t m = 0; m < nsym; ++m) {
        const std::uint64_t sent = frame.indices[m];
        // An unused codeword has no bit pattern; its low index bits stand in.
        if (decided[m] != sent)
            ++out.symbol_errors;
        out.bit_errors += static_cast<std::uint64_t>(std::popcount((sent ^ decided[m]) & (p.limit - 1)));
    }
    return out;
}

struct TrialReport {
    std::string scheme;
    nlohmann::json parameters;
    double axis_value = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t bits_sent = 0, bit_errors = 0, symbols_sent = 0, symbol_errors = 0;
    std::uint64_t trials = 0;
    double ber = 0, ser = 0, ci95 = 0;
    bool ci_valid = false;  // false when fewer than 10 bit errors
    double elapsed = 0;     // s, never written to result files
    std::uint64_t rng_seed = 0;
};

namespace detail {

inline void finish_report(TrialReport& r)
{
    r.ber = r.bits_sent ? double(r.bit_errors) / double(r.bits_sent) : 0.0;
    r.ser = r.symbols_sent ? double(r.symbol_errors) / double(r.symbols_sent) : 0.0;
    r.ci95 = r.bits_sent ? 1.96 * std::sqrt(r.ber * (1 - r.ber) / double(r.bits_sent)) : 0.0;
    r.ci_valid = r.bit_errors >= 10;
}

// Runs trials in fixed-size rounds and stops at the first trial, in index
// order, that meets the stop rule, so the result is independent of the
// number of workers.
template <class Fn>
std::vector<TrialOutcome> run_rounds(const RunSpec& run, int workers, Fn&& trial)
{
    require(run.frame_symbols >= 1 && run.round_trials >= 1, ErrorKind::invalid_config, "run needs positive frame and round sizes");
    std::vector<TrialOutcome> kept;
    std::uint64_t bits = 0, errors = 0, next = 0;
    workers = std::max(1, workers);
    const std::size_t round = static_cast<std::size_t>(run.round_trials);
    std::vector<TrialOutcome> buf(round);
    while (true) {
        std::atomic<std::size_t> cursor{0};
        std::exception_ptr error;
        std::mutex error_mu;
        auto work = [&] {
            for (std::size_t i; (i = cursor.fetch_add(1)) < round;) {
                try {
                    buf[i] = trial(next + i);
                } catch (...) {
                    std::lock_guard lock(error_mu);
                    if (!error)
                        error = std::current_exception();
                }
            }
        };
        if (workers == 1) {
            work();
        } else {
            std::vector<std::thread> pool;
            for (int w = 0; w < workers; ++w)
                pool.emplace_back(work);
            for (auto& t : pool)
                t.join();
        }
        if (error)
            std::rethrow_exception(error);
        for (std::size_t i = 0; i < round; ++i) {
            kept.push_back(buf[i]);
            bits += buf[i].bits;
            errors += buf[i].bit_errors;
            if (bits >= run.max_bits || errors >= run.min_errors)
                return kept;
        }
        next += round;
    }
}

} // namespace detail

inline TrialReport run_trials(const ExperimentConfig& cfg, int workers = 0)
{
    const auto t0 = std::chrono::steady_clock::now();
    const PreparedLink p = prepare_link(cfg);
    const auto outcomes = detail::run_rounds(cfg.run, workers > 0 ? workers : cfg.run.workers,
                                             [&](std::uint64_t i) { return run_one_trial(p, cfg.seed, i); });
    TrialReport r;
    r.scheme = scheme_id(cfg.scheme);
    r.parameters = config_to_json(cfg);
    r.parameters["resolved"] = {{"payload_bits", p.payload_bits},
                                {"unit_power", p.unit_power},
                                {"mean_drive", p.mean_drive},
                                {"receiver_mode", to_string(p.mode)},
                                {"decoder", to_string(p.decoder)},
                                {"thermal_noise_density", p.cfg.detector.thermal_noise_density},
                                {"saturation_power", p.cfg.led.saturation_power}};
    if (!p.dimming.is_null())
        r.parameters["resolved"]["dimming"] = p.dimming;
    r.rng_seed = cfg.seed;
    for (const auto& o : outcomes) {
        r.bits_sent += o.bits;
        r.bit_errors += o.bit_errors;
        r.symbols_sent += o.symbols;
        r.symbol_errors += o.symbol_errors;
    }
    r.trials = outcomes.size();
    detail::finish_report(r);
    r.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

// ---------------------------------------------------------------------------
// DCO-OFDM over the same device and channel

/// Mean drive equals the pulse link's mean drive, so both transmitters emit
/// the same average optical power. The receiver equalizes with the linear
/// channel response.
inline TrialReport run_ofdm_trials(const ExperimentConfig& cfg, int workers = 0)
{
    const auto t0 = std::chrono::steady_clock::now();
    const PreparedLink p = prepare_link(cfg);
    const auto& oc = cfg.ofdm.cfg;
    oc.validate();
    SlotGeometry g = cfg.link.geometry;
    g.overlap_factor = 1;
    require(oc.dc_bias_sigma > 0, ErrorKind::invalid_config, "DCO-OFDM needs a positive bias");
    const double amplitude = p.mean_drive / oc.dc_bias_sigma;
    LedModel linear = p.cfg.led;
    linear.nonlinearity = false;
    const auto taps = pulse_response(g, linear, p.cfg.channel, p.cfg.detector, 1.0, 1);
    RunSpec run = cfg.run;
    const std::size_t frame_bits = oc.bits_per_frame() * static_cast<std::size_t>(cfg.ofdm.frames_per_trial);

    auto trial = [&](std::uint64_t index) {
        auto rng = detail::trial_rng(cfg.seed, index);
        Bits bits(frame_bits);
        for (std::size_t i = 0; i < bits.size(); i += 64) {
            const std::uint64_t r = rng();
            for (std::size_t b = 0; b < 64 && i + b < bits.size(); ++b)
                bits[i + b] = static_cast<std::uint8_t>((r >> b) & 1u);
        }
        auto w = dco_modulate(bits, oc, g, amplitude);
        w = led_transfer(w, p.cfg.led);
        const auto y = propagate_and_detect(w, p.cfg.channel, p.cfg.detector, rng);
        const auto z = slot_integrals(y);
        const auto dec = dco_demodulate(z.values, oc, taps, amplitude);
        TrialOutcome o;
        o.bits = bits.size();
        o.symbols = static_cast<std::uint64_t>(cfg.ofdm.frames_per_trial) * static_cast<std::uint64_t>(oc.data_subcarriers());
        for (std::size_t i = 0; i < bits.size(); ++i)
            o.bit_errors += bits[i] != dec.bits[i];
        const int bq = oc.bits_per_qam();
        for (std::size_t s = 0; s < o.symbols; ++s)
            for (int i = 0; i < bq; ++i)
                if (bits[s * static_cast<std::size_t>(bq) + static_cast<std::size_t>(i)] !=
                    dec.bits[s * static_cast<std::size_t>(bq) + static_cast<std::size_t>(i)]) {
                    ++o.symbol_errors;
                    break;
                }
        return o;
    };
    const auto outcomes = detail::run_rounds(run, workers > 0 ? workers : cfg.run.workers, trial);
    TrialReport r;
    r.scheme = "dco-ofdm-n" + std::to_string(oc.n_subcarriers) + "-qam" + std::to_string(oc.qam_order);
    r.parameters = config_to_json(cfg);
    r.parameters["resolved"] = {{"amplitude", amplitude},
                                {"mean_drive", p.mean_drive},
                                {"thermal_noise_density", p.cfg.detector.thermal_noise_density},
                                {"saturation_power", p.cfg.led.saturation_power}};
    r.rng_seed = cfg.seed;
    for (const auto& o : outcomes) {
        r.bits_sent += o.bits;
        r.bit_errors += o.bit_errors;
        r.symbols_sent += o.symbols;
        r.symbol_errors += o.symbol_errors;
    }
    r.trials = outcomes.size();
    detail::finish_report(r);
    r.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

// ---------------------------------------------------------------------------
// Flicker experiment

struct FlickerPoint {
    double window_slots = 0;
    double metric = 0;
};

/// Flicker metric of a random symbol stream at each configured window.
inline std::vector<FlickerPoint> flicker_run(const ExperimentConfig& cfg)
{
    require(cfg.flicker.symbols >= 1, ErrorKind::invalid_config, "flicker needs at least one symbol");
    const auto c = build_constellation(cfg.scheme);
    auto rng = detail::trial_rng(cfg.seed, 0);
    std::vector<Codeword> stream;
    stream.reserve(static_cast<std::size_t>(cfg.flicker.symbols));
    for (int i = 0; i < cfg.flicker.symbols; ++i)
        stream.push_back(c.symbol(rng() % c.size()));
    const auto& g = cfg.link.geometry;
    const auto w = synthesize(stream, g, 1.0);
    auto windows = cfg.flicker.window_slots;
    if (windows.empty())
        for (int k : {1, 2, 4})
            windows.push_back(double(k * c.Q()));
    std::vector<FlickerPoint> out;
    for (double ws : windows)
        out.push_back({ws, flicker_metric(w, ws * g.slot_duration)});
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps

inline ExperimentConfig at_point(ExperimentConfig cfg, SweepAxis axis, double v)
{
    switch (axis) {
    case SweepAxis::snr: cfg.link.snr_db = v; break;
    case SweepAxis::dimming: cfg.link.dimming = v; break;
    case SweepAxis::delay_spread:
        cfg.channel.nlos_decay = v * cfg.link.geometry.slot_duration;
        if (cfg.channel.nlos_gain <= 0)
            cfg.channel.nlos_gain = 1.0;
        break;
    case SweepAxis::saturation: cfg.link.saturation_ratio = v; break;
    case SweepAxis::none: break;
    }
    return cfg;
}

template <class Runner>
std::vector<TrialReport> sweep_with(const ExperimentConfig& cfg, SweepAxis axis, std::span<const double> points, int workers, Runner&& runner)
{
    require(axis != SweepAxis::none, ErrorKind::invalid_parameter, "sweep needs an axis");
    require(points.size() >= 2, ErrorKind::invalid_parameter, "sweep needs at least two points");
    std::vector<TrialReport> out;
    for (double v : points) {
        auto r = runner(at_point(cfg, axis, v), workers);
        r.axis_value = v;
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<TrialReport> sweep(const ExperimentConfig& cfg, SweepAxis axis, std::span<const double> points, int workers = 0)
{
    return sweep_with(cfg, axis, points, workers, [](const ExperimentConfig& c, int w) { return run_trials(c, w); });
}

// ---------------------------------------------------------------------------
// Result files

inline std::string format_real(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6e", v);
    return buf;
}

inline std::string results_csv(std::span<const TrialReport> rows)
{
    std::string out = "axis_value,bits,errors,ber,ci95,flag,seed\n";
    for (const auto& r : rows) {
        out += format_real(r.axis_value) + "," + std::to_string(r.bits_sent) + "," + std::to_string(r.bit_errors) + "," +
               format_real(r.ber) + "," + format_real(r.ci95) + "," + (r.ci_valid ? "ok" : "low_errors") + "," +
               std::to_string(r.rng_seed) + "\n";
    }
    return out;
}

inline nlohmann::json report_json(const TrialReport& r)
{
    nlohmann::json j = {{"scheme", r.scheme},
                        {"bits_sent", r.bits_sent},
                        {"bit_errors", r.bit_errors},
                        {"symbols_sent", r.symbols_sent},
                        {"symbol_errors", r.symbol_errors},
                        {"trials", r.trials},
                        {"ber", r.ber},
                        {"ser", r.ser},
                        {"ci95", r.ci95},
                        {"ci_valid", r.ci_valid},
                        {"rng_seed", r.rng_seed},
                        {"parameters", r.parameters}};
    if (std::isfinite(r.axis_value))
        j["axis_value"] = r.axis_value;
    return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    require(bool(out), ErrorKind::invalid_input, "cannot write " + path.string());
    out << text;
    require(bool(out), ErrorKind::invalid_input, "write failed for " + path.string());
}

/// Writes `{stem}.csv` and `{stem}.manifest.json`; returns the CSV path.
inline std::filesystem::path write_results(const std::filesystem::path& dir, const std::string& stem, std::span<const TrialReport> rows,
                                           const nlohmann::json& extra = nlohmann::json::object())
{
    std::filesystem::create_directories(dir);
    const auto csv = dir / (stem + ".csv");
    write_text(csv, results_csv(rows));
    nlohmann::json m = {{"toolkit_version", toolkit_version},
                        {"config_schema_version", config_schema_version},
                        {"csv", csv.filename().string()},
                        {"snr_definition", "slot SNR A^2/sigma^2 at the integrator output; A is the slot integral of one unit "
                                           "pulse through the ideal link, sigma^2 the slot-integrated noise variance"},
                        {"points", nlohmann::json::array()}};
    for (const auto& r : rows)
        m["points"].push_back(report_json(r));
    for (auto it = extra.begin(); it != extra.end(); ++it)
        m[it.key()] = it.value();
    write_text(dir / (stem + ".manifest.json"), m.dump(2) + "\n");
    return csv;
}

} // namespace vlc

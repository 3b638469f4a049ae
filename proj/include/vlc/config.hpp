// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vlc/analog_chain.hpp"
#include "vlc/constellations.hpp"
#include "vlc/error.hpp"
#include "vlc/ofdm.hpp"
#include "vlc/receiver.hpp"
#include "vlc/waveform.hpp"

namespace vlc {

struct LinkBudget {
    double illuminance = 400.0;        // lux
    double aperture_area = 1e-5;       // m^2
    double luminous_efficacy = 300.0;  // lm/W
};

enum class ReceiverMode { automatic, symbol, feedback };
enum class SweepAxis { none, snr, dimming, delay_spread, saturation };

inline const char* to_string(ReceiverMode m)
{
    switch (m) {
    case ReceiverMode::automatic: return "auto";
    case ReceiverMode::symbol: return "symbol";
    case ReceiverMode::feedback: return "feedback";
    }
    return "unknown";
}

inline const char* to_string(SweepAxis a)
{
    switch (a) {
    case SweepAxis::none: return "none";
    case SweepAxis::snr: return "snr";
    case SweepAxis::dimming: return "dimming";
    case SweepAxis::delay_spread: return "delay_spread";
    case SweepAxis::saturation: return "saturation";
    }
    return "unknown";
}

struct SchemeSpec {
    Scheme scheme = Scheme::eppm;
    int Q = 7, K = 3, N = 1;
    bool use_complements = false;
    std::uint64_t search_seed = 0;
    int payload_bits = 0;  // 0: full bits_per_symbol
};

struct LinkSpec {
    SlotGeometry geometry;
    double peak_power_per_unit = 1e-6;  // W of drive per unit pulse
    double received_power = 0.0;        // W mean at the detector; overrides peak power when > 0
    int n_leds = 0;                     // 0: one LED carries the multilevel drive
    int n_colors = 1;
    double dimming = 0.0;               // target mean/peak ratio, 0 = off
    double snr_db = std::numeric_limits<double>::quiet_NaN();  // sets thermal noise when finite
    double saturation_ratio = 0.0;      // saturation / mean drive when > 0
};

struct ReceiverSpec {
    ReceiverMode mode = ReceiverMode::automatic;
    DecoderKind decoder = DecoderKind::automatic;
    int lookahead = -1;  // slots past the symbol seen by the feedback sphere decoder; -1 picks min(Q, response tail)
};

struct RunSpec {
    std::uint64_t max_bits = 10'000'000;
    std::uint64_t min_errors = 100;
    int frame_symbols = 64;
    int round_trials = 16;
    int workers = 1;
};

struct SweepSpec {
    SweepAxis axis = SweepAxis::none;
    std::vector<double> points;
};

struct OfdmSpec {
    bool enabled = false;
    OfdmConfig cfg;
    int frames_per_trial = 4;
};

struct FlickerSpec {
    int symbols = 10000;
    std::vector<double> window_slots;  // empty: 1, 2 and 4 symbols
};

struct ExperimentConfig {
    std::string name = "experiment";
    SchemeSpec scheme;
    LinkSpec link;
    std::string led_preset;
    LedModel led;
    bool saturation_auto = true;  // twice the peak drive of one device
    ChannelModel channel;
    DetectorModel detector;
    std::optional<LinkBudget> budget;
    InterleaverSpec interleaver;
    ReceiverSpec receiver;
    RunSpec run;
    SweepSpec sweep;
    OfdmSpec ofdm;
    FlickerSpec flicker;
    std::uint64_t seed = 1;
};

// ---------------------------------------------------------------------------
// JSON

namespace detail {

class Block {
public:
    Block(const nlohmann::json& j, std::string path, std::set<std::string> allowed) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            throw ConfigError(path_.empty() ? "/" : path_, "expected an object");
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!allowed.count(it.key()))
                throw ConfigError(path_ + "/" + it.key(), "unknown key");
    }

    bool has(const std::string& key) const { return j_.contains(key); }
    std::string at(const std::string& key) const { return path_ + "/" + key; }
    const nlohmann::json& raw(const std::string& key) const { return j_.at(key); }

    template <class T>
    void read(const std::string& key, T& out) const
    {
        if (!j_.contains(key))
            return;
        const auto& v = j_.at(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean())
                    throw ConfigError(at(key), "expected a boolean");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer())
                    throw ConfigError(at(key), "expected an integer");
                if constexpr (std::is_unsigned_v<T>)
                    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
                        throw ConfigError(at(key), "expected a nonnegative integer");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number())
                    throw ConfigError(at(key), "expected a number");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string())
                    throw ConfigError(at(key), "expected a string");
            }
            out = v.get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(at(key), e.what());
        }
    }

    template <class T>
    void read_positive(const std::string& key, T& out) const
    {
        read(key, out);
        if (has(key) && !(out > 0))
            throw ConfigError(at(key), "must be positive");
    }

    template <class T>
    void read_nonnegative(const std::string& key, T& out) const
    {
        read(key, out);
        if (has(key) && out < 0)
            throw ConfigError(at(key), "must be nonnegative");
    }

private:
    const nlohmann::json& j_;
    std::string path_;
};

inline std::optional<ReceiverMode> mode_from_string(const std::string& s)
{
    if (s == "auto") return ReceiverMode::automatic;
    if (s == "symbol") return ReceiverMode::symbol;
    if (s == "feedback") return ReceiverMode::feedback;
    return std::nullopt;
}

inline std::optional<SweepAxis> axis_from_string(const std::string& s)
{
    if (s == "none") return SweepAxis::none;
    if (s == "snr") return SweepAxis::snr;
    if (s == "dimming") return SweepAxis::dimming;
    if (s == "delay_spread") return SweepAxis::delay_spread;
    if (s == "saturation") return SweepAxis::saturation;
    return std::nullopt;
}

} // namespace detail

/// Parses an experiment document. Every failure is a ConfigError carrying
/// the JSON pointer of the offending value.
inline ExperimentConfig config_from_json(const nlohmann::json& j)
{
    using detail::Block;
    ExperimentConfig c;
    const Block root(j, "", {"name", "seed", "scheme", "geometry", "link", "budget", "device", "channel", "detector", "interleaver",
                             "receiver", "run", "sweep", "ofdm", "flicker"});
    root.read("name", c.name);
    root.read("seed", c.seed);

    if (root.has("scheme")) {
        const Block b(root.raw("scheme"), "/scheme", {"type", "Q", "K", "N", "use_complements", "search_seed", "payload_bits"});
        std::string type(to_string(c.scheme.scheme));
        b.read("type", type);
        const auto s = scheme_from_string(type);
        if (!s)
            throw ConfigError("/scheme/type", "unknown scheme '" + type + "'");
        c.scheme.scheme = *s;
        b.read("Q", c.scheme.Q);
        b.read("K", c.scheme.K);
        b.read("N", c.scheme.N);
        b.read("use_complements", c.scheme.use_complements);
        b.read("search_seed", c.scheme.search_seed);
        b.read_nonnegative("payload_bits", c.scheme.payload_bits);
        if (c.scheme.Q < 2)
            throw ConfigError("/scheme/Q", "must be >= 2");
        if (c.scheme.scheme != Scheme::ppm && (c.scheme.K < 1 || c.scheme.K >= c.scheme.Q))
            throw ConfigError("/scheme/K", "must satisfy 1 <= K < Q");
        if (c.scheme.N < 1)
            throw ConfigError("/scheme/N", "must be >= 1");
    }

    if (root.has("geometry")) {
        const Block b(root.raw("geometry"), "/geometry", {"slot_duration", "samples_per_slot", "overlap_factor", "cross_symbol_boundaries"});
        auto& g = c.link.geometry;
        b.read_positive("slot_duration", g.slot_duration);
        b.read_positive("samples_per_slot", g.samples_per_slot);
        b.read_positive("overlap_factor", g.overlap_factor);
        b.read("cross_symbol_boundaries", g.cross_symbol_boundaries);
        if (g.samples_per_slot < 2 * g.overlap_factor)
            throw ConfigError("/geometry/samples_per_slot", "must be >= 2 * overlap_factor");
    }

    if (root.has("link")) {
        const Block b(root.raw("link"), "/link",
                      {"peak_power_per_unit", "received_power", "n_leds", "n_colors", "dimming", "snr_db", "saturation_ratio"});
        b.read_positive("peak_power_per_unit", c.link.peak_power_per_unit);
        b.read_nonnegative("received_power", c.link.received_power);
        b.read_nonnegative("n_leds", c.link.n_leds);
        b.read_positive("n_colors", c.link.n_colors);
        b.read_nonnegative("dimming", c.link.dimming);
        if (c.link.dimming > 1)
            throw ConfigError("/link/dimming", "must be in (0, 1]");
        b.read("snr_db", c.link.snr_db);
        b.read_nonnegative("saturation_ratio", c.link.saturation_ratio);
    }

    if (root.has("budget")) {
        const Block b(root.raw("budget"), "/budget", {"illuminance", "aperture_area", "luminous_efficacy"});
        LinkBudget lb;
        b.read_positive("illuminance", lb.illuminance);
        b.read_positive("aperture_area", lb.aperture_area);
        b.read_positive("luminous_efficacy", lb.luminous_efficacy);
        c.budget = lb;
    }

    if (root.has("device")) {
        const Block b(root.raw("device"), "/device",
                      {"preset", "bandwidth_3db", "saturation_power", "knee_sharpness", "linear_gain", "nonlinearity", "lowpass"});
        b.read("preset", c.led_preset);
        if (!c.led_preset.empty()) {
            try {
                c.led = led_preset(c.led_preset, 1.0);
            } catch (const Error& e) {
                throw ConfigError("/device/preset", e.what());
            }
        }
        b.read_positive("bandwidth_3db", c.led.bandwidth_3db);
        if (b.has("saturation_power")) {
            b.read_positive("saturation_power", c.led.saturation_power);
            c.saturation_auto = false;
        }
        b.read("knee_sharpness", c.led.knee_sharpness);
        if (c.led.knee_sharpness < 1)
            throw ConfigError("/device/knee_sharpness", "must be >= 1");
        b.read_positive("linear_gain", c.led.linear_gain);
        b.read("nonlinearity", c.led.nonlinearity);
        b.read("lowpass", c.led.lowpass);
    }

    if (root.has("channel")) {
        const Block b(root.raw("channel"), "/channel", {"los_gain", "los_delay", "nlos_gain", "nlos_decay", "shadowed"});
        b.read_nonnegative("los_gain", c.channel.los_gain);
        b.read_nonnegative("los_delay", c.channel.los_delay);
        b.read_nonnegative("nlos_gain", c.channel.nlos_gain);
        b.read_nonnegative("nlos_decay", c.channel.nlos_decay);
        b.read("shadowed", c.channel.shadowed);
        if (c.channel.nlos_gain > 0 && c.channel.nlos_decay <= 0)
            throw ConfigError("/channel/nlos_decay", "must be positive when nlos_gain > 0");
    }

    if (root.has("detector")) {
        const Block b(root.raw("detector"), "/detector",
                      {"responsivity", "aperture_area", "background_power", "thermal_noise_density", "bandwidth", "signal_shot_noise"});
        b.read_positive("responsivity", c.detector.responsivity);
        b.read_positive("aperture_area", c.detector.aperture_area);
        b.read_nonnegative("background_power", c.detector.background_power);
        b.read_nonnegative("thermal_noise_density", c.detector.thermal_noise_density);
        b.read_nonnegative("bandwidth", c.detector.bandwidth);
        b.read("signal_shot_noise", c.detector.signal_shot_noise);
    }

    if (root.has("interleaver")) {
        const Block b(root.raw("interleaver"), "/interleaver", {"depth", "permutation", "seed"});
        b.read_positive("depth", c.interleaver.depth);
        std::string perm = "row_column";
        b.read("permutation", perm);
        if (perm == "random")
            c.interleaver.permutation = Permutation::random;
        else if (perm != "row_column")
            throw ConfigError("/interleaver/permutation", "unknown permutation '" + perm + "'");
        b.read("seed", c.interleaver.seed);
    }

    if (root.has("receiver")) {
        const Block b(root.raw("receiver"), "/receiver", {"mode", "decoder", "lookahead"});
        std::string mode = "auto", dec = "auto";
        b.read("mode", mode);
        b.read("decoder", dec);
        const auto m = detail::mode_from_string(mode);
        if (!m)
            throw ConfigError("/receiver/mode", "unknown receiver mode '" + mode + "'");
        const auto d = decoder_from_string(dec);
        if (!d)
            throw ConfigError("/receiver/decoder", "unknown decoder '" + dec + "'");
        c.receiver.mode = *m;
        c.receiver.decoder = *d;
        b.read("lookahead", c.receiver.lookahead);
        if (c.receiver.lookahead < -1)
            throw ConfigError("/receiver/lookahead", "must be >= 0, or -1 for automatic");
    }

    if (root.has("run")) {
        const Block b(root.raw("run"), "/run", {"max_bits", "min_errors", "frame_symbols", "round_trials", "workers"});
        b.read_positive("max_bits", c.run.max_bits);
        b.read_positive("min_errors", c.run.min_errors);
        b.read_positive("frame_symbols", c.run.frame_symbols);
        b.read_positive("round_trials", c.run.round_trials);
        b.read_positive("workers", c.run.workers);
        if (c.run.frame_symbols % c.interleaver.depth != 0)
            throw ConfigError("/run/frame_symbols", "must be a multiple of the interleaver depth");
    }

    if (root.has("sweep")) {
        const Block b(root.raw("sweep"), "/sweep", {"axis", "points"});
        std::string axis = "none";
        b.read("axis", axis);
        const auto a = detail::axis_from_string(axis);
        if (!a)
            throw ConfigError("/sweep/axis", "unknown sweep axis '" + axis + "'");
        c.sweep.axis = *a;
        if (b.has("points")) {
            const auto& pts = b.raw("points");
            if (!pts.is_array())
                throw ConfigError("/sweep/points", "expected an array");
            for (std::size_t i = 0; i < pts.size(); ++i) {
                if (!pts[i].is_number())
                    throw ConfigError("/sweep/points/" + std::to_string(i), "expected a number");
                c.sweep.points.push_back(pts[i].get<double>());
            }
        }
    }

    if (root.has("ofdm")) {
        const Block b(root.raw("ofdm"), "/ofdm", {"n_subcarriers", "qam_order", "dc_bias_sigma", "cyclic_prefix", "clip", "frames_per_trial"});
        c.ofdm.enabled = true;
        auto& o = c.ofdm.cfg;
        b.read("n_subcarriers", o.n_subcarriers);
        b.read("qam_order", o.qam_order);
        b.read_nonnegative("dc_bias_sigma", o.dc_bias_sigma);
        b.read_nonnegative("cyclic_prefix", o.cyclic_prefix);
        b.read("clip", o.clip);
        b.read_positive("frames_per_trial", c.ofdm.frames_per_trial);
        if (o.n_subcarriers < 8 || (o.n_subcarriers & (o.n_subcarriers - 1)))
            throw ConfigError("/ofdm/n_subcarriers", "must be a power of two >= 8");
        if (o.qam_order != 4 && o.qam_order != 16 && o.qam_order != 64)
            throw ConfigError("/ofdm/qam_order", "must be 4, 16 or 64");
    }

    if (root.has("flicker")) {
        const Block b(root.raw("flicker"), "/flicker", {"symbols", "window_slots"});
        b.read_positive("symbols", c.flicker.symbols);
        if (b.has("window_slots")) {
            const auto& w = b.raw("window_slots");
            if (!w.is_array())
                throw ConfigError("/flicker/window_slots", "expected an array");
            for (std::size_t i = 0; i < w.size(); ++i) {
                if (!w[i].is_number() || w[i].get<double>() < 1)
                    throw ConfigError("/flicker/window_slots/" + std::to_string(i), "expected a number >= 1");
                c.flicker.window_slots.push_back(w[i].get<double>());
            }
        }
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("", "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    return config_from_json(j);
}

/// The normalized configuration, every field explicit.
inline nlohmann::json config_to_json(const ExperimentConfig& c)
{
    nlohmann::json j;
    j["name"] = c.name;
    j["seed"] = c.seed;
    j["scheme"] = {{"type", to_string(c.scheme.scheme)}, {"Q", c.scheme.Q},
                   {"K", c.scheme.K},                    {"N", c.scheme.N},
                   {"use_complements", c.scheme.use_complements}, {"search_seed", c.scheme.search_seed},
                   {"payload_bits", c.scheme.payload_bits}};
    j["geometry"] = geometry_json(c.link.geometry);
    j["link"] = {{"peak_power_per_unit", c.link.peak_power_per_unit},
                 {"received_power", c.link.received_power},
                 {"n_leds", c.link.n_leds},
                 {"n_colors", c.link.n_colors},
                 {"dimming", c.link.dimming},
                 {"saturation_ratio", c.link.saturation_ratio}};
    if (std::isfinite(c.link.snr_db))
        j["link"]["snr_db"] = c.link.snr_db;
    if (c.budget)
        j["budget"] = {{"illuminance", c.budget->illuminance},
                       {"aperture_area", c.budget->aperture_area},
                       {"luminous_efficacy", c.budget->luminous_efficacy}};
    j["device"] = {{"bandwidth_3db", c.led.bandwidth_3db}, {"knee_sharpness", c.led.knee_sharpness},
                   {"linear_gain", c.led.linear_gain},     {"nonlinearity", c.led.nonlinearity},
                   {"lowpass", c.led.lowpass}};
    if (!c.led_preset.empty())
        j["device"]["preset"] = c.led_preset;
    if (!c.saturation_auto)
        j["device"]["saturation_power"] = c.led.saturation_power;
    j["channel"] = {{"los_gain", c.channel.los_gain},   {"los_delay", c.channel.los_delay},
                    {"nlos_gain", c.channel.nlos_gain}, {"nlos_decay", c.channel.nlos_decay},
                    {"shadowed", c.channel.shadowed}};
    j["detector"] = {{"responsivity", c.detector.responsivity},
                     {"aperture_area", c.detector.aperture_area},
                     {"background_power", c.detector.background_power},
                     {"thermal_noise_density", c.detector.thermal_noise_density},
                     {"bandwidth", c.detector.bandwidth},
                     {"signal_shot_noise", c.detector.signal_shot_noise}};
    j["interleaver"] = {{"depth", c.interleaver.depth},
                        {"permutation", to_string(c.interleaver.permutation)},
                        {"seed", c.interleaver.seed}};
    j["receiver"] = {{"mode", to_string(c.receiver.mode)}, {"decoder", to_string(c.receiver.decoder)}, {"lookahead", c.receiver.lookahead}};
    j["run"] = {{"max_bits", c.run.max_bits},
                {"min_errors", c.run.min_errors},
                {"frame_symbols", c.run.frame_symbols},
                {"round_trials", c.run.round_trials}};
    j["sweep"] = {{"axis", to_string(c.sweep.axis)}, {"points", c.sweep.points}};
    j["flicker"] = {{"symbols", c.flicker.symbols}, {"window_slots", c.flicker.window_slots}};
    if (c.ofdm.enabled)
        j["ofdm"] = {{"n_subcarriers", c.ofdm.cfg.n_subcarriers}, {"qam_order", c.ofdm.cfg.qam_order},
                     {"dc_bias_sigma", c.ofdm.cfg.dc_bias_sigma}, {"cyclic_prefix", c.ofdm.cfg.cyclic_prefix},
                     {"clip", c.ofdm.cfg.clip},                   {"frames_per_trial", c.ofdm.frames_per_trial}};
    return j;
}

} // namespace vlc

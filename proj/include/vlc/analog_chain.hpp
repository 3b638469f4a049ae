// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vlc/error.hpp"
#include "vlc/waveform.hpp"

namespace vlc {

inline constexpr double electron_charge = 1.602176634e-19;

struct LedModel {
    double bandwidth_3db = 30e6;     // Hz
    double saturation_power = 1e-3;  // W
    double knee_sharpness = 1.0;     // Rapp s
    double linear_gain = 1.0;        // W per unit drive
    bool nonlinearity = true;
    bool lowpass = true;

    void validate() const
    {
        require(bandwidth_3db > 0, ErrorKind::invalid_parameter, "LED bandwidth must be positive");
        require(saturation_power > 0, ErrorKind::invalid_parameter, "LED saturation power must be positive");
        require(knee_sharpness >= 1, ErrorKind::invalid_parameter, "LED knee sharpness must be >= 1");
        require(linear_gain > 0, ErrorKind::invalid_parameter, "LED linear gain must be positive");
    }
};

/// Named device presets. Saturation sits at twice the nominal peak drive.
inline LedModel led_preset(const std::string& name, double nominal_peak)
{
    LedModel m;
    if (name == "phosphor")
        m.bandwidth_3db = 3e6;
    else if (name == "trichromatic")
        m.bandwidth_3db = 30e6;
    else
        fail(ErrorKind::invalid_parameter, "unknown LED preset '" + name + "'");
    m.saturation_power = 2.0 * nominal_peak;
    return m;
}

/// Memoryless soft saturation.
inline double rapp(double x, const LedModel& m)
{
    const double lin = m.linear_gain * x;
    if (!m.nonlinearity || lin <= 0)
        return lin;
    const double p = 2.0 * m.knee_sharpness;
    return lin / std::pow(1.0 + std::pow(lin / m.saturation_power, p), 1.0 / p);
}

inline double lowpass_coefficient(double bandwidth_3db, double sample_rate)
{
    return 1.0 - std::exp(-2.0 * std::numbers::pi * bandwidth_3db / sample_rate);
}

inline Waveform led_transfer(const Waveform& w, const LedModel& m)
{
    m.validate();
    Waveform out = w;
    out.unit = 0.0;
    for (auto& v : out.samples) {
        require(v >= 0, ErrorKind::invalid_input, "LED drive must be nonnegative");
        v = rapp(v, m);
    }
    if (m.lowpass) {
        const double a = lowpass_coefficient(m.bandwidth_3db, w.sample_rate);
        double state = 0.0;
        for (auto& v : out.samples) {
            state += a * (v - state);
            v = state;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Channel

struct ChannelModel {
    double los_gain = 1.0;
    double los_delay = 0.0;   // s
    double nlos_gain = 0.0;
    double nlos_decay = 0.0;  // s
    bool shadowed = false;

    void validate() const
    {
        require(los_gain >= 0 && nlos_gain >= 0, ErrorKind::invalid_parameter, "channel gains must be nonnegative");
        require(los_delay >= 0, ErrorKind::invalid_parameter, "LOS delay must be nonnegative");
        require(nlos_gain == 0 || nlos_decay > 0, ErrorKind::invalid_parameter, "NLOS decay must be positive");
    }
    double total_gain() const { return (shadowed ? 0.0 : los_gain) + nlos_gain; }
};

/// Taps needed to cover the LOS delay and five NLOS decay constants.
inline std::size_t channel_min_length(const ChannelModel& cm, double sample_rate)
{
    const auto d = static_cast<std::size_t>(std::lround(cm.los_delay * sample_rate));
    const auto tail = cm.nlos_gain > 0 ? static_cast<std::size_t>(std::ceil(5.0 * cm.nlos_decay * sample_rate)) : 0;
    return d + std::max<std::size_t>(tail, 1);
}

/// LOS impulse plus an exponential NLOS tail starting at the LOS delay. Each
/// tail tap is the exact integral of the decay over its sample period, then
/// the tail is rescaled so the taps sum to the nominal gains.
inline std::vector<double> channel_impulse_response(const ChannelModel& cm, double sample_rate, std::size_t length)
{
    cm.validate();
    require(sample_rate > 0, ErrorKind::invalid_parameter, "sample rate must be positive");
    require(length >= channel_min_length(cm, sample_rate), ErrorKind::invalid_parameter,
            "impulse response length " + std::to_string(length) + " is shorter than the channel memory");
    std::vector<double> h(length, 0.0);
    const auto d = static_cast<std::size_t>(std::lround(cm.los_delay * sample_rate));
    if (!cm.shadowed)
        h[d] += cm.los_gain;
    if (cm.nlos_gain > 0) {
        const double r = 1.0 / (cm.nlos_decay * sample_rate);
        std::vector<double> tail(length - d);
        double sum = 0;
        for (std::size_t k = 0; k < tail.size(); ++k) {
            tail[k] = std::exp(-r * double(k)) - std::exp(-r * double(k + 1));
            sum += tail[k];
        }
        for (std::size_t k = 0; k < tail.size(); ++k)
            h[d + k] += cm.nlos_gain * tail[k] / sum;
    }
    return h;
}

inline std::vector<double> convolve_causal(std::span<const double> x, std::span<const double> h)
{
    std::vector<double> y(x.size(), 0.0);
    std::size_t taps = h.size();
    while (taps > 0 && h[taps - 1] == 0.0)
        --taps;
    for (std::size_t n = 0; n < x.size(); ++n) {
        if (x[n] == 0.0)
            continue;
        const std::size_t last = std::min(taps, x.size() - n);
        for (std::size_t k = 0; k < last; ++k)
            y[n + k] += x[n] * h[k];
    }
    return y;
}

// ---------------------------------------------------------------------------
// Detection

struct DetectorModel {
    double responsivity = 0.5;           // A/W
    double aperture_area = 1e-5;         // m^2
    double background_power = 0.0;       // W
    double thermal_noise_density = 0.0;  // A^2/Hz
    double bandwidth = 0.0;              // Hz, front-end bandwidth for the record
    bool signal_shot_noise = true;       // false leaves only background shot and thermal noise

    void validate() const
    {
        require(responsivity > 0, ErrorKind::invalid_parameter, "responsivity must be positive");
        require(aperture_area > 0, ErrorKind::invalid_parameter, "aperture area must be positive");
        require(background_power >= 0 && thermal_noise_density >= 0, ErrorKind::invalid_parameter,
                "noise parameters must be nonnegative");
    }
    bool noiseless() const
    {
        return thermal_noise_density == 0 && background_power == 0 && !signal_shot_noise;
    }
};

/// Noise variance of one sample for instantaneous received power p.
inline double sample_noise_variance(const DetectorModel& dm, double p, double sample_rate)
{
    const double shot = 2.0 * electron_charge * dm.responsivity * ((dm.signal_shot_noise ? std::max(p, 0.0) : 0.0) + dm.background_power);
    return (shot + dm.thermal_noise_density) * sample_rate / 2.0;
}

/// Photocurrent R (h * w) plus Gaussian shot and thermal noise.
inline Waveform propagate_and_detect(const Waveform& w, const ChannelModel& cm, const DetectorModel& dm, std::mt19937_64& rng)
{
    dm.validate();
    const auto h = channel_impulse_response(cm, w.sample_rate, channel_min_length(cm, w.sample_rate));
    Waveform out = w;
    out.unit = 0.0;
    const bool identity = h.size() == 1 && h[0] == 1.0;
    std::vector<double> rx = identity ? w.samples : convolve_causal(w.samples, h);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t n = 0; n < rx.size(); ++n) {
        double y = dm.responsivity * rx[n];
        const double var = sample_noise_variance(dm, rx[n], w.sample_rate);
        if (var > 0)
            y += std::sqrt(var) * gauss(rng);
        out.samples[n] = y;
    }
    return out;
}

inline Waveform propagate_and_detect(const Waveform& w, const ChannelModel& cm, const DetectorModel& dm, std::uint64_t seed)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    std::mt19937_64 rng(seq);
    return propagate_and_detect(w, cm, dm, rng);
}

} // namespace vlc

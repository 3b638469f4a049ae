// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "vlc/error.hpp"
#include "vlc/fft.hpp"
#include "vlc/waveform.hpp"

namespace vlc {

using cplx = std::complex<double>;

struct OfdmConfig {
    int n_subcarriers = 64;
    int qam_order = 4;
    double dc_bias_sigma = 3.0;
    int cyclic_prefix = 0;
    bool clip = true;

    void validate() const
    {
        require(n_subcarriers >= 8 && (n_subcarriers & (n_subcarriers - 1)) == 0, ErrorKind::invalid_parameter,
                "n_subcarriers must be a power of two >= 8");
        require(qam_order == 4 || qam_order == 16 || qam_order == 64, ErrorKind::invalid_parameter, "qam_order must be 4, 16 or 64");
        require(cyclic_prefix >= 0, ErrorKind::invalid_parameter, "cyclic_prefix must be >= 0");
        require(dc_bias_sigma >= 0, ErrorKind::invalid_parameter, "dc_bias_sigma must be >= 0");
    }
    int bits_per_qam() const { return qam_order == 4 ? 2 : qam_order == 16 ? 4 : 6; }
    int data_subcarriers() const { return n_subcarriers / 2 - 1; }
    std::size_t bits_per_frame() const { return static_cast<std::size_t>(data_subcarriers() * bits_per_qam()); }
    std::size_t samples_per_frame() const { return static_cast<std::size_t>(n_subcarriers + cyclic_prefix); }
};

// ---------------------------------------------------------------------------
// Gray-coded square QAM with unit average energy

namespace detail {

inline int gray_to_binary(int g)
{
    int b = 0;
    for (; g; g >>= 1)
        b ^= g;
    return b;
}

inline double qam_norm(int m) { return std::sqrt(2.0 * (m - 1) / 3.0); }

} // namespace detail

inline cplx qam_map(std::span<const std::uint8_t> bits, int m)
{
    const int half = (m == 4 ? 2 : m == 16 ? 4 : 6) / 2;
    const int levels = 1 << half;
    auto axis = [&](std::size_t off) {
        int g = 0;
        for (int i = 0; i < half; ++i)
            g = (g << 1) | (bits[off + static_cast<std::size_t>(i)] & 1);
        return 2.0 * detail::gray_to_binary(g) - (levels - 1);
    };
    return cplx(axis(0), axis(static_cast<std::size_t>(half))) / detail::qam_norm(m);
}

inline void qam_demap(cplx z, int m, std::vector<std::uint8_t>& out)
{
    const int half = (m == 4 ? 2 : m == 16 ? 4 : 6) / 2;
    const int levels = 1 << half;
    auto axis = [&](double v) {
        const double u = v * detail::qam_norm(m);
        int idx = static_cast<int>(std::lround((u + (levels - 1)) / 2.0));
        idx = std::clamp(idx, 0, levels - 1);
        const int g = idx ^ (idx >> 1);
        for (int i = half - 1; i >= 0; --i)
            out.push_back(static_cast<std::uint8_t>((g >> i) & 1));
    };
    axis(z.real());
    axis(z.imag());
}

// ---------------------------------------------------------------------------
// Modulation

/// Hermitian frequency frame: data on 1..N/2-1, mirrored conjugates above,
/// DC and Nyquist bins empty.
inline std::vector<cplx> hermitian_frame(std::span<const std::uint8_t> bits, const OfdmConfig& cfg)
{
    require(bits.size() == cfg.bits_per_frame(), ErrorKind::invalid_input, "bit count does not fill one OFDM frame");
    const int n = cfg.n_subcarriers, b = cfg.bits_per_qam();
    std::vector<cplx> x(static_cast<std::size_t>(n), 0.0);
    for (int k = 1; k < n / 2; ++k) {
        const cplx s = qam_map(bits.subspan(static_cast<std::size_t>((k - 1) * b), static_cast<std::size_t>(b)), cfg.qam_order);
        x[static_cast<std::size_t>(k)] = s;
        x[static_cast<std::size_t>(n - k)] = std::conj(s);
    }
    return x;
}

/// Time-domain frame scaled to unit variance. `max_imag` receives the largest
/// imaginary residue.
inline std::vector<double> frame_to_time(std::span<const cplx> freq, double* max_imag = nullptr)
{
    const int n = static_cast<int>(freq.size());
    const auto t = ifft_unnormalized(freq);
    const double scale = 1.0 / std::sqrt(double(n - 2));
    std::vector<double> out(static_cast<std::size_t>(n));
    double mi = 0;
    for (int i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = t[static_cast<std::size_t>(i)].real() * scale;
        mi = std::max(mi, std::abs(t[static_cast<std::size_t>(i)].imag() * scale));
    }
    if (max_imag)
        *max_imag = mi;
    return out;
}

/// Bipolar unit-variance signal with cyclic prefixes, before bias and clipping.
inline std::vector<double> dco_bipolar(std::span<const std::uint8_t> bits, const OfdmConfig& cfg)
{
    cfg.validate();
    const std::size_t fb = cfg.bits_per_frame();
    require(bits.size() % fb == 0, ErrorKind::invalid_input, "bit count is not a whole number of OFDM frames");
    std::vector<double> out;
    out.reserve(bits.size() / fb * cfg.samples_per_frame());
    for (std::size_t off = 0; off < bits.size(); off += fb) {
        const auto t = frame_to_time(hermitian_frame(bits.subspan(off, fb), cfg));
        out.insert(out.end(), t.end() - cfg.cyclic_prefix, t.end());
        out.insert(out.end(), t.begin(), t.end());
    }
    return out;
}

inline double dco_level(double x, const OfdmConfig& cfg)
{
    const double v = cfg.dc_bias_sigma + x;
    return cfg.clip ? std::max(0.0, v) : v;
}

/// DCO-OFDM intensity waveform. Each OFDM sample is held for one slot of g;
/// amplitude is watts per unit signal standard deviation.
inline Waveform dco_modulate(std::span<const std::uint8_t> bits, const OfdmConfig& cfg, const SlotGeometry& g = {},
                             double amplitude = 1.0)
{
    g.validate();
    require(g.overlap_factor == 1, ErrorKind::invalid_parameter, "OFDM uses one sample per slot (F = 1)");
    const auto x = dco_bipolar(bits, cfg);
    Waveform w;
    w.geometry = g;
    w.sample_rate = g.sample_rate();
    w.slots_per_symbol = static_cast<int>(cfg.samples_per_frame());
    w.samples.reserve(x.size() * static_cast<std::size_t>(g.samples_per_slot));
    for (double v : x) {
        const double p = amplitude * dco_level(v, cfg);
        for (int i = 0; i < g.samples_per_slot; ++i)
            w.samples.push_back(p);
    }
    return w;
}

// ---------------------------------------------------------------------------
// Demodulation

struct OfdmDecision {
    std::vector<std::uint8_t> bits;
    bool degraded = false;  // cyclic prefix shorter than the channel memory
};

/// Demodulates one statistic per OFDM sample. `taps` is the discrete
/// response to a unit drive held for one sample, so that
/// stats = taps * (amplitude * (bias + x)).
inline OfdmDecision dco_demodulate(std::span<const double> stats, const OfdmConfig& cfg, std::span<const double> taps,
                                   double amplitude = 1.0)
{
    cfg.validate();
    const std::size_t fs = cfg.samples_per_frame();
    require(stats.size() % fs == 0, ErrorKind::invalid_input, "statistics are not frame aligned");
    require(!taps.empty(), ErrorKind::invalid_input, "empty channel response");
    const int n = cfg.n_subcarriers;
    OfdmDecision out;
    std::size_t memory = taps.size();
    while (memory > 1 && taps[memory - 1] == 0.0)
        --memory;
    out.degraded = memory - 1 > static_cast<std::size_t>(cfg.cyclic_prefix);

    std::vector<cplx> h(static_cast<std::size_t>(n), 0.0);
    for (std::size_t i = 0; i < memory; ++i)
        h[i % static_cast<std::size_t>(n)] += taps[i];
    const auto hf = fft(h);
    const double gain = amplitude * n / std::sqrt(double(n - 2));

    std::vector<cplx> buf(static_cast<std::size_t>(n));
    out.bits.reserve(stats.size() / fs * cfg.bits_per_frame());
    for (std::size_t off = 0; off < stats.size(); off += fs) {
        for (int i = 0; i < n; ++i)
            buf[static_cast<std::size_t>(i)] = stats[off + static_cast<std::size_t>(cfg.cyclic_prefix + i)];
        const auto y = fft(buf);
        for (int k = 1; k < n / 2; ++k)
            qam_demap(y[static_cast<std::size_t>(k)] / (hf[static_cast<std::size_t>(k)] * gain), cfg.qam_order, out.bits);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Peak-to-average ratios

/// Largest peak-to-mean sample ratio over consecutive windows of `window`
/// symbols; window = 0 takes the whole waveform.
inline double papr_waveform(const Waveform& w, int window = 0)
{
    require(!w.samples.empty(), ErrorKind::invalid_input, "empty waveform");
    std::size_t len = w.samples.size();
    if (window > 0) {
        require(w.slots_per_symbol > 0, ErrorKind::invalid_input, "waveform has no symbol framing");
        len = static_cast<std::size_t>(window) * static_cast<std::size_t>(w.slots_per_symbol) *
              static_cast<std::size_t>(w.geometry.samples_per_slot);
        require(len <= w.samples.size(), ErrorKind::invalid_parameter, "window longer than the waveform");
    }
    double best = 0;
    for (std::size_t off = 0; off + len <= w.samples.size(); off += len) {
        double peak = 0, sum = 0;
        for (std::size_t i = off; i < off + len; ++i) {
            peak = std::max(peak, w.samples[i]);
            sum += w.samples[i];
        }
        if (sum > 0)
            best = std::max(best, peak * static_cast<double>(len) / sum);
    }
    return best;
}

/// Electrical PAPR (peak x^2 over mean x^2) of one unbiased frame, evaluated
/// on an L-times oversampled grid by zero-padding the spectrum.
inline double ofdm_frame_papr(std::span<const cplx> freq, int oversample = 1)
{
    require(oversample >= 1, ErrorKind::invalid_parameter, "oversample must be >= 1");
    const std::size_t n = freq.size();
    std::vector<cplx> padded(n * static_cast<std::size_t>(oversample), 0.0);
    for (std::size_t k = 0; k < n / 2; ++k)
        padded[k] = freq[k];
    for (std::size_t k = n / 2 + 1; k < n; ++k)
        padded[padded.size() - (n - k)] = freq[k];
    const auto t = ifft_unnormalized(padded);
    double peak = 0, sum = 0;
    for (const auto& v : t) {
        const double p = v.real() * v.real();
        peak = std::max(peak, p);
        sum += p;
    }
    return sum > 0 ? peak * static_cast<double>(t.size()) / sum : 0.0;
}

} // namespace vlc

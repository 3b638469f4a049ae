// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "vlc/analog_chain.hpp"
#include "vlc/constellations.hpp"
#include "vlc/waveform.hpp"

using namespace vlc;

namespace {

Waveform constant(double level, std::size_t n, double fs)
{
    Waveform w;
    w.geometry = SlotGeometry{2.0 / fs, 2, 1};
    w.sample_rate = fs;
    w.samples.assign(n, level);
    return w;
}

LedModel memoryless(double sat, double s = 1.0)
{
    LedModel m;
    m.saturation_power = sat;
    m.knee_sharpness = s;
    m.lowpass = false;
    return m;
}

DetectorModel quiet()
{
    DetectorModel d;
    d.signal_shot_noise = false;
    return d;
}

double variance(const std::vector<double>& v)
{
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    double acc = 0;
    for (double x : v)
        acc += (x - mean) * (x - mean);
    return acc / double(v.size() - 1);
}

} // namespace

TEST(Led, SmallSignalIsLinear)
{
    const auto m = memoryless(1e-3);
    for (double x : {1e-7, 1e-6, 5e-6})
        EXPECT_NEAR(rapp(x, m), x, 0.01 * x);
}

TEST(Led, SaturatesAtRatedPower)
{
    for (double s : {1.0, 2.0, 5.0}) {
        const auto m = memoryless(1e-3, s);
        EXPECT_NEAR(rapp(1.0, m), 1e-3, 1e-6);
        EXPECT_LE(rapp(1e3, m), 1e-3);
        EXPECT_LT(rapp(1e-3, m), 1e-3);
    }
}

TEST(Led, RappClosedForm)
{
    const auto m = memoryless(2.0, 1.0);
    EXPECT_DOUBLE_EQ(rapp(2.0, m), 2.0 / std::sqrt(2.0));
}

TEST(Led, MonotoneAndBounded)
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 200; ++t) {
        const auto m = memoryless(0.1 + u(rng), 1.0 + 4 * u(rng));
        double prev = -1;
        for (int i = 0; i <= 400; ++i) {
            const double x = 0.02 * i;
            const double y = rapp(x, m);
            // Far past the knee the output rounds to the ceiling.
            if (x <= 2 * m.saturation_power)
                EXPECT_GT(y, prev);
            else
                EXPECT_GE(y, prev * (1 - 1e-12));
            EXPECT_LE(y, m.saturation_power * (1 + 1e-12));
            prev = y;
        }
    }
}

TEST(Led, StepRiseTime)
{
    LedModel m;
    m.nonlinearity = false;
    m.bandwidth_3db = 10e6;
    const double fs = 10e9;
    const auto y = led_transfer(constant(1.0, 20000, fs), m);
    std::size_t t10 = 0, t90 = 0;
    for (std::size_t i = 0; i < y.samples.size(); ++i) {
        if (!t10 && y.samples[i] >= 0.1)
            t10 = i;
        if (!t90 && y.samples[i] >= 0.9) {
            t90 = i;
            break;
        }
    }
    const double rise = double(t90 - t10) / fs;
    EXPECT_NEAR(rise, 0.35 / 10e6, 0.02 * 35e-9);
}

TEST(Led, NegativeDriveRejected)
{
    auto w = constant(0.0, 4, 1e9);
    w.samples[2] = -1e-9;
    EXPECT_THROW(led_transfer(w, LedModel{}), Error);
}

TEST(Led, Presets)
{
    EXPECT_EQ(led_preset("phosphor", 1e-3).bandwidth_3db, 3e6);
    const auto t = led_preset("trichromatic", 1e-3);
    EXPECT_EQ(t.bandwidth_3db, 30e6);
    EXPECT_EQ(t.saturation_power, 2e-3);
    EXPECT_THROW(led_preset("laser", 1.0), Error);
}

TEST(Channel, PureLos)
{
    const auto h = channel_impulse_response(ChannelModel{}, 1e9, 1);
    EXPECT_EQ(h, (std::vector<double>{1.0}));
    ChannelModel d;
    d.los_delay = 3e-9;
    const auto hd = channel_impulse_response(d, 1e9, channel_min_length(d, 1e9));
    EXPECT_EQ(hd, (std::vector<double>{0, 0, 0, 1.0}));
}

TEST(Channel, ShadowedHasNoImpulse)
{
    ChannelModel cm{0.7, 0.0, 0.3, 10e-9, true};
    const auto h = channel_impulse_response(cm, 1e9, channel_min_length(cm, 1e9));
    EXPECT_NEAR(std::accumulate(h.begin(), h.end(), 0.0), 0.3, 1e-12);
    // Smooth decay: no tap stands out from the exponential envelope.
    for (std::size_t k = 1; k < h.size(); ++k)
        EXPECT_NEAR(h[k] / h[k - 1], std::exp(-0.1), 1e-12);
}

TEST(Channel, TapSumNormalized)
{
    ChannelModel cm{0.7, 0.0, 0.3, 10e-9, false};
    const auto h = channel_impulse_response(cm, 1e9, channel_min_length(cm, 1e9));
    EXPECT_NEAR(std::accumulate(h.begin(), h.end(), 0.0), 1.0, 1e-9);
    EXPECT_DOUBLE_EQ(cm.total_gain(), 1.0);
}

TEST(Channel, ShortLengthRejected)
{
    ChannelModel cm{0.7, 0.0, 0.3, 10e-9, false};
    EXPECT_THROW(channel_impulse_response(cm, 1e9, 49), Error);
    EXPECT_NO_THROW(channel_impulse_response(cm, 1e9, 50));
}

TEST(Detect, NoiselessIdentity)
{
    std::mt19937_64 rng(1);
    const auto w = synthesize(std::vector{build_eppm(7, 3).symbol(2)}, SlotGeometry{}, 1e-6);
    const auto y = propagate_and_detect(w, ChannelModel{}, quiet(), rng);
    for (std::size_t i = 0; i < w.samples.size(); ++i)
        EXPECT_EQ(y.samples[i], 0.5 * w.samples[i]);
}

TEST(Detect, BackgroundShotVariance)
{
    DetectorModel d = quiet();
    d.background_power = 5e-6;
    const double fs = 1e9;
    const auto y = propagate_and_detect(constant(0.0, 1'000'000, fs), ChannelModel{}, d, std::uint64_t{17});
    const double expected = 2 * electron_charge * d.responsivity * d.background_power * fs / 2;
    EXPECT_NEAR(variance(y.samples) / expected, 1.0, 0.02);
}

TEST(Detect, DarkSlotVarianceScalesWithBackground)
{
    const double fs = 1e9;
    auto dark_var = [&](double bg) {
        DetectorModel d = quiet();
        d.background_power = bg;
        Waveform w = constant(0.0, 400'000, fs);
        w.geometry = SlotGeometry{8e-9, 8, 1};
        const auto y = propagate_and_detect(w, ChannelModel{}, d, std::uint64_t{99});
        std::vector<double> slots;
        for (std::size_t i = 0; i < y.samples.size(); i += 8)
            slots.push_back(std::accumulate(y.samples.begin() + long(i), y.samples.begin() + long(i + 8), 0.0));
        return variance(slots);
    };
    // 5e4 slots: relative standard error of a variance estimate is about 0.6%.
    EXPECT_NEAR(dark_var(10e-6) / dark_var(5e-6), 2.0, 0.06);
}

TEST(Detect, SeedDeterminism)
{
    DetectorModel d;
    d.background_power = 1e-6;
    const auto w = constant(1e-6, 1000, 1e9);
    EXPECT_EQ(propagate_and_detect(w, ChannelModel{}, d, std::uint64_t{5}).samples,
              propagate_and_detect(w, ChannelModel{}, d, std::uint64_t{5}).samples);
    EXPECT_NE(propagate_and_detect(w, ChannelModel{}, d, std::uint64_t{5}).samples,
              propagate_and_detect(w, ChannelModel{}, d, std::uint64_t{6}).samples);
}

TEST(Detect, LinearAndTimeInvariant)
{
    ChannelModel cm{0.6, 2e-9, 0.4, 5e-9, false};
    const double fs = 1e9;
    std::mt19937_64 gen(12);
    std::uniform_real_distribution<double> u(0, 1e-6);
    Waveform a = constant(0.0, 300, fs), b = constant(0.0, 300, fs), ab = constant(0.0, 300, fs);
    for (std::size_t i = 0; i < 300; ++i) {
        a.samples[i] = u(gen);
        b.samples[i] = u(gen);
        ab.samples[i] = 2.0 * a.samples[i] + 3.0 * b.samples[i];
    }
    std::mt19937_64 rng(0);
    const auto ya = propagate_and_detect(a, cm, quiet(), rng), yb = propagate_and_detect(b, cm, quiet(), rng);
    const auto yab = propagate_and_detect(ab, cm, quiet(), rng);
    for (std::size_t i = 0; i < 300; ++i)
        EXPECT_NEAR(yab.samples[i], 2.0 * ya.samples[i] + 3.0 * yb.samples[i], 1e-18);

    // A delayed input gives a delayed output.
    Waveform shifted = constant(0.0, 300, fs);
    for (std::size_t i = 10; i < 300; ++i)
        shifted.samples[i] = a.samples[i - 10];
    const auto ys = propagate_and_detect(shifted, cm, quiet(), rng);
    for (std::size_t i = 10; i < 300; ++i)
        EXPECT_NEAR(ys.samples[i], ya.samples[i - 10], 1e-18);
}

TEST(Detect, ShadowingLosesEnergy)
{
    const auto w = synthesize(std::vector{build_eppm(7, 3).symbol(0), build_eppm(7, 3).symbol(4)}, SlotGeometry{1e-9, 4, 1}, 1e-6);
    for (double los : {0.1, 0.5, 1.0}) {
        ChannelModel open{los, 0.0, 0.3, 2e-9, false};
        ChannelModel blocked = open;
        blocked.shadowed = true;
        std::mt19937_64 rng(0);
        auto energy = [&](const ChannelModel& cm) {
            const auto y = propagate_and_detect(w, cm, quiet(), rng);
            return std::inner_product(y.samples.begin(), y.samples.end(), y.samples.begin(), 0.0);
        };
        EXPECT_LT(energy(blocked), energy(open));
    }
}

TEST(ArraySplitDevice, EquivalentOnlyWhenLinear)
{
    std::mt19937_64 rng(7);
    const auto c = build_meppm(7, 3, 3, false);
    const SlotGeometry g{1e-9, 2, 1};
    const double unit = 1e-3;
    LedModel lin;
    lin.nonlinearity = false;
    lin.bandwidth_3db = 200e6;
    LedModel sat = lin;
    sat.nonlinearity = true;
    sat.saturation_power = 2.5e-3;  // below the 3-unit peak, above half of it

    int tested = 0;
    for (int frame = 0; frame < 200; ++frame) {
        std::vector<Codeword> s;
        for (int i = 0; i < 4; ++i)
            s.push_back(c.symbol(rng() % c.size()));
        const auto whole = synthesize(s, g, unit);
        const auto split = array_split(s, 3, g);
        auto run = [&](const LedModel& m) {
            std::vector<double> sum(whole.samples.size(), 0.0);
            for (const auto& d : split.drives) {
                const auto y = led_transfer(synthesize(d, g, unit), m);
                for (std::size_t i = 0; i < sum.size(); ++i)
                    sum[i] += y.samples[i];
            }
            return sum;
        };
        const auto ideal = led_transfer(whole, lin).samples;
        const auto split_lin = run(lin);
        for (std::size_t i = 0; i < ideal.size(); ++i)
            ASSERT_NEAR(split_lin[i], ideal[i], 1e-15);
        const double peak = *std::max_element(whole.samples.begin(), whole.samples.end());
        if (peak <= sat.saturation_power / 2)
            continue;
        ++tested;
        const auto joint = led_transfer(whole, sat).samples;
        const auto split_sat = run(sat);
        double e_joint = 0, e_split = 0;
        for (std::size_t i = 0; i < ideal.size(); ++i) {
            e_joint += (joint[i] - ideal[i]) * (joint[i] - ideal[i]);
            e_split += (split_sat[i] - ideal[i]) * (split_sat[i] - ideal[i]);
        }
        EXPECT_LT(e_split, e_joint);
    }
    EXPECT_GT(tested, 100);
}

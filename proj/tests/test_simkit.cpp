// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "vlc/simkit.hpp"

using namespace vlc;

namespace {

double qfunc(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

ExperimentConfig awgn(Scheme scheme, int q, int k, double snr_db)
{
    ExperimentConfig c;
    c.scheme.scheme = scheme;
    c.scheme.Q = q;
    c.scheme.K = k;
    c.led.lowpass = false;
    c.led.nonlinearity = false;
    c.detector.signal_shot_noise = false;
    c.link.snr_db = snr_db;
    c.run.max_bits = 200'000;
    c.run.min_errors = 1'000'000;
    return c;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<Codeword> random_stream(const Constellation& c, std::size_t n, std::mt19937_64& rng)
{
    std::vector<Codeword> s;
    for (std::size_t i = 0; i < n; ++i)
        s.push_back(c.symbol(rng() % c.size()));
    return s;
}

} // namespace

TEST(LinkBudget, IlluminanceToPower)
{
    EXPECT_NEAR(illuminance_to_power(LinkBudget{400, 1e-5, 300}), 13.333e-6, 1e-9);
    EXPECT_DOUBLE_EQ(illuminance_to_power(LinkBudget{400, 2e-5, 300}), 2 * illuminance_to_power(LinkBudget{400, 1e-5, 300}));
    EXPECT_THROW(illuminance_to_power(LinkBudget{0, 1e-5, 300}), Error);
    EXPECT_THROW(illuminance_to_power(LinkBudget{400, -1, 300}), Error);
}

TEST(Rate, ClosingExample)
{
    const auto c = build_meppm(7, 3, 21, true);
    ASSERT_GE(c.bits_per_symbol(), 21);
    LedModel led;
    led.bandwidth_3db = 11.1e6;
    const auto r = rate_accounting(c, SlotGeometry{1e-9, 20, 10}, led, 3, 21);
    EXPECT_DOUBLE_EQ(r.bits_per_slot, 3.0);
    EXPECT_EQ(std::lround(r.per_color_rate / 1e6), 333);
    EXPECT_NEAR(r.aggregate_rate / 1e9, 1.0, 0.05);
    EXPECT_DOUBLE_EQ(r.aggregate_rate, 3 * r.per_color_rate);
}

TEST(Rate, SlotRateAndColors)
{
    const auto c = build_eppm(7, 3);
    LedModel led;
    const auto r = rate_accounting(c, SlotGeometry{}, led, 1);
    EXPECT_EQ(r.slot_rate, led.bandwidth_3db);
    EXPECT_EQ(r.aggregate_rate, r.per_color_rate);
    EXPECT_THROW(rate_accounting(c, SlotGeometry{}, led, 0), Error);
}

TEST(Flicker, ConstantIsZero)
{
    Waveform w;
    w.geometry = SlotGeometry{};
    w.sample_rate = 2e9;
    w.slots_per_symbol = 4;
    w.samples.assign(400, 3e-6);
    EXPECT_EQ(flicker_metric(w, 4e-9), 0.0);
}

TEST(Flicker, EppmSymbolWindow)
{
    std::mt19937_64 rng(1);
    const auto w = synthesize(random_stream(build_eppm(7, 3), 500, rng), SlotGeometry{}, 1e-6);
    EXPECT_EQ(flicker_metric(w, 7e-9), 0.0);
}

TEST(Flicker, PpmDependsOnWindow)
{
    std::mt19937_64 rng(2);
    const auto w = synthesize(random_stream(build_ppm(8), 500, rng), SlotGeometry{}, 1e-6);
    EXPECT_EQ(flicker_metric(w, 8e-9), 0.0);
    EXPECT_GT(flicker_metric(w, 4e-9), 0.0);
}

TEST(Flicker, ConstantWeightAtSymbolMultiples)
{
    std::mt19937_64 rng(3);
    const std::vector<Constellation> codes{build_mppm(8, 3), build_eppm(7, 3), build_eppm(13, 4), build_meppm(7, 3, 3, false)};
    for (const auto& c : codes) {
        const auto w = synthesize(random_stream(c, 600, rng), SlotGeometry{}, 1.3e-7);
        for (int k : {1, 2, 3, 7, 50})
            EXPECT_EQ(flicker_metric(w, k * c.Q() * 1e-9), 0.0) << to_string(c.scheme()) << " k=" << k;
    }
    // Complements change the pulse count per symbol.
    const auto mixed = synthesize(random_stream(build_meppm(7, 3, 3, true), 600, rng), SlotGeometry{}, 1e-6);
    EXPECT_GT(flicker_metric(mixed, 7e-9), 0.0);
}

TEST(Flicker, WindowBounds)
{
    std::mt19937_64 rng(4);
    const auto w = synthesize(random_stream(build_eppm(7, 3), 10, rng), SlotGeometry{}, 1e-6);
    EXPECT_THROW(flicker_metric(w, 71e-9), Error);
    EXPECT_THROW(flicker_metric(w, 0.4e-9), Error);
}

TEST(RunTrials, ImpairmentFreeIsErrorFree)
{
    for (Scheme s : {Scheme::ppm, Scheme::mppm, Scheme::eppm, Scheme::meppm}) {
        ExperimentConfig c;
        c.scheme.scheme = s;
        c.scheme.N = 3;
        c.scheme.use_complements = true;
        c.led.lowpass = false;
        c.led.nonlinearity = false;
        c.detector.signal_shot_noise = false;
        c.run.max_bits = 20'000;
        const auto r = run_trials(c, 1);
        EXPECT_EQ(r.bit_errors, 0u) << to_string(s);
        EXPECT_EQ(r.ber, 0.0);
        EXPECT_FALSE(r.ci_valid);
        EXPECT_GE(r.bits_sent, 20'000u);
    }
}

TEST(RunTrials, BinaryPpmMatchesQFunction)
{
    for (double snr_db : {6.0, 9.0}) {
        auto c = awgn(Scheme::ppm, 2, 1, snr_db);
        c.run.max_bits = 400'000;
        const auto r = run_trials(c, 1);
        const double p = qfunc(std::sqrt(std::pow(10.0, snr_db / 10.0) / 2.0));
        const double ci = 1.96 * std::sqrt(p * (1 - p) / double(r.symbols_sent));
        EXPECT_NEAR(r.ser, p, ci) << snr_db;
    }
}

TEST(RunTrials, UnionBoundHolds)
{
    for (double snr_db : {8.0, 10.0, 12.0, 14.0}) {
        for (auto [scheme, q, k, d2] : {std::tuple{Scheme::ppm, 8, 1, 2.0}, std::tuple{Scheme::eppm, 7, 3, 4.0}}) {
            const auto r = run_trials(awgn(scheme, q, k, snr_db), 1);
            const double a_over_sigma = std::sqrt(std::pow(10.0, snr_db / 10.0));
            const double bound = (q - 1) * qfunc(std::sqrt(d2) * a_over_sigma / 2.0);
            EXPECT_LE(r.ser, bound * 1.05 + 3.0 / double(r.symbols_sent));
            if (bound <= 1e-3 && r.symbol_errors >= 20) {
                EXPECT_GE(r.ser, bound / 2);
            }
        }
    }
}

TEST(RunTrials, WorkerCountDoesNotMatter)
{
    auto c = awgn(Scheme::eppm, 7, 3, 9.0);
    c.run.min_errors = 150;
    const auto a = run_trials(c, 1), b = run_trials(c, 8);
    EXPECT_EQ(a.bits_sent, b.bits_sent);
    EXPECT_EQ(a.bit_errors, b.bit_errors);
    EXPECT_EQ(a.symbol_errors, b.symbol_errors);
    EXPECT_EQ(report_json(a).dump(), report_json(b).dump());
}

TEST(RunTrials, StopRule)
{
    auto c = awgn(Scheme::eppm, 7, 3, 3.0);
    c.run.min_errors = 100;
    const auto r = run_trials(c, 1);
    EXPECT_GE(r.bit_errors, 100u);
    // Stops at the first trial that reaches the target.
    EXPECT_LT(r.bit_errors, 100u + 64u * 2u);
    EXPECT_TRUE(r.ci_valid);
    EXPECT_NEAR(r.ci95, 1.96 * std::sqrt(r.ber * (1 - r.ber) / double(r.bits_sent)), 1e-15);
}

TEST(RunTrials, InconsistentGeometry)
{
    ExperimentConfig c;
    c.link.geometry.samples_per_slot = 3;
    c.link.geometry.overlap_factor = 2;
    EXPECT_THROW(run_trials(c, 1), Error);
    ExperimentConfig d;
    d.interleaver.depth = 5;
    EXPECT_THROW(run_trials(d, 1), Error);
}

TEST(RunTrials, OverlapAndLowpassLoopback)
{
    for (int f : {1, 2, 10}) {
        ExperimentConfig c;
        c.scheme.scheme = Scheme::meppm;
        c.scheme.N = 2;
        c.scheme.use_complements = true;
        c.link.geometry = SlotGeometry{1e-9, 2 * f, f};
        c.led.bandwidth_3db = 150e6;
        c.led.nonlinearity = false;
        c.detector.signal_shot_noise = false;
        c.run.max_bits = 10'000;
        const auto r = run_trials(c, 1);
        EXPECT_EQ(r.bit_errors, 0u) << f;
        EXPECT_EQ(r.parameters["resolved"]["receiver_mode"], "feedback");
    }
}

TEST(RunTrials, SplitArrayLoopback)
{
    ExperimentConfig c;
    c.scheme.scheme = Scheme::meppm;
    c.scheme.N = 3;
    c.link.n_leds = 3;
    c.led.lowpass = false;
    c.saturation_auto = false;
    c.led.saturation_power = 1.5e-6;
    c.detector.signal_shot_noise = false;
    c.run.max_bits = 10'000;
    // Each LED only ever carries one unit, so soft saturation is a uniform
    // scale that the receiver's pulse response already includes.
    EXPECT_EQ(run_trials(c, 1).bit_errors, 0u);
}

TEST(RunTrials, InterleavedRowModels)
{
    auto cfg = awgn(Scheme::eppm, 7, 3, 30.0);
    cfg.interleaver = InterleaverSpec{8};
    cfg.receiver.mode = ReceiverMode::symbol;
    auto p = prepare_link(cfg);
    ASSERT_EQ(p.models.size(), 8u);
    for (const auto& m : p.models)
        for (int j = 0; j < 7; ++j)
            for (int i = 0; i < 7; ++i)
                EXPECT_TRUE(i == j || m.at(j, i) == 0.0);
    EXPECT_EQ(run_trials(cfg, 1).bit_errors, 0u);

    // A smeared channel couples slots of one symbol that land close together on air.
    cfg.channel = ChannelModel{};
    cfg.channel.los_gain = 0;
    cfg.channel.nlos_gain = 1;
    cfg.channel.nlos_decay = 2e-9;
    cfg.channel.shadowed = true;
    cfg.interleaver.permutation = Permutation::random;
    cfg.interleaver.seed = 4;
    p = prepare_link(cfg);
    bool coupled = false;
    for (const auto& m : p.models)
        for (int j = 0; j < 7; ++j)
            for (int i = 0; i < 7; ++i)
                coupled = coupled || (i != j && m.at(j, i) != 0.0);
    EXPECT_TRUE(coupled);
}

TEST(Sweep, SnrAxisNonIncreasing)
{
    auto c = awgn(Scheme::eppm, 7, 3, 0);
    c.run.min_errors = 200;
    c.run.max_bits = 2'000'000;
    const std::vector<double> pts{4, 6, 8, 10};
    const auto rows = sweep(c, SweepAxis::snr, pts, 1);
    ASSERT_EQ(rows.size(), 4u);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (!rows[i].ci_valid || !rows[i - 1].ci_valid)
            continue;
        EXPECT_LE(rows[i].ber - rows[i].ci95, rows[i - 1].ber + rows[i - 1].ci95);
    }
    EXPECT_EQ(rows[2].axis_value, 8.0);
}

TEST(Sweep, DimmingAxisRounding)
{
    auto c = awgn(Scheme::eppm, 15, 7, 20);
    c.run.max_bits = 5000;
    const std::vector<double> pts{0.25, 0.5, 0.75};
    const auto rows = sweep(c, SweepAxis::dimming, pts, 1);
    const int expected[] = {4, 8, 11};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& d = rows[i].parameters["resolved"]["dimming"];
        EXPECT_EQ(d["k_prime"].get<int>(), expected[i]);
        EXPECT_DOUBLE_EQ(d["achieved_ratio"].get<double>(), expected[i] / 15.0);
    }
}

TEST(Sweep, NeedsTwoPointsAndAnAxis)
{
    const ExperimentConfig c;
    const std::vector<double> one{1.0};
    const std::vector<double> two{1.0, 2.0};
    EXPECT_THROW(sweep(c, SweepAxis::snr, one, 1), Error);
    EXPECT_THROW(sweep(c, SweepAxis::none, two, 1), Error);
}

TEST(Results, CsvColumnsAndFlag)
{
    TrialReport a;
    a.axis_value = 4.0;
    a.bits_sent = 1000;
    a.bit_errors = 5;
    a.rng_seed = 7;
    detail::finish_report(a);
    const std::vector<TrialReport> rows{a};
    EXPECT_EQ(results_csv(rows), "axis_value,bits,errors,ber,ci95,flag,seed\n"
                                 "4.000000e+00,1000,5,5.000000e-03,4.371723e-03,low_errors,7\n");
}

TEST(Results, FilesAreReproducible)
{
    const auto dir = std::filesystem::temp_directory_path() / "vlc_simkit_results";
    std::filesystem::remove_all(dir);
    auto c = awgn(Scheme::ppm, 4, 1, 8);
    c.run.max_bits = 20'000;
    const std::vector<double> pts{6, 8};
    const auto first = sweep(c, SweepAxis::snr, pts, 1);
    write_results(dir / "a", "ppm-q4-snr", first);
    const auto second = sweep(c, SweepAxis::snr, pts, 4);
    write_results(dir / "b", "ppm-q4-snr", second);
    EXPECT_EQ(slurp(dir / "a" / "ppm-q4-snr.csv"), slurp(dir / "b" / "ppm-q4-snr.csv"));
    EXPECT_EQ(slurp(dir / "a" / "ppm-q4-snr.manifest.json"), slurp(dir / "b" / "ppm-q4-snr.manifest.json"));
    const auto m = nlohmann::json::parse(slurp(dir / "a" / "ppm-q4-snr.manifest.json"));
    EXPECT_EQ(m["points"].size(), 2u);
    EXPECT_FALSE(m["points"][0].contains("elapsed"));
    std::filesystem::remove_all(dir);
}

TEST(Ofdm, NoiselessLinkIsErrorFree)
{
    ExperimentConfig c;
    c.ofdm.enabled = true;
    c.ofdm.cfg = OfdmConfig{32, 4, 4.0, 3};
    c.led.nonlinearity = false;
    c.led.bandwidth_3db = 1e9;
    c.detector.signal_shot_noise = false;
    c.run.max_bits = 20'000;
    const auto r = run_ofdm_trials(c, 1);
    EXPECT_EQ(r.bit_errors, 0u);
}

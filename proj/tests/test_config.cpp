// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "vlc/config.hpp"

using namespace vlc;
using nlohmann::json;

namespace {

std::string failing_path(const json& j)
{
    try {
        config_from_json(j);
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "<accepted>";
}

} // namespace

TEST(Config, EmptyDocumentIsDefault)
{
    const auto c = config_from_json(json::object());
    EXPECT_EQ(c.scheme.scheme, Scheme::eppm);
    EXPECT_EQ(c.scheme.Q, 7);
    EXPECT_EQ(c.seed, 1u);
    EXPECT_TRUE(c.saturation_auto);
    EXPECT_FALSE(c.ofdm.enabled);
}

TEST(Config, FullDocument)
{
    const auto j = json::parse(R"({
        "name": "paper",
        "seed": 42,
        "scheme": {"type": "meppm", "Q": 7, "K": 3, "N": 21, "use_complements": true, "payload_bits": 21},
        "geometry": {"slot_duration": 3.3e-9, "samples_per_slot": 20, "overlap_factor": 10},
        "link": {"received_power": 5e-6, "n_colors": 3},
        "device": {"preset": "trichromatic", "knee_sharpness": 2},
        "channel": {"los_gain": 0.8, "nlos_gain": 0.2, "nlos_decay": 2e-9},
        "detector": {"thermal_noise_density": 1.6e-24},
        "receiver": {"mode": "feedback", "decoder": "components"},
        "run": {"max_bits": 1000, "min_errors": 10},
        "sweep": {"axis": "snr", "points": [1, 2, 3]},
        "ofdm": {"n_subcarriers": 32, "cyclic_prefix": 3}
    })");
    const auto c = config_from_json(j);
    EXPECT_EQ(c.scheme.scheme, Scheme::meppm);
    EXPECT_EQ(c.scheme.N, 21);
    EXPECT_EQ(c.link.geometry.overlap_factor, 10);
    EXPECT_EQ(c.link.n_colors, 3);
    EXPECT_EQ(c.led.bandwidth_3db, 30e6);
    EXPECT_EQ(c.led.knee_sharpness, 2.0);
    EXPECT_EQ(c.receiver.mode, ReceiverMode::feedback);
    EXPECT_EQ(c.receiver.decoder, DecoderKind::components);
    EXPECT_EQ(c.sweep.axis, SweepAxis::snr);
    EXPECT_EQ(c.sweep.points.size(), 3u);
    EXPECT_TRUE(c.ofdm.enabled);
    EXPECT_EQ(c.ofdm.cfg.cyclic_prefix, 3);
    EXPECT_EQ(c.seed, 42u);
}

TEST(Config, NormalizedFormRoundTrips)
{
    auto c = config_from_json(json::parse(R"({"scheme": {"type": "mppm", "Q": 9, "K": 4},
        "device": {"saturation_power": 2e-6}, "budget": {"illuminance": 300}})"));
    const auto once = config_to_json(c);
    const auto twice = config_to_json(config_from_json(once));
    EXPECT_EQ(once, twice);
    EXPECT_FALSE(config_from_json(once).saturation_auto);
    EXPECT_TRUE(config_from_json(once).budget.has_value());
}

TEST(Config, ErrorsCarryJsonPath)
{
    EXPECT_EQ(failing_path(json::parse(R"({"colour": 1})")), "/colour");
    EXPECT_EQ(failing_path(json::parse(R"({"scheme": {"type": "qam"}})")), "/scheme/type");
    EXPECT_EQ(failing_path(json::parse(R"({"scheme": {"Q": "seven"}})")), "/scheme/Q");
    EXPECT_EQ(failing_path(json::parse(R"({"scheme": {"Q": 7, "K": 7}})")), "/scheme/K");
    EXPECT_EQ(failing_path(json::parse(R"({"geometry": {"samples_per_slot": 3, "overlap_factor": 2}})")), "/geometry/samples_per_slot");
    EXPECT_EQ(failing_path(json::parse(R"({"device": {"preset": "laser"}})")), "/device/preset");
    EXPECT_EQ(failing_path(json::parse(R"({"channel": {"nlos_gain": 0.3}})")), "/channel/nlos_decay");
    EXPECT_EQ(failing_path(json::parse(R"({"link": {"dimming": 1.5}})")), "/link/dimming");
    EXPECT_EQ(failing_path(json::parse(R"({"sweep": {"points": [1, "x"]}})")), "/sweep/points/1");
    EXPECT_EQ(failing_path(json::parse(R"({"seed": -3})")), "/seed");
    EXPECT_EQ(failing_path(json::parse(R"({"run": {"workers": 0}})")), "/run/workers");
    EXPECT_EQ(failing_path(json::parse(R"({"receiver": {"mode": "psychic"}})")), "/receiver/mode");
    EXPECT_EQ(failing_path(json::parse(R"([1, 2])")), "/");
}

TEST(Config, LoadFromFile)
{
    const auto dir = std::filesystem::temp_directory_path() / "vlc_config_test";
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "ok.json") << R"({"scheme": {"type": "ppm", "Q": 16}})";
        std::ofstream(dir / "bad.json") << R"({"scheme": {"type": )";
    }
    EXPECT_EQ(load_config((dir / "ok.json").string()).scheme.Q, 16);
    EXPECT_THROW(load_config((dir / "bad.json").string()), ConfigError);
    EXPECT_THROW(load_config((dir / "missing.json").string()), ConfigError);
    std::filesystem::remove_all(dir);
}

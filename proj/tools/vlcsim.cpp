// SPDX-License-Identifier: Apache-2.0
// vlcsim: command-line front end for the link simulator.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vlc/vlc.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vlc;

namespace {

constexpr int exit_failure = 1;
constexpr int exit_usage = 2;
constexpr int exit_config = 3;

struct Options {
    std::string config;
    std::string output_dir = "results";
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
};

void print_error(const char* kind, const std::string& path, const std::string& message)
{
    json e = {{"error", kind}, {"message", message}};
    if (!path.empty() || std::string(kind) == "invalid-config")
        e["path"] = path;
    std::cerr << e.dump() << "\n";
}

ExperimentConfig load(const Options& o)
{
    auto cfg = load_config(o.config);
    if (o.seed)
        cfg.seed = *o.seed;
    if (o.workers)
        cfg.run.workers = *o.workers;
    return cfg;
}

std::string stem(const ExperimentConfig& cfg, const std::string& verb) { return cfg.name + "-" + verb; }

std::vector<double> sweep_points(const ExperimentConfig& cfg)
{
    if (cfg.sweep.points.size() < 2)
        throw ConfigError("/sweep/points", "sweep needs at least two points");
    return cfg.sweep.points;
}

void print_rows(std::span<const TrialReport> rows)
{
    std::printf("%-14s %-12s %-10s %-14s %-14s %s\n", "axis_value", "bits", "errors", "ber", "ci95", "flag");
    for (const auto& r : rows)
        std::printf("%-14s %-12llu %-10llu %-14s %-14s %s\n", format_real(r.axis_value).c_str(),
                    static_cast<unsigned long long>(r.bits_sent), static_cast<unsigned long long>(r.bit_errors),
                    format_real(r.ber).c_str(), format_real(r.ci95).c_str(), r.ci_valid ? "ok" : "low_errors");
}

json stats_json(const Constellation& c, const CodeStats& st)
{
    return {{"scheme", std::string(to_string(c.scheme()))},
            {"Q", c.Q()},
            {"K", c.K()},
            {"N", c.N()},
            {"use_complements", c.use_complements()},
            {"size", st.size},
            {"bits_per_symbol", c.bits_per_symbol()},
            {"papr", st.papr},
            {"mean_amplitude", st.mean_amplitude},
            {"peak", st.peak},
            {"min_distance", st.min_distance},
            {"min_distance_exact", st.min_distance_exact}};
}

int cmd_construct(const Options& o)
{
    const auto cfg = load(o);
    const auto c = build_constellation(cfg.scheme);
    const auto st = code_stats(c);
    std::printf("scheme=%s Q=%d K=%d N=%d size=%llu bits_per_symbol=%d PAPR=%.3f min_distance=%llu%s\n",
                std::string(to_string(c.scheme())).c_str(), c.Q(), c.K(), c.N(), static_cast<unsigned long long>(st.size),
                c.bits_per_symbol(), st.papr, static_cast<unsigned long long>(st.min_distance),
                st.min_distance_exact ? "" : " (upper bound)");
    fs::create_directories(o.output_dir);
    json j = to_json(c);
    j["stats"] = stats_json(c, st);
    write_text(fs::path(o.output_dir) / (stem(cfg, "construct") + ".json"), j.dump(2) + "\n");
    return 0;
}

int cmd_stats(const Options& o)
{
    const auto cfg = load(o);
    const auto c = build_constellation(cfg.scheme);
    const auto st = code_stats(c);
    auto j = stats_json(c, st);
    std::printf("size            %llu\n", static_cast<unsigned long long>(st.size));
    std::printf("bits_per_symbol %d\n", c.bits_per_symbol());
    std::printf("papr            %.6f\n", st.papr);
    std::printf("mean_amplitude  %.6f\n", st.mean_amplitude);
    std::printf("peak            %d\n", st.peak);
    std::printf("min_distance    %llu%s\n", static_cast<unsigned long long>(st.min_distance), st.min_distance_exact ? "" : " (upper bound)");
    if (st.min_distance_exact) {
        const auto spec = distance_spectrum(c);
        json h = json::object();
        std::printf("distance spectrum (pairs):\n");
        for (const auto& [d, n] : spec) {
            std::printf("  %4d %llu\n", d, static_cast<unsigned long long>(n));
            h[std::to_string(d)] = n;
        }
        j["distance_spectrum"] = h;
    }
    fs::create_directories(o.output_dir);
    write_text(fs::path(o.output_dir) / (stem(cfg, "stats") + ".json"), j.dump(2) + "\n");
    return 0;
}

int run_sweep(const Options& o, const std::string& verb, SweepAxis axis)
{
    const auto cfg = load(o);
    const auto points = sweep_points(cfg);
    const auto rows = cfg.ofdm.enabled
                          ? sweep_with(cfg, axis, points, 0, [](const ExperimentConfig& c, int w) { return run_ofdm_trials(c, w); })
                          : sweep(cfg, axis, points);
    const auto csv = write_results(o.output_dir, stem(cfg, verb), rows, {{"axis", to_string(axis)}});
    print_rows(rows);
    std::printf("wrote %s\n", csv.string().c_str());
    return 0;
}

int cmd_nonlin(const Options& o)
{
    const auto cfg = load(o);
    const auto points = sweep_points(cfg);
    const auto ppm = sweep(cfg, SweepAxis::saturation, points);
    const auto ofdm = sweep_with(cfg, SweepAxis::saturation, points, 0, [](const ExperimentConfig& c, int w) { return run_ofdm_trials(c, w); });
    const auto a = write_results(o.output_dir, stem(cfg, "nonlin-pulse"), ppm, {{"axis", "saturation"}});
    const auto b = write_results(o.output_dir, stem(cfg, "nonlin-ofdm"), ofdm, {{"axis", "saturation"}});
    std::printf("%-14s %-14s %-14s\n", "saturation", "ber_pulse", "ber_ofdm");
    for (std::size_t i = 0; i < ppm.size(); ++i)
        std::printf("%-14s %-14s %-14s\n", format_real(points[i]).c_str(), format_real(ppm[i].ber).c_str(), format_real(ofdm[i].ber).c_str());
    std::printf("wrote %s %s\n", a.string().c_str(), b.string().c_str());
    return 0;
}

int cmd_rate(const Options& o)
{
    const auto cfg = load(o);
    const auto c = build_constellation(cfg.scheme);
    const auto r = rate_accounting(c, cfg.link.geometry, cfg.led, cfg.link.n_colors, cfg.scheme.payload_bits);
    const long per_color_mbps = std::lround(r.per_color_rate / 1e6);
    std::printf("bits_per_symbol  %d\n", resolve_payload_bits(c, cfg.scheme.payload_bits));
    std::printf("bits_per_slot    %.6g\n", r.bits_per_slot);
    std::printf("led_bandwidth    %.6g Hz\n", cfg.led.bandwidth_3db);
    std::printf("overlap_factor   %d\n", cfg.link.geometry.overlap_factor);
    std::printf("slot_rate        %.6g Hz\n", r.slot_rate);
    std::printf("per_color        %ld Mb/s\n", per_color_mbps);
    std::printf("colors           %d\n", r.n_colors);
    std::printf("aggregate        %.1f Gb/s (%ld Mb/s)\n", r.aggregate_rate / 1e9, std::lround(r.aggregate_rate / 1e6));
    const json j = {{"bits_per_slot", r.bits_per_slot},    {"slot_rate", r.slot_rate}, {"per_color_rate", r.per_color_rate},
                    {"n_colors", r.n_colors},              {"aggregate_rate", r.aggregate_rate},
                    {"per_color_mbps", per_color_mbps}};
    fs::create_directories(o.output_dir);
    write_text(fs::path(o.output_dir) / (stem(cfg, "rate") + ".json"), j.dump(2) + "\n");
    return 0;
}

int cmd_flicker(const Options& o)
{
    const auto cfg = load(o);
    const auto pts = flicker_run(cfg);
    std::string csv = "window_slots,flicker\n";
    std::printf("%-14s %s\n", "window_slots", "flicker");
    for (const auto& p : pts) {
        std::printf("%-14s %s\n", format_real(p.window_slots).c_str(), format_real(p.metric).c_str());
        csv += format_real(p.window_slots) + "," + format_real(p.metric) + "\n";
    }
    fs::create_directories(o.output_dir);
    write_text(fs::path(o.output_dir) / (stem(cfg, "flicker") + ".csv"), csv);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Link-level simulator for pulse-position and DCO-OFDM visible light links"};
    app.set_version_flag("--version", std::string("vlcsim ") + toolkit_version + " (config schema " + std::to_string(config_schema_version) + ")");
    app.require_subcommand(1);

    Options o;
    std::uint64_t seed = 0;
    int workers = 0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", o.config, "experiment config (JSON)")->required();
        sub->add_option("-o,--output-dir", o.output_dir, "directory for result files");
        sub->add_option("--seed", seed, "override the master seed");
        sub->add_option("--workers", workers, "concurrent trial workers")->check(CLI::PositiveNumber);
    };

    struct Verb {
        const char* name;
        const char* help;
        std::function<int()> run;
    };
    const std::vector<Verb> verbs{
        {"construct", "build a constellation and print its size, PAPR and minimum distance", [&] { return cmd_construct(o); }},
        {"stats", "constellation statistics and distance spectrum", [&] { return cmd_stats(o); }},
        {"ber-sweep", "BER against slot SNR", [&] { return run_sweep(o, "ber-sweep", SweepAxis::snr); }},
        {"dimming-sweep", "BER against dimming level", [&] { return run_sweep(o, "dimming-sweep", SweepAxis::dimming); }},
        {"isi-sweep", "BER against NLOS delay spread in slots", [&] { return run_sweep(o, "isi-sweep", SweepAxis::delay_spread); }},
        {"nonlin-compare", "pulse scheme vs DCO-OFDM over LED saturation", [&] { return cmd_nonlin(o); }},
        {"rate", "data-rate accounting", [&] { return cmd_rate(o); }},
        {"flicker", "windowed flicker metric of a random stream", [&] { return cmd_flicker(o); }},
    };
    std::vector<CLI::App*> subs;
    for (const auto& v : verbs) {
        auto* sub = app.add_subcommand(v.name, v.help);
        add_common(sub);
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_usage;
    }

    for (auto* sub : subs) {
        if (sub->count("--seed"))
            o.seed = seed;
        if (sub->count("--workers"))
            o.workers = workers;
    }

    try {
        for (std::size_t i = 0; i < verbs.size(); ++i)
            if (subs[i]->parsed())
                return verbs[i].run();
    } catch (const ConfigError& e) {
        print_error("invalid-config", e.path(), e.what());
        return exit_config;
    } catch (const Error& e) {
        print_error(std::string(to_string(e.kind())).c_str(), "", e.what());
        return e.kind() == ErrorKind::invalid_config ? exit_config : exit_failure;
    } catch (const std::exception& e) {
        print_error("failure", "", e.what());
        return exit_failure;
    }
    return exit_usage;
}

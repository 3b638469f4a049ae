// SPDX-License-Identifier: Apache-2.0
// End-to-end acceptance checks. One PASS/FAIL line per criterion.
//
//   acceptance           exit status 1 if any criterion fails
//   acceptance --report  exit status 1 only if a check could not be run
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "vlc/vlc.hpp"

#ifndef VLC_CONFIG_DIR
#define VLC_CONFIG_DIR "configs"
#endif

namespace fs = std::filesystem;
using namespace vlc;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

fs::path config_path(const char* name) { return fs::path(VLC_CONFIG_DIR) / name; }

fs::path out_dir()
{
    const auto d = fs::current_path() / "acceptance_out";
    fs::create_directories(d);
    return d;
}

double qfunc(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---------------------------------------------------------------------------

Verdict rate()
{
    const auto cfg = load_config(config_path("paper_rate.json").string());
    const auto c = build_constellation(cfg.scheme);
    const auto r = rate_accounting(c, cfg.link.geometry, cfg.led, cfg.link.n_colors, cfg.scheme.payload_bits);
    const long per_color = std::lround(r.per_color_rate / 1e6);
    const std::string agg = fmt("%.1f", r.aggregate_rate / 1e9);
    return {per_color == 333 && agg == "1.0" && resolve_payload_bits(c, cfg.scheme.payload_bits) == 21,
            "per_color=" + std::to_string(per_color) + " Mb/s aggregate=" + agg + " Gb/s"};
}

// Number of 7-vectors c with sum p - n, positive part p and negative part n.
double count_split(int p, int n)
{
    auto comp = [](int total, int parts) -> double {
        if (parts == 0)
            return total == 0 ? 1.0 : 0.0;
        if (total < parts)
            return 0.0;
        return std::round(std::tgamma(total) / (std::tgamma(parts) * std::tgamma(total - parts + 1)));
    };
    auto choose = [](int a, int b) { return std::round(std::tgamma(a + 1) / (std::tgamma(b + 1) * std::tgamma(a - b + 1))); };
    double acc = 0;
    for (int i = 0; i <= 7; ++i)
        for (int j = 0; i + j <= 7; ++j)
            acc += choose(7, i) * choose(7 - i, j) * comp(p, i) * comp(n, j);
    return acc;
}

// Distinct sums of n words drawn with repetition from the seven cyclic
// shifts of {0,1,3} and their complements. A sum is determined by the
// shift counts a, complement counts b through c = a - b and B = sum(b);
// every c with sum n - 2B and negative part at most B is reachable.
double meppm_closed_form(int n)
{
    double total = 0;
    for (int big_b = 0; big_b <= n; ++big_b) {
        const int s = n - 2 * big_b;
        for (int neg = 0; neg <= big_b; ++neg)
            if (s + neg >= 0)
                total += count_split(s + neg, neg);
    }
    return total;
}

std::size_t meppm_brute(int n)
{
    std::vector<std::vector<int>> words;
    for (int r = 0; r < 7; ++r) {
        std::vector<int> w(7, 0);
        for (int p : {0, 1, 3})
            w[static_cast<std::size_t>((p + r) % 7)] = 1;
        words.push_back(w);
        for (auto& v : w)
            v = 1 - v;
        words.push_back(w);
    }
    std::set<std::vector<int>> sums;
    std::vector<int> acc(7, 0);
    std::function<void(std::size_t, int)> rec = [&](std::size_t t, int left) {
        if (left == 0) {
            sums.insert(acc);
            return;
        }
        if (t == words.size())
            return;
        for (int take = 0; take <= left; ++take) {
            rec(t + 1, left - take);
            for (int i = 0; i < 7; ++i)
                acc[static_cast<std::size_t>(i)] += words[t][static_cast<std::size_t>(i)];
        }
        for (int i = 0; i < 7; ++i)
            acc[static_cast<std::size_t>(i)] -= (left + 1) * words[t][static_cast<std::size_t>(i)];
    };
    rec(0, n);
    return sums.size();
}

Verdict meppm_capacity()
{
    std::string detail;
    for (int n = 1; n <= 6; ++n) {
        const double brute = double(meppm_brute(n));
        const double closed = meppm_closed_form(n);
        if (brute != closed)
            return {false, "closed form disagrees with enumeration at N=" + std::to_string(n)};
    }
    const double oracle = meppm_closed_form(21);
    const auto c = build_meppm(7, 3, 21, true);
    const bool ok = oracle >= std::ldexp(1.0, 21) && double(c.size()) == oracle;
    return {ok, "distinct symbols=" + fmt("%.0f", oracle) + " library=" + std::to_string(c.size()) +
                    " floor(log2)=" + std::to_string(int(std::floor(std::log2(oracle))))};
}

Verdict eppm_distance()
{
    std::string detail;
    bool ok = true;
    for (auto [q, k] : {std::pair{7, 3}, {11, 5}, {13, 4}}) {
        const auto c = build_eppm(q, k);
        const int lambda = k * (k - 1) / (q - 1);
        const auto words = c.symbols();
        std::set<int> seen;
        for (std::size_t i = 0; i < words.size(); ++i)
            for (std::size_t j = i + 1; j < words.size(); ++j)
                seen.insert(l1_distance(words[i].slots, words[j].slots));
        ok = ok && seen.size() == 1 && *seen.begin() == 2 * (k - lambda);
        detail += "(" + std::to_string(q) + "," + std::to_string(k) + ") d=" + std::to_string(*seen.begin()) + " ";
    }
    return {ok, detail};
}

Verdict papr()
{
    double worst = 0;
    int cases = 0;
    auto check = [&](const Constellation& c, double expect) {
        worst = std::max(worst, std::abs(code_stats(c).papr - expect));
        ++cases;
    };
    for (int q : {4, 7, 8, 15}) {
        check(build_ppm(q), q);
        for (int k = 1; k < q; ++k) {
            check(build_mppm(q, k), double(q) / k);
            check(build_eppm(q, k), double(q) / k);
        }
    }
    return {worst <= 1e-12, std::to_string(cases) + " codes, max |error|=" + fmt("%.2e", worst)};
}

// Error probability of M equicorrelated signals at pairwise distance d,
// with unit noise standard deviation.
double exact_ser(int m, double d)
{
    const double a = d / std::sqrt(2.0);
    const double h = 1e-3;
    double pc = 0;
    for (double v = -10; v <= 10; v += h)
        pc += std::exp(-0.5 * v * v) / std::sqrt(2 * M_PI) * std::pow(1.0 - qfunc(v + a), m - 1) * h;
    return 1.0 - pc;
}

Verdict ser_oracle()
{
    bool ok = true;
    std::string detail;
    struct Case {
        SchemeSpec scheme;
        int m;
        std::vector<double> snr;
    };
    SchemeSpec ppm{Scheme::ppm, 2, 1};
    SchemeSpec eppm{Scheme::eppm, 7, 3};
    eppm.payload_bits = 2;
    for (const auto& cs : {Case{ppm, 2, {11.0, 12.5, 14.0}}, Case{eppm, 7, {9.5, 11.0, 12.0}}}) {
        auto cfg = load_config(config_path("ppm_awgn.json").string());
        cfg.scheme = cs.scheme;
        cfg.seed = 1;
        cfg.run.min_errors = 2000;
        cfg.run.max_bits = 100'000'000;
        const auto c = build_constellation(cfg.scheme);
        const int k = c.pulses();
        const int lambda = cs.scheme.scheme == Scheme::ppm ? 0 : k * (k - 1) / (c.Q() - 1);
        const double dist_units = std::sqrt(2.0 * (k - lambda));
        for (double snr : cs.snr) {
            cfg.link.snr_db = snr;
            const auto r = run_trials(cfg);
            const double d = dist_units * std::sqrt(std::pow(10.0, snr / 10.0));
            const double exact = exact_ser(cs.m, d);
            const double ub = (cs.m - 1) * qfunc(d / 2);
            const double n = double(r.symbols_sent);
            const double ci = 1.96 * std::sqrt(r.ser * (1 - r.ser) / n);
            const bool in = std::abs(r.ser - exact) <= ci;
            ok = ok && in;
            detail += std::string(to_string(cs.scheme.scheme)) + "@" + fmt("%.1f", snr) + ": ser=" + fmt("%.3e", r.ser) + "+-" +
                      fmt("%.1e", ci) + " exact=" + fmt("%.3e", exact) + " union=" + fmt("%.3e", ub) + (in ? "" : " OUT") + "; ";
        }
    }

    // Correlation must make the same decision as exhaustive ML on every frame.
    std::mt19937_64 rng(1);
    std::uint64_t mismatches = 0, decisions = 0;
    for (const auto& c : {build_ppm(2), build_eppm(7, 3)}) {
        std::normal_distribution<double> noise(0.0, 0.35);
        std::vector<double> s(static_cast<std::size_t>(c.Q()));
        for (int f = 0; f < 100'000; ++f)
            for (int t = 0; t < 8; ++t) {
                const auto x = c.symbol(rng() % c.size());
                for (std::size_t i = 0; i < s.size(); ++i)
                    s[i] = x.slots[i] + noise(rng);
                mismatches += decode_correlation(s, c) != decode_ml(s, c);
                ++decisions;
            }
    }
    ok = ok && mismatches == 0;
    detail += "correlation vs ML mismatches=" + std::to_string(mismatches) + "/" + std::to_string(decisions);
    return {ok, detail};
}

Verdict paper_ber()
{
    const auto cfg = load_config(config_path("paper_ber.json").string());
    const auto r = run_trials(cfg);
    write_results(out_dir(), cfg.name, std::vector{r});
    const bool ok = r.ber >= 3e-4 && r.ber <= 3e-2;
    return {ok, "ber=" + fmt("%.3e", r.ber) + " over " + std::to_string(r.bits_sent) + " bits, target 3e-3 within a decade"};
}

Verdict interleaving()
{
    auto cfg = load_config(config_path("isi_shadowed.json").string());
    cfg.run.min_errors = 100;
    cfg.run.max_bits = 50'000'000;
    const std::vector<double> snr{10, 14, 18, 22};
    auto d1 = cfg, d8 = cfg;
    d1.interleaver.depth = 1;
    d8.interleaver.depth = 8;
    const auto a = sweep(d1, SweepAxis::snr, snr);
    const auto b = sweep(d8, SweepAxis::snr, snr);
    write_results(out_dir(), "isi-d1", a);
    write_results(out_dir(), "isi-d8", b);
    bool ok = true;
    std::string detail;
    for (std::size_t i = 0; i < snr.size(); ++i) {
        ok = ok && b[i].ber <= a[i].ber && a[i].bit_errors >= 100 && b[i].bit_errors >= 100;
        detail += fmt("%.0f dB ", snr[i]) + "D1=" + fmt("%.3e", a[i].ber) + " D8=" + fmt("%.3e", b[i].ber) + "; ";
    }
    return {ok, detail};
}

Verdict nonlinearity()
{
    const auto cfg = load_config(config_path("nonlin.json").string());
    const auto c = build_constellation(cfg.scheme);
    const double pulse_rate = double(c.bits_per_symbol()) / c.Q();
    const auto& o = cfg.ofdm.cfg;
    const double ofdm_rate = double(o.bits_per_frame()) / (o.n_subcarriers + o.cyclic_prefix);
    const auto pts = cfg.sweep.points;
    const auto pulse = sweep(cfg, SweepAxis::saturation, pts);
    const auto ofdm = sweep_with(cfg, SweepAxis::saturation, pts, 0, [](const ExperimentConfig& x, int w) { return run_ofdm_trials(x, w); });
    bool ok = std::abs(pulse_rate - ofdm_rate) < 1e-12;
    std::string detail = "bits/slot " + fmt("%.4f", pulse_rate) + " vs " + fmt("%.4f", ofdm_rate) + "; ";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        ok = ok && ofdm[i].ber >= pulse[i].ber;
        detail += "sat " + fmt("%.1f", pts[i]) + ": meppm=" + fmt("%.3e", pulse[i].ber) + " ofdm=" + fmt("%.3e", ofdm[i].ber) + "; ";
    }
    return {ok, detail};
}

Verdict flicker()
{
    bool ok = true;
    double worst = 0;
    for (const char* name : {"eppm_7_3.json", "flicker.json"}) {
        auto cfg = load_config(config_path(name).string());
        cfg.flicker.symbols = 10000;
        cfg.flicker.window_slots.clear();
        for (int k = 1; k <= 5; ++k)
            cfg.flicker.window_slots.push_back(double(k * cfg.scheme.Q));
        for (const auto& p : flicker_run(cfg)) {
            ok = ok && p.metric == 0.0;
            worst = std::max(worst, p.metric);
        }
    }
    return {ok, "max metric at whole-symbol windows=" + fmt("%.3e", worst)};
}

Verdict determinism()
{
    auto cfg = load_config(config_path("ppm_awgn.json").string());
    cfg.run.max_bits = 400'000;
    auto run = [&](int workers, const char* tag) {
        auto c = cfg;
        c.run.workers = workers;
        const auto rows = sweep(c, SweepAxis::snr, c.sweep.points);
        const auto path = write_results(out_dir() / tag, c.name, rows);
        std::ifstream in(path, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    const auto one = run(1, "workers1");
    const auto eight = run(8, "workers8");
    return {!one.empty() && one == eight, std::to_string(one.size()) + " bytes, " + (one == eight ? "identical" : "different")};
}

} // namespace

int main(int argc, char** argv)
{
    const bool report = argc > 1 && std::string(argv[1]) == "--report";
    const std::vector<std::pair<const char*, Verdict (*)()>> checks{
        {"rate", rate},
        {"meppm-capacity", meppm_capacity},
        {"eppm-distance", eppm_distance},
        {"papr", papr},
        {"ser-oracle", ser_oracle},
        {"paper-ber", paper_ber},
        {"interleaving", interleaving},
        {"nonlinearity", nonlinearity},
        {"flicker", flicker},
        {"determinism", determinism},
    };
    int failed = 0, broken = 0;
    for (std::size_t i = 0; i < checks.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = checks[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
            ++broken;
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !v.pass;
        std::printf("%s %2zu %-15s %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", i + 1, checks[i].first, v.detail.c_str(), s);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", int(checks.size()) - failed, checks.size());
    return report ? (broken ? 1 : 0) : (failed ? 1 : 0);
}

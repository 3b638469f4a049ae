// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "vlc/constellations.hpp"

namespace vlc {

/// Compact description; symbols are regenerated on import, never stored.
inline nlohmann::json to_json(const Constellation& c)
{
    nlohmann::json j;
    j["scheme"] = std::string(to_string(c.scheme()));
    j["Q"] = c.Q();
    j["K"] = c.K();
    j["N"] = c.N();
    j["use_complements"] = c.use_complements();
    j["seed_word"] = nlohmann::json::array();
    for (auto v : c.seed_word())
        j["seed_word"].push_back(int(v));
    j["symbol_count"] = c.size();
    j["bits_per_symbol"] = c.bits_per_symbol();
    return j;
}

inline Constellation constellation_from_json(const nlohmann::json& j)
{
    try {
        const auto scheme = scheme_from_string(j.at("scheme").get<std::string>());
        require(scheme.has_value(), ErrorKind::invalid_input, "unknown scheme");
        const int q = j.at("Q").get<int>();
        const int k = j.at("K").get<int>();
        std::vector<std::uint8_t> seed;
        if (j.contains("seed_word"))
            for (const auto& v : j.at("seed_word"))
                seed.push_back(static_cast<std::uint8_t>(v.get<int>()));

        Constellation c;
        switch (*scheme) {
        case Scheme::ppm: c = build_ppm(q); break;
        case Scheme::mppm: c = build_mppm(q, k); break;
        case Scheme::eppm:
        case Scheme::meppm: {
            require(static_cast<int>(seed.size()) == q, ErrorKind::invalid_input, "seed_word length must equal Q");
            Constellation eppm = build_eppm_from_seed(seed);
            require(eppm.pulses() == k, ErrorKind::invalid_input, "seed_word weight does not match K");
            c = *scheme == Scheme::eppm
                    ? eppm
                    : build_meppm_from(eppm, j.at("N").get<int>(), j.value("use_complements", false));
            break;
        }
        }
        if (j.contains("symbol_count"))
            require(j.at("symbol_count").get<std::uint64_t>() == c.size(), ErrorKind::invalid_input,
                    "symbol_count does not match the regenerated constellation");
        if (j.contains("bits_per_symbol"))
            require(j.at("bits_per_symbol").get<int>() == c.bits_per_symbol(), ErrorKind::invalid_input,
                    "bits_per_symbol does not match the regenerated constellation");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::invalid_input, std::string("malformed constellation JSON: ") + e.what());
    }
}

} // namespace vlc

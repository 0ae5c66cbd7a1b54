#pragma once

#include <fstream>
#include <json.hpp>
#include <optional>
#include <string>

#include "metafilter/encoding.hpp"
#include "metafilter/errors.hpp"
#include "metafilter/types.hpp"

namespace metafilter {

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": invalid JSON: " + e.what());
    }
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw FormatError("write to '" + path + "' failed");
}

/// Accepts a bare 58-element array (TE then TM) or {"spectrum": [...]}.
inline Spectrum spectrum_from_json(const nlohmann::json& j) {
    const nlohmann::json& arr = j.is_object() && j.contains("spectrum") ? j.at("spectrum") : j;
    if (!arr.is_array() || arr.size() != kSpectrumPoints)
        throw FormatError("spectrum JSON must be an array of " + std::to_string(kSpectrumPoints) + " numbers");
    Spectrum s;
    for (std::size_t k = 0; k < kSpectrumPoints; ++k) {
        if (!arr[k].is_number()) throw FormatError("spectrum JSON entry " + std::to_string(k) + " is not a number");
        s.t[k] = arr[k].get<float>();
    }
    s.require_valid("spectrum JSON");
    return s;
}

inline nlohmann::json spectrum_to_json(const Spectrum& s) {
    nlohmann::json wl = nlohmann::json::array();
    for (std::size_t k = 0; k < kHalfPoints; ++k) wl.push_back(wavelength_nm(k));
    return {{"wavelength_nm", wl},
            {"te", std::vector<float>(s.te().begin(), s.te().end())},
            {"tm", std::vector<float>(s.tm().begin(), s.tm().end())},
            {"spectrum", s.t}};
}

inline ContrastVector contrast_from_json(const nlohmann::json& j) {
    const nlohmann::json& arr = j.is_object() && j.contains("contrast") ? j.at("contrast") : j;
    if (!arr.is_array() || arr.size() != kContrastSize)
        throw FormatError("contrast JSON must be an array of " + std::to_string(kContrastSize) + " numbers");
    ContrastVector c;
    for (std::size_t i = 0; i < kContrastSize; ++i) {
        if (!arr[i].is_number()) throw FormatError("contrast JSON entry " + std::to_string(i) + " is not a number");
        c.values[i] = arr[i].get<double>();
    }
    c.require_valid();
    return c;
}

/// A design target: a spectrum, or a contrast vector given directly.
struct DesignTarget {
    std::optional<Spectrum> spectrum;
    std::optional<ContrastVector> contrast;
};

/// Forms: spectrum array, {"spectrum": [...]}, {"contrast": [...]}, or
/// {"gaussian": {"mean": nm, "sigma": nm, "amplitude": a}}.
inline DesignTarget target_from_json(const nlohmann::json& j) {
    DesignTarget t;
    if (j.is_object() && j.contains("gaussian")) {
        const auto& g = j.at("gaussian");
        try {
            t.spectrum = gaussian_target(g.at("mean").get<double>(), g.at("sigma").get<double>(), g.at("amplitude").get<double>());
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("gaussian target needs numeric mean, sigma, amplitude: ") + e.what());
        }
    } else if (j.is_object() && j.contains("contrast")) {
        t.contrast = contrast_from_json(j);
    } else {
        t.spectrum = spectrum_from_json(j);
    }
    return t;
}

}  // namespace metafilter

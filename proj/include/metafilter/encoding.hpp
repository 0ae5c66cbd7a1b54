#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>

#include "metafilter/rng.hpp"
#include "metafilter/types.hpp"

namespace metafilter {

inline constexpr std::size_t kBands = 7;
inline constexpr std::size_t kContrastSize = 2 * kBands;
inline constexpr std::size_t kBandWidth = 5;
/// Stabilizer used only when the out-of-band maximum vanishes.
inline constexpr double kContrastEpsilon = 1e-6;

/// First (0-based) sample of band i (1-based): bands cover samples
/// 4i-4 .. 4i, so neighbours share one boundary sample.
constexpr std::size_t band_start(std::size_t band) { return 4 * (band - 1); }

/// 14 positive ratios: 7 TE contrasts then 7 TM contrasts.
struct ContrastVector {
    std::array<double, kContrastSize> values{};

    void require_valid() const {
        for (std::size_t i = 0; i < kContrastSize; ++i)
            if (!(values[i] > 0.0) || !std::isfinite(values[i]))
                throw ValueError("contrast vector entry " + std::to_string(i) + " must be positive and finite");
    }
    friend bool operator==(const ContrastVector&, const ContrastVector&) = default;
};

/// Contrast of each band of a 29-sample half spectrum: the maximum inside
/// the band over the maximum of the remaining samples.
template <class T>
std::array<double, kBands> contrast7(std::span<const T> half) {
    if (half.size() != kHalfPoints)
        throw ShapeError("contrast7: expected 29 samples, got " + std::to_string(half.size()));
    for (std::size_t k = 0; k < kHalfPoints; ++k)
        if (!(half[k] >= T(0) && half[k] <= T(1)))
            throw ValueError("contrast7: transmittance " + std::to_string(k) + " = " + std::to_string(double(half[k])) +
                             " outside [0,1]");
    std::array<double, kBands> c{};
    for (std::size_t band = 1; band <= kBands; ++band) {
        const std::size_t lo = band_start(band), hi = lo + kBandWidth;
        double max_in = 0.0, max_out = 0.0;
        for (std::size_t k = 0; k < kHalfPoints; ++k) {
            const double v = half[k];
            if (k >= lo && k < hi)
                max_in = std::max(max_in, v);
            else
                max_out = std::max(max_out, v);
        }
        c[band - 1] = max_out > kContrastEpsilon ? max_in / max_out
                                                 : (max_in + kContrastEpsilon) / (max_out + kContrastEpsilon);
    }
    return c;
}

inline ContrastVector contrast_vector(const Spectrum& s) {
    const auto te = contrast7<float>(s.te());
    const auto tm = contrast7<float>(s.tm());
    ContrastVector c;
    std::copy(te.begin(), te.end(), c.values.begin());
    std::copy(tm.begin(), tm.end(), c.values.begin() + kBands);
    return c;
}

enum class Polarity { valley, peak };

inline constexpr double kValleyContrast = 0.01;
inline constexpr std::array<double, 3> kBackgroundContrasts{0.4, 0.5, 0.6};
inline constexpr double kPeakContrast = 2.5;
inline constexpr double kPeakBackground = 0.01;

/// Synthetic contrast vector with one extremum at `band` (1-based) in both
/// the TE and TM groups.
///  valley: band -> 0.01, every other entry drawn from {0.4, 0.5, 0.6}.
///  peak:   band -> 2.5, every other entry 0.01.
inline ContrastVector semi_random_contrast(std::size_t band, Polarity polarity, std::uint64_t seed) {
    if (band < 1 || band > kBands) throw ValueError("semi_random_contrast: band must be in 1..7, got " + std::to_string(band));
    ContrastVector c;
    Rng rng(seed);
    for (std::size_t i = 0; i < kContrastSize; ++i) {
        const bool target = (i % kBands) == band - 1;
        if (polarity == Polarity::valley)
            c.values[i] = target ? kValleyContrast : kBackgroundContrasts[rng.uniform_int(0, 2)];
        else
            c.values[i] = target ? kPeakContrast : kPeakBackground;
    }
    return c;
}

/// Band whose centre sample is nearest to a 0-based half-spectrum index;
/// shared boundary samples resolve to the lower band.
inline std::size_t band_for_index(std::size_t index) {
    std::size_t best = 1;
    double best_dist = 1e9;
    for (std::size_t band = 1; band <= kBands; ++band) {
        const double centre = double(band_start(band)) + 2.0;
        const double d = std::abs(double(index) - centre);
        if (d < best_dist) best_dist = d, best = band;
    }
    return best;
}

/// Upside-down Gaussian on both polarizations:
/// T(l) = 1 - amplitude * exp(-(l - mean)^2 / (2 sigma^2)), clamped to [0,1].
inline Spectrum gaussian_target(double mean_nm, double sigma_nm, double amplitude) {
    if (!(amplitude > 0.0 && amplitude <= 1.0)) throw ValueError("gaussian_target: amplitude must lie in (0,1]");
    if (!(sigma_nm > 0.0)) throw ValueError("gaussian_target: sigma must be positive");
    Spectrum s;
    for (std::size_t k = 0; k < kSpectrumPoints; ++k) {
        const double d = wavelength_nm(k) - mean_nm;
        const double v = 1.0 - amplitude * std::exp(-d * d / (2.0 * sigma_nm * sigma_nm));
        s.t[k] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    return s;
}

}  // namespace metafilter

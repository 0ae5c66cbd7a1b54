#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "metafilter/errors.hpp"

namespace metafilter {

inline constexpr std::size_t kImageSide = 64;
inline constexpr std::size_t kImagePixels = kImageSide * kImageSide;
inline constexpr std::size_t kHalfPoints = 29;
inline constexpr std::size_t kSpectrumPoints = 2 * kHalfPoints;
inline constexpr int kPeriodMin = 200;
inline constexpr int kPeriodMax = 400;

/// Grid wavelength of half-spectrum sample k (0-based): 400, 410, ..., 680 nm.
constexpr double wavelength_nm(std::size_t k) { return 400.0 + 10.0 * double(k % kHalfPoints); }

/// 64x64 row-major intensity image; binary when every pixel is exactly 0 or 1.
struct ShapeImage {
    std::array<float, kImagePixels> pixels{};

    float& at(std::size_t row, std::size_t col) { return pixels[row * kImageSide + col]; }
    float at(std::size_t row, std::size_t col) const { return pixels[row * kImageSide + col]; }

    bool is_binary() const {
        for (float v : pixels)
            if (v != 0.0f && v != 1.0f) return false;
        return true;
    }

    /// Throws unless every pixel lies in [0, 1].
    void require_unit_range(const char* what = "shape") const {
        for (std::size_t i = 0; i < kImagePixels; ++i)
            if (!(pixels[i] >= 0.0f && pixels[i] <= 1.0f))
                throw ValueError(std::string(what) + ": pixel " + std::to_string(i) + " = " +
                                 std::to_string(pixels[i]) + " outside [0,1]");
    }

    double fill_fraction() const {
        double s = 0.0;
        for (float v : pixels) s += v;
        return s / double(kImagePixels);
    }

    friend bool operator==(const ShapeImage&, const ShapeImage&) = default;
};

/// Rotate counterclockwise by 90 degrees: out(r, c) = in(c, 63 - r).
/// Row fills of the result are the column fills of the input (reversed) and
/// vice versa.
inline ShapeImage rot90(const ShapeImage& in) {
    ShapeImage out;
    for (std::size_t r = 0; r < kImageSide; ++r)
        for (std::size_t c = 0; c < kImageSide; ++c) out.at(r, c) = in.at(c, kImageSide - 1 - r);
    return out;
}

/// 58 transmittances: TE 400..680 nm then TM 400..680 nm.
struct Spectrum {
    std::array<float, kSpectrumPoints> t{};

    std::span<const float, kHalfPoints> te() const { return std::span<const float, kHalfPoints>(t.data(), kHalfPoints); }
    std::span<const float, kHalfPoints> tm() const {
        return std::span<const float, kHalfPoints>(t.data() + kHalfPoints, kHalfPoints);
    }

    Spectrum swapped() const {
        Spectrum s;
        for (std::size_t k = 0; k < kHalfPoints; ++k) {
            s.t[k] = t[k + kHalfPoints];
            s.t[k + kHalfPoints] = t[k];
        }
        return s;
    }

    void require_valid(const char* what = "spectrum") const {
        for (std::size_t i = 0; i < kSpectrumPoints; ++i)
            if (!(t[i] >= 0.0f && t[i] <= 1.0f))
                throw ValueError(std::string(what) + ": value " + std::to_string(i) + " = " + std::to_string(t[i]) +
                                 " outside [0,1]");
    }

    friend bool operator==(const Spectrum&, const Spectrum&) = default;
};

/// Lattice period in whole nanometres, 200..400.
class Period {
public:
    explicit Period(int nm) : nm_(nm) {
        if (nm < kPeriodMin || nm > kPeriodMax)
            throw ValueError("period " + std::to_string(nm) + " nm outside [200, 400]");
    }

    /// Nearest whole nanometre of a real-valued period, clamped into range.
    static Period round(double nm) {
        const double r = std::round(nm);
        return Period(static_cast<int>(std::clamp(r, double(kPeriodMin), double(kPeriodMax))));
    }

    int nm() const { return nm_; }
    /// (P - 200) / 200, the network-side encoding.
    double normalized() const { return (nm_ - kPeriodMin) / double(kPeriodMax - kPeriodMin); }

    friend bool operator==(const Period&, const Period&) = default;

private:
    int nm_;
};

struct DeviceRecord {
    ShapeImage shape;
    Period period{kPeriodMin};
    Spectrum spectrum;

    friend bool operator==(const DeviceRecord&, const DeviceRecord&) = default;
};

}  // namespace metafilter

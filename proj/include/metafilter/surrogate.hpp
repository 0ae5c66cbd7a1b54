#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>

#include "metafilter/types.hpp"

// Deterministic analytic stand-in for a rigorous electromagnetic solver.
//
// A 500 nm polysilicon pattern on glass is homogenized per polarization
// (series mixing inside each column/row, parallel mixing across them), run
// through a single-film transfer matrix, and multiplied by a Lorentzian
// lattice-resonance dip whose centre scales with the period. TE reads the
// column fills, TM the row fills, so rotating the pattern by 90 degrees swaps
// the two halves exactly.

namespace metafilter::surrogate {

using cplx = std::complex<double>;

inline constexpr double kFilmThicknessNm = 500.0;
inline constexpr double kSubstrateIndex = 1.45;
inline constexpr double kAmbientIndex = 1.0;
inline constexpr double kDipWidthNm = 25.0;
inline constexpr double kDipStrength = 0.85;
inline constexpr double kDipReferenceNm = 540.0;

/// Dispersive silicon model: n = 3.2 + 0.35 (400/l)^2, k = 0.3 exp(-(l-400)/80).
inline cplx silicon_index(double lambda_nm) {
    const double r = 400.0 / lambda_nm;
    return {3.2 + 0.35 * r * r, 0.30 * std::exp(-(lambda_nm - 400.0) / 80.0)};
}

inline cplx silicon_permittivity(double lambda_nm) {
    const cplx n = silicon_index(lambda_nm);
    return n * n;
}

/// Histogram of filled-pixel counts per line (index = count, 0..64).
using FillHistogram = std::array<int, kImageSide + 1>;

inline FillHistogram column_fill_histogram(const ShapeImage& s) {
    FillHistogram h{};
    for (std::size_t c = 0; c < kImageSide; ++c) {
        int n = 0;
        for (std::size_t r = 0; r < kImageSide; ++r) n += s.at(r, c) != 0.0f;
        ++h[n];
    }
    return h;
}

inline FillHistogram row_fill_histogram(const ShapeImage& s) {
    FillHistogram h{};
    for (std::size_t r = 0; r < kImageSide; ++r) {
        int n = 0;
        for (std::size_t c = 0; c < kImageSide; ++c) n += s.at(r, c) != 0.0f;
        ++h[n];
    }
    return h;
}

/// (1/64) sum_lines [ f/eps + (1 - f) ]^-1, summed by fill count so the
/// result does not depend on line order.
inline cplx homogenized_permittivity(const FillHistogram& hist, double lambda_nm) {
    const cplx eps = silicon_permittivity(lambda_nm);
    cplx acc = 0.0;
    for (std::size_t count = 0; count <= kImageSide; ++count) {
        if (hist[count] == 0) continue;
        const double f = double(count) / double(kImageSide);
        acc += double(hist[count]) / (f / eps + (1.0 - f));
    }
    return acc / double(kImageSide);
}

inline cplx effective_index(const FillHistogram& hist, double lambda_nm) {
    return std::sqrt(homogenized_permittivity(hist, lambda_nm));
}

/// Power transmittance of ambient / film / substrate at normal incidence via
/// the characteristic matrix of the film. `film_index` is n + ik with k >= 0
/// for loss; the matrix itself is written for the n - ik convention.
inline double film_transmittance(cplx film_index, double thickness_nm, double lambda_nm,
                                 double substrate = kSubstrateIndex, double ambient = kAmbientIndex) {
    film_index = std::conj(film_index);
    const cplx delta = 2.0 * std::numbers::pi * film_index * thickness_nm / lambda_nm;
    const cplx i(0.0, 1.0);
    const cplx b = std::cos(delta) + i * std::sin(delta) / film_index * substrate;
    const cplx c = i * film_index * std::sin(delta) + std::cos(delta) * substrate;
    const cplx denom = ambient * b + c;
    return 4.0 * ambient * substrate / std::norm(denom);
}

/// Lattice-resonance centre: period * Re(n_eff at 540 nm).
inline double resonance_center(const FillHistogram& hist, int period_nm) {
    return double(period_nm) * effective_index(hist, kDipReferenceNm).real();
}

inline double dip_factor(double lambda_nm, double center_nm, double fill) {
    const double w2 = kDipWidthNm * kDipWidthNm;
    const double d = lambda_nm - center_nm;
    return 1.0 - kDipStrength * std::sqrt(fill) * w2 / (d * d + w2);
}

/// TE and TM resonance centres (nm) for a binary shape.
inline std::array<double, 2> resonance_centers(const ShapeImage& shape, Period period) {
    return {resonance_center(column_fill_histogram(shape), period.nm()),
            resonance_center(row_fill_histogram(shape), period.nm())};
}

inline Spectrum surrogate_spectrum(const ShapeImage& shape, Period period) {
    if (!shape.is_binary()) throw ValueError("surrogate_spectrum: shape must be binary");
    const std::array<FillHistogram, 2> hists{column_fill_histogram(shape), row_fill_histogram(shape)};
    int filled = 0;
    for (std::size_t c = 0; c <= kImageSide; ++c) filled += int(c) * hists[0][c];
    const double fill = double(filled) / double(kImagePixels);

    Spectrum out;
    for (std::size_t pol = 0; pol < 2; ++pol) {
        const double center = resonance_center(hists[pol], period.nm());
        for (std::size_t k = 0; k < kHalfPoints; ++k) {
            const double lambda = wavelength_nm(k);
            double t = film_transmittance(effective_index(hists[pol], lambda), kFilmThicknessNm, lambda);
            t *= dip_factor(lambda, center, fill);
            out.t[pol * kHalfPoints + k] = static_cast<float>(std::clamp(t, 0.0, 1.0));
        }
    }
    return out;
}

}  // namespace metafilter::surrogate

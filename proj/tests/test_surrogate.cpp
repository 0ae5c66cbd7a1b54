#include <gtest/gtest.h>

#include "metafilter/dataset.hpp"
#include "support/random_data.hpp"

using namespace metafilter;
using cplx = std::complex<double>;

namespace {

// Airy summation for ambient / absorbing film / substrate with n + ik and
// exp(+i beta) propagation.
double airy_transmittance(cplx n1, double d, double lambda, double n0 = 1.0, double n2 = 1.45) {
    const cplx i(0, 1);
    const cplx beta = 2.0 * M_PI * n1 * d / lambda;
    const cplx r01 = (n0 - n1) / (n0 + n1), r12 = (n1 - n2) / (n1 + n2);
    const cplx t01 = 2.0 * n0 / (n0 + n1), t12 = 2.0 * n1 / (n1 + n2);
    const cplx t = t01 * t12 * std::exp(i * beta) / (1.0 + r01 * r12 * std::exp(2.0 * i * beta));
    return n2 / n0 * std::norm(t);
}

ShapeImage full_shape() {
    ShapeImage s;
    s.pixels.fill(1.0f);
    return s;
}

DeviceRecord random_device(Rng& rng) { return generate_record(rng.next_u64(), rng.next_u64()); }

}  // namespace

TEST(Surrogate, EmptyShapeIsBareSubstrate) {
    const auto s = surrogate::surrogate_spectrum(ShapeImage{}, Period(250));
    const double expect = 4.0 * 1.45 / (2.45 * 2.45);
    for (float t : s.t) EXPECT_NEAR(t, expect, 1e-6);
    EXPECT_NEAR(expect, 0.9663, 1e-4);
}

TEST(Surrogate, TransferMatrixMatchesAiryFormula) {
    for (double lambda = 400; lambda <= 680; lambda += 10) {
        const cplx n = surrogate::silicon_index(lambda);
        EXPECT_NEAR(surrogate::film_transmittance(n, 500.0, lambda), airy_transmittance(n, 500.0, lambda), 1e-12) << lambda;
        const cplx lossless(2.1, 0.0);
        EXPECT_NEAR(surrogate::film_transmittance(lossless, 137.0, lambda), airy_transmittance(lossless, 137.0, lambda), 1e-12);
    }
}

TEST(Surrogate, FullSiliconFilmIsBlueLossy) {
    const auto s = surrogate::surrogate_spectrum(full_shape(), Period(300));
    EXPECT_LT(s.t[0], s.t[28]);
    EXPECT_LT(s.t[29], s.t[57]);
    // Hand evaluation: homogenized film equals bulk silicon; dip with f = 1.
    const auto hist = surrogate::column_fill_histogram(full_shape());
    const double centre = surrogate::resonance_center(hist, 300);
    EXPECT_NEAR(centre, 300.0 * surrogate::silicon_index(540.0).real(), 1e-9);
    for (std::size_t k = 0; k < 29; ++k) {
        const double lambda = wavelength_nm(k);
        const double base = airy_transmittance(surrogate::silicon_index(lambda), 500.0, lambda);
        const double d = lambda - centre;
        const double dip = 1.0 - 0.85 * 625.0 / (d * d + 625.0);
        EXPECT_NEAR(s.t[k], std::clamp(base * dip, 0.0, 1.0), 1e-6);
    }
}

TEST(Surrogate, HomogenizationFormula) {
    Rng rng(1);
    const auto shape = testsupport::random_binary_image(rng, 0.4);
    const double lambda = 530.0;
    const cplx eps = surrogate::silicon_permittivity(lambda);
    cplx te = 0.0, tm = 0.0;
    for (std::size_t j = 0; j < 64; ++j) {
        double p = 0, q = 0;
        for (std::size_t i = 0; i < 64; ++i) p += shape.at(i, j), q += shape.at(j, i);
        p /= 64, q /= 64;
        te += 1.0 / (p / eps + (1.0 - p));
        tm += 1.0 / (q / eps + (1.0 - q));
    }
    te /= 64.0, tm /= 64.0;
    const cplx got_te = surrogate::homogenized_permittivity(surrogate::column_fill_histogram(shape), lambda);
    const cplx got_tm = surrogate::homogenized_permittivity(surrogate::row_fill_histogram(shape), lambda);
    EXPECT_NEAR(std::abs(got_te - te), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(got_tm - tm), 0.0, 1e-12);
}

TEST(Surrogate, RotationSwapsPolarizationsExactly) {
    Rng rng(2);
    for (int t = 0; t < 200; ++t) {
        const auto rec = random_device(rng);
        const auto r1 = rot90(rec.shape), r2 = rot90(r1), r3 = rot90(r2);
        EXPECT_EQ(surrogate::surrogate_spectrum(r1, rec.period), rec.spectrum.swapped());
        EXPECT_EQ(surrogate::surrogate_spectrum(r2, rec.period), rec.spectrum);
        EXPECT_EQ(surrogate::surrogate_spectrum(r3, rec.period), rec.spectrum.swapped());
        EXPECT_EQ(rot90(r3), rec.shape);
    }
}

TEST(Surrogate, OutputInUnitRange) {
    Rng rng(3);
    for (int t = 0; t < 10000; ++t) {
        const auto shape = testsupport::random_binary_image(rng, rng.uniform());
        const auto s = surrogate::surrogate_spectrum(shape, Period(static_cast<int>(rng.uniform_int(200, 400))));
        for (float v : s.t) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
    }
}

TEST(Surrogate, DipCentreIncreasesWithPeriod) {
    Rng rng(4);
    for (int t = 0; t < 20; ++t) {
        const auto rec = random_device(rng);
        double prev_te = -1, prev_tm = -1;
        for (int p = 200; p <= 400; p += 5) {
            const auto c = surrogate::resonance_centers(rec.shape, Period(p));
            EXPECT_GT(c[0], prev_te);
            EXPECT_GT(c[1], prev_tm);
            prev_te = c[0], prev_tm = c[1];
        }
    }
}

TEST(Surrogate, RejectsNonBinary) {
    ShapeImage s;
    s.pixels[3] = 0.5f;
    EXPECT_THROW(surrogate::surrogate_spectrum(s, Period(300)), ValueError);
}

TEST(Period, Range) {
    EXPECT_THROW(Period(199), ValueError);
    EXPECT_THROW(Period(401), ValueError);
    EXPECT_EQ(Period(200).normalized(), 0.0);
    EXPECT_EQ(Period(400).normalized(), 1.0);
    EXPECT_EQ(Period::round(287.6).nm(), 288);
    EXPECT_EQ(Period::round(512.0).nm(), 400);
}

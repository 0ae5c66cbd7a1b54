#pragma once

#include "metafilter/rng.hpp"
#include "metafilter/types.hpp"

namespace testsupport {

inline metafilter::ShapeImage random_image(metafilter::Rng& rng) {
    metafilter::ShapeImage img;
    for (auto& p : img.pixels) p = static_cast<float>(rng.uniform());
    return img;
}

inline metafilter::ShapeImage random_binary_image(metafilter::Rng& rng, double density = 0.5) {
    metafilter::ShapeImage img;
    for (auto& p : img.pixels) p = rng.uniform() < density ? 1.0f : 0.0f;
    return img;
}

inline metafilter::Spectrum random_spectrum(metafilter::Rng& rng) {
    metafilter::Spectrum s;
    for (auto& t : s.t) t = static_cast<float>(rng.uniform());
    return s;
}

}  // namespace testsupport

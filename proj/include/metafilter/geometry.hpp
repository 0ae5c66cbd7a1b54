#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <numbers>
#include <vector>

#include "metafilter/rng.hpp"
#include "metafilter/types.hpp"

namespace metafilter {

struct Point {
    double x = 0.0, y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

using Polygon = std::vector<Point>;

inline constexpr double kDefaultMeanRadius = 0.35;
inline constexpr double kMinVertexRadius = 0.01;
inline constexpr double kMaxAngleStep = 0.9 * std::numbers::pi;

namespace detail {
template <class T>
T clamp_with_warning(T v, T lo, T hi, const char* name) {
    if (v < lo || v > hi) {
        std::clog << "warning: random_polygon " << name << " = " << v << " clamped to [" << lo << ", " << hi << "]\n";
        return std::clamp(v, lo, hi);
    }
    return v;
}

// Distance from the square's centre to its boundary along direction theta.
inline double distance_to_square_edge(double theta) {
    return 0.5 / std::max(std::abs(std::cos(theta)), std::abs(std::sin(theta)));
}
/// Clips steps (which sum to a full turn) at `cap` and hands the excess to
/// the unclipped ones in proportion, until none exceeds the cap.
inline void cap_steps(std::vector<double>& steps, double cap) {
    for (;;) {
        double excess = 0.0, free_total = 0.0;
        for (double& s : steps) {
            if (s > cap) excess += s - cap, s = cap;
            if (s < cap) free_total += s;
        }
        if (excess == 0.0 || free_total == 0.0) return;
        for (double& s : steps)
            if (s < cap) s += excess * s / free_total;
    }
}
}  // namespace detail

/// Star-shaped random polygon inside the unit square (angular sweep around
/// the centre). Angle increments are jittered by `irregularity`,
/// renormalized to a full turn and kept below a half turn; radii come from
/// N(mean_radius, spikiness * mean_radius), clipped to [0.01, distance to the
/// square edge]. Strictly increasing angles, gaps under a half turn and
/// positive radii make the result simple.
inline Polygon random_polygon(std::uint64_t seed, int vertex_count, double irregularity, double spikiness,
                              double mean_radius = kDefaultMeanRadius) {
    vertex_count = detail::clamp_with_warning(vertex_count, 3, 16, "vertex_count");
    irregularity = detail::clamp_with_warning(irregularity, 0.0, 1.0, "irregularity");
    spikiness = detail::clamp_with_warning(spikiness, 0.0, 1.0, "spikiness");
    mean_radius = detail::clamp_with_warning(mean_radius, kMinVertexRadius, 0.5, "mean_radius");

    Rng rng(seed);
    const std::size_t n = static_cast<std::size_t>(vertex_count);
    const double nominal = 2.0 * std::numbers::pi / double(n);
    const double jitter = irregularity * nominal;
    std::vector<double> steps(n);
    double total = 0.0;
    for (auto& s : steps) {
        s = std::max(rng.uniform(nominal - jitter, nominal + jitter), 1e-6 * nominal);
        total += s;
    }
    // Normalize to a full turn, then cap every step below a half turn: a
    // wider gap puts the centre outside the kernel and edges can cross.
    for (auto& s : steps) s *= 2.0 * std::numbers::pi / total;
    detail::cap_steps(steps, kMaxAngleStep);
    double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double spread = spikiness * mean_radius;

    Polygon poly;
    poly.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double limit = detail::distance_to_square_edge(angle);
        const double r = std::clamp(rng.normal(mean_radius, spread), kMinVertexRadius, limit);
        // the clamp only absorbs rounding at the square edge
        poly.push_back({std::clamp(0.5 + r * std::cos(angle), 0.0, 1.0), std::clamp(0.5 + r * std::sin(angle), 0.0, 1.0)});
        angle += steps[i];
    }
    return poly;
}

inline double signed_area(const Polygon& poly) {
    double a = 0.0;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
        a += poly[j].x * poly[i].y - poly[i].x * poly[j].y;
    return 0.5 * a;
}

/// True when every vertex lies on one line (or there are fewer than three),
/// so the polygon encloses nothing. Self-intersecting polygons whose lobes
/// cancel in the signed area are not degenerate.
inline bool is_degenerate(const Polygon& poly) {
    if (poly.size() < 3) return true;
    double spread = 0.0;
    for (std::size_t i = 2; i < poly.size(); ++i) {
        const double ux = poly[i - 1].x - poly[0].x, uy = poly[i - 1].y - poly[0].y;
        const double vx = poly[i].x - poly[0].x, vy = poly[i].y - poly[0].y;
        spread += std::abs(ux * vy - uy * vx);
    }
    return spread < 1e-12;
}

/// Binary 64x64 mask: a pixel is 1 iff its centre ((col+.5)/64, (row+.5)/64)
/// is inside the polygon under the even-odd rule.
inline ShapeImage rasterize(const Polygon& poly) {
    ShapeImage img;
    if (is_degenerate(poly)) return img;
    std::vector<double> crossings;
    for (std::size_t row = 0; row < kImageSide; ++row) {
        const double y = (double(row) + 0.5) / double(kImageSide);
        crossings.clear();
        for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
            const Point& a = poly[i];
            const Point& b = poly[j];
            if ((a.y > y) != (b.y > y)) crossings.push_back((b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x);
        }
        std::sort(crossings.begin(), crossings.end());
        for (std::size_t col = 0; col < kImageSide; ++col) {
            const double x = (double(col) + 0.5) / double(kImageSide);
            // crossings strictly to the right of the centre
            const auto right = crossings.end() - std::upper_bound(crossings.begin(), crossings.end(), x);
            img.at(row, col) = (right % 2) ? 1.0f : 0.0f;
        }
    }
    return img;
}

}  // namespace metafilter

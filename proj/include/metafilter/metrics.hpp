#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "metafilter/nn/ops.hpp"
#include "metafilter/types.hpp"

namespace metafilter {

/// Mean squared error with double accumulation.
template <class A, class B>
double mse(std::span<const A> a, std::span<const B> b) {
    if (a.size() != b.size())
        throw ShapeError("mse: length " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    if (a.empty()) throw ShapeError("mse: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = double(a[i]) - double(b[i]);
        acc += d * d;
    }
    return acc / double(a.size());
}

inline double mse(const Spectrum& a, const Spectrum& b) {
    return mse(std::span<const float>(a.t), std::span<const float>(b.t));
}

struct SsimConfig {
    std::size_t window = 11;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;

    void validate() const {
        if (window % 2 == 0 || window == 0 || window > kImageSide)
            throw ValueError("ssim window must be odd and at most 64, got " + std::to_string(window));
        if (!(k1 > 0.0) || !(k2 > 0.0)) throw ValueError("ssim constants k1, k2 must be positive");
        if (!(dynamic_range > 0.0)) throw ValueError("ssim dynamic range must be positive");
    }
    double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
    double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
};

namespace detail {

// Sum of every window x window block; result is (h-w+1) x (w_-w+1).
inline std::vector<double> window_sums(const std::vector<double>& img, std::size_t h, std::size_t w, std::size_t win) {
    std::vector<double> integral((h + 1) * (w + 1), 0.0);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            integral[(i + 1) * (w + 1) + j + 1] =
                img[i * w + j] + integral[i * (w + 1) + j + 1] + integral[(i + 1) * (w + 1) + j] - integral[i * (w + 1) + j];
    const std::size_t nh = h - win + 1, nw = w - win + 1;
    std::vector<double> out(nh * nw);
    for (std::size_t i = 0; i < nh; ++i)
        for (std::size_t j = 0; j < nw; ++j)
            out[i * nw + j] = integral[(i + win) * (w + 1) + j + win] - integral[i * (w + 1) + j + win] -
                              integral[(i + win) * (w + 1) + j] + integral[i * (w + 1) + j];
    return out;
}

// For every pixel, the sum of a per-window map over the windows covering it.
inline std::vector<double> scatter_window_sums(const std::vector<double>& map, std::size_t h, std::size_t w,
                                               std::size_t win) {
    const std::size_t nh = h - win + 1, nw = w - win + 1;
    std::vector<double> integral((nh + 1) * (nw + 1), 0.0);
    for (std::size_t i = 0; i < nh; ++i)
        for (std::size_t j = 0; j < nw; ++j)
            integral[(i + 1) * (nw + 1) + j + 1] = map[i * nw + j] + integral[i * (nw + 1) + j + 1] +
                                                   integral[(i + 1) * (nw + 1) + j] - integral[i * (nw + 1) + j];
    std::vector<double> out(h * w);
    for (std::size_t i = 0; i < h; ++i) {
        const std::size_t a0 = i + 1 >= win ? i + 1 - win : 0, a1 = std::min(i, nh - 1) + 1;
        for (std::size_t j = 0; j < w; ++j) {
            const std::size_t b0 = j + 1 >= win ? j + 1 - win : 0, b1 = std::min(j, nw - 1) + 1;
            out[i * w + j] = integral[a1 * (nw + 1) + b1] - integral[a0 * (nw + 1) + b1] - integral[a1 * (nw + 1) + b0] +
                             integral[a0 * (nw + 1) + b0];
        }
    }
    return out;
}

struct SsimResult {
    double value;
    std::vector<double> grad_a, grad_b;  // d(value)/d(pixel), filled on request
};

// Mean local SSIM with uniform windows over all valid placements.
inline SsimResult ssim_plane(const std::vector<double>& x, const std::vector<double>& y, std::size_t h, std::size_t w,
                             const SsimConfig& cfg, bool want_grad) {
    const std::size_t win = cfg.window;
    if (win > h || win > w) throw ValueError("ssim window larger than image");
    const double m = double(win * win), c1 = cfg.c1(), c2 = cfg.c2();
    std::vector<double> xx(h * w), yy(h * w), xy(h * w);
    for (std::size_t i = 0; i < h * w; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    auto sx = window_sums(x, h, w, win), sy = window_sums(y, h, w, win);
    auto sxx = window_sums(xx, h, w, win), syy = window_sums(yy, h, w, win), sxy = window_sums(xy, h, w, win);
    const std::size_t nwin = sx.size();

    SsimResult res{0.0, {}, {}};
    std::vector<double> da_const, da_var, da_cov, db_const, db_var;
    if (want_grad) {
        da_const.resize(nwin), da_var.resize(nwin), da_cov.resize(nwin), db_const.resize(nwin), db_var.resize(nwin);
    }
    double total = 0.0;
    for (std::size_t k = 0; k < nwin; ++k) {
        const double mx = sx[k] / m, my = sy[k] / m;
        const double vx = sxx[k] / m - mx * mx, vy = syy[k] / m - my * my, cxy = sxy[k] / m - mx * my;
        const double a1 = 2 * mx * my + c1, a2 = 2 * cxy + c2, b1 = mx * mx + my * my + c1, b2 = vx + vy + c2;
        const double s = (a1 * a2) / (b1 * b2);
        total += s;
        if (want_grad) {
            const double d_mx = 2 * my * a2 / (b1 * b2) - s * 2 * mx / b1;
            const double d_my = 2 * mx * a2 / (b1 * b2) - s * 2 * my / b1;
            const double d_v = -s / b2;
            const double d_c = 2 * a1 / (b1 * b2);
            // pixel gradient = (1/m)[d_mu + 2 d_v (p - mu_self) + d_c (q - mu_other)]
            da_const[k] = d_mx - 2 * d_v * mx - d_c * my;
            db_const[k] = d_my - 2 * d_v * my - d_c * mx;
            da_var[k] = d_v;
            db_var[k] = d_v;
            da_cov[k] = d_c;
        }
    }
    res.value = total / double(nwin);
    if (want_grad) {
        const auto ca = scatter_window_sums(da_const, h, w, win), cb = scatter_window_sums(db_const, h, w, win);
        const auto va = scatter_window_sums(da_var, h, w, win), cc = scatter_window_sums(da_cov, h, w, win);
        const double k = 1.0 / (m * double(nwin));
        res.grad_a.resize(h * w);
        res.grad_b.resize(h * w);
        for (std::size_t i = 0; i < h * w; ++i) {
            res.grad_a[i] = k * (ca[i] + 2 * x[i] * va[i] + y[i] * cc[i]);
            res.grad_b[i] = k * (cb[i] + 2 * y[i] * va[i] + x[i] * cc[i]);
        }
    }
    return res;
}

template <class Seq>
void require_unit_interval(const Seq& values, const char* what) {
    std::size_t i = 0;
    for (auto v : values) {
        if (!(v >= 0 && v <= 1))
            throw ValueError(std::string(what) + ": pixel " + std::to_string(i) + " = " + std::to_string(double(v)) +
                             " outside [0,1]");
        ++i;
    }
}

}  // namespace detail

/// Mean structural similarity of two 64x64 images (uniform window).
inline double ssim(const ShapeImage& a, const ShapeImage& b, const SsimConfig& cfg = {}) {
    cfg.validate();
    a.require_unit_range("ssim");
    b.require_unit_range("ssim");
    std::vector<double> x(a.pixels.begin(), a.pixels.end()), y(b.pixels.begin(), b.pixels.end());
    return detail::ssim_plane(x, y, kImageSide, kImageSide, cfg, false).value;
}

/// Differentiable batch SSIM: mean over the batch of per-image mean SSIM.
/// Inputs are [N,1,H,W] with values in [0,1].
template <class Real>
nn::Tensor<Real> ssim(const nn::Tensor<Real>& a, const nn::Tensor<Real>& b, const SsimConfig& cfg = {}) {
    cfg.validate();
    if (a.dims() != b.dims() || a.rank() != 4 || a.dim(1) != 1)
        throw ShapeError("ssim: expected matching [N,1,H,W] tensors, got " + nn::to_string(a.dims()) + " and " +
                         nn::to_string(b.dims()));
    detail::require_unit_interval(a.values(), "ssim");
    detail::require_unit_interval(b.values(), "ssim");
    const std::size_t n = a.dim(0), h = a.dim(2), w = a.dim(3), hw = h * w;
    const bool track = nn::grad_mode_flag() && (a.requires_grad() || b.requires_grad());
    std::vector<Real> grad_a, grad_b;
    if (track) grad_a.resize(n * hw), grad_b.resize(n * hw);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(a.values().begin() + i * hw, a.values().begin() + (i + 1) * hw);
        std::vector<double> y(b.values().begin() + i * hw, b.values().begin() + (i + 1) * hw);
        auto r = detail::ssim_plane(x, y, h, w, cfg, track);
        total += r.value;
        if (track)
            for (std::size_t k = 0; k < hw; ++k) {
                grad_a[i * hw + k] = static_cast<Real>(r.grad_a[k] / double(n));
                grad_b[i * hw + k] = static_cast<Real>(r.grad_b[k] / double(n));
            }
    }
    return nn::make_result<Real>({1}, {static_cast<Real>(total / double(n))}, {a, b}, "ssim",
                                 [ga = std::move(grad_a), gb = std::move(grad_b)](nn::Node<Real>& self) {
                                     if (auto g = nn::parent_grad(self, 0); !g.empty())
                                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * ga[i];
                                     if (auto g = nn::parent_grad(self, 1); !g.empty())
                                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * gb[i];
                                 });
}

/// spectrum_loss + alpha * shape_dissim + beta * period_loss, where
/// shape_dissim is 1 - SSIM so that matching shapes lower the loss.
inline double generator_loss(double spectrum_loss, double shape_dissim, double period_loss, double alpha, double beta) {
    return spectrum_loss + alpha * shape_dissim + beta * period_loss;
}

template <class Real>
nn::Tensor<Real> generator_loss(const nn::Tensor<Real>& spectrum_loss, const nn::Tensor<Real>& shape_dissim,
                                const nn::Tensor<Real>& period_loss, double alpha, double beta) {
    if (alpha < 0 || beta < 0) throw ValueError("generator_loss: alpha and beta must be nonnegative");
    return nn::add(nn::add(spectrum_loss, nn::affine(shape_dissim, static_cast<Real>(alpha))),
                   nn::affine(period_loss, static_cast<Real>(beta)));
}

/// Pixels at or above the threshold become 1, the rest 0.
inline ShapeImage binarize(const ShapeImage& img, double threshold = 0.5) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ValueError("binarize: threshold must lie in (0,1)");
    ShapeImage out;
    for (std::size_t i = 0; i < kImagePixels; ++i) out.pixels[i] = img.pixels[i] >= threshold ? 1.0f : 0.0f;
    return out;
}

/// Mean per-pixel distance to the nearer of {0, 1}.
inline double mean_manhattan_to_binary(const ShapeImage& img) {
    img.require_unit_range("mean_manhattan_to_binary");
    double acc = 0.0;
    for (float v : img.pixels) acc += std::min<double>(v, 1.0 - double(v));
    return acc / double(kImagePixels);
}

}  // namespace metafilter

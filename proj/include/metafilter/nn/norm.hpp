#pragma once

#include <cmath>
#include <initializer_list>

#include "metafilter/nn/ops.hpp"

namespace metafilter::nn {

struct BatchNormOptions {
    double momentum = 0.1;
    double eps = 1e-5;
};

/// Per-channel batch normalization over [N,C] or [N,C,H,W].
///
/// In training mode the batch statistics normalize the input and are folded
/// into the running buffers (unbiased variance); in evaluation mode the
/// running buffers are used and left untouched. Gradients flow to the input,
/// scale and shift in both modes.
template <class Real>
Tensor<Real> batch_norm(const Tensor<Real>& x, const Tensor<Real>& scale, const Tensor<Real>& shift,
                        Tensor<Real>& running_mean, Tensor<Real>& running_var, bool training,
                        BatchNormOptions opt = {}) {
    if (x.rank() != 2 && x.rank() != 4) throw ShapeError("batch_norm: expected [N,C] or [N,C,H,W], got " + to_string(x.dims()));
    const std::size_t n = x.dim(0), c = x.dim(1), p = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
    for (const Tensor<Real>* t : std::initializer_list<const Tensor<Real>*>{&scale, &shift, &running_mean, &running_var})
        if (t->numel() != c)
            throw ShapeError("batch_norm: per-channel tensor has dims " + to_string(t->dims()) + ", expected " +
                             std::to_string(c) + " channels");
    const std::size_t m = n * p;
    if (training && m < 2) throw ShapeError("batch_norm: training mode needs more than one value per channel");

    std::vector<Real> inv_std(c), xhat(x.numel()), out(x.numel());
    const auto xv = x.values();
    for (std::size_t k = 0; k < c; ++k) {
        double mu, var;
        if (training) {
            double s = 0.0, ss = 0.0;
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t i = 0; i < p; ++i) s += xv[(b * c + k) * p + i];
            mu = s / double(m);
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t i = 0; i < p; ++i) {
                    const double d = xv[(b * c + k) * p + i] - mu;
                    ss += d * d;
                }
            var = ss / double(m);
            auto rm = running_mean.values();
            auto rv = running_var.values();
            rm[k] = static_cast<Real>((1.0 - opt.momentum) * rm[k] + opt.momentum * mu);
            rv[k] = static_cast<Real>((1.0 - opt.momentum) * rv[k] + opt.momentum * var * double(m) / double(m - 1));
        } else {
            mu = running_mean[k];
            var = running_var[k];
        }
        const double is = 1.0 / std::sqrt(var + opt.eps);
        inv_std[k] = static_cast<Real>(is);
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t i = 0; i < p; ++i) {
                const std::size_t idx = (b * c + k) * p + i;
                xhat[idx] = static_cast<Real>((xv[idx] - mu) * is);
                out[idx] = scale[k] * xhat[idx] + shift[k];
            }
    }

    return make_result<Real>(x.dims(), std::move(out), {x, scale, shift}, "batch_norm",
                             [n, c, p, m, training, inv_std = std::move(inv_std), xhat = std::move(xhat)](Node<Real>& self) {
                                 const auto& gamma = self.parents[1]->values;
                                 auto gx = parent_grad(self, 0);
                                 auto gs = parent_grad(self, 1);
                                 auto gb = parent_grad(self, 2);
                                 for (std::size_t k = 0; k < c; ++k) {
                                     double sum_dy = 0.0, sum_dy_xhat = 0.0;
                                     for (std::size_t b = 0; b < n; ++b)
                                         for (std::size_t i = 0; i < p; ++i) {
                                             const std::size_t idx = (b * c + k) * p + i;
                                             sum_dy += self.grad[idx];
                                             sum_dy_xhat += double(self.grad[idx]) * xhat[idx];
                                         }
                                     if (!gs.empty()) gs[k] += static_cast<Real>(sum_dy_xhat);
                                     if (!gb.empty()) gb[k] += static_cast<Real>(sum_dy);
                                     if (gx.empty()) continue;
                                     const double gk = gamma[k], is = inv_std[k];
                                     for (std::size_t b = 0; b < n; ++b)
                                         for (std::size_t i = 0; i < p; ++i) {
                                             const std::size_t idx = (b * c + k) * p + i;
                                             double d = double(self.grad[idx]);
                                             if (training)
                                                 d = d - sum_dy / double(m) - xhat[idx] * sum_dy_xhat / double(m);
                                             gx[idx] += static_cast<Real>(gk * is * d);
                                         }
                                 }
                             });
}

}  // namespace metafilter::nn

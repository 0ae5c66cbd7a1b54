#pragma once

#include <memory>

#include "metafilter/nn/ops.hpp"

namespace metafilter::nn {

/// Sliding-window layout shared by conv2d and its transpose: an image of
/// `channels x height x width` scanned by a `kernel_h x kernel_w` window.
struct ConvGeometry {
    std::size_t channels = 0, height = 0, width = 0;
    std::size_t kernel_h = 0, kernel_w = 0, stride = 1, padding = 0;

    std::size_t out_h() const { return (height + 2 * padding - kernel_h) / stride + 1; }
    std::size_t out_w() const { return (width + 2 * padding - kernel_w) / stride + 1; }
    std::size_t rows() const { return channels * kernel_h * kernel_w; }
};

namespace detail {

// cols[(c,ky,kx)][(b,oy,ox)] = image[b, c, oy*s-p+ky, ox*s-p+kx] (zero outside).
template <class Real>
void im2col(const Real* image, std::size_t batch, const ConvGeometry& g, Real* cols) {
    const std::size_t oh = g.out_h(), ow = g.out_w(), ncols = batch * oh * ow;
    const std::ptrdiff_t H = g.height, W = g.width, pad = g.padding, s = g.stride;
    for (std::size_t c = 0; c < g.channels; ++c)
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                Real* row = cols + ((c * g.kernel_h + ky) * g.kernel_w + kx) * ncols;
                for (std::size_t b = 0; b < batch; ++b) {
                    const Real* plane = image + (b * g.channels + c) * H * W;
                    for (std::size_t oy = 0; oy < oh; ++oy) {
                        Real* dst = row + (b * oh + oy) * ow;
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * s - pad + std::ptrdiff_t(ky);
                        if (iy < 0 || iy >= H) {
                            std::fill_n(dst, ow, Real(0));
                            continue;
                        }
                        const Real* src = plane + iy * W;
                        for (std::size_t ox = 0; ox < ow; ++ox) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * s - pad + std::ptrdiff_t(kx);
                            dst[ox] = (ix < 0 || ix >= W) ? Real(0) : src[ix];
                        }
                    }
                }
            }
}

// Adjoint of im2col: scatter-add the columns back into the image.
template <class Real>
void col2im(const Real* cols, std::size_t batch, const ConvGeometry& g, Real* image) {
    const std::size_t oh = g.out_h(), ow = g.out_w(), ncols = batch * oh * ow;
    const std::ptrdiff_t H = g.height, W = g.width, pad = g.padding, s = g.stride;
    for (std::size_t c = 0; c < g.channels; ++c)
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const Real* row = cols + ((c * g.kernel_h + ky) * g.kernel_w + kx) * ncols;
                for (std::size_t b = 0; b < batch; ++b) {
                    Real* plane = image + (b * g.channels + c) * H * W;
                    for (std::size_t oy = 0; oy < oh; ++oy) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * s - pad + std::ptrdiff_t(ky);
                        if (iy < 0 || iy >= H) continue;
                        const Real* src = row + (b * oh + oy) * ow;
                        Real* dst = plane + iy * W;
                        for (std::size_t ox = 0; ox < ow; ++ox) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * s - pad + std::ptrdiff_t(kx);
                            if (ix >= 0 && ix < W) dst[ix] += src[ox];
                        }
                    }
                }
            }
}

// [N, C, P] <-> [C, N*P]
template <class Real>
void nchw_to_cn(const Real* in, std::size_t n, std::size_t c, std::size_t p, Real* out) {
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t k = 0; k < c; ++k) std::copy_n(in + (b * c + k) * p, p, out + (k * n + b) * p);
}

template <class Real>
void cn_to_nchw(const Real* in, std::size_t n, std::size_t c, std::size_t p, Real* out, bool accumulate) {
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t k = 0; k < c; ++k) {
            const Real* src = in + (k * n + b) * p;
            Real* dst = out + (b * c + k) * p;
            if (accumulate)
                for (std::size_t i = 0; i < p; ++i) dst[i] += src[i];
            else
                std::copy_n(src, p, dst);
        }
}

template <class Real>
void accumulate_bias_grad(std::span<const Real> dy, std::size_t n, std::size_t c, std::size_t p, std::span<Real> g) {
    for (std::size_t k = 0; k < c; ++k) {
        double acc = 0.0;
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t i = 0; i < p; ++i) acc += dy[(b * c + k) * p + i];
        g[k] += static_cast<Real>(acc);
    }
}

inline void check_conv_args(const Dims& in, const Dims& kernel, const Dims& bias, std::size_t kernel_in_axis,
                            std::size_t stride, std::size_t padding, const char* op) {
    if (in.size() != 4) throw ShapeError(std::string(op) + ": input must be NCHW, got " + to_string(in));
    if (kernel.size() != 4) throw ShapeError(std::string(op) + ": kernel must be 4-D, got " + to_string(kernel));
    if (in[1] != kernel[kernel_in_axis])
        throw ShapeError(std::string(op) + ": input has " + std::to_string(in[1]) + " channels but kernel expects " +
                         std::to_string(kernel[kernel_in_axis]) + " (input " + to_string(in) + ", kernel " +
                         to_string(kernel) + ")");
    const std::size_t out_channels = kernel[1 - kernel_in_axis];
    if (bias.size() != 1 || bias[0] != out_channels)
        throw ShapeError(std::string(op) + ": bias dims " + to_string(bias) + " but kernel has " +
                         std::to_string(out_channels) + " output channels");
    if (stride == 0) throw ShapeError(std::string(op) + ": stride must be positive");
    (void)padding;
}

}  // namespace detail

/// 2-D cross-correlation. input [N,Cin,H,W], kernel [Cout,Cin,kH,kW], bias [Cout].
template <class Real>
Tensor<Real> conv2d(const Tensor<Real>& input, const Tensor<Real>& kernel, const Tensor<Real>& bias, std::size_t stride,
                    std::size_t padding) {
    detail::check_conv_args(input.dims(), kernel.dims(), bias.dims(), 1, stride, padding, "conv2d");
    const std::size_t n = input.dim(0), cout = kernel.dim(0);
    const ConvGeometry g{input.dim(1), input.dim(2), input.dim(3), kernel.dim(2), kernel.dim(3), stride, padding};
    if (g.height + 2 * padding < g.kernel_h || g.width + 2 * padding < g.kernel_w)
        throw ShapeError("conv2d: padded input " + to_string(input.dims()) + " smaller than kernel " +
                         to_string(kernel.dims()));
    const std::size_t oh = g.out_h(), ow = g.out_w(), p = oh * ow, ncols = n * p, r = g.rows();

    auto cols = std::make_shared<std::vector<Real>>(r * ncols);
    detail::im2col(input.values().data(), n, g, cols->data());
    std::vector<Real> ymat(cout * ncols);
    MatrixMap<Real>(ymat.data(), cout, ncols).noalias() =
        ConstMatrixMap<Real>(kernel.values().data(), cout, r) * ConstMatrixMap<Real>(cols->data(), r, ncols);
    std::vector<Real> out(n * cout * p);
    detail::cn_to_nchw(ymat.data(), n, cout, p, out.data(), false);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t c = 0; c < cout; ++c)
            for (std::size_t i = 0; i < p; ++i) out[(b * cout + c) * p + i] += bias[c];

    const bool track = grad_mode_flag() && (input.requires_grad() || kernel.requires_grad() || bias.requires_grad());
    if (!track) cols.reset();
    return make_result<Real>({n, cout, oh, ow}, std::move(out), {input, kernel, bias}, "conv2d",
                             [g, n, cout, p, ncols, r, cols](Node<Real>& self) {
                                 std::vector<Real> dy(cout * ncols);
                                 detail::nchw_to_cn(self.grad.data(), n, cout, p, dy.data());
                                 ConstMatrixMap<Real> dym(dy.data(), cout, ncols);
                                 if (auto gk = parent_grad(self, 1); !gk.empty())
                                     MatrixMap<Real>(gk.data(), cout, r).noalias() +=
                                         dym * ConstMatrixMap<Real>(cols->data(), r, ncols).transpose();
                                 if (auto gb = parent_grad(self, 2); !gb.empty())
                                     detail::accumulate_bias_grad<Real>(self.grad, n, cout, p, gb);
                                 if (auto gx = parent_grad(self, 0); !gx.empty()) {
                                     std::vector<Real> dcols(r * ncols);
                                     MatrixMap<Real>(dcols.data(), r, ncols).noalias() =
                                         ConstMatrixMap<Real>(self.parents[1]->values.data(), cout, r).transpose() * dym;
                                     detail::col2im(dcols.data(), n, g, gx.data());
                                 }
                             });
}

/// Transposed convolution (the adjoint of conv2d with the same kernel).
/// input [N,Cin,H,W], kernel [Cin,Cout,kH,kW], bias [Cout];
/// output side (H-1)*stride - 2*padding + kH.
template <class Real>
Tensor<Real> conv_transpose2d(const Tensor<Real>& input, const Tensor<Real>& kernel, const Tensor<Real>& bias,
                              std::size_t stride, std::size_t padding) {
    detail::check_conv_args(input.dims(), kernel.dims(), bias.dims(), 0, stride, padding, "conv_transpose2d");
    const std::size_t n = input.dim(0), cin = input.dim(1), cout = kernel.dim(1);
    const std::size_t h = input.dim(2), w = input.dim(3), kh = kernel.dim(2), kw = kernel.dim(3);
    const auto oh_signed = static_cast<std::ptrdiff_t>((h - 1) * stride + kh) - 2 * static_cast<std::ptrdiff_t>(padding);
    const auto ow_signed = static_cast<std::ptrdiff_t>((w - 1) * stride + kw) - 2 * static_cast<std::ptrdiff_t>(padding);
    if (oh_signed <= 0 || ow_signed <= 0)
        throw ShapeError("conv_transpose2d: padding " + std::to_string(padding) + " leaves no output for input " +
                         to_string(input.dims()) + " and kernel " + to_string(kernel.dims()));
    const std::size_t oh = oh_signed, ow = ow_signed;
    // The output plays the role of the conv2d input, the input that of its output.
    const ConvGeometry g{cout, oh, ow, kh, kw, stride, padding};
    const std::size_t p = h * w, ncols = n * p, r = g.rows();
    if (g.out_h() != h || g.out_w() != w)
        throw ShapeError("conv_transpose2d: stride/padding combination is not invertible for input " +
                         to_string(input.dims()));

    auto xm = std::make_shared<std::vector<Real>>(cin * ncols);
    detail::nchw_to_cn(input.values().data(), n, cin, p, xm->data());
    std::vector<Real> cols(r * ncols);
    MatrixMap<Real>(cols.data(), r, ncols).noalias() =
        ConstMatrixMap<Real>(kernel.values().data(), cin, r).transpose() * ConstMatrixMap<Real>(xm->data(), cin, ncols);
    std::vector<Real> out(n * cout * oh * ow, Real(0));
    detail::col2im(cols.data(), n, g, out.data());
    const std::size_t op = oh * ow;
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t c = 0; c < cout; ++c)
            for (std::size_t i = 0; i < op; ++i) out[(b * cout + c) * op + i] += bias[c];

    const bool track = grad_mode_flag() && (input.requires_grad() || kernel.requires_grad() || bias.requires_grad());
    if (!track) xm.reset();
    return make_result<Real>({n, cout, oh, ow}, std::move(out), {input, kernel, bias}, "conv_transpose2d",
                             [g, n, cin, cout, p, op, ncols, r, xm](Node<Real>& self) {
                                 std::vector<Real> dcols(r * ncols);
                                 detail::im2col(self.grad.data(), n, g, dcols.data());
                                 ConstMatrixMap<Real> dc(dcols.data(), r, ncols);
                                 if (auto gk = parent_grad(self, 1); !gk.empty())
                                     MatrixMap<Real>(gk.data(), cin, r).noalias() +=
                                         ConstMatrixMap<Real>(xm->data(), cin, ncols) * dc.transpose();
                                 if (auto gb = parent_grad(self, 2); !gb.empty())
                                     detail::accumulate_bias_grad<Real>(self.grad, n, cout, op, gb);
                                 if (auto gx = parent_grad(self, 0); !gx.empty()) {
                                     std::vector<Real> dxm(cin * ncols);
                                     MatrixMap<Real>(dxm.data(), cin, ncols).noalias() =
                                         ConstMatrixMap<Real>(self.parents[1]->values.data(), cin, r) * dc;
                                     detail::cn_to_nchw(dxm.data(), n, cin, p, gx.data(), true);
                                 }
                             });
}

}  // namespace metafilter::nn

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <string_view>

#include "metafilter/nn/tensor.hpp"

namespace metafilter::nn {

template <class Real>
using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Real>
using MatrixMap = Eigen::Map<RowMatrix<Real>>;
template <class Real>
using ConstMatrixMap = Eigen::Map<const RowMatrix<Real>>;

inline constexpr double kLeakySlope = 0.2;

enum class Activation { leaky_relu, tanh, sigmoid };

inline Activation parse_activation(std::string_view name) {
    if (name == "leaky_relu") return Activation::leaky_relu;
    if (name == "tanh") return Activation::tanh;
    if (name == "sigmoid") return Activation::sigmoid;
    throw ValueError("unknown activation '" + std::string(name) + "'");
}

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::leaky_relu: return "leaky_relu";
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
    }
    return "?";
}

namespace detail {
inline void require_same_dims(const Dims& a, const Dims& b, const char* op) {
    if (a != b) throw ShapeError(std::string(op) + ": dims " + to_string(a) + " vs " + to_string(b));
}
}  // namespace detail

template <class Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
    detail::require_same_dims(a.dims(), b.dims(), "add");
    std::vector<Real> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return make_result<Real>(a.dims(), std::move(out), {a, b}, "add", [](Node<Real>& self) {
        for (std::size_t k = 0; k < 2; ++k)
            if (auto g = parent_grad(self, k); !g.empty())
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

template <class Real>
Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b) {
    detail::require_same_dims(a.dims(), b.dims(), "sub");
    std::vector<Real> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return make_result<Real>(a.dims(), std::move(out), {a, b}, "sub", [](Node<Real>& self) {
        if (auto g = parent_grad(self, 0); !g.empty())
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        if (auto g = parent_grad(self, 1); !g.empty())
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    });
}

template <class Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
    detail::require_same_dims(a.dims(), b.dims(), "mul");
    std::vector<Real> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return make_result<Real>(a.dims(), std::move(out), {a, b}, "mul", [](Node<Real>& self) {
        const auto& av = self.parents[0]->values;
        const auto& bv = self.parents[1]->values;
        if (auto g = parent_grad(self, 0); !g.empty())
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
        if (auto g = parent_grad(self, 1); !g.empty())
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    });
}

/// a * scale + offset, elementwise.
template <class Real>
Tensor<Real> affine(const Tensor<Real>& a, Real scale, Real offset = Real(0)) {
    std::vector<Real> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * scale + offset;
    return make_result<Real>(a.dims(), std::move(out), {a}, "affine", [scale](Node<Real>& self) {
        if (auto g = parent_grad(self, 0); !g.empty())
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * scale;
    });
}

template <class Real>
Tensor<Real> sum(const Tensor<Real>& a) {
    double acc = 0.0;
    for (auto v : a.values()) acc += v;
    return make_result<Real>({1}, {static_cast<Real>(acc)}, {a}, "sum", [](Node<Real>& self) {
        if (auto g = parent_grad(self, 0); !g.empty())
            for (auto& x : g) x += self.grad[0];
    });
}

template <class Real>
Tensor<Real> mean(const Tensor<Real>& a) {
    double acc = 0.0;
    for (auto v : a.values()) acc += v;
    const double n = static_cast<double>(a.numel());
    return make_result<Real>({1}, {static_cast<Real>(acc / n)}, {a}, "mean", [n](Node<Real>& self) {
        if (auto g = parent_grad(self, 0); !g.empty()) {
            const Real d = static_cast<Real>(self.grad[0] / n);
            for (auto& x : g) x += d;
        }
    });
}

template <class Real>
Tensor<Real> reshape(const Tensor<Real>& a, Dims dims) {
    if (product(dims) != a.numel())
        throw ShapeError("reshape: cannot view " + to_string(a.dims()) + " as " + to_string(dims));
    std::vector<Real> out(a.values().begin(), a.values().end());
    return make_result<Real>(std::move(dims), std::move(out), {a}, "reshape", [](Node<Real>& self) {
        if (auto g = parent_grad(self, 0); !g.empty())
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

/// Concatenate two NCHW tensors along the channel axis.
template <class Real>
Tensor<Real> concat_channels(const Tensor<Real>& a, const Tensor<Real>& b) {
    if (a.rank() != 4 || b.rank() != 4 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
        throw ShapeError("concat_channels: dims " + to_string(a.dims()) + " vs " + to_string(b.dims()));
    const std::size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
    std::vector<Real> out(n * (ca + cb) * hw);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(a.values().begin() + i * ca * hw, ca * hw, out.begin() + i * (ca + cb) * hw);
        std::copy_n(b.values().begin() + i * cb * hw, cb * hw, out.begin() + (i * (ca + cb) + ca) * hw);
    }
    return make_result<Real>({n, ca + cb, a.dim(2), a.dim(3)}, std::move(out), {a, b}, "concat_channels",
                             [n, ca, cb, hw](Node<Real>& self) {
                                 if (auto g = parent_grad(self, 0); !g.empty())
                                     for (std::size_t i = 0; i < n; ++i)
                                         for (std::size_t k = 0; k < ca * hw; ++k)
                                             g[i * ca * hw + k] += self.grad[i * (ca + cb) * hw + k];
                                 if (auto g = parent_grad(self, 1); !g.empty())
                                     for (std::size_t i = 0; i < n; ++i)
                                         for (std::size_t k = 0; k < cb * hw; ++k)
                                             g[i * cb * hw + k] += self.grad[(i * (ca + cb) + ca) * hw + k];
                             });
}

/// Replicates one scalar per sample ([N] or [N,1]) into an [N,1,H,W] plane.
template <class Real>
Tensor<Real> expand_plane(const Tensor<Real>& x, std::size_t height, std::size_t width) {
    if (x.numel() != x.dim(0)) throw ShapeError("expand_plane: expected one value per sample, got " + to_string(x.dims()));
    const std::size_t n = x.dim(0), hw = height * width;
    std::vector<Real> out(n * hw);
    for (std::size_t i = 0; i < n; ++i) std::fill_n(out.begin() + i * hw, hw, x[i]);
    return make_result<Real>({n, 1, height, width}, std::move(out), {x}, "expand_plane", [n, hw](Node<Real>& self) {
        if (auto g = parent_grad(self, 0); !g.empty())
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (std::size_t k = 0; k < hw; ++k) acc += self.grad[i * hw + k];
                g[i] += static_cast<Real>(acc);
            }
    });
}

template <class Real>
Tensor<Real> activation(const Tensor<Real>& x, Activation kind) {
    std::vector<Real> out(x.numel());
    const auto xv = x.values();
    switch (kind) {
        case Activation::leaky_relu:
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] = xv[i] >= Real(0) ? xv[i] : static_cast<Real>(kLeakySlope) * xv[i];
            break;
        case Activation::tanh:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(xv[i]);
            break;
        case Activation::sigmoid:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = Real(1) / (Real(1) + std::exp(-xv[i]));
            break;
    }
    return make_result<Real>(x.dims(), std::move(out), {x}, activation_name(kind), [kind](Node<Real>& self) {
        auto g = parent_grad(self, 0);
        if (g.empty()) return;
        const auto& in = self.parents[0]->values;
        const auto& y = self.values;
        switch (kind) {
            case Activation::leaky_relu:
                for (std::size_t i = 0; i < g.size(); ++i)
                    g[i] += in[i] >= Real(0) ? self.grad[i] : static_cast<Real>(kLeakySlope) * self.grad[i];
                break;
            case Activation::tanh:
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (Real(1) - y[i] * y[i]);
                break;
            case Activation::sigmoid:
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y[i] * (Real(1) - y[i]);
                break;
        }
    });
}

template <class Real>
Tensor<Real> leaky_relu(const Tensor<Real>& x) { return activation(x, Activation::leaky_relu); }
template <class Real>
Tensor<Real> sigmoid(const Tensor<Real>& x) { return activation(x, Activation::sigmoid); }
template <class Real>
Tensor<Real> tanh(const Tensor<Real>& x) { return activation(x, Activation::tanh); }

/// out = input * weight^T + bias, input [N, Din], weight [Dout, Din], bias [Dout].
template <class Real>
Tensor<Real> linear(const Tensor<Real>& input, const Tensor<Real>& weight, const Tensor<Real>& bias) {
    if (input.rank() != 2 || weight.rank() != 2 || input.dim(1) != weight.dim(1))
        throw ShapeError("linear: input dims " + to_string(input.dims()) + " incompatible with weight dims " +
                         to_string(weight.dims()));
    if (bias.numel() != weight.dim(0))
        throw ShapeError("linear: bias dims " + to_string(bias.dims()) + " vs " + std::to_string(weight.dim(0)) +
                         " outputs");
    const std::size_t n = input.dim(0), din = input.dim(1), dout = weight.dim(0);
    std::vector<Real> out(n * dout);
    {
        MatrixMap<Real> y(out.data(), n, dout);
        ConstMatrixMap<Real> x(input.values().data(), n, din);
        ConstMatrixMap<Real> w(weight.values().data(), dout, din);
        y.noalias() = x * w.transpose();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < dout; ++j) y(i, j) += bias[j];
    }
    return make_result<Real>({n, dout}, std::move(out), {input, weight, bias}, "linear", [n, din, dout](Node<Real>& self) {
        ConstMatrixMap<Real> dy(self.grad.data(), n, dout);
        if (auto g = parent_grad(self, 0); !g.empty()) {
            MatrixMap<Real> dx(g.data(), n, din);
            ConstMatrixMap<Real> w(self.parents[1]->values.data(), dout, din);
            dx.noalias() += dy * w;
        }
        if (auto g = parent_grad(self, 1); !g.empty()) {
            MatrixMap<Real> dw(g.data(), dout, din);
            ConstMatrixMap<Real> x(self.parents[0]->values.data(), n, din);
            dw.noalias() += dy.transpose() * x;
        }
        if (auto g = parent_grad(self, 2); !g.empty())
            for (std::size_t j = 0; j < dout; ++j) {
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) acc += dy(i, j);
                g[j] += static_cast<Real>(acc);
            }
    });
}

/// Mean squared error over all elements.
template <class Real>
Tensor<Real> mse_loss(const Tensor<Real>& prediction, const Tensor<Real>& target) {
    detail::require_same_dims(prediction.dims(), target.dims(), "mse_loss");
    double acc = 0.0;
    for (std::size_t i = 0; i < prediction.numel(); ++i) {
        const double d = static_cast<double>(prediction[i]) - static_cast<double>(target[i]);
        acc += d * d;
    }
    const double n = static_cast<double>(prediction.numel());
    return make_result<Real>({1}, {static_cast<Real>(acc / n)}, {prediction, target}, "mse_loss", [n](Node<Real>& self) {
        const auto& p = self.parents[0]->values;
        const auto& t = self.parents[1]->values;
        const double k = 2.0 * self.grad[0] / n;
        if (auto g = parent_grad(self, 0); !g.empty())
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += static_cast<Real>(k * (double(p[i]) - double(t[i])));
        if (auto g = parent_grad(self, 1); !g.empty())
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= static_cast<Real>(k * (double(p[i]) - double(t[i])));
    });
}

}  // namespace metafilter::nn

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "metafilter/nn/tensor.hpp"
#include "metafilter/rng.hpp"

namespace metafilter::nn {

enum class ParamKind { weight, bias, norm_scale, norm_shift, running_mean, running_var };

inline bool is_buffer(ParamKind k) { return k == ParamKind::running_mean || k == ParamKind::running_var; }

inline const char* kind_name(ParamKind k) {
    switch (k) {
        case ParamKind::weight: return "weight";
        case ParamKind::bias: return "bias";
        case ParamKind::norm_scale: return "norm_scale";
        case ParamKind::norm_shift: return "norm_shift";
        case ParamKind::running_mean: return "running_mean";
        case ParamKind::running_var: return "running_var";
    }
    return "?";
}

/// Named parameters in registration order, with their Adam moments.
/// Buffers (batch-norm running statistics) live here too so they serialize
/// with the model, but never receive gradients or optimizer updates.
template <class Real>
class ParamStore {
public:
    struct Entry {
        std::string name;
        ParamKind kind;
        Tensor<Real> tensor;
        std::vector<double> first_moment;
        std::vector<double> second_moment;
    };

    Tensor<Real> add(std::string name, Dims dims, ParamKind kind) {
        if (find(name)) throw ValueError("duplicate parameter name '" + name + "'");
        auto t = Tensor<Real>::zeros(std::move(dims), !is_buffer(kind) && trainable_);
        const auto n = t.numel();
        entries_.push_back({std::move(name), kind, t, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)});
        return t;
    }

    const Entry* find(const std::string& name) const {
        auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
        return it == entries_.end() ? nullptr : &*it;
    }

    Tensor<Real> get(const std::string& name) const {
        if (auto* e = find(name)) return e->tensor;
        throw ValueError("no parameter named '" + name + "'");
    }

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }

    void zero_grad() {
        for (auto& e : entries_)
            if (!is_buffer(e.kind)) e.tensor.zero_grad();
    }

    /// Freezing turns gradient tracking off for every parameter.
    void set_trainable(bool on) {
        trainable_ = on;
        for (auto& e : entries_)
            if (!is_buffer(e.kind)) e.tensor.set_requires_grad(on);
    }
    bool trainable() const { return trainable_; }

    std::size_t count(bool include_buffers = false) const {
        std::size_t n = 0;
        for (const auto& e : entries_)
            if (include_buffers || !is_buffer(e.kind)) n += e.tensor.numel();
        return n;
    }

    std::uint64_t adam_steps = 0;

private:
    std::vector<Entry> entries_;
    bool trainable_ = true;
};

struct AdamOptions {
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update of every trainable parameter. Gradients are
/// left in place; resetting them is the caller's job.
template <class Real>
void adam_step(ParamStore<Real>& store, double lr, const AdamOptions& opt = {}) {
    if (!store.trainable()) throw StateError("adam_step: parameter store is frozen");
    for (const auto& e : store.entries())
        if (!is_buffer(e.kind) && !e.tensor.has_grad())
            throw StateError("adam_step: parameter '" + e.name + "' has no gradient");
    const std::uint64_t t = ++store.adam_steps;
    const double c1 = 1.0 - std::pow(opt.beta1, double(t));
    const double c2 = 1.0 - std::pow(opt.beta2, double(t));
    for (auto& e : store.entries()) {
        if (is_buffer(e.kind)) continue;
        auto w = e.tensor.values();
        auto g = e.tensor.grad();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = g[i];
            e.first_moment[i] = opt.beta1 * e.first_moment[i] + (1.0 - opt.beta1) * gi;
            e.second_moment[i] = opt.beta2 * e.second_moment[i] + (1.0 - opt.beta2) * gi * gi;
            const double mhat = e.first_moment[i] / c1;
            const double vhat = e.second_moment[i] / c2;
            w[i] = static_cast<Real>(double(w[i]) - lr * mhat / (std::sqrt(vhat) + opt.eps));
        }
    }
}

/// Step decay: initial * gamma^floor(epoch / step).
inline double step_lr(std::size_t epoch, double initial, std::size_t step, double gamma) {
    return initial * std::pow(gamma, double(epoch / step));
}

struct InitOptions {
    double mean = 0.0;
    double stddev = 0.02;
};

/// Weights ~ N(mean, stddev); biases and shifts zero; normalization scales
/// ~ N(1, stddev); running statistics reset to (0, 1). Draws happen in
/// registration order from one seeded stream.
template <class Real>
void init_weights(ParamStore<Real>& store, std::uint64_t seed, const InitOptions& opt = {}) {
    Rng rng(seed);
    for (auto& e : store.entries()) {
        auto v = e.tensor.values();
        switch (e.kind) {
            case ParamKind::weight:
                for (auto& x : v) x = static_cast<Real>(rng.normal(opt.mean, opt.stddev));
                break;
            case ParamKind::norm_scale:
                for (auto& x : v) x = static_cast<Real>(rng.normal(1.0, opt.stddev));
                break;
            case ParamKind::bias:
            case ParamKind::norm_shift:
            case ParamKind::running_mean:
                std::fill(v.begin(), v.end(), Real(0));
                break;
            case ParamKind::running_var:
                std::fill(v.begin(), v.end(), Real(1));
                break;
        }
        std::fill(e.first_moment.begin(), e.first_moment.end(), 0.0);
        std::fill(e.second_moment.begin(), e.second_moment.end(), 0.0);
    }
    store.adam_steps = 0;
}

}  // namespace metafilter::nn

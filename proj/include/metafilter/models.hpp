#pragma once

#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "metafilter/binary_io.hpp"
#include "metafilter/encoding.hpp"
#include "metafilter/nn/conv.hpp"
#include "metafilter/nn/norm.hpp"
#include "metafilter/nn/optim.hpp"
#include "metafilter/types.hpp"

namespace metafilter {

using nn::Tensor;

/// Constant (P - 200) / 200 plane fed to the simulator next to the shape.
inline std::vector<float> expand_period_plane(Period period) {
    return std::vector<float>(kImagePixels, static_cast<float>(period.normalized()));
}

inline std::vector<float> expand_period_plane(int period_nm) { return expand_period_plane(Period(period_nm)); }

// ---------------------------------------------------------------------------
// Architecture descriptors

/// Convolution stack 2 -> c -> 2c -> ... (kernel 4, stride 2, padding 1,
/// each followed by batch norm and leaky ReLU), flatten, FC -> hidden ->
/// leaky ReLU -> FC -> 58 -> sigmoid.
struct SimulatorArch {
    std::size_t base_channels = 32;
    std::size_t depth = 4;
    std::size_t hidden = 512;

    /// The narrower stack used for desk-scale runs.
    static SimulatorArch desk() { return {16, 4, 256}; }

    std::size_t channels(std::size_t layer) const { return base_channels << layer; }
    std::size_t feature_side() const { return kImageSide >> depth; }
    std::size_t flat_features() const { return channels(depth - 1) * feature_side() * feature_side(); }

    void validate() const {
        if (base_channels == 0 || hidden == 0 || depth == 0 || depth > 5)
            throw ValueError("simulator architecture: channels/hidden must be positive and depth in 1..5");
    }
    friend bool operator==(const SimulatorArch&, const SimulatorArch&) = default;
};

/// [contrast ++ noise] -> FC -> (top x s x s) -> BN/leaky -> transposed
/// convolutions halving channels (BN/leaky between) -> 1 x 64 x 64 logits,
/// plus a linear shortcut from the input to the logits -> sigmoid image.
/// Period head: flattened image -> FC -> leaky -> FC -> sigmoid, mapped to
/// 200..400 nm.
struct GeneratorArch {
    std::size_t base_channels = 32;  // the last hidden deconv block has this many channels
    std::size_t depth = 4;
    std::size_t noise_dim = 50;
    std::size_t period_hidden = 128;

    static GeneratorArch desk() { return {16, 4, 50, 128}; }

    std::size_t input_dim() const { return kContrastSize + noise_dim; }
    std::size_t top_channels() const { return base_channels << (depth - 1); }
    std::size_t seed_side() const { return kImageSide >> depth; }

    void validate() const {
        if (base_channels == 0 || depth == 0 || depth > 5 || noise_dim == 0 || period_hidden == 0)
            throw ValueError("generator architecture: sizes must be positive and depth in 1..5");
    }
    friend bool operator==(const GeneratorArch&, const GeneratorArch&) = default;
};

inline void to_json(nlohmann::json& j, const SimulatorArch& a) {
    j = {{"base_channels", a.base_channels}, {"depth", a.depth}, {"hidden", a.hidden}};
}
inline void from_json(const nlohmann::json& j, SimulatorArch& a) {
    j.at("base_channels").get_to(a.base_channels);
    j.at("depth").get_to(a.depth);
    j.at("hidden").get_to(a.hidden);
}
inline void to_json(nlohmann::json& j, const GeneratorArch& a) {
    j = {{"base_channels", a.base_channels}, {"depth", a.depth}, {"noise_dim", a.noise_dim}, {"period_hidden", a.period_hidden}};
}
inline void from_json(const nlohmann::json& j, GeneratorArch& a) {
    j.at("base_channels").get_to(a.base_channels);
    j.at("depth").get_to(a.depth);
    j.at("noise_dim").get_to(a.noise_dim);
    j.at("period_hidden").get_to(a.period_hidden);
}

namespace detail {

template <class Real>
struct BatchNormLayer {
    Tensor<Real> scale, shift, mean, var;

    BatchNormLayer() = default;
    BatchNormLayer(nn::ParamStore<Real>& store, const std::string& name, std::size_t channels)
        : scale(store.add(name + ".scale", {channels}, nn::ParamKind::norm_scale)),
          shift(store.add(name + ".shift", {channels}, nn::ParamKind::norm_shift)),
          mean(store.add(name + ".running_mean", {channels}, nn::ParamKind::running_mean)),
          var(store.add(name + ".running_var", {channels}, nn::ParamKind::running_var)) {}

    // Handles alias the stored buffers, so training mode still updates them.
    Tensor<Real> operator()(const Tensor<Real>& x, bool training) const {
        auto m = mean;
        auto v = var;
        return nn::batch_norm(x, scale, shift, m, v, training);
    }
};

template <class Real>
struct Affine {
    Tensor<Real> weight, bias;

    Affine() = default;
    Affine(nn::ParamStore<Real>& store, const std::string& name, nn::Dims weight_dims, std::size_t bias_size)
        : weight(store.add(name + ".weight", std::move(weight_dims), nn::ParamKind::weight)),
          bias(store.add(name + ".bias", {bias_size}, nn::ParamKind::bias)) {}
};

inline constexpr std::size_t kKernel = 4, kStride = 2, kPadding = 1;

}  // namespace detail

// ---------------------------------------------------------------------------

/// Forward surrogate: (shape, period) -> 58-point spectrum.
template <class Real>
class Simulator {
public:
    explicit Simulator(SimulatorArch arch = {}, std::uint64_t seed = 0) : arch_(arch) {
        arch_.validate();
        std::size_t in = 2;
        for (std::size_t i = 0; i < arch_.depth; ++i) {
            const std::size_t out = arch_.channels(i);
            convs_.emplace_back(params_, "conv" + std::to_string(i), nn::Dims{out, in, detail::kKernel, detail::kKernel}, out);
            norms_.emplace_back(params_, "conv" + std::to_string(i) + ".norm", out);
            in = out;
        }
        fc_hidden_ = detail::Affine<Real>(params_, "fc0", {arch_.hidden, arch_.flat_features()}, arch_.hidden);
        fc_norm_ = detail::BatchNormLayer<Real>(params_, "fc0.norm", arch_.hidden);
        fc_out_ = detail::Affine<Real>(params_, "fc1", {kSpectrumPoints, arch_.hidden}, kSpectrumPoints);
        nn::init_weights(params_, seed);
    }

    // Layer handles alias the store, so copies would share weights.
    Simulator(const Simulator&) = delete;
    Simulator& operator=(const Simulator&) = delete;
    Simulator(Simulator&&) noexcept = default;
    Simulator& operator=(Simulator&&) noexcept = default;

    const SimulatorArch& arch() const { return arch_; }
    nn::ParamStore<Real>& params() { return params_; }
    const nn::ParamStore<Real>& params() const { return params_; }

    void freeze() { params_.set_trainable(false); }
    void unfreeze() { params_.set_trainable(true); }
    bool frozen() const { return !params_.trainable(); }

    /// input [N,2,64,64] (shape channel, period plane) -> [N,58] in (0,1).
    Tensor<Real> forward(const Tensor<Real>& input, bool training) const {
        if (input.rank() != 4 || input.dim(1) != 2 || input.dim(2) != kImageSide || input.dim(3) != kImageSide)
            throw ShapeError("simulator input must be [N,2,64,64], got " + nn::to_string(input.dims()));
        Tensor<Real> h = input;
        for (std::size_t i = 0; i < arch_.depth; ++i) {
            h = nn::conv2d(h, convs_[i].weight, convs_[i].bias, detail::kStride, detail::kPadding);
            h = nn::leaky_relu(norms_[i](h, training));
        }
        h = nn::reshape(h, {input.dim(0), arch_.flat_features()});
        h = nn::leaky_relu(fc_norm_(nn::linear(h, fc_hidden_.weight, fc_hidden_.bias), training));
        return nn::sigmoid(nn::linear(h, fc_out_.weight, fc_out_.bias));
    }

    /// shape [N,1,64,64] with normalized periods [N,1].
    Tensor<Real> forward(const Tensor<Real>& shape, const Tensor<Real>& period_norm, bool training) const {
        return forward(nn::concat_channels(shape, nn::expand_plane(period_norm, kImageSide, kImageSide)), training);
    }

    /// Evaluation-mode prediction for one device; the shape may be non-binary.
    Spectrum simulate(const ShapeImage& shape, double period_nm) const {
        shape.require_unit_range("simulate");
        if (!(period_nm >= kPeriodMin && period_nm <= kPeriodMax))
            throw ValueError("simulate: period " + std::to_string(period_nm) + " outside [200,400]");
        nn::NoGradGuard guard;
        std::vector<Real> in(2 * kImagePixels);
        std::copy(shape.pixels.begin(), shape.pixels.end(), in.begin());
        std::fill(in.begin() + kImagePixels, in.end(), static_cast<Real>((period_nm - kPeriodMin) / 200.0));
        auto out = forward(Tensor<Real>({1, 2, kImageSide, kImageSide}, std::move(in)), false);
        Spectrum s;
        for (std::size_t k = 0; k < kSpectrumPoints; ++k) s.t[k] = static_cast<float>(out[k]);
        return s;
    }
    Spectrum simulate(const ShapeImage& shape, Period period) const { return simulate(shape, double(period.nm())); }

private:
    SimulatorArch arch_;
    nn::ParamStore<Real> params_;
    std::vector<detail::Affine<Real>> convs_;
    detail::BatchNormLayer<Real> fc_norm_;
    std::vector<detail::BatchNormLayer<Real>> norms_;
    detail::Affine<Real> fc_hidden_, fc_out_;
};

/// A generated device before binarization.
struct GeneratedDevice {
    ShapeImage shape;  // raw sigmoid output
    double period_nm = kPeriodMin;

    Period period() const { return Period::round(period_nm); }
};

/// Inverse model: (contrast vector, noise) -> (shape, period).
template <class Real>
class Generator {
public:
    struct Output {
        Tensor<Real> image;        // [N,1,64,64] in (0,1)
        Tensor<Real> period_norm;  // [N,1] in (0,1); period = 200 + 200 * value
    };

    explicit Generator(GeneratorArch arch = {}, std::uint64_t seed = 0) : arch_(arch) {
        arch_.validate();
        const std::size_t side = arch_.seed_side();
        fc_in_ = detail::Affine<Real>(params_, "fc_in", {arch_.top_channels() * side * side, arch_.input_dim()},
                                      arch_.top_channels() * side * side);
        top_norm_ = detail::BatchNormLayer<Real>(params_, "fc_in.norm", arch_.top_channels());
        std::size_t in = arch_.top_channels();
        for (std::size_t i = 0; i < arch_.depth; ++i) {
            const bool last = i + 1 == arch_.depth;
            const std::size_t out = last ? 1 : in / 2;
            deconvs_.emplace_back(params_, "deconv" + std::to_string(i),
                                  nn::Dims{in, out, detail::kKernel, detail::kKernel}, out);
            if (!last) norms_.emplace_back(params_, "deconv" + std::to_string(i) + ".norm", out);
            in = out;
        }
        shortcut_ = detail::Affine<Real>(params_, "shortcut", {kImagePixels, arch_.input_dim()}, kImagePixels);
        period_hidden_ = detail::Affine<Real>(params_, "period0", {arch_.period_hidden, kImagePixels}, arch_.period_hidden);
        period_out_ = detail::Affine<Real>(params_, "period1", {1, arch_.period_hidden}, 1);
        nn::init_weights(params_, seed);
    }

    Generator(const Generator&) = delete;
    Generator& operator=(const Generator&) = delete;
    Generator(Generator&&) noexcept = default;
    Generator& operator=(Generator&&) noexcept = default;

    const GeneratorArch& arch() const { return arch_; }
    nn::ParamStore<Real>& params() { return params_; }
    const nn::ParamStore<Real>& params() const { return params_; }

    void freeze() { params_.set_trainable(false); }
    void unfreeze() { params_.set_trainable(true); }
    bool frozen() const { return !params_.trainable(); }

    /// contrast [N,14], noise [N,noise_dim].
    Output forward(const Tensor<Real>& contrast, const Tensor<Real>& noise, bool training) const {
        if (contrast.rank() != 2 || contrast.dim(1) != kContrastSize)
            throw ShapeError("generator contrast input must be [N,14], got " + nn::to_string(contrast.dims()));
        if (noise.rank() != 2 || noise.dim(1) != arch_.noise_dim || noise.dim(0) != contrast.dim(0))
            throw ShapeError("generator noise input must be [N," + std::to_string(arch_.noise_dim) + "], got " +
                             nn::to_string(noise.dims()));
        const std::size_t n = contrast.dim(0), side = arch_.seed_side();
        auto z = nn::reshape(nn::concat_channels(nn::reshape(contrast, {n, kContrastSize, 1, 1}),
                                                 nn::reshape(noise, {n, arch_.noise_dim, 1, 1})),
                             {n, arch_.input_dim()});
        auto h = nn::reshape(nn::linear(z, fc_in_.weight, fc_in_.bias), {n, arch_.top_channels(), side, side});
        h = nn::leaky_relu(top_norm_(h, training));
        for (std::size_t i = 0; i < arch_.depth; ++i) {
            h = nn::conv_transpose2d(h, deconvs_[i].weight, deconvs_[i].bias, detail::kStride, detail::kPadding);
            if (i + 1 < arch_.depth) h = nn::leaky_relu(norms_[i](h, training));
        }
        auto skip = nn::reshape(nn::linear(z, shortcut_.weight, shortcut_.bias), {n, 1, kImageSide, kImageSide});
        auto image = nn::sigmoid(nn::add(h, skip));
        auto p = nn::leaky_relu(nn::linear(nn::reshape(image, {n, kImagePixels}), period_hidden_.weight, period_hidden_.bias));
        auto period = nn::sigmoid(nn::linear(p, period_out_.weight, period_out_.bias));
        return {image, period};
    }

    /// Evaluation-mode generation of one device. Noise values must lie in [0,1].
    GeneratedDevice generate(const ContrastVector& contrast, std::span<const float> noise) const {
        if (noise.size() != arch_.noise_dim)
            throw ShapeError("generate: noise has " + std::to_string(noise.size()) + " values, model expects " +
                             std::to_string(arch_.noise_dim));
        for (float v : noise)
            if (!(v >= 0.0f && v <= 1.0f)) throw ValueError("generate: noise values must lie in [0,1]");
        nn::NoGradGuard guard;
        std::vector<Real> c(contrast.values.begin(), contrast.values.end());
        std::vector<Real> z(noise.begin(), noise.end());
        auto out = forward(Tensor<Real>({1, kContrastSize}, std::move(c)), Tensor<Real>({1, arch_.noise_dim}, std::move(z)),
                           false);
        GeneratedDevice d;
        for (std::size_t i = 0; i < kImagePixels; ++i) d.shape.pixels[i] = static_cast<float>(out.image[i]);
        d.period_nm = kPeriodMin + 200.0 * double(static_cast<float>(out.period_norm[0]));
        return d;
    }

private:
    GeneratorArch arch_;
    nn::ParamStore<Real> params_;
    detail::Affine<Real> fc_in_;
    detail::BatchNormLayer<Real> top_norm_;
    std::vector<detail::Affine<Real>> deconvs_;
    std::vector<detail::BatchNormLayer<Real>> norms_;
    detail::Affine<Real> shortcut_, period_hidden_, period_out_;
};

// ---------------------------------------------------------------------------
// Checkpoints: "MSCK", u64 length + UTF-8 JSON descriptor, then every
// parameter/buffer array in descriptor order as little-endian float32.

struct CheckpointMeta {
    std::size_t epochs = 0;
    std::uint64_t seed = 0;
    std::string loss_history;  // path of the loss-curve CSV, if any
    friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

inline constexpr char kCheckpointMagic[4] = {'M', 'S', 'C', 'K'};

namespace detail {

template <class Real>
nlohmann::json param_descriptor(const nn::ParamStore<Real>& store) {
    auto list = nlohmann::json::array();
    for (const auto& e : store.entries())
        list.push_back({{"name", e.name}, {"kind", nn::kind_name(e.kind)}, {"dims", e.tensor.dims()}});
    return list;
}

template <class Real>
void write_checkpoint(const std::string& path, const std::string& model, const nlohmann::json& arch,
                      const nn::ParamStore<Real>& store, const CheckpointMeta& meta) {
    nlohmann::json desc{{"format", 1},
                        {"model", model},
                        {"arch", arch},
                        {"params", param_descriptor(store)},
                        {"metadata", {{"epochs", meta.epochs}, {"seed", meta.seed}, {"loss_history", meta.loss_history}}}};
    const std::string text = desc.dump();
    io::ByteWriter w;
    w.bytes(kCheckpointMagic, 4);
    w.u64(text.size());
    w.bytes(text.data(), text.size());
    for (const auto& e : store.entries())
        for (auto v : e.tensor.values()) w.f32(static_cast<float>(v));
    w.save(path);
}

struct RawCheckpoint {
    nlohmann::json descriptor;
    io::ByteReader reader;
};

inline RawCheckpoint read_checkpoint_header(const std::string& path) {
    auto in = io::ByteReader::from_file(path);
    char magic[4];
    in.bytes(magic, 4, "magic");
    if (!std::equal(magic, magic + 4, kCheckpointMagic)) throw FormatError(path + ": bad magic, not a checkpoint");
    const auto len = in.u64("descriptor length");
    if (len > in.remaining()) throw FormatError(path + ": descriptor length " + std::to_string(len) + " exceeds file (truncated)");
    std::string text(len, '\0');
    in.bytes(text.data(), len, "descriptor");
    nlohmann::json desc;
    try {
        desc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": descriptor is not valid JSON: " + e.what());
    }
    return {std::move(desc), std::move(in)};
}

template <class Real>
void read_params(RawCheckpoint& raw, nn::ParamStore<Real>& store, const std::string& path) {
    const auto& list = raw.descriptor.at("params");
    if (list.size() != store.entries().size())
        throw FormatError(path + ": descriptor lists " + std::to_string(list.size()) + " arrays, architecture has " +
                          std::to_string(store.entries().size()));
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& e = store.entries()[i];
        const auto name = list[i].at("name").get<std::string>();
        const auto dims = list[i].at("dims").get<nn::Dims>();
        if (name != e.name || list[i].at("kind").get<std::string>() != nn::kind_name(e.kind))
            throw FormatError(path + ": array " + std::to_string(i) + " is '" + name + "', expected '" + e.name + "'");
        if (dims != e.tensor.dims())
            throw FormatError(path + ": array '" + name + "' has dims " + nn::to_string(dims) + ", architecture needs " +
                              nn::to_string(e.tensor.dims()));
    }
    for (auto& e : store.entries()) {
        auto v = e.tensor.values();
        for (auto& x : v) x = static_cast<Real>(raw.reader.f32("parameter '" + e.name + "'"));
    }
    if (raw.reader.remaining() != 0)
        throw FormatError(path + ": " + std::to_string(raw.reader.remaining()) + " trailing bytes after parameters");
}

inline CheckpointMeta read_meta(const nlohmann::json& desc) {
    CheckpointMeta m;
    if (auto it = desc.find("metadata"); it != desc.end()) {
        m.epochs = it->value("epochs", std::size_t{0});
        m.seed = it->value("seed", std::uint64_t{0});
        m.loss_history = it->value("loss_history", std::string{});
    }
    return m;
}

inline void require_model(const nlohmann::json& desc, const std::string& want, const std::string& path) {
    const auto got = desc.value("model", std::string{});
    if (got != want) throw FormatError(path + ": checkpoint holds a '" + got + "', expected '" + want + "'");
    if (desc.value("format", 0) != 1) throw FormatError(path + ": unsupported checkpoint format version");
}

}  // namespace detail

template <class Real>
void save_checkpoint(const Simulator<Real>& model, const std::string& path, const CheckpointMeta& meta = {}) {
    detail::write_checkpoint(path, "simulator", nlohmann::json(model.arch()), model.params(), meta);
}

template <class Real>
void save_checkpoint(const Generator<Real>& model, const std::string& path, const CheckpointMeta& meta = {}) {
    detail::write_checkpoint(path, "generator", nlohmann::json(model.arch()), model.params(), meta);
}

template <class Real = float>
Simulator<Real> load_simulator(const std::string& path, CheckpointMeta* meta = nullptr) {
    auto raw = detail::read_checkpoint_header(path);
    try {
        detail::require_model(raw.descriptor, "simulator", path);
        Simulator<Real> model(raw.descriptor.at("arch").get<SimulatorArch>());
        detail::read_params(raw, model.params(), path);
        if (meta) *meta = detail::read_meta(raw.descriptor);
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": malformed descriptor: " + e.what());
    } catch (const ValueError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

template <class Real = float>
Generator<Real> load_generator(const std::string& path, CheckpointMeta* meta = nullptr) {
    auto raw = detail::read_checkpoint_header(path);
    try {
        detail::require_model(raw.descriptor, "generator", path);
        Generator<Real> model(raw.descriptor.at("arch").get<GeneratorArch>());
        detail::read_params(raw, model.params(), path);
        if (meta) *meta = detail::read_meta(raw.descriptor);
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": malformed descriptor: " + e.what());
    } catch (const ValueError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

}  // namespace metafilter

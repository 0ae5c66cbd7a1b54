#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <json.hpp>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "metafilter/dataset.hpp"
#include "metafilter/encoding.hpp"
#include "metafilter/metrics.hpp"
#include "metafilter/models.hpp"
#include "metafilter/surrogate.hpp"

namespace metafilter {

// ---------------------------------------------------------------------------
// Configuration

struct TrainConfig {
    std::size_t epochs = 500;
    std::size_t batch_size = 1024;
    nn::AdamOptions adam{};
    double lr = 0.02;
    std::size_t lr_step = 100;
    double lr_gamma = 0.5;
    double init_std = 0.02;
    double alpha = 0.0;
    double beta = 0.0;
    std::uint64_t seed = 0;
    bool augment = true;

    static TrainConfig simulator_full() { return {}; }
    static TrainConfig generator_full() {
        TrainConfig c;
        c.epochs = 1000, c.batch_size = 256, c.lr_step = 200, c.alpha = 0.05, c.beta = 0.0, c.augment = false;
        return c;
    }
    // Desk runs compress the step schedule with the epoch count, so they
    // pass through the same learning rates as the full-scale runs.
    static TrainConfig simulator_desk() { return simulator_full().shortened(60, 128); }
    static TrainConfig generator_desk() { return generator_full().shortened(120, 64); }

    TrainConfig shortened(std::size_t new_epochs, std::size_t new_batch) const {
        TrainConfig c = *this;
        c.lr_step = std::max<std::size_t>(1, lr_step * new_epochs / epochs);
        c.epochs = new_epochs, c.batch_size = new_batch;
        return c;
    }

    void validate() const {
        if (epochs == 0 || batch_size == 0) throw ValueError("train config: epochs and batch size must be positive");
        if (alpha < 0 || beta < 0) throw ValueError("train config: alpha and beta must be nonnegative");
        if (!(lr > 0) || lr_step == 0 || !(lr_gamma > 0)) throw ValueError("train config: invalid learning-rate schedule");
        if (!(init_std > 0)) throw ValueError("train config: init std must be positive");
    }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"epochs", c.epochs},   {"batch_size", c.batch_size}, {"beta1", c.adam.beta1},     {"beta2", c.adam.beta2},
         {"adam_eps", c.adam.eps}, {"lr", c.lr},               {"lr_step", c.lr_step},      {"lr_gamma", c.lr_gamma},
         {"init_std", c.init_std}, {"alpha", c.alpha},         {"beta", c.beta},            {"seed", c.seed},
         {"augment", c.augment}};
}

/// Per-epoch curves; columns that a run does not produce stay empty.
struct LossCurve {
    std::vector<double> train, validation, spectrum, shape, period, near_binarity;

    std::string to_csv() const {
        std::vector<std::pair<const char*, const std::vector<double>*>> cols;
        for (auto [name, v] : {std::pair{"train", &train}, {"validation", &validation}, {"spectrum", &spectrum},
                               {"shape", &shape}, {"period", &period}, {"near_binarity", &near_binarity}})
            if (!v->empty()) cols.emplace_back(name, v);
        std::ostringstream os;
        os.precision(9);
        os << "epoch";
        for (auto& c : cols) os << ',' << c.first;
        os << '\n';
        for (std::size_t e = 0; e < train.size(); ++e) {
            os << e;
            for (auto& c : cols) os << ',' << (*c.second)[e];
            os << '\n';
        }
        return os.str();
    }

    friend bool operator==(const LossCurve&, const LossCurve&) = default;
};

// ---------------------------------------------------------------------------
// Batching helpers

namespace detail {

inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
    return order;
}

template <class Real>
Tensor<Real> stack_shapes(const std::vector<DeviceRecord>& recs, std::span<const std::size_t> idx) {
    std::vector<Real> v(idx.size() * kImagePixels);
    for (std::size_t b = 0; b < idx.size(); ++b)
        std::copy(recs[idx[b]].shape.pixels.begin(), recs[idx[b]].shape.pixels.end(), v.begin() + b * kImagePixels);
    return Tensor<Real>({idx.size(), 1, kImageSide, kImageSide}, std::move(v));
}

template <class Real>
Tensor<Real> stack_periods(const std::vector<DeviceRecord>& recs, std::span<const std::size_t> idx) {
    std::vector<Real> v(idx.size());
    for (std::size_t b = 0; b < idx.size(); ++b) v[b] = static_cast<Real>(recs[idx[b]].period.normalized());
    return Tensor<Real>({idx.size(), 1}, std::move(v));
}

template <class Real>
Tensor<Real> stack_spectra(const std::vector<DeviceRecord>& recs, std::span<const std::size_t> idx) {
    std::vector<Real> v(idx.size() * kSpectrumPoints);
    for (std::size_t b = 0; b < idx.size(); ++b)
        std::copy(recs[idx[b]].spectrum.t.begin(), recs[idx[b]].spectrum.t.end(), v.begin() + b * kSpectrumPoints);
    return Tensor<Real>({idx.size(), kSpectrumPoints}, std::move(v));
}

template <class Real>
Tensor<Real> stack_contrasts(const std::vector<ContrastVector>& cs, std::span<const std::size_t> idx) {
    std::vector<Real> v(idx.size() * kContrastSize);
    for (std::size_t b = 0; b < idx.size(); ++b)
        std::copy(cs[idx[b]].values.begin(), cs[idx[b]].values.end(), v.begin() + b * kContrastSize);
    return Tensor<Real>({idx.size(), kContrastSize}, std::move(v));
}

/// Uniform [0,1) noise for one generated sample, keyed by (seed, a, b).
inline std::vector<float> noise_vector(std::size_t dim, std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    Rng rng(derive_seed(seed, a, b));
    std::vector<float> z(dim);
    for (auto& v : z) v = static_cast<float>(rng.uniform());
    return z;
}

inline constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;  // "noise"

inline double near_binarity_of(std::span<const float> pixels) {
    double acc = 0.0;
    for (float v : pixels) acc += std::min<double>(v, 1.0 - double(v));
    return acc / double(pixels.size());
}

}  // namespace detail

using ProgressFn = std::function<void(std::size_t epoch, const LossCurve&)>;

// ---------------------------------------------------------------------------
// Evaluation of a simulator on labelled records

struct EvalReport {
    std::vector<double> per_sample_mse;
    double mean_mse = 0.0;
    double median_mse = 0.0;
    std::optional<double> near_binarity;
    std::vector<double> simulator_mse;  // generator reports: simulator-judged MSE of the kept device
    std::vector<std::size_t> best_seed;
    double runtime_seconds = 0.0;
    nlohmann::json config;

    void summarize() {
        if (per_sample_mse.empty()) throw ValueError("evaluation set is empty");
        mean_mse = std::accumulate(per_sample_mse.begin(), per_sample_mse.end(), 0.0) / double(per_sample_mse.size());
        auto sorted = per_sample_mse;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t n = sorted.size();
        median_mse = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    }

    nlohmann::json to_json() const {
        nlohmann::json j{{"count", per_sample_mse.size()},
                         {"mean_mse", mean_mse},
                         {"median_mse", median_mse},
                         {"per_sample_mse", per_sample_mse},
                         {"runtime_seconds", runtime_seconds},
                         {"config", config}};
        if (near_binarity) j["near_binarity"] = *near_binarity;
        if (!simulator_mse.empty()) {
            j["simulator_mse"] = simulator_mse;
            j["mean_simulator_mse"] =
                std::accumulate(simulator_mse.begin(), simulator_mse.end(), 0.0) / double(simulator_mse.size());
        }
        if (!best_seed.empty()) j["best_seed"] = best_seed;
        return j;
    }
};

template <class Real>
double mean_simulator_loss(const Simulator<Real>& model, const std::vector<DeviceRecord>& records,
                           std::size_t chunk = 256) {
    nn::NoGradGuard guard;
    double total = 0.0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < records.size(); start += chunk) {
        idx.resize(std::min(chunk, records.size() - start));
        std::iota(idx.begin(), idx.end(), start);
        auto pred = model.forward(detail::stack_shapes<Real>(records, idx), detail::stack_periods<Real>(records, idx), false);
        total += nn::mse_loss(pred, detail::stack_spectra<Real>(records, idx)).item() * double(idx.size());
    }
    return total / double(records.size());
}

template <class Real>
EvalReport eval_simulator(const Simulator<Real>& model, const std::vector<DeviceRecord>& records) {
    if (records.empty()) throw ValueError("eval_simulator: empty evaluation set");
    const auto t0 = std::chrono::steady_clock::now();
    EvalReport r;
    r.per_sample_mse.reserve(records.size());
    for (const auto& rec : records) r.per_sample_mse.push_back(mse(model.simulate(rec.shape, rec.period), rec.spectrum));
    r.summarize();
    r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.config = {{"evaluator", "simulator"}, {"arch", model.arch()}};
    return r;
}

// ---------------------------------------------------------------------------
// Simulator training

template <class Real = float>
struct SimulatorTraining {
    Simulator<Real> model;
    LossCurve curve;
    std::optional<double> initial_validation;  // untrained model, when a validation set is given
};

/// Minimizes the spectrum MSE over the (optionally rotation-augmented)
/// training records with Adam and a step learning-rate schedule.
template <class Real = float>
SimulatorTraining<Real> train_simulator(const std::vector<DeviceRecord>& train, const std::vector<DeviceRecord>& validation,
                                        const TrainConfig& cfg, const SimulatorArch& arch = SimulatorArch::desk(),
                                        const ProgressFn& progress = {}) {
    if (train.empty()) throw ValueError("train_simulator: empty training set");
    cfg.validate();
    Simulator<Real> model(arch, derive_seed(cfg.seed, 1));
    nn::init_weights(model.params(), derive_seed(cfg.seed, 1), {0.0, cfg.init_std});

    std::vector<DeviceRecord> samples;
    samples.reserve(train.size() * (cfg.augment ? 4 : 1));
    for (const auto& rec : train) {
        if (cfg.augment)
            for (const auto& a : augment(rec)) samples.push_back(a);
        else
            samples.push_back(rec);
    }

    std::optional<double> initial_validation;
    if (!validation.empty()) initial_validation = mean_simulator_loss(model, validation);
    LossCurve curve;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = nn::step_lr(epoch, cfg.lr, cfg.lr_step, cfg.lr_gamma);
        const auto order = detail::shuffled_indices(samples.size(), derive_seed(cfg.seed, 2, epoch));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::span<const std::size_t> idx(order.data() + start, std::min(cfg.batch_size, order.size() - start));
            auto pred = model.forward(detail::stack_shapes<Real>(samples, idx), detail::stack_periods<Real>(samples, idx), true);
            auto loss = nn::mse_loss(pred, detail::stack_spectra<Real>(samples, idx));
            model.params().zero_grad();
            nn::backward(loss);
            nn::adam_step(model.params(), lr, cfg.adam);
            epoch_loss += loss.item() * double(idx.size());
        }
        curve.train.push_back(epoch_loss / double(samples.size()));
        if (!validation.empty()) curve.validation.push_back(mean_simulator_loss(model, validation));
        if (progress) progress(epoch, curve);
    }
    return {std::move(model), std::move(curve), initial_validation};
}

// ---------------------------------------------------------------------------
// Generator training through the frozen simulator

template <class Real = float>
struct GeneratorTraining {
    Generator<Real> model;
    LossCurve curve;
};

/// Per batch: contrast vectors of the labelled spectra plus fresh uniform
/// noise -> generator -> frozen simulator. Loss = MSE(spectrum) +
/// alpha (1 - SSIM(shape)) + beta MSE(normalized period). Only the generator
/// is updated; no augmentation, no binarization.
template <class Real = float>
GeneratorTraining<Real> train_generator(const std::vector<DeviceRecord>& train, const Simulator<Real>& simulator,
                                        const TrainConfig& cfg, const GeneratorArch& arch = GeneratorArch::desk(),
                                        const ProgressFn& progress = {}, const SsimConfig& ssim_cfg = {}) {
    if (train.empty()) throw ValueError("train_generator: empty training set");
    if (!simulator.frozen()) throw StateError("train_generator: simulator must be frozen before generator training");
    cfg.validate();
    Generator<Real> model(arch, derive_seed(cfg.seed, 3));
    nn::init_weights(model.params(), derive_seed(cfg.seed, 3), {0.0, cfg.init_std});

    std::vector<ContrastVector> contrasts;
    contrasts.reserve(train.size());
    for (const auto& rec : train) contrasts.push_back(contrast_vector(rec.spectrum));

    LossCurve curve;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = nn::step_lr(epoch, cfg.lr, cfg.lr_step, cfg.lr_gamma);
        const auto order = detail::shuffled_indices(train.size(), derive_seed(cfg.seed, 4, epoch));
        double sum_total = 0, sum_spec = 0, sum_shape = 0, sum_period = 0, sum_bin = 0;
        for (std::size_t start = 0, batch = 0; start < order.size(); start += cfg.batch_size, ++batch) {
            const std::span<const std::size_t> idx(order.data() + start, std::min(cfg.batch_size, order.size() - start));
            std::vector<Real> z(idx.size() * arch.noise_dim);
            Rng rng(derive_seed(cfg.seed ^ detail::kNoiseStream, epoch, batch));
            for (auto& v : z) v = static_cast<Real>(rng.uniform());
            auto out = model.forward(detail::stack_contrasts<Real>(contrasts, idx),
                                     Tensor<Real>({idx.size(), arch.noise_dim}, std::move(z)), true);
            auto predicted = simulator.forward(out.image, out.period_norm, false);
            auto spectrum_loss = nn::mse_loss(predicted, detail::stack_spectra<Real>(train, idx));
            auto shape_loss = nn::affine(ssim(out.image, detail::stack_shapes<Real>(train, idx), ssim_cfg), Real(-1), Real(1));
            auto period_loss = nn::mse_loss(out.period_norm, detail::stack_periods<Real>(train, idx));
            auto loss = generator_loss(spectrum_loss, shape_loss, period_loss, cfg.alpha, cfg.beta);
            model.params().zero_grad();
            nn::backward(loss);
            nn::adam_step(model.params(), lr, cfg.adam);

            const double w = double(idx.size());
            sum_total += loss.item() * w;
            sum_spec += spectrum_loss.item() * w;
            sum_shape += shape_loss.item() * w;
            sum_period += period_loss.item() * w;
            std::vector<float> pix(out.image.values().begin(), out.image.values().end());
            sum_bin += detail::near_binarity_of(pix) * w;
        }
        const double n = double(train.size());
        curve.train.push_back(sum_total / n);
        curve.spectrum.push_back(sum_spec / n);
        curve.shape.push_back(sum_shape / n);
        curve.period.push_back(sum_period / n);
        curve.near_binarity.push_back(sum_bin / n);
        if (progress) progress(epoch, curve);
    }
    return {std::move(model), std::move(curve)};
}

// ---------------------------------------------------------------------------
// Generator evaluation, design, baselines

/// For each labelled record: encode its spectrum, generate one device per
/// seed, binarize at 0.5, round the period, score with the surrogate oracle,
/// keep the best seed. near_binarity averages every raw generated image.
/// When a simulator is given, the simulator-judged MSE of each kept device
/// is reported alongside.
template <class Real>
EvalReport eval_generator(const Generator<Real>& gen, const std::vector<DeviceRecord>& targets, std::size_t seeds_per_target,
                          std::uint64_t seed, const Simulator<Real>* simulator = nullptr) {
    if (targets.empty()) throw ValueError("eval_generator: empty evaluation set");
    if (seeds_per_target == 0) throw ValueError("eval_generator: need at least one seed per target");
    const auto t0 = std::chrono::steady_clock::now();
    EvalReport r;
    double binarity = 0.0;
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const auto contrast = contrast_vector(targets[t].spectrum);
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_s = 0;
        ShapeImage best_shape;
        Period best_period(kPeriodMin);
        for (std::size_t s = 0; s < seeds_per_target; ++s) {
            const auto z = detail::noise_vector(gen.arch().noise_dim, seed, t, s);
            const auto dev = gen.generate(contrast, z);
            binarity += mean_manhattan_to_binary(dev.shape);
            const auto shape = binarize(dev.shape, 0.5);
            const double m = mse(surrogate::surrogate_spectrum(shape, dev.period()), targets[t].spectrum);
            if (m < best) best = m, best_s = s, best_shape = shape, best_period = dev.period();
        }
        r.per_sample_mse.push_back(best);
        r.best_seed.push_back(best_s);
        if (simulator) r.simulator_mse.push_back(mse(simulator->simulate(best_shape, best_period), targets[t].spectrum));
    }
    r.near_binarity = binarity / double(targets.size() * seeds_per_target);
    r.summarize();
    r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.config = {{"evaluator", "surrogate_oracle"}, {"seeds_per_target", seeds_per_target}, {"seed", seed},
                {"arch", gen.arch()}};
    return r;
}

struct TraverseResult {
    std::size_t index = 0;
    DeviceRecord record;
    double mse = 0.0;
};

/// Nearest record by spectrum MSE; ties go to the lowest index.
inline TraverseResult baseline_traverse(const std::vector<DeviceRecord>& dataset, const Spectrum& target) {
    if (dataset.empty()) throw ValueError("baseline_traverse: empty dataset");
    TraverseResult best{0, dataset[0], mse(dataset[0].spectrum, target)};
    for (std::size_t i = 1; i < dataset.size(); ++i) {
        const double m = mse(dataset[i].spectrum, target);
        if (m < best.mse) best.index = i, best.mse = m;
    }
    best.record = dataset[best.index];
    return best;
}

enum class DesignMode { encoded, semi_random };

inline DesignMode parse_design_mode(const std::string& s) {
    if (s == "encoded") return DesignMode::encoded;
    if (s == "semi-random" || s == "semi_random") return DesignMode::semi_random;
    throw ValueError("unknown design mode '" + s + "' (expected encoded or semi-random)");
}

struct DesignCandidate {
    std::size_t seed_index = 0;
    ContrastVector contrast;
    ShapeImage raw_shape;
    ShapeImage shape;  // binarized
    Period period{kPeriodMin};
    Spectrum spectrum;  // oracle response of the binarized device
    double mse = 0.0;
};

/// Argmin (0-based) of the TM half.
inline std::size_t tm_minimum_index(const Spectrum& s) {
    const auto tm = s.tm();
    return static_cast<std::size_t>(std::min_element(tm.begin(), tm.end()) - tm.begin());
}

namespace detail {
template <class Real, class ContrastFor, class Score>
std::vector<DesignCandidate> run_design(const Generator<Real>& gen, std::size_t num_seeds, std::uint64_t seed,
                                        ContrastFor&& contrast_for, Score&& score) {
    if (num_seeds == 0) throw ValueError("design: need at least one seed");
    std::vector<DesignCandidate> out;
    for (std::size_t s = 0; s < num_seeds; ++s) {
        DesignCandidate c;
        c.seed_index = s;
        c.contrast = contrast_for(s);
        const auto dev = gen.generate(c.contrast, noise_vector(gen.arch().noise_dim, seed, kNoiseStream, s));
        c.raw_shape = dev.shape;
        c.shape = binarize(dev.shape, 0.5);
        c.period = dev.period();
        c.spectrum = surrogate::surrogate_spectrum(c.shape, c.period);
        c.mse = score(c);
        out.push_back(std::move(c));
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.mse < b.mse; });
    return out;
}
}  // namespace detail

/// Generates `num_seeds` candidates for a target spectrum and ranks them by
/// oracle MSE. encoded: the target's own contrast vector with varying noise.
/// semi_random: valley vectors at the band of the target's TM minimum.
template <class Real>
std::vector<DesignCandidate> design(const Generator<Real>& gen, const Spectrum& target, std::size_t num_seeds,
                                    DesignMode mode, std::uint64_t seed) {
    target.require_valid("design target");
    const auto encoded = contrast_vector(target);
    const std::size_t band = band_for_index(tm_minimum_index(target));
    return detail::run_design(
        gen, num_seeds, seed,
        [&](std::size_t s) {
            return mode == DesignMode::encoded ? encoded : semi_random_contrast(band, Polarity::valley, derive_seed(seed, s, 1));
        },
        [&](const DesignCandidate& c) { return mse(c.spectrum, target); });
}

/// Contrast-vector target: candidates are ranked by the MSE between the
/// contrast vector of their oracle spectrum and the requested one.
template <class Real>
std::vector<DesignCandidate> design(const Generator<Real>& gen, const ContrastVector& target, std::size_t num_seeds,
                                    std::uint64_t seed) {
    target.require_valid();
    return detail::run_design(
        gen, num_seeds, seed, [&](std::size_t) { return target; },
        [&](const DesignCandidate& c) {
            const auto got = contrast_vector(c.spectrum);
            return mse(std::span<const double>(got.values), std::span<const double>(target.values));
        });
}

/// Simulator agreement on raw vs binarized generated shapes, both judged
/// against the oracle spectrum of the binarized device.
struct BinarizationStudy {
    std::vector<double> raw_mse, binarized_mse, abs_difference;
    double mean_abs_difference = 0.0;
};

template <class Real>
BinarizationStudy binarization_study(const Generator<Real>& gen, const Simulator<Real>& sim,
                                     const std::vector<DeviceRecord>& targets, std::uint64_t seed) {
    if (targets.empty()) throw ValueError("binarization_study: no targets");
    BinarizationStudy st;
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const auto dev = gen.generate(contrast_vector(targets[t].spectrum), detail::noise_vector(gen.arch().noise_dim, seed, t, 0));
        const auto bin = binarize(dev.shape, 0.5);
        const auto oracle = surrogate::surrogate_spectrum(bin, dev.period());
        const double raw = mse(sim.simulate(dev.shape, dev.period()), oracle);
        const double clean = mse(sim.simulate(bin, dev.period()), oracle);
        st.raw_mse.push_back(raw);
        st.binarized_mse.push_back(clean);
        st.abs_difference.push_back(std::abs(raw - clean));
    }
    st.mean_abs_difference =
        std::accumulate(st.abs_difference.begin(), st.abs_difference.end(), 0.0) / double(st.abs_difference.size());
    return st;
}

// ---------------------------------------------------------------------------
// Dataset report

struct DatasetReport {
    struct Row {
        std::size_t argmin = 0;  // 0-based TM sample of minimum transmittance
        std::array<float, kHalfPoints> tm{};
        auto operator<=>(const Row&) const = default;
    };
    std::vector<Row> rows;  // sorted by argmin wavelength, then values
    std::array<std::size_t, kHalfPoints> histogram{};

    std::string to_csv() const {
        std::ostringstream os;
        os.precision(9);
        os << "argmin_nm";
        for (std::size_t k = 0; k < kHalfPoints; ++k) os << ",tm_" << int(wavelength_nm(k));
        os << '\n';
        for (const auto& r : rows) {
            os << wavelength_nm(r.argmin);
            for (float v : r.tm) os << ',' << v;
            os << '\n';
        }
        return os.str();
    }

    nlohmann::json summary() const {
        nlohmann::json hist = nlohmann::json::object();
        for (std::size_t k = 0; k < kHalfPoints; ++k) hist[std::to_string(int(wavelength_nm(k)))] = histogram[k];
        return {{"rows", rows.size()}, {"tm_minimum_histogram", hist}};
    }
};

/// TM halves of every record ordered by the wavelength of their minimum, as
/// a canonical (shuffle-independent) matrix plus a histogram of minima.
inline DatasetReport dataset_report(const std::vector<DeviceRecord>& dataset) {
    if (dataset.empty()) throw ValueError("dataset_report: empty dataset");
    DatasetReport r;
    for (const auto& rec : dataset) {
        DatasetReport::Row row;
        row.argmin = tm_minimum_index(rec.spectrum);
        std::copy(rec.spectrum.tm().begin(), rec.spectrum.tm().end(), row.tm.begin());
        ++r.histogram[row.argmin];
        r.rows.push_back(row);
    }
    std::sort(r.rows.begin(), r.rows.end());
    return r;
}

}  // namespace metafilter

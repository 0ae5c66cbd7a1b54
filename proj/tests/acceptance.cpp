// Acceptance run: one PASS/FAIL line per criterion, JSON reports in
// --report-dir. Criteria 4-9 train the desk-scale models twice.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "metafilter/metafilter.hpp"
#include "support/contrast_reference.hpp"
#include "support/gradcheck.hpp"
#include "support/random_data.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace metafilter;
using testsupport::max_gradient_error;
using testsupport::random_nonzero;
using testsupport::random_tensor;
using testsupport::weighted_sum;

namespace {

constexpr std::uint64_t kDataSeed = 7;
constexpr std::uint64_t kSplitSeed = 1;
constexpr std::uint64_t kTrainSeed = 0;
constexpr std::uint64_t kEvalSeed = 3;
constexpr std::uint64_t kDemoSeed = 600;
constexpr std::size_t kDeskRecords = 2048;
constexpr std::size_t kTargets = 100;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    int id;
    bool pass;
    bool soft;
    std::string detail;
};

class Ledger {
public:
    explicit Ledger(std::set<int> allowed) : allowed_(std::move(allowed)) {}

    // A soft criterion is reported but never fails the run.
    void record(int id, bool pass, const std::string& detail, bool soft = false) {
        outcomes_.push_back({id, pass, soft, detail});
        std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << std::endl;
    }

    json to_json() const {
        json j = json::array();
        for (const auto& o : outcomes_) j.push_back({{"criterion", o.id}, {"pass", o.pass}, {"soft", o.soft}, {"detail", o.detail}});
        return j;
    }

    int exit_code() const {
        for (const auto& o : outcomes_)
            if (!o.pass && !o.soft && !allowed_.count(o.id)) return 1;
        return 0;
    }

private:
    std::set<int> allowed_;
    std::vector<Outcome> outcomes_;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) { std::ofstream(path) << text; }

// ---------------------------------------------------------------------------

void criterion1(Ledger& ledger) {
    const auto t0 = Clock::now();
    Rng rng(101);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto s = testsupport::random_spectrum(rng);
        const auto got = contrast_vector(s);
        const auto te = testsupport::contrast_reference(s.t.data()), tm = testsupport::contrast_reference(s.t.data() + kHalfPoints);
        for (std::size_t i = 0; i < 7; ++i) {
            worst = std::max(worst, std::abs(got.values[i] - te[i]));
            worst = std::max(worst, std::abs(got.values[7 + i] - tm[i]));
        }
    }
    const double elapsed = seconds_since(t0);
    ledger.record(1, worst <= 1e-12 && elapsed < 1.0,
                  "max abs deviation " + fmt(worst) + " (<= 1e-12) over 1000 spectra in " + fmt(elapsed) + " s (< 1 s)");
}

// ---------------------------------------------------------------------------

using TensorD = nn::Tensor<double>;

double gradient_case(const std::string& name, std::uint64_t trial) {
    std::uint64_t name_key = 0;
    for (unsigned char ch : name) name_key = name_key * 131 + ch;
    Rng rng(derive_seed(0x67726164, name_key, trial));
    if (name == "linear") {
        auto x = random_tensor(rng, {3, 5}), w = random_tensor(rng, {4, 5}), b = random_tensor(rng, {4});
        return max_gradient_error({x, w, b}, [&] { return weighted_sum(nn::linear(x, w, b), trial); });
    }
    if (name == "conv2d") {
        const std::size_t stride = 1 + trial % 2, pad = trial % 3 == 0 ? 0 : 1;
        auto x = random_tensor(rng, {2, 2, 6, 6}), k = random_tensor(rng, {3, 2, 4, 4}), b = random_tensor(rng, {3});
        return max_gradient_error({x, k, b}, [&] { return weighted_sum(nn::conv2d(x, k, b, stride, pad), trial); });
    }
    if (name == "conv_transpose2d") {
        const std::size_t stride = 1 + trial % 2, pad = trial % 3 == 0 ? 0 : 1;
        auto x = random_tensor(rng, {2, 3, 3, 3}), k = random_tensor(rng, {3, 2, 4, 4}), b = random_tensor(rng, {2});
        return max_gradient_error({x, k, b}, [&] { return weighted_sum(nn::conv_transpose2d(x, k, b, stride, pad), trial); });
    }
    if (name == "batch_norm") {
        auto x = random_tensor(rng, {4, 3, 3, 3}), g = random_tensor(rng, {3}, 0.5, 1.5), s = random_tensor(rng, {3});
        auto rm = TensorD::zeros({3}), rv = TensorD::full({3}, 1.0);
        return max_gradient_error({x, g, s}, [&] { return weighted_sum(nn::batch_norm(x, g, s, rm, rv, true), trial); });
    }
    if (name == "leaky_relu") {
        auto x = random_nonzero(rng, {4, 6});
        return max_gradient_error({x}, [&] { return weighted_sum(nn::leaky_relu(x), trial); });
    }
    if (name == "sigmoid") {
        auto x = random_tensor(rng, {4, 6}, -4.0, 4.0);
        return max_gradient_error({x}, [&] { return weighted_sum(nn::sigmoid(x), trial); });
    }
    if (name == "tanh") {
        auto x = random_tensor(rng, {4, 6}, -3.0, 3.0);
        return max_gradient_error({x}, [&] { return weighted_sum(nn::tanh(x), trial); });
    }
    if (name == "period_plane") {
        auto a = random_tensor(rng, {2, 1, 4, 4}), p = random_tensor(rng, {2, 1});
        return max_gradient_error({a, p}, [&] { return weighted_sum(nn::concat_channels(a, nn::expand_plane(p, 4, 4)), trial); });
    }
    if (name == "mse_loss") {
        auto a = random_tensor(rng, {3, 7}), b = random_tensor(rng, {3, 7});
        return max_gradient_error({a, b}, [&] { return nn::mse_loss(a, b); });
    }
    if (name == "ssim") {
        auto a = random_tensor(rng, {2, 1, 12, 12}, 0.05, 0.95), b = random_tensor(rng, {2, 1, 12, 12}, 0.05, 0.95);
        return max_gradient_error({a, b}, [&] { return ssim(a, b); });
    }
    if (name == "generator_loss") {
        auto pred = random_tensor(rng, {2, 9}, 0.0, 1.0), target = random_tensor(rng, {2, 9}, 0.0, 1.0, false);
        auto img = random_tensor(rng, {2, 1, 12, 12}, 0.05, 0.95), ref = random_tensor(rng, {2, 1, 12, 12}, 0.05, 0.95, false);
        auto per = random_tensor(rng, {2, 1}, 0.0, 1.0), per_t = random_tensor(rng, {2, 1}, 0.0, 1.0, false);
        return max_gradient_error({pred, img, per}, [&] {
            return generator_loss(nn::mse_loss(pred, target), nn::affine(ssim(img, ref), -1.0, 1.0), nn::mse_loss(per, per_t), 0.05,
                                  0.3);
        });
    }
    throw ValueError("unknown gradient case " + name);
}

void criterion2(Ledger& ledger, json& report) {
    const auto t0 = Clock::now();
    const std::vector<std::string> cases{"linear", "conv2d",     "conv_transpose2d", "batch_norm", "leaky_relu",    "sigmoid",
                                         "tanh",   "period_plane", "mse_loss",        "ssim",       "generator_loss"};
    double worst = 0.0;
    std::string worst_case;
    for (const auto& name : cases) {
        double case_worst = 0.0;
        for (int trial = 0; trial < testsupport::kTrials; ++trial) case_worst = std::max(case_worst, gradient_case(name, trial));
        report["gradient_check"][name] = case_worst;
        if (case_worst >= worst) worst = case_worst, worst_case = name;
    }
    const double elapsed = seconds_since(t0);
    ledger.record(2, worst <= testsupport::kGradTolerance && elapsed < 120.0,
                  std::to_string(cases.size()) + " cases x " + std::to_string(testsupport::kTrials) + " trials, worst relative error " +
                      fmt(worst) + " (" + worst_case + ", <= 1e-4) in " + fmt(elapsed) + " s (< 120 s)");
}

// ---------------------------------------------------------------------------

void criterion3(Ledger& ledger) {
    const auto t0 = Clock::now();
    std::size_t violations = 0;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const auto rec = generate_record(303, i);
        const auto r90 = rot90(rec.shape), r180 = rot90(r90);
        if (surrogate::surrogate_spectrum(r90, rec.period) != rec.spectrum.swapped()) ++violations;
        if (surrogate::surrogate_spectrum(r180, rec.period) != rec.spectrum) ++violations;
    }
    const double elapsed = seconds_since(t0);
    ledger.record(3, violations == 0 && elapsed < 60.0,
                  std::to_string(violations) + " exact-equality violations over 1000 devices in " + fmt(elapsed) + " s (< 60 s)");
}

// ---------------------------------------------------------------------------

struct DeskRun {
    SimulatorTraining<float> sim;
    EvalReport sim_report;
    double sim_seconds = 0.0;
    GeneratorTraining<float> gen;
    EvalReport gen_report;
    double baseline_mean = 0.0;
    std::vector<double> baseline_mse;
    double gen_seconds = 0.0;
};

DeskRun desk_run(const Split& parts, const std::string& tag) {
    auto log = [&](const char* stage) {
        return [stage, tag](std::size_t epoch, const LossCurve& c) {
            std::cerr << tag << ' ' << stage << " epoch " << epoch << " train " << c.train.back();
            if (!c.validation.empty()) std::cerr << " validation " << c.validation.back();
            if (!c.near_binarity.empty()) std::cerr << " near_binarity " << c.near_binarity.back();
            std::cerr << '\n';
        };
    };
    auto t0 = Clock::now();
    auto sim_cfg = TrainConfig::simulator_desk();
    sim_cfg.seed = kTrainSeed;
    auto sim = train_simulator<float>(parts.train, parts.validation, sim_cfg, SimulatorArch::desk(), log("simulator"));
    sim.model.freeze();
    auto sim_report = eval_simulator(sim.model, parts.validation);
    const double sim_seconds = seconds_since(t0);

    t0 = Clock::now();
    auto gen_cfg = TrainConfig::generator_desk();
    gen_cfg.seed = kTrainSeed;
    auto gen = train_generator<float>(parts.train, sim.model, gen_cfg, GeneratorArch::desk(), log("generator"));
    gen.model.freeze();
    const std::vector<DeviceRecord> targets(parts.validation.begin(), parts.validation.begin() + kTargets);
    auto gen_report = eval_generator(gen.model, targets, 4, kEvalSeed, &sim.model);
    std::vector<double> baseline;
    for (const auto& t : targets) baseline.push_back(baseline_traverse(parts.train, t.spectrum).mse);
    const double baseline_mean = std::accumulate(baseline.begin(), baseline.end(), 0.0) / double(baseline.size());
    const double gen_seconds = seconds_since(t0);
    return {std::move(sim), std::move(sim_report), sim_seconds, std::move(gen), std::move(gen_report), baseline_mean,
            std::move(baseline), gen_seconds};
}

template <class Model>
std::vector<float> parameters(const Model& m) {
    std::vector<float> out;
    for (const auto& e : m.params().entries())
        for (float v : e.tensor.values()) out.push_back(v);
    return out;
}

// ---------------------------------------------------------------------------

void criterion10(Ledger& ledger, const fs::path& dir) {
    Rng rng(1010);
    std::size_t failures = 0;
    const auto data_path = dir / "roundtrip.msd", ckpt_path = dir / "roundtrip.ckpt";
    auto bytes = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::vector<char>{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    };
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<DeviceRecord> records(static_cast<std::size_t>(rng.uniform_int(1, 16)));
        for (auto& r : records) {
            r.shape = testsupport::random_binary_image(rng, rng.uniform());
            r.period = Period(static_cast<int>(rng.uniform_int(kPeriodMin, kPeriodMax)));
            r.spectrum = testsupport::random_spectrum(rng);
        }
        save_dataset(records, data_path.string());
        const auto first = bytes(data_path);
        const auto loaded = load_dataset(data_path.string());
        save_dataset(loaded, data_path.string());
        if (loaded != records || bytes(data_path) != first) ++failures;

        const SimulatorArch sa{static_cast<std::size_t>(rng.uniform_int(1, 3)), static_cast<std::size_t>(rng.uniform_int(1, 4)),
                               static_cast<std::size_t>(rng.uniform_int(1, 8))};
        Simulator<float> sim(sa, rng.next_u64());
        for (auto& e : sim.params().entries())
            for (auto& v : e.tensor.values()) v = static_cast<float>(rng.normal());
        save_checkpoint(sim, ckpt_path.string(), {std::size_t(trial), rng.next_u64(), ""});
        const auto sim_bytes = bytes(ckpt_path);
        CheckpointMeta meta;
        auto sim_back = load_simulator(ckpt_path.string(), &meta);
        save_checkpoint(sim_back, ckpt_path.string(), meta);
        if (sim_back.arch() != sa || parameters(sim_back) != parameters(sim) || bytes(ckpt_path) != sim_bytes) ++failures;

        const GeneratorArch ga{std::size_t{1} << rng.uniform_int(0, 2), static_cast<std::size_t>(rng.uniform_int(1, 3)),
                               static_cast<std::size_t>(rng.uniform_int(1, 8)), static_cast<std::size_t>(rng.uniform_int(1, 4))};
        Generator<float> gen(ga, rng.next_u64());
        for (auto& e : gen.params().entries())
            for (auto& v : e.tensor.values()) v = static_cast<float>(rng.normal());
        save_checkpoint(gen, ckpt_path.string());
        const auto gen_bytes = bytes(ckpt_path);
        auto gen_back = load_generator(ckpt_path.string());
        save_checkpoint(gen_back, ckpt_path.string());
        if (gen_back.arch() != ga || parameters(gen_back) != parameters(gen) || bytes(ckpt_path) != gen_bytes) ++failures;
    }
    fs::remove(data_path);
    fs::remove(ckpt_path);
    ledger.record(10, failures == 0,
                  std::to_string(failures) + " mismatches over 100 randomized dataset + simulator + generator round trips");
}

}  // namespace

int main(int argc, char** argv) {
    tune_allocator();
    CLI::App app{"Acceptance criteria run"};
    std::string report_dir = "acceptance";
    std::vector<int> allow_fail;
    bool skip_training = false;
    app.add_option("--report-dir", report_dir, "Directory for JSON reports and loss curves")->capture_default_str();
    app.add_option("--allow-fail", allow_fail, "Criteria whose FAIL does not fail the run");
    app.add_flag("--skip-training", skip_training, "Only run criteria 1-3 and 10");
    CLI11_PARSE(app, argc, argv);

    const fs::path dir(report_dir);
    fs::create_directories(dir);
    Ledger ledger(std::set<int>(allow_fail.begin(), allow_fail.end()));
    json report;
    report["seeds"] = {{"data", kDataSeed}, {"split", kSplitSeed}, {"train", kTrainSeed}, {"eval", kEvalSeed}, {"demo", kDemoSeed}};

    try {
        criterion1(ledger);
        criterion2(ledger, report);
        criterion3(ledger);

        if (!skip_training) {
            const auto parts = split(generate_dataset(kDeskRecords, kDataSeed), 0.8, kSplitSeed);
            auto run = desk_run(parts, "run1");

            // 4: simulator
            write_text(dir / "simulator_loss.csv", run.sim.curve.to_csv());
            auto sim_json = run.sim_report.to_json();
            sim_json["training_seconds"] = run.sim_seconds;
            if (run.sim.initial_validation) sim_json["initial_validation_loss"] = *run.sim.initial_validation;
            write_json_file(sim_json, (dir / "simulator_eval.json").string());
            ledger.record(4, run.sim_report.mean_mse <= 0.010 && run.sim_seconds <= 1800.0,
                          "validation mean MSE " + fmt(run.sim_report.mean_mse) + " (<= 0.010) on " +
                              std::to_string(parts.validation.size()) + " records, initial " +
                              fmt(run.sim.initial_validation.value_or(0.0)) + ", " + fmt(run.sim_seconds) + " s (<= 1800 s)");

            // 5: generator vs baseline
            write_text(dir / "generator_loss.csv", run.gen.curve.to_csv());
            auto gen_json = run.gen_report.to_json();
            gen_json["training_seconds"] = run.gen_seconds;
            gen_json["baseline_mse"] = run.baseline_mse;
            gen_json["baseline_mean_mse"] = run.baseline_mean;
            write_json_file(gen_json, (dir / "generator_eval.json").string());
            const double ratio = run.gen_report.mean_mse / run.baseline_mean;
            ledger.record(5, run.gen_report.mean_mse <= 0.03 && ratio <= 1.25 && run.gen_seconds <= 2700.0,
                          "best-of-4 oracle mean MSE " + fmt(run.gen_report.mean_mse) + " (<= 0.03), baseline " +
                              fmt(run.baseline_mean) + ", ratio " + fmt(ratio) + " (<= 1.25), " + fmt(run.gen_seconds) +
                              " s (<= 2700 s)");

            // 6: near-binarity of generated shapes
            const double binarity = run.gen_report.near_binarity.value_or(1.0);
            ledger.record(6, binarity <= 0.05,
                          "mean near-binarity " + fmt(binarity) + " (<= 0.05) over " + std::to_string(kTargets * 4) +
                              " generated shapes");

            // 7: binarization robustness
            const auto study = binarization_study(run.gen.model, run.sim.model,
                                                  std::vector<DeviceRecord>(parts.validation.begin(),
                                                                            parts.validation.begin() + kTargets),
                                                  kEvalSeed);
            write_json_file({{"raw_mse", study.raw_mse},
                             {"binarized_mse", study.binarized_mse},
                             {"abs_difference", study.abs_difference},
                             {"mean_abs_difference", study.mean_abs_difference}},
                            (dir / "binarization_study.json").string());
            ledger.record(7, study.mean_abs_difference <= 0.02,
                          "mean |MSE(raw) - MSE(binarized)| " + fmt(study.mean_abs_difference) + " (<= 0.02) over " +
                              std::to_string(kTargets) + " devices");

            // 8: Gaussian-target demo
            const auto target = gaussian_target(600.0, 40.0, 0.9);
            const auto cands = design(run.gen.model, target, 4, DesignMode::semi_random, kDemoSeed);
            const auto& best = cands.front();
            const double minimum_nm = wavelength_nm(tm_minimum_index(best.spectrum));
            const auto base = baseline_traverse(parts.train, target);
            save_pgm(best.shape, (dir / "demo_best.pgm").string());
            json demo{{"seed", kDemoSeed},
                      {"mode", "semi-random"},
                      {"target", spectrum_to_json(target)},
                      {"best", {{"seed_index", best.seed_index},
                                {"mse", best.mse},
                                {"period_nm", best.period.nm()},
                                {"tm_minimum_nm", minimum_nm},
                                {"contrast", best.contrast.values},
                                {"spectrum", spectrum_to_json(best.spectrum)},
                                {"shape", "demo_best.pgm"}}},
                      {"candidate_mse", json::array()},
                      {"baseline", {{"index", base.index}, {"mse", base.mse}}}};
            for (const auto& c : cands) demo["candidate_mse"].push_back(c.mse);
            write_json_file(demo, (dir / "demo_report.json").string());
            ledger.record(8, std::abs(minimum_nm - 600.0) <= 30.0,
                          "best device TM minimum at " + fmt(minimum_nm) + " nm (600 +/- 30), MSE " + fmt(best.mse) +
                              ", seed " + std::to_string(kDemoSeed) + " (soft)",
                          true);

            // 9: determinism
            auto again = desk_run(parts, "run2");
            std::vector<std::string> diffs;
            if (!(again.sim.curve == run.sim.curve)) diffs.push_back("simulator loss curve");
            if (parameters(again.sim.model) != parameters(run.sim.model)) diffs.push_back("simulator parameters");
            if (again.sim_report.per_sample_mse != run.sim_report.per_sample_mse) diffs.push_back("simulator report");
            if (!(again.gen.curve == run.gen.curve)) diffs.push_back("generator loss curve");
            if (parameters(again.gen.model) != parameters(run.gen.model)) diffs.push_back("generator parameters");
            if (again.gen_report.per_sample_mse != run.gen_report.per_sample_mse ||
                again.gen_report.best_seed != run.gen_report.best_seed ||
                again.gen_report.near_binarity != run.gen_report.near_binarity)
                diffs.push_back("generator report");
            if (again.baseline_mse != run.baseline_mse) diffs.push_back("baseline");
            std::string what = "loss curves, parameters and reports of criteria 4-5 ";
            if (diffs.empty()) {
                what += "bit-identical on rerun";
            } else {
                what += "differ:";
                for (const auto& d : diffs) what += " " + d;
            }
            ledger.record(9, diffs.empty(), what);
        }

        criterion10(ledger, dir);
    } catch (const std::exception& e) {
        std::cout << "FAIL acceptance run aborted: " << e.what() << std::endl;
        return 1;
    }

    report["criteria"] = ledger.to_json();
    write_json_file(report, (dir / "acceptance.json").string());
    return ledger.exit_code();
}

// metafilter: command-line front end for dataset generation, training,
// evaluation and inverse design.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "metafilter/metafilter.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace metafilter;

namespace {

void emit(const json& j) { std::cout << j.dump(2) << std::endl; }

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw FormatError("write to '" + path + "' failed");
}

ProgressFn progress_printer(const char* stage, bool quiet) {
    if (quiet) return {};
    return [stage](std::size_t epoch, const LossCurve& c) {
        std::cerr << stage << " epoch " << epoch << " train " << c.train.back();
        if (!c.validation.empty()) std::cerr << " validation " << c.validation.back();
        if (!c.near_binarity.empty()) std::cerr << " near_binarity " << c.near_binarity.back();
        std::cerr << '\n';
    };
}

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json describe(const DeviceRecord& rec) {
    return {{"period_nm", rec.period.nm()}, {"fill_fraction", rec.shape.fill_fraction()}, {"spectrum", spectrum_to_json(rec.spectrum)}};
}

}  // namespace

int main(int argc, char** argv) {
    tune_allocator();
    CLI::App app{"Metasurface filter inverse design: data, training, evaluation, design"};
    app.require_subcommand(1);

    // datagen
    std::size_t count = 6500;
    std::uint64_t seed = 0;
    std::string out, data;
    auto* datagen = app.add_subcommand("datagen", "Generate random devices labelled by the surrogate oracle");
    datagen->add_option("--count", count, "Number of records")->capture_default_str();
    datagen->add_option("--seed", seed, "Dataset seed")->capture_default_str();
    datagen->add_option("--out", out, "Output dataset file")->required();

    // train-sim
    std::size_t epochs = 0, batch = 0;
    double lr = 0.0, val_fraction = 0.2, alpha = -1.0, beta = -1.0;
    std::uint64_t split_seed = 0;
    bool no_augment = false, full_scale = false, quiet = false;
    std::string val_out, sim_path;
    auto* train_sim = app.add_subcommand("train-sim", "Train the forward simulator");
    train_sim->add_option("--data", data, "Dataset file")->required();
    train_sim->add_option("--out", out, "Output checkpoint")->required();
    train_sim->add_option("--epochs", epochs, "Epochs (default: desk 60, full 500)");
    train_sim->add_option("--batch", batch, "Batch size (default: desk 128, full 1024)");
    train_sim->add_option("--lr", lr, "Initial learning rate (default 0.02)");
    train_sim->add_option("--seed", seed, "Training seed")->capture_default_str();
    train_sim->add_flag("--no-augment", no_augment, "Disable rotation augmentation");
    train_sim->add_flag("--full-scale", full_scale, "Use full-scale architecture and schedule");
    train_sim->add_option("--val-fraction", val_fraction, "Held-out fraction")->capture_default_str();
    train_sim->add_option("--split-seed", split_seed, "Train/validation split seed")->capture_default_str();
    train_sim->add_option("--val-out", val_out, "Also save the validation split as a dataset file");
    train_sim->add_flag("--quiet", quiet, "No per-epoch progress on stderr");

    // train-gen
    std::size_t noise_dim = 0;
    auto* train_gen = app.add_subcommand("train-gen", "Train the generator through a frozen simulator");
    train_gen->add_option("--data", data, "Dataset file")->required();
    train_gen->add_option("--sim", sim_path, "Simulator checkpoint")->required();
    train_gen->add_option("--out", out, "Output checkpoint")->required();
    train_gen->add_option("--epochs", epochs, "Epochs (default: desk 120, full 1000)");
    train_gen->add_option("--batch", batch, "Batch size (default: desk 64, full 256)");
    train_gen->add_option("--lr", lr, "Initial learning rate (default 0.02)");
    train_gen->add_option("--alpha", alpha, "Shape-loss weight (default 0.05)");
    train_gen->add_option("--beta", beta, "Period-loss weight (default 0)");
    train_gen->add_option("--noise-dim", noise_dim, "Noise vector length (default 50)");
    train_gen->add_option("--seed", seed, "Training seed")->capture_default_str();
    train_gen->add_flag("--full-scale", full_scale, "Use full-scale architecture and schedule");
    train_gen->add_option("--val-fraction", val_fraction, "Held-out fraction excluded from training")->capture_default_str();
    train_gen->add_option("--split-seed", split_seed, "Train/validation split seed")->capture_default_str();
    train_gen->add_flag("--quiet", quiet, "No per-epoch progress on stderr");

    // eval-sim
    std::string ckpt;
    auto* eval_sim = app.add_subcommand("eval-sim", "Evaluate a simulator against dataset spectra");
    eval_sim->add_option("--ckpt", ckpt, "Simulator checkpoint")->required();
    eval_sim->add_option("--data", data, "Dataset file")->required();

    // eval-gen
    std::string gen_path;
    std::size_t seeds = 4, limit = 0;
    auto* eval_gen = app.add_subcommand("eval-gen", "Evaluate a generator with the surrogate oracle (best of --seeds)");
    eval_gen->add_option("--gen", gen_path, "Generator checkpoint")->required();
    eval_gen->add_option("--data", data, "Dataset of target spectra")->required();
    eval_gen->add_option("--seeds", seeds, "Noise draws per target")->capture_default_str();
    eval_gen->add_option("--seed", seed, "Noise seed")->capture_default_str();
    eval_gen->add_option("--sim", sim_path, "Also report simulator-judged MSE with this checkpoint");
    eval_gen->add_option("--limit", limit, "Use only the first N records");

    // simulate
    std::string shape_path;
    int period = 0;
    bool oracle = false;
    auto* simulate = app.add_subcommand("simulate", "Predict the spectrum of one device");
    auto* sim_ckpt = simulate->add_option("--ckpt", ckpt, "Simulator checkpoint");
    auto* sim_oracle = simulate->add_flag("--oracle", oracle, "Use the surrogate oracle");
    sim_ckpt->excludes(sim_oracle);
    sim_oracle->excludes(sim_ckpt);
    simulate->add_option("--shape", shape_path, "64x64 PGM shape")->required();
    simulate->add_option("--period", period, "Period in nm (200-400)")->required();

    // design
    std::string target_path, mode = "encoded", out_dir;
    auto* design_cmd = app.add_subcommand("design", "Generate and rank devices for a target");
    design_cmd->add_option("--gen", gen_path, "Generator checkpoint")->required();
    design_cmd->add_option("--target", target_path, "Target JSON (spectrum, contrast or gaussian)")->required();
    design_cmd->add_option("--mode", mode, "encoded or semi-random")->capture_default_str();
    design_cmd->add_option("--seeds", seeds, "Number of candidates")->capture_default_str();
    design_cmd->add_option("--seed", seed, "Design seed")->capture_default_str();
    design_cmd->add_option("--out-dir", out_dir, "Directory for PGM shapes and design.json")->required();

    // baseline
    auto* baseline = app.add_subcommand("baseline", "Nearest dataset record to a target spectrum");
    baseline->add_option("--data", data, "Dataset file")->required();
    baseline->add_option("--target", target_path, "Target JSON (spectrum or gaussian)")->required();

    // encode
    std::string spectrum_path;
    auto* encode = app.add_subcommand("encode", "Contrast vector of a spectrum");
    encode->add_option("--spectrum", spectrum_path, "Spectrum JSON (58 values, TE first)")->required();

    // report
    auto* report = app.add_subcommand("report", "TM spectra sorted by minimum wavelength");
    report->add_option("--data", data, "Dataset file")->required();
    report->add_option("--out", out, "Output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", {{"kind", "usage_error"}, {"message", e.what()}}}}.dump() << std::endl;
        return 2;
    }

    try {
        const auto t0 = std::chrono::steady_clock::now();
        if (*datagen) {
            const auto records = generate_dataset(count, seed);
            save_dataset(records, out);
            double fill = 0.0;
            for (const auto& r : records) fill += r.shape.fill_fraction();
            emit({{"records", records.size()}, {"seed", seed}, {"out", out}, {"mean_fill_fraction", fill / double(records.size())},
                  {"runtime_seconds", elapsed(t0)}});
        } else if (*train_sim) {
            auto cfg = full_scale ? TrainConfig::simulator_full() : TrainConfig::simulator_desk();
            if (epochs) cfg.epochs = epochs;
            if (batch) cfg.batch_size = batch;
            if (lr > 0) cfg.lr = lr;
            cfg.seed = seed;
            cfg.augment = !no_augment;
            const auto arch = full_scale ? SimulatorArch{} : SimulatorArch::desk();
            const auto parts = split(load_dataset(data), 1.0 - val_fraction, split_seed);
            auto result = train_simulator<float>(parts.train, parts.validation, cfg, arch, progress_printer("simulator", quiet));
            const std::string curve_path = out + ".loss.csv";
            write_text(curve_path, result.curve.to_csv());
            save_checkpoint(result.model, out, {cfg.epochs, cfg.seed, curve_path});
            if (!val_out.empty()) save_dataset(parts.validation, val_out);
            json j{{"checkpoint", out}, {"loss_curve", curve_path}, {"config", cfg}, {"arch", arch},
                   {"train_records", parts.train.size()}, {"validation_records", parts.validation.size()},
                   {"final_train_loss", result.curve.train.back()}, {"runtime_seconds", elapsed(t0)}};
            if (!result.curve.validation.empty()) j["final_validation_loss"] = result.curve.validation.back();
            if (result.initial_validation) j["initial_validation_loss"] = *result.initial_validation;
            emit(j);
        } else if (*train_gen) {
            auto cfg = full_scale ? TrainConfig::generator_full() : TrainConfig::generator_desk();
            if (epochs) cfg.epochs = epochs;
            if (batch) cfg.batch_size = batch;
            if (lr > 0) cfg.lr = lr;
            if (alpha >= 0) cfg.alpha = alpha;
            if (beta >= 0) cfg.beta = beta;
            cfg.seed = seed;
            auto arch = full_scale ? GeneratorArch{} : GeneratorArch::desk();
            if (noise_dim) arch.noise_dim = noise_dim;
            auto simulator = load_simulator<float>(sim_path);
            simulator.freeze();
            const auto parts = split(load_dataset(data), 1.0 - val_fraction, split_seed);
            auto result = train_generator<float>(parts.train, simulator, cfg, arch, progress_printer("generator", quiet));
            const std::string curve_path = out + ".loss.csv";
            write_text(curve_path, result.curve.to_csv());
            save_checkpoint(result.model, out, {cfg.epochs, cfg.seed, curve_path});
            emit({{"checkpoint", out}, {"loss_curve", curve_path}, {"config", cfg}, {"arch", arch},
                  {"train_records", parts.train.size()}, {"final_train_loss", result.curve.train.back()},
                  {"final_near_binarity", result.curve.near_binarity.back()}, {"runtime_seconds", elapsed(t0)}});
        } else if (*eval_sim) {
            auto model = load_simulator<float>(ckpt);
            model.freeze();
            auto rep = eval_simulator(model, load_dataset(data));
            rep.config["checkpoint"] = ckpt;
            rep.config["data"] = data;
            emit(rep.to_json());
        } else if (*eval_gen) {
            auto gen = load_generator<float>(gen_path);
            gen.freeze();
            auto records = load_dataset(data);
            if (limit && limit < records.size()) records.resize(limit);
            std::optional<Simulator<float>> simulator;
            if (!sim_path.empty()) simulator.emplace(load_simulator<float>(sim_path)), simulator->freeze();
            auto rep = eval_generator(gen, records, seeds, seed, simulator ? &*simulator : nullptr);
            rep.config["checkpoint"] = gen_path;
            rep.config["data"] = data;
            emit(rep.to_json());
        } else if (*simulate) {
            if (ckpt.empty() && !oracle) throw ValueError("simulate: pass --ckpt or --oracle");
            const auto shape = load_pgm(shape_path);
            const Period p(period);
            Spectrum s;
            if (oracle) {
                s = surrogate::surrogate_spectrum(shape, p);
            } else {
                auto model = load_simulator<float>(ckpt);
                model.freeze();
                s = model.simulate(shape, p);
            }
            auto j = spectrum_to_json(s);
            j["source"] = oracle ? "oracle" : "simulator";
            j["period_nm"] = p.nm();
            emit(j);
        } else if (*design_cmd) {
            auto gen = load_generator<float>(gen_path);
            gen.freeze();
            const auto target = target_from_json(read_json_file(target_path));
            const auto design_mode = parse_design_mode(mode);
            std::vector<DesignCandidate> ranked;
            if (target.contrast) {
                if (design_mode != DesignMode::encoded) throw ValueError("design: a contrast-vector target needs --mode encoded");
                ranked = design(gen, *target.contrast, seeds, seed);
            } else {
                ranked = design(gen, *target.spectrum, seeds, design_mode, seed);
            }
            fs::create_directories(out_dir);
            json cands = json::array();
            for (std::size_t r = 0; r < ranked.size(); ++r) {
                const auto& c = ranked[r];
                const std::string stem = (fs::path(out_dir) / ("rank" + std::to_string(r))).string();
                save_pgm(c.shape, stem + ".pgm");
                save_pgm(c.raw_shape, stem + "_raw.pgm");
                cands.push_back({{"rank", r}, {"seed_index", c.seed_index}, {"mse", c.mse}, {"period_nm", c.period.nm()},
                                 {"near_binarity", mean_manhattan_to_binary(c.raw_shape)},
                                 {"tm_minimum_nm", wavelength_nm(tm_minimum_index(c.spectrum))},
                                 {"contrast", c.contrast.values}, {"shape", stem + ".pgm"}, {"raw_shape", stem + "_raw.pgm"},
                                 {"spectrum", spectrum_to_json(c.spectrum)}});
            }
            json j{{"mode", target.contrast ? "encoded" : mode}, {"seeds", seeds}, {"seed", seed}, {"candidates", cands},
                   {"runtime_seconds", elapsed(t0)}};
            if (target.spectrum) j["target"] = target.spectrum->t;
            else j["target_contrast"] = target.contrast->values;
            write_json_file(j, (fs::path(out_dir) / "design.json").string());
            emit(j);
        } else if (*baseline) {
            const auto target = target_from_json(read_json_file(target_path));
            if (!target.spectrum) throw ValueError("baseline: target must be a spectrum");
            const auto best = baseline_traverse(load_dataset(data), *target.spectrum);
            auto j = describe(best.record);
            j["index"] = best.index;
            j["mse"] = best.mse;
            emit(j);
        } else if (*encode) {
            const auto c = contrast_vector(spectrum_from_json(read_json_file(spectrum_path)));
            emit({{"contrast", c.values}});
        } else if (*report) {
            const auto rep = dataset_report(load_dataset(data));
            write_text(out, rep.to_csv());
            auto j = rep.summary();
            j["csv"] = out;
            emit(j);
        }
    } catch (const Error& e) {
        std::cerr << json{{"error", {{"kind", e.kind()}, {"message", e.what()}}}}.dump() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", {{"kind", "error"}, {"message", e.what()}}}}.dump() << std::endl;
        return 1;
    }
    return 0;
}

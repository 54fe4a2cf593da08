// Command-line front end: dataset generation, training, sensitivity and
// spectra analysis, theory profiles, staged experiment runs, and preset
// figure reproductions.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "scalelab/harness.hpp"

namespace {

using namespace scalelab;

harness::ExperimentConfig load_config(const std::string& config_path, std::uint64_t* seed,
                                      const std::string& out_dir, bool plot) {
    harness::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = harness::parse_config_file(config_path);
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (plot) cfg.plot = true;
    return cfg;
}

int cmd_gen(const std::string& config_path, std::uint64_t* seed, const std::string& out) {
    auto cfg = load_config(config_path, seed, "", false);
    harness::validate_config(cfg);
    data::Dataset ds =
        cfg.task == 1
            ? data::gen_task1(cfg.length, cfg.xi, cfg.gap, cfg.examples, cfg.dim, cfg.seed)
            : data::gen_task2(cfg.length, static_cast<int>(cfg.xi), cfg.examples, cfg.dim, cfg.seed);
    if (cfg.train_count > 0)
        data::make_split_counts(ds, cfg.train_count, cfg.test_count,
                                rng::derive(cfg.seed, "resplit"));
    const std::filesystem::path path = out.empty() ? "dataset.jsonl" : out;
    data::save_jsonl(ds, path);
    std::printf("wrote %s (%zu examples, %zu train / %zu test)\n", path.string().c_str(),
                ds.examples.size(), ds.train_indices.size(), ds.test_indices.size());
    return 0;
}

int cmd_train(const std::string& config_path, std::uint64_t* seed, const std::string& out_dir,
              const std::string& data_path) {
    auto cfg = load_config(config_path, seed, out_dir, false);
    harness::validate_config(cfg);
    const std::filesystem::path out(cfg.out_dir);
    std::filesystem::create_directories(out);
    data::Dataset ds;
    if (!data_path.empty()) {
        ds = data::load_jsonl(data_path);
    } else {
        const auto data_seed = rng::derive(cfg.seed, "data");
        ds = cfg.task == 1 ? data::gen_task1(cfg.length, cfg.xi, cfg.gap, cfg.examples, cfg.dim,
                                             data_seed)
                           : data::gen_task2(cfg.length, static_cast<int>(cfg.xi), cfg.examples,
                                             cfg.dim, data_seed);
        if (cfg.train_count > 0)
            data::make_split_counts(ds, cfg.train_count, cfg.test_count,
                                    rng::derive(data_seed, "resplit"));
        data::save_jsonl(ds, out / "dataset.jsonl");
    }
    net::Network init = net::build_network(cfg.depth, cfg.channels, cfg.filter, cfg.stride,
                                           cfg.length, cfg.dim, rng::derive(cfg.seed, "init"));
    net::TrainConfig tc = cfg.train;
    tc.seed = rng::derive(cfg.seed, "train");
    auto result = net::train(init, ds, tc);
    net::save_checkpoint(result.network, out / "checkpoint.json");
    harness::detail::write_trainlog_csv(result.log, out / "trainlog.csv");
    harness::detail::write_testerr_csv(result.log, out / "test_error.csv");
    harness::detail::save_snapshots_json(result.log, out / "snapshots.json");
    std::printf("trained %ld epochs (interpolation %ld), train error %.4f, test error %.4f\n",
                result.log.epochs_run, result.log.interpolation_epoch,
                result.log.final_train_error, result.log.final_test_error);
    return 0;
}

int cmd_sens(const std::string& checkpoint, const std::string& data_path, const std::string& out,
             int inputs, int perturbations, bool raw_noise, std::uint64_t seed) {
    net::Network network = net::load_checkpoint(checkpoint);
    data::Dataset ds = data::load_jsonl(data_path);
    sens::SensitivityOptions opts;
    opts.n_inputs = inputs;
    opts.n_perturbs = perturbations;
    opts.rectified_noise = !raw_noise;
    opts.seed = seed;
    auto rep = sens::sensitivity_report(network, ds, opts);
    sens::save_report_csv(rep, out.empty() ? "sensitivity.csv" : out);
    std::printf("wrote %s\n", (out.empty() ? "sensitivity.csv" : out).c_str());
    return 0;
}

int cmd_theory(int filter, int length, int depth, int origin, int task, const std::string& out) {
    if (origin < 0) origin = length / 2;
    const auto measured = theory::circulant_power(length, filter, depth, origin);
    const auto predicted = theory::gaussian_profile(length, filter, depth, origin);
    const std::string path = out.empty() ? "profile.csv" : out;
    theory::save_profile_csv(measured, predicted, path);
    const auto params = theory::DiffusionParams::master_equation(filter);
    const auto table = theory::predicted_exponents(task);
    std::printf("wrote %s\n", path.c_str());
    std::printf("F=%d: diffusion %.6f px^2/layer, drift %.3f px/layer\n", filter, params.diffusion,
                params.drift);
    std::printf("task %d exponents: alpha_D=%g alpha_G=%g alpha_R=%g\n", task, table.alpha_D,
                table.alpha_G, table.alpha_R);
    return 0;
}

int cmd_spectra(const std::string& snapshots_path, int filter, const std::string& out) {
    auto snaps = harness::detail::load_snapshots_json(snapshots_path);
    if (snaps.empty()) throw parameter_error("spectra: empty snapshots file");
    const int F = filter > 0 ? filter : snaps.front().layers.front().filter_size;
    auto modes = spectra::grid_laplacian_modes(F, 1);
    auto trace = spectra::spectrum_evolution(snaps, modes);
    spectra::save_trace_csv(trace, out.empty() ? "spectra.csv" : out);
    std::printf("wrote %s\n", (out.empty() ? "spectra.csv" : out).c_str());
    return 0;
}

int cmd_run(const std::string& config_path, std::uint64_t* seed, const std::string& out_dir,
            bool plot) {
    auto cfg = load_config(config_path, seed, out_dir, plot);
    auto manifest = harness::run_experiment(cfg);
    std::printf("run complete: %zu files in %s\n", manifest.files.size(), cfg.out_dir.c_str());
    if (!manifest.summary.is_null())
        std::printf("summary: %s\n", manifest.summary.dump().c_str());
    return 0;
}

int cmd_repro(const std::string& name, std::uint64_t seed, const std::string& out_dir, bool plot) {
    auto manifest = harness::reproduce_figure(name, out_dir.empty() ? name : out_dir, seed, plot);
    std::printf("%s complete: %zu files\n", name.c_str(), manifest.files.size());
    if (!manifest.summary.is_null())
        std::printf("summary: %s\n", manifest.summary.dump().c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"scale-detection laboratory"};
    app.require_subcommand(1);

    std::string config_path, out, data_path, checkpoint, snapshots, figure;
    std::uint64_t seed = 0;
    bool seed_set = false, plot = false, raw_noise = false;
    int inputs = 256, perturbations = 16;
    int filter = 3, length = 1024, depth = 64, origin = -1, task = 1;
    int spectra_filter = 0;

    auto add_common = [&](CLI::App* cmd, bool with_out) {
        cmd->add_option("--config", config_path, "config file (key = value sections)");
        cmd->add_option("--seed", seed, "master seed")->each([&](const std::string&) { seed_set = true; });
        if (with_out) cmd->add_option("--out", out, "output path");
    };

    auto* gen = app.add_subcommand("gen", "generate a scale-detection dataset");
    add_common(gen, true);

    auto* train = app.add_subcommand("train", "train a network on a generated dataset");
    add_common(train, true);
    train->add_option("--data", data_path, "existing dataset.jsonl (skips generation)");

    auto* sens_cmd = app.add_subcommand("sens", "sensitivity report for a checkpoint");
    sens_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    sens_cmd->add_option("--data", data_path, "dataset.jsonl")->required();
    sens_cmd->add_option("--out", out, "output CSV");
    sens_cmd->add_option("--inputs", inputs, "test inputs sampled");
    sens_cmd->add_option("--perturbations", perturbations, "perturbations per input");
    sens_cmd->add_flag("--raw-noise", raw_noise, "inject raw (unrectified) noise");
    sens_cmd->add_option("--seed", seed, "sampling seed");

    auto* theory_cmd = app.add_subcommand("theory", "circulant vs Gaussian profile and exponents");
    theory_cmd->add_option("--filter", filter, "filter size F");
    theory_cmd->add_option("--length", length, "image size L");
    theory_cmd->add_option("--depth", depth, "layers k");
    theory_cmd->add_option("--origin", origin, "pixel origin (default L/2)");
    theory_cmd->add_option("--task", task, "task for the exponent table");
    theory_cmd->add_option("--out", out, "output CSV");

    auto* spectra_cmd = app.add_subcommand("spectra", "Laplacian-mode spectrum of snapshots");
    spectra_cmd->add_option("--snapshots", snapshots, "snapshots.json from train")->required();
    spectra_cmd->add_option("--filter", spectra_filter, "filter size (default: from snapshots)");
    spectra_cmd->add_option("--out", out, "output CSV");

    auto* run = app.add_subcommand("run", "full staged experiment from a config");
    add_common(run, true);
    run->add_flag("--plot", plot, "also write SVG plots");

    auto* repro = app.add_subcommand("repro", "preset figure reproduction");
    repro->add_option("name", figure, "fig7top | fig7bottom | fig5 | fig3bottom")->required();
    repro->add_option("--out", out, "output directory (default: figure name)");
    repro->add_option("--seed", seed, "master seed");
    repro->add_flag("--plot", plot, "also write SVG plots");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen(config_path, seed_set ? &seed : nullptr, out);
        if (train->parsed())
            return cmd_train(config_path, seed_set ? &seed : nullptr, out, data_path);
        if (sens_cmd->parsed())
            return cmd_sens(checkpoint, data_path, out, inputs, perturbations, raw_noise, seed);
        if (theory_cmd->parsed()) return cmd_theory(filter, length, depth, origin, task, out);
        if (spectra_cmd->parsed()) return cmd_spectra(snapshots, spectra_filter, out);
        if (run->parsed()) return cmd_run(config_path, seed_set ? &seed : nullptr, out, plot);
        if (repro->parsed()) return cmd_repro(figure, seed, out, plot);
    } catch (const scalelab::harness::stage_error& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}

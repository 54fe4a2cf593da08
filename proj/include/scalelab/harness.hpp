#pragma once

// Experiment orchestration: config parsing and validation, seeded staged
// runs (generate -> train/analytic -> sensitivities -> spectra -> fits),
// CSV/JSON emission, and preset figure-reproduction bundles.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "scalelab/common.hpp"
#include "scalelab/data.hpp"
#include "scalelab/ioutil.hpp"
#include "scalelab/net.hpp"
#include "scalelab/sensitivity.hpp"
#include "scalelab/spectra.hpp"
#include "scalelab/svg.hpp"
#include "scalelab/theory.hpp"
#include "scalelab/train.hpp"

namespace scalelab::harness {

struct ExperimentConfig {
    // [task]
    int task = 1;
    int length = 32;
    double xi = 11;
    double gap = 4;
    int dim = 1;
    int examples = 240;
    int train_count = -1; // -1: default 80/20 split
    int test_count = -1;
    // [arch]
    int depth = 8;
    int channels = 64;
    int filter = 3;
    int stride = 1;
    bool analytic = false; // homogeneous one-channel network, no training
    // [train]
    net::TrainConfig train;
    // [sensitivity]
    sens::SensitivityOptions sens_opts;
    // [output]
    std::string out_dir = "out";
    bool plot = false;
    // [run]
    std::uint64_t seed = 0;
};

inline void validate_config(const ExperimentConfig& cfg) {
    if (cfg.task != 1 && cfg.task != 2) throw parameter_error("config: task must be 1 or 2");
    if (cfg.dim != 1 && cfg.dim != 2) throw parameter_error("config: dim must be 1 or 2");
    if (cfg.length < 2) throw parameter_error("config: length must be >= 2");
    if (cfg.examples < 2) throw parameter_error("config: examples must be >= 2");
    if (cfg.task == 1) {
        if (cfg.gap <= 0) throw parameter_error("config: task 1 needs a positive gap");
        if (cfg.length < 2 * cfg.xi)
            throw parameter_error("config: xi exceeds half the image (need length >= 2*xi)");
        if (cfg.xi + cfg.gap / 2 > cfg.length / 2.0)
            throw parameter_error("config: xi + gap/2 exceeds the maximum pixel distance length/2");
    } else {
        const int xi = static_cast<int>(cfg.xi);
        if (xi != cfg.xi || xi < 2) throw parameter_error("config: task 2 xi must be an integer >= 2");
        if (cfg.length % xi != 0) throw parameter_error("config: task 2 xi must divide length");
    }
    if (cfg.depth < 1) throw parameter_error("config: depth must be >= 1");
    if (cfg.filter < 2) throw parameter_error("config: filter must be >= 2");
    if (cfg.stride != 1 && cfg.stride != cfg.filter)
        throw parameter_error("config: stride must be 1 or equal to the filter size");
    if (!cfg.analytic && cfg.channels < 1)
        throw parameter_error("config: channels must be >= 1");
    if (cfg.stride != 1) {
        long long span = 1;
        for (int k = 0; k < cfg.depth; ++k) {
            span *= cfg.filter;
            if (span > cfg.length) break;
        }
        if (span > cfg.length || cfg.length % span != 0)
            throw parameter_error("config: filter^depth must divide length for stride-F networks");
    }
    if (cfg.train_count == 0 || cfg.test_count == 0)
        throw parameter_error("config: split counts must be positive (or -1 for the default split)");
    if ((cfg.train_count > 0) != (cfg.test_count > 0))
        throw parameter_error("config: set both train_count and test_count or neither");
    if (cfg.train_count > 0 && cfg.train_count + cfg.test_count > cfg.examples)
        throw parameter_error("config: train_count + test_count exceeds examples");
    if (cfg.sens_opts.n_inputs < 2 || cfg.sens_opts.n_perturbs < 1)
        throw parameter_error("config: sensitivity sample counts must be positive");
    if (cfg.train.learning_rate < 0 || cfg.train.batch_size < 1 || cfg.train.weight_decay < 0 ||
        cfg.train.max_epochs < 1 || cfg.train.stop_factor <= 0)
        throw parameter_error("config: training parameters must be positive");
}

// --- flat key = value config files with [sections] --------------------------

namespace detail {

inline std::map<std::string, std::string> parse_ini(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::string section;
    std::size_t pos = 0;
    int lineno = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string_view line = io::trim(std::string_view(text).substr(pos, end - pos));
        pos = end + 1;
        ++lineno;
        if (line.empty() || line.front() == '#' || line.front() == ';') {
            if (pos > text.size()) break;
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']')
                throw parameter_error("config line " + std::to_string(lineno) + ": unterminated section");
            section = std::string(io::trim(line.substr(1, line.size() - 2)));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw parameter_error("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = std::string(io::trim(line.substr(0, eq)));
        std::string value = std::string(io::trim(line.substr(eq + 1)));
        kv[section.empty() ? key : section + "." + key] = value;
        if (pos > text.size()) break;
    }
    return kv;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw parameter_error("config: bad boolean for " + key + ": " + v);
}

} // namespace detail

inline ExperimentConfig parse_config_text(const std::string& text) {
    auto kv = detail::parse_ini(text);
    ExperimentConfig cfg;
    std::map<std::string, std::string> unused = kv;
    auto take = [&](const std::string& key) -> const std::string* {
        auto it = kv.find(key);
        if (it == kv.end()) return nullptr;
        unused.erase(key);
        return &it->second;
    };
    auto get_int = [&](const std::string& key, int& dst) {
        if (auto* v = take(key)) dst = std::stoi(*v);
    };
    auto get_long = [&](const std::string& key, long& dst) {
        if (auto* v = take(key)) dst = std::stol(*v);
    };
    auto get_u64 = [&](const std::string& key, std::uint64_t& dst) {
        if (auto* v = take(key)) dst = std::stoull(*v);
    };
    auto get_double = [&](const std::string& key, double& dst) {
        if (auto* v = take(key)) dst = std::stod(*v);
    };
    auto get_bool = [&](const std::string& key, bool& dst) {
        if (auto* v = take(key)) dst = detail::parse_bool(*v, key);
    };
    auto get_string = [&](const std::string& key, std::string& dst) {
        if (auto* v = take(key)) dst = *v;
    };

    get_int("task.type", cfg.task);
    get_int("task.length", cfg.length);
    get_double("task.xi", cfg.xi);
    get_double("task.gap", cfg.gap);
    get_int("task.dim", cfg.dim);
    get_int("task.examples", cfg.examples);
    get_int("task.train_count", cfg.train_count);
    get_int("task.test_count", cfg.test_count);
    get_int("arch.depth", cfg.depth);
    get_int("arch.channels", cfg.channels);
    get_int("arch.filter", cfg.filter);
    get_int("arch.stride", cfg.stride);
    get_bool("arch.analytic", cfg.analytic);
    get_double("train.learning_rate", cfg.train.learning_rate);
    get_int("train.batch", cfg.train.batch_size);
    get_double("train.weight_decay", cfg.train.weight_decay);
    get_long("train.max_epochs", cfg.train.max_epochs);
    get_double("train.stop_factor", cfg.train.stop_factor);
    get_int("sensitivity.inputs", cfg.sens_opts.n_inputs);
    get_int("sensitivity.perturbations", cfg.sens_opts.n_perturbs);
    get_bool("sensitivity.rectified_noise", cfg.sens_opts.rectified_noise);
    get_string("output.dir", cfg.out_dir);
    get_bool("output.plot", cfg.plot);
    get_u64("run.seed", cfg.seed);
    if (!unused.empty())
        throw parameter_error("config: unknown key: " + unused.begin()->first);
    return cfg;
}

inline ExperimentConfig parse_config_file(const std::filesystem::path& path) {
    return parse_config_text(io::read_file(path));
}

inline std::string canonical_config_text(const ExperimentConfig& c) {
    std::string s;
    s += "[task]\ntype = " + io::format_int(c.task) + "\nlength = " + io::format_int(c.length) +
         "\nxi = " + io::format_double(c.xi) + "\ngap = " + io::format_double(c.gap) +
         "\ndim = " + io::format_int(c.dim) + "\nexamples = " + io::format_int(c.examples) +
         "\ntrain_count = " + io::format_int(c.train_count) +
         "\ntest_count = " + io::format_int(c.test_count) + "\n";
    s += "[arch]\ndepth = " + io::format_int(c.depth) + "\nchannels = " + io::format_int(c.channels) +
         "\nfilter = " + io::format_int(c.filter) + "\nstride = " + io::format_int(c.stride) +
         "\nanalytic = " + std::string(c.analytic ? "true" : "false") + "\n";
    s += "[train]\nlearning_rate = " + io::format_double(c.train.learning_rate) +
         "\nbatch = " + io::format_int(c.train.batch_size) +
         "\nweight_decay = " + io::format_double(c.train.weight_decay) +
         "\nmax_epochs = " + io::format_int(c.train.max_epochs) +
         "\nstop_factor = " + io::format_double(c.train.stop_factor) + "\n";
    s += "[sensitivity]\ninputs = " + io::format_int(c.sens_opts.n_inputs) +
         "\nperturbations = " + io::format_int(c.sens_opts.n_perturbs) +
         "\nrectified_noise = " + std::string(c.sens_opts.rectified_noise ? "true" : "false") + "\n";
    s += "[output]\ndir = " + c.out_dir + "\nplot = " + std::string(c.plot ? "true" : "false") + "\n";
    s += "[run]\nseed = " + io::format_int(static_cast<long long>(c.seed)) + "\n";
    return s;
}

inline std::string config_hash(const ExperimentConfig& c) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(rng::fnv1a(canonical_config_text(c))));
    return std::string(buf);
}

// --- staged runs -------------------------------------------------------------

struct stage_error : std::runtime_error {
    std::string stage;
    stage_error(std::string st, const std::string& msg)
        : std::runtime_error("stage " + st + " failed: " + msg), stage(std::move(st)) {}
};

struct RunManifest {
    std::string config_hash;
    std::string code_version;
    std::vector<std::pair<std::string, std::uint64_t>> stage_seeds;
    std::vector<std::string> files;
    std::vector<std::pair<std::string, double>> stage_seconds;
    nlohmann::json summary;
};

inline void save_manifest(const RunManifest& m, const std::filesystem::path& path) {
    nlohmann::json j;
    j["config_hash"] = m.config_hash;
    j["code_version"] = m.code_version;
    auto& seeds = j["stage_seeds"];
    for (const auto& [k, v] : m.stage_seeds) seeds[k] = v;
    j["files"] = m.files;
    auto& secs = j["stage_seconds"];
    for (const auto& [k, v] : m.stage_seconds) secs[k] = v;
    io::write_file(path, j.dump(2));
}

namespace detail {

class StageTimer {
public:
    StageTimer(RunManifest& m, std::string name) : m_(m), name_(std::move(name)) {
        t0_ = std::chrono::steady_clock::now();
    }
    ~StageTimer() {
        const auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_);
        m_.stage_seconds.emplace_back(name_, dt.count());
    }

private:
    RunManifest& m_;
    std::string name_;
    std::chrono::steady_clock::time_point t0_;
};

template <class F>
auto run_stage(RunManifest& m, const std::string& name, F&& body) {
    StageTimer timer(m, name);
    try {
        return body();
    } catch (const std::exception& e) {
        throw stage_error(name, e.what());
    }
}

// First index k >= 1 whose A_k reaches the pre-asymptotic cutoff 2F.
inline int fit_window_start(const std::vector<sens::LayerStat>& layers, int filter) {
    for (std::size_t k = 1; k < layers.size(); ++k)
        if (layers[k].A >= 2.0 * filter) return static_cast<int>(k);
    return static_cast<int>(layers.size());
}

struct SlopeSummary {
    sens::SlopeFit D, G, R;
    int first = 0, last = 0;
    bool valid = false;
};

inline SlopeSummary fit_slopes(const sens::SensitivityReport& rep, int filter) {
    SlopeSummary s;
    const int K = static_cast<int>(rep.layers.size()) - 1;
    s.first = fit_window_start(rep.layers, filter);
    s.last = K;
    if (s.last - s.first + 1 < 3) return s;
    std::vector<double> A, D, G, R;
    for (int k = s.first; k <= s.last; ++k) {
        const auto& st = rep.layers[k];
        if (st.degenerate || !(st.A > 0) || !(st.D > 0) || !(st.G > 0) || !(st.R > 0)) return s;
        A.push_back(st.A);
        D.push_back(st.D);
        G.push_back(st.G);
        R.push_back(st.R);
    }
    const int last = static_cast<int>(A.size()) - 1;
    s.D = sens::loglog_slope(A, D, 0, last);
    s.G = sens::loglog_slope(A, G, 0, last);
    s.R = sens::loglog_slope(A, R, 0, last);
    s.valid = true;
    return s;
}

inline void write_trainlog_csv(const net::TrainLog& log, const std::filesystem::path& path) {
    io::CsvWriter csv({"epoch", "loss", "train_error"});
    for (std::size_t e = 0; e < log.epoch_loss.size(); ++e)
        csv.push_row({io::format_int(static_cast<long long>(e + 1)),
                      io::format_double(log.epoch_loss[e]),
                      io::format_double(log.epoch_train_error[e])});
    csv.save(path);
}

inline void write_testerr_csv(const net::TrainLog& log, const std::filesystem::path& path) {
    io::CsvWriter csv({"epoch", "test_error"});
    for (const auto& [epoch, err] : log.test_error_points)
        csv.push_row({io::format_int(epoch), io::format_double(err)});
    csv.save(path);
}

inline void save_snapshots_json(const net::TrainLog& log, const std::filesystem::path& path) {
    nlohmann::json j;
    j["format"] = "scalelab-snapshots-v1";
    auto& arr = j["snapshots"];
    arr = nlohmann::json::array();
    for (const auto& s : log.snapshots) {
        nlohmann::json js;
        js["epoch"] = s.epoch;
        auto& layers = js["layers"];
        layers = nlohmann::json::array();
        for (const auto& l : s.layers)
            layers.push_back(nlohmann::json{{"out", l.out_channels},
                                            {"in", l.in_channels},
                                            {"filter", l.filter_size},
                                            {"weights", l.weights}});
        arr.push_back(std::move(js));
    }
    io::write_file(path, j.dump());
}

inline std::vector<net::FilterSnapshot> load_snapshots_json(const std::filesystem::path& path) {
    nlohmann::json j = nlohmann::json::parse(io::read_file(path));
    if (j.value("format", "") != "scalelab-snapshots-v1")
        throw io_error("unrecognized snapshots format: " + path.string());
    std::vector<net::FilterSnapshot> out;
    for (const auto& js : j.at("snapshots")) {
        net::FilterSnapshot s;
        s.epoch = js.at("epoch").get<long>();
        for (const auto& l : js.at("layers"))
            s.layers.push_back({l.at("out").get<int>(), l.at("in").get<int>(),
                                l.at("filter").get<int>(),
                                l.at("weights").get<std::vector<double>>()});
        out.push_back(std::move(s));
    }
    return out;
}

inline void plot_sensitivities(const sens::SensitivityReport& rep, const SlopeSummary& fits,
                               const theory::ExponentTable& pred,
                               const std::filesystem::path& path) {
    auto series_for = [&](auto pick, double alpha, const std::string& label,
                          const std::string& color) {
        std::vector<svg::Series> out;
        svg::Series meas{label, color, false, {}, {}};
        for (const auto& st : rep.layers)
            if (st.A > 0 && pick(st) > 0) {
                meas.xs.push_back(st.A);
                meas.ys.push_back(pick(st));
            }
        out.push_back(meas);
        if (fits.valid && !meas.xs.empty()) {
            svg::Series line{label + " ~ A^" + io::format_double(alpha), "#444444", true, {}, {}};
            const double x0 = meas.xs.front(), y0 = meas.ys.front();
            for (double x : meas.xs) {
                line.xs.push_back(x);
                line.ys.push_back(y0 * std::pow(x / x0, alpha));
            }
            out.push_back(line);
        }
        return out;
    };
    std::vector<svg::Series> series;
    for (auto& s : series_for([](const sens::LayerStat& st) { return st.D; }, -pred.alpha_D, "D_k",
                              "#1f77b4"))
        series.push_back(std::move(s));
    for (auto& s : series_for([](const sens::LayerStat& st) { return st.G; }, pred.alpha_G, "G_k",
                              "#2ca02c"))
        series.push_back(std::move(s));
    for (auto& s : series_for([](const sens::LayerStat& st) { return st.R; }, -pred.alpha_R, "R_k",
                              "#d62728"))
        series.push_back(std::move(s));
    svg::write_loglog_plot(path, "sensitivities vs receptive field", "A_k", "sensitivity", series);
}

} // namespace detail

// Full in-memory products of a staged run, for callers that keep working
// with them (figure tables, acceptance checks).
struct RunArtifacts {
    RunManifest manifest;
    data::Dataset dataset;
    net::Network network;
    net::TrainLog trainlog;
    sens::SensitivityReport report;
};

inline RunArtifacts run_experiment_full(const ExperimentConfig& cfg) {
    validate_config(cfg);
    RunArtifacts artifacts;
    RunManifest& manifest = artifacts.manifest;
    manifest.config_hash = config_hash(cfg);
    manifest.code_version = version_string;
    const std::filesystem::path out(cfg.out_dir);
    std::filesystem::create_directories(out);

    const std::uint64_t data_seed = rng::derive(cfg.seed, "data");
    const std::uint64_t init_seed = rng::derive(cfg.seed, "init");
    const std::uint64_t train_seed = rng::derive(cfg.seed, "train");
    const std::uint64_t sens_seed = rng::derive(cfg.seed, "sens");
    manifest.stage_seeds = {{"data", data_seed},
                            {"init", init_seed},
                            {"train", train_seed},
                            {"sens", sens_seed}};

    auto emit = [&](const std::filesystem::path& p) { manifest.files.push_back(p.string()); };

    // generate
    data::Dataset& ds = artifacts.dataset;
    ds = detail::run_stage(manifest, "generate", [&] {
        data::Dataset d = cfg.task == 1
                              ? data::gen_task1(cfg.length, cfg.xi, cfg.gap, cfg.examples, cfg.dim,
                                                data_seed)
                              : data::gen_task2(cfg.length, static_cast<int>(cfg.xi), cfg.examples,
                                                cfg.dim, data_seed);
        if (cfg.train_count > 0)
            data::make_split_counts(d, cfg.train_count, cfg.test_count,
                                    rng::derive(data_seed, "resplit"));
        data::save_jsonl(d, out / "dataset.jsonl");
        return d;
    });
    emit(out / "dataset.jsonl");

    // train | analytic
    net::Network& network = artifacts.network;
    net::TrainLog& trainlog = artifacts.trainlog;
    const std::string model_stage = cfg.analytic ? "analytic" : "train";
    detail::run_stage(manifest, model_stage, [&] {
        if (cfg.analytic) {
            network = net::homogeneous_network(cfg.depth, cfg.filter, cfg.stride, cfg.length);
        } else {
            net::Network init =
                net::build_network(cfg.depth, cfg.channels, cfg.filter, cfg.stride, cfg.length,
                                   cfg.dim, init_seed);
            net::TrainConfig tc = cfg.train;
            tc.seed = train_seed;
            auto result = net::train(init, ds, tc);
            network = std::move(result.network);
            trainlog = std::move(result.log);
            detail::write_trainlog_csv(trainlog, out / "trainlog.csv");
            detail::write_testerr_csv(trainlog, out / "test_error.csv");
            detail::save_snapshots_json(trainlog, out / "snapshots.json");
        }
        net::save_checkpoint(network, out / "checkpoint.json");
        return 0;
    });
    emit(out / "checkpoint.json");
    if (!cfg.analytic) {
        emit(out / "trainlog.csv");
        emit(out / "test_error.csv");
        emit(out / "snapshots.json");
    }

    // sensitivities
    sens::SensitivityReport& report = artifacts.report;
    report = detail::run_stage(manifest, "sensitivity", [&] {
        sens::SensitivityOptions so = cfg.sens_opts;
        so.seed = sens_seed;
        auto rep = sens::sensitivity_report(network, ds, so);
        sens::save_report_csv(rep, out / "sensitivity.csv");
        return rep;
    });
    emit(out / "sensitivity.csv");

    // spectra
    detail::run_stage(manifest, "spectra", [&] {
        auto modes = spectra::grid_laplacian_modes(cfg.filter, 1);
        std::vector<net::FilterSnapshot> snaps;
        if (cfg.analytic) {
            net::FilterSnapshot s;
            s.epoch = 0;
            for (const auto& l : network.layers)
                s.layers.push_back({l.out_channels, l.in_channels, l.filter_size, l.weights});
            snaps.push_back(std::move(s));
        } else {
            snaps = trainlog.snapshots;
        }
        auto trace = spectra::spectrum_evolution(snaps, modes);
        spectra::save_trace_csv(trace, out / "spectra.csv");
        return 0;
    });
    emit(out / "spectra.csv");

    // fits
    detail::run_stage(manifest, "fits", [&] {
        const auto pred = theory::predicted_exponents(cfg.task);
        const auto fits = detail::fit_slopes(report, cfg.filter);
        nlohmann::json j;
        j["task"] = cfg.task;
        j["predicted"] = {{"alpha_D", pred.alpha_D}, {"alpha_G", pred.alpha_G}, {"alpha_R", pred.alpha_R}};
        if (fits.valid) {
            j["fitted"] = {{"slope_D", fits.D.slope}, {"r2_D", fits.D.r2},
                           {"slope_G", fits.G.slope}, {"r2_G", fits.G.r2},
                           {"slope_R", fits.R.slope}, {"r2_R", fits.R.r2},
                           {"window_first_layer", fits.first},
                           {"window_last_layer", fits.last}};
        } else {
            j["fitted"] = nullptr;
        }
        if (!cfg.analytic) {
            j["final_test_error"] = trainlog.final_test_error;
            j["final_train_error"] = trainlog.final_train_error;
            j["interpolation_epoch"] = trainlog.interpolation_epoch;
            j["epochs_run"] = trainlog.epochs_run;
        }
        manifest.summary = j;
        io::write_file(out / "summary.json", j.dump(2));
        if (cfg.plot) {
            detail::plot_sensitivities(report, fits, pred, out / "sensitivity.svg");
            manifest.files.push_back((out / "sensitivity.svg").string());
        }
        return 0;
    });
    emit(out / "summary.json");

    save_manifest(manifest, out / "manifest.json");
    return artifacts;
}

inline RunManifest run_experiment(const ExperimentConfig& cfg) {
    return run_experiment_full(cfg).manifest;
}

// --- figure presets ----------------------------------------------------------

inline ExperimentConfig preset_fig7top(const std::string& out_dir, std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.task = 1;
    cfg.length = 1024;
    cfg.xi = 256;
    cfg.gap = 8;
    cfg.examples = 1600;
    cfg.depth = 100;
    cfg.filter = 3;
    cfg.stride = 1;
    cfg.analytic = true;
    cfg.sens_opts.n_inputs = 256;
    cfg.sens_opts.n_perturbs = 16;
    cfg.out_dir = out_dir;
    cfg.seed = seed;
    return cfg;
}

inline ExperimentConfig preset_fig7bottom(const std::string& out_dir, std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.task = 2;
    cfg.length = 4096;
    cfg.xi = 1024;
    cfg.examples = 1600;
    cfg.depth = 10;
    cfg.filter = 2;
    cfg.stride = 2;
    cfg.analytic = true;
    cfg.sens_opts.n_inputs = 256;
    cfg.sens_opts.n_perturbs = 64; // stride-F boundary crossings are rare
    cfg.out_dir = out_dir;
    cfg.seed = seed;
    return cfg;
}

// Desk-scaled Appendix-B task-1 training run.
inline ExperimentConfig preset_trained_task1(const std::string& out_dir, std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.task = 1;
    cfg.length = 32;
    cfg.xi = 11;
    cfg.gap = 4;
    cfg.examples = 560;
    cfg.train_count = 48;
    cfg.test_count = 512;
    cfg.depth = 8;
    cfg.channels = 64;
    cfg.filter = 3;
    cfg.stride = 1;
    cfg.analytic = false;
    cfg.train.learning_rate = 0.01;
    cfg.train.batch_size = 8;
    cfg.train.weight_decay = 0.01;
    cfg.train.max_epochs = 100000;
    cfg.train.stop_factor = 500;
    cfg.out_dir = out_dir;
    cfg.seed = seed;
    return cfg;
}

struct EnsembleModel {
    int depth, channels;
    long max_epochs;
    double eps = 0, D = 0, G = 0, R = 0;
    long interpolation = -1;
};

// Trains a spread of architectures/budgets on task 1 and reports the
// correlation of log test error with log predictor sensitivities.
inline RunManifest reproduce_fig5(const std::string& out_dir, std::uint64_t seed, bool plot) {
    RunManifest manifest;
    manifest.code_version = version_string;
    const std::filesystem::path out(out_dir);
    std::filesystem::create_directories(out);

    std::vector<EnsembleModel> models = {
        {2, 8, 2000},  {3, 16, 3000}, {4, 16, 4000}, {4, 32, 4000},
        {6, 16, 3000}, {6, 32, 5000}, {8, 32, 3000}, {8, 64, 4000},
    };
    ExperimentConfig base = preset_trained_task1(out_dir, seed);
    manifest.config_hash = config_hash(base);

    detail::run_stage(manifest, "ensemble", [&] {
        for (std::size_t m = 0; m < models.size(); ++m) {
            auto& model = models[m];
            const std::uint64_t mseed = rng::derive(seed, 0x500 + static_cast<std::uint64_t>(m));
            data::Dataset ds = data::gen_task1(base.length, base.xi, base.gap, base.examples, 1,
                                               rng::derive(mseed, "data"));
            data::make_split_counts(ds, base.train_count, base.test_count,
                                    rng::derive(mseed, "resplit"));
            net::Network init = net::build_network(model.depth, model.channels, base.filter, 1,
                                                   base.length, 1, rng::derive(mseed, "init"));
            net::TrainConfig tc = base.train;
            tc.max_epochs = model.max_epochs;
            tc.seed = rng::derive(mseed, "train");
            auto result = net::train(init, ds, tc);
            sens::SensitivityOptions so;
            so.n_inputs = 256;
            so.n_perturbs = 16;
            so.seed = rng::derive(mseed, "sens");
            auto rep = sens::sensitivity_report(result.network, ds, so);
            // positive error floor of half a test count, so logs exist
            model.eps = std::max(result.log.final_test_error, 0.5 / base.test_count);
            model.D = rep.output.D;
            model.G = rep.output.G;
            model.R = rep.output.R;
            model.interpolation = result.log.interpolation_epoch;
        }
        return 0;
    });

    detail::run_stage(manifest, "fits", [&] {
        io::CsvWriter csv({"model", "depth", "channels", "max_epochs", "eps", "D_f", "G_f", "R_f",
                           "interpolation_epoch"});
        std::vector<double> eps, Df, Gf, Rf;
        for (std::size_t m = 0; m < models.size(); ++m) {
            const auto& mo = models[m];
            csv.push_row({io::format_int(static_cast<long long>(m)), io::format_int(mo.depth),
                          io::format_int(mo.channels), io::format_int(mo.max_epochs),
                          io::format_double(mo.eps), io::format_double(mo.D),
                          io::format_double(mo.G), io::format_double(mo.R),
                          io::format_int(mo.interpolation)});
            eps.push_back(mo.eps);
            Df.push_back(mo.D);
            Gf.push_back(mo.G);
            Rf.push_back(mo.R);
        }
        csv.save(out / "fig5_models.csv");
        manifest.files.push_back((out / "fig5_models.csv").string());
        nlohmann::json j;
        j["rho_D"] = sens::log_correlation(eps, Df);
        j["rho_G"] = sens::log_correlation(eps, Gf);
        j["rho_R"] = sens::log_correlation(eps, Rf);
        j["models"] = models.size();
        manifest.summary = j;
        io::write_file(out / "summary.json", j.dump(2));
        manifest.files.push_back((out / "summary.json").string());
        if (plot) {
            svg::Series sd{"D_f", "#1f77b4", false, Df, eps};
            svg::Series sg{"G_f", "#2ca02c", false, Gf, eps};
            svg::Series sr{"R_f", "#d62728", false, Rf, eps};
            svg::write_loglog_plot(out / "fig5.svg", "test error vs predictor sensitivity",
                                   "sensitivity", "test error", {sd, sg, sr});
            manifest.files.push_back((out / "fig5.svg").string());
        }
        return 0;
    });

    save_manifest(manifest, out / "manifest.json");
    return manifest;
}

// Writes per-exponent CSV tables (A_k, value, prediction line) next to the
// standard run outputs.
inline void write_figure_tables(const sens::SensitivityReport& rep, int task, int filter,
                                const std::filesystem::path& out, RunManifest& manifest) {
    const auto pred = theory::predicted_exponents(task);
    const int first = detail::fit_window_start(rep.layers, filter);
    struct Spec {
        const char* file;
        double alpha;
        double (*pick)(const sens::LayerStat&);
    };
    const Spec specs[] = {
        {"d_vs_a.csv", -pred.alpha_D, [](const sens::LayerStat& s) { return s.D; }},
        {"g_vs_a.csv", +pred.alpha_G, [](const sens::LayerStat& s) { return s.G; }},
        {"r_vs_a.csv", -pred.alpha_R, [](const sens::LayerStat& s) { return s.R; }},
    };
    for (const auto& sp : specs) {
        io::CsvWriter csv({"layer", "A_k", "value", "prediction"});
        double x0 = 0, y0 = 0;
        if (first < static_cast<int>(rep.layers.size())) {
            x0 = rep.layers[first].A;
            y0 = sp.pick(rep.layers[first]);
        }
        for (std::size_t k = 1; k < rep.layers.size(); ++k) {
            const auto& st = rep.layers[k];
            const double v = sp.pick(st);
            const double line = (x0 > 0 && st.A > 0) ? y0 * std::pow(st.A / x0, sp.alpha) : 0;
            csv.push_row({io::format_int(static_cast<long long>(k)), io::format_double(st.A),
                          io::format_double(v), io::format_double(line)});
        }
        csv.save(out / sp.file);
        manifest.files.push_back((out / sp.file).string());
    }
}

inline RunManifest reproduce_figure(const std::string& name, const std::string& out_dir,
                                    std::uint64_t seed, bool plot) {
    if (name == "fig7top" || name == "fig7bottom") {
        ExperimentConfig cfg =
            name == "fig7top" ? preset_fig7top(out_dir, seed) : preset_fig7bottom(out_dir, seed);
        cfg.plot = plot;
        RunArtifacts artifacts = run_experiment_full(cfg);
        write_figure_tables(artifacts.report, cfg.task, cfg.filter, out_dir, artifacts.manifest);
        save_manifest(artifacts.manifest, std::filesystem::path(out_dir) / "manifest.json");
        return artifacts.manifest;
    }
    if (name == "fig5") return reproduce_fig5(out_dir, seed, plot);
    if (name == "fig3bottom") {
        ExperimentConfig cfg = preset_trained_task1(out_dir, seed);
        cfg.plot = plot;
        return run_experiment(cfg);
    }
    throw parameter_error("reproduce_figure: unknown figure name: " + name);
}

} // namespace scalelab::harness

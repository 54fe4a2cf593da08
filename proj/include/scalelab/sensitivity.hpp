#pragma once

// Monte Carlo sensitivity estimation per layer: D_k for diffeomorphisms,
// G_k for magnitude-matched (by default rectified) Gaussian noise, and
// R_k = D_k / G_k, each normalized by the mean squared distance between
// representations of test-set pairs. Also the effective receptive field
// A_k, log-log slope fits, and the log-domain correlation coefficient.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "scalelab/common.hpp"
#include "scalelab/data.hpp"
#include "scalelab/ioutil.hpp"
#include "scalelab/net.hpp"
#include "scalelab/perturb.hpp"
#include "scalelab/rng.hpp"

namespace scalelab::sens {

struct LayerStat {
    double A = 0;
    double D = 0, D_se = 0;
    double G = 0, G_se = 0;
    double R = 0;
    bool degenerate = false;
};

struct SensitivityReport {
    std::vector<LayerStat> layers; // index k = 0 .. depth
    LayerStat output;              // readout predictor, when present
    bool has_output = false;
    int n_inputs = 0;
    int n_perturbs = 0;
    std::uint64_t seed = 0;
};

struct SensitivityOptions {
    int n_inputs = 256;
    int n_perturbs = 16;
    bool rectified_noise = true; // noise is ReLU-rectified before injection
    std::uint64_t seed = 0;
};

// Effective receptive field per level. Stride-1 networks: circular-aware
// standard deviation of the normalized channel-mean profile |f_k(probe)|,
// averaged over probes. Networks with stride F: the receptive field is the
// block size, A_k = F^k, directly.
inline std::vector<double> effective_receptive_field(const net::Network& network,
                                                     const std::vector<data::Input>& probes) {
    const int K = network.depth();
    std::vector<double> A(K + 1, 0.0);

    bool strided = false;
    for (const auto& l : network.layers)
        if (l.stride != 1) strided = true;
    if (strided) {
        double rf = 1;
        for (int k = 0; k <= K; ++k) {
            A[k] = rf;
            if (k < K) rf *= network.layers[k].stride;
        }
        return A;
    }

    if (probes.empty()) throw parameter_error("effective_receptive_field: no probes");
    std::vector<int> counted(K + 1, 0);
    net::Forwarder fwd(network);
    for (const auto& probe : probes) {
        if (static_cast<int>(probe.pixels.size()) != network.input_length)
            throw parameter_error("effective_receptive_field: probe size mismatch");
        fwd.run(probe.pixels);
        for (int k = 0; k <= K; ++k) {
            const int L = fwd.level_length(k);
            const int C = fwd.level_channels(k);
            auto lvl = fwd.level(k);
            std::vector<double> prof(L, 0.0);
            double mass = 0;
            for (int a = 0; a < L; ++a) {
                double m = 0;
                for (int c = 0; c < C; ++c) m += lvl[static_cast<std::size_t>(a) * C + c];
                prof[a] = std::abs(m / C);
                mass += prof[a];
            }
            if (mass <= 0) continue; // all-zero representation: skip probe
            int peak = 0;
            for (int a = 1; a < L; ++a)
                if (prof[a] > prof[peak]) peak = a;
            double mean = 0;
            for (int a = 0; a < L; ++a) {
                int off = a - peak;
                if (off > L / 2) off -= L;
                if (off < -(L / 2)) off += L;
                mean += prof[a] / mass * off;
            }
            double var = 0;
            for (int a = 0; a < L; ++a) {
                int off = a - peak;
                if (off > L / 2) off -= L;
                if (off < -(L / 2)) off += L;
                var += prof[a] / mass * (off - mean) * (off - mean);
            }
            A[k] += std::sqrt(var);
            ++counted[k];
        }
    }
    for (int k = 0; k <= K; ++k)
        A[k] = counted[k] ? A[k] / counted[k] : std::numeric_limits<double>::quiet_NaN();
    return A;
}

namespace detail {

struct Accumulator {
    double sum = 0, sumsq = 0;
    long n = 0;
    void add(double v) {
        sum += v;
        sumsq += v * v;
        ++n;
    }
    double mean() const { return n ? sum / n : 0; }
    double se() const {
        if (n < 2) return 0;
        const double m = mean();
        const double var = std::max(0.0, (sumsq / n - m * m) * n / (n - 1.0));
        return std::sqrt(var / n);
    }
};

inline double sq_distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

} // namespace detail

inline SensitivityReport sensitivity_report(const net::Network& network,
                                            const data::Dataset& testset,
                                            const SensitivityOptions& opts) {
    if (opts.n_inputs < 2) throw parameter_error("sensitivity_report: need n_inputs >= 2");
    if (opts.n_perturbs < 1) throw parameter_error("sensitivity_report: need n_perturbs >= 1");
    std::vector<int> pool = testset.test_indices;
    if (pool.empty()) {
        pool.resize(testset.examples.size());
        std::iota(pool.begin(), pool.end(), 0);
    }
    if (pool.empty()) throw parameter_error("sensitivity_report: empty test set");

    const int K = network.depth();
    const int n = opts.n_inputs;
    net::Forwarder base(network);
    net::Forwarder pert(network);

    std::vector<detail::Accumulator> numD(K + 1), numG(K + 1);
    detail::Accumulator numD_out, numG_out;
    std::vector<std::vector<double>> pair_s1(K + 1);
    std::vector<double> pair_s2(K + 1, 0.0);
    double out_s1 = 0, out_s2 = 0;
    for (int k = 0; k <= K; ++k)
        pair_s1[k].assign(static_cast<std::size_t>(network.level_length(k)) *
                              network.level_channels(k),
                          0.0);

    auto pick_rng = rng::make_engine(rng::derive(opts.seed, "inputs"));
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);

    for (int s = 0; s < n; ++s) {
        const data::Input& x = testset.examples[pool[pick(pick_rng)]].input;
        base.run(x.pixels);
        for (int k = 0; k <= K; ++k) {
            auto lvl = base.level(k);
            auto& s1 = pair_s1[k];
            double sq = 0;
            for (std::size_t i = 0; i < lvl.size(); ++i) {
                s1[i] += lvl[i];
                sq += lvl[i] * lvl[i];
            }
            pair_s2[k] += sq;
        }
        if (network.has_readout) {
            out_s1 += base.output();
            out_s2 += base.output() * base.output();
        }

        const std::uint64_t sseed = rng::derive(opts.seed, 0x10000u + static_cast<std::uint64_t>(s));
        for (int p = 0; p < opts.n_perturbs; ++p) {
            auto tau = perturb::diffeo(x, rng::derive(sseed, 2 * p));
            pert.run(tau.perturbed);
            for (int k = 0; k <= K; ++k)
                numD[k].add(detail::sq_distance(pert.level(k), base.level(k)));
            if (network.has_readout) {
                const double d = pert.output() - base.output();
                numD_out.add(d * d);
            }
            auto eta = perturb::matched_noise(x, opts.rectified_noise, rng::derive(sseed, 2 * p + 1));
            pert.run(eta.perturbed);
            for (int k = 0; k <= K; ++k)
                numG[k].add(detail::sq_distance(pert.level(k), base.level(k)));
            if (network.has_readout) {
                const double d = pert.output() - base.output();
                numG_out.add(d * d);
            }
        }
    }

    // Mean squared pair distance over all ordered pairs of the sampled
    // inputs: sum_{s != s'} |f_s - f_s'|^2 / (n(n-1)) = (2n S2 - 2|S1|^2) /
    // (n(n-1)), an unbiased estimate of E|f(x1)-f(x2)|^2 for iid draws.
    auto pair_mean = [&](int k) {
        double s1sq = 0;
        for (double v : pair_s1[k]) s1sq += v * v;
        return (2.0 * n * pair_s2[k] - 2.0 * s1sq) / (static_cast<double>(n) * (n - 1));
    };

    SensitivityReport rep;
    rep.n_inputs = opts.n_inputs;
    rep.n_perturbs = opts.n_perturbs;
    rep.seed = opts.seed;
    rep.layers.resize(K + 1);
    const std::vector<double> A = [&] {
        std::vector<data::Input> probes;
        const int L = network.input_length;
        const int n_probes = std::min(8, L);
        for (int q = 0; q < n_probes; ++q)
            probes.push_back(data::single_pixel(L, (L / n_probes) * q + L / (2 * n_probes), 1));
        return effective_receptive_field(network, probes);
    }();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int k = 0; k <= K; ++k) {
        LayerStat& st = rep.layers[k];
        st.A = A[k];
        const double den = pair_mean(k);
        if (!(den > 0)) {
            st.degenerate = true;
            st.D = st.G = st.R = st.D_se = st.G_se = nan;
            continue;
        }
        st.D = numD[k].mean() / den;
        st.D_se = numD[k].se() / den;
        st.G = numG[k].mean() / den;
        st.G_se = numG[k].se() / den;
        st.R = st.G > 0 ? st.D / st.G : nan;
        if (!(st.G > 0)) st.degenerate = true;
    }
    if (network.has_readout) {
        rep.has_output = true;
        const double den = (2.0 * n * out_s2 - 2.0 * out_s1 * out_s1) /
                           (static_cast<double>(n) * (n - 1));
        LayerStat& st = rep.output;
        st.A = nan;
        if (!(den > 0)) {
            st.degenerate = true;
            st.D = st.G = st.R = st.D_se = st.G_se = nan;
        } else {
            st.D = numD_out.mean() / den;
            st.D_se = numD_out.se() / den;
            st.G = numG_out.mean() / den;
            st.G_se = numG_out.se() / den;
            st.R = st.G > 0 ? st.D / st.G : nan;
        }
    }
    return rep;
}

inline SensitivityReport sensitivity_report(const net::Network& network,
                                            const data::Dataset& testset, int n_inputs,
                                            int n_perturbs, std::uint64_t seed) {
    SensitivityOptions opts;
    opts.n_inputs = n_inputs;
    opts.n_perturbs = n_perturbs;
    opts.seed = seed;
    return sensitivity_report(network, testset, opts);
}

// --- fits ------------------------------------------------------------------

struct SlopeFit {
    double slope = 0;
    double intercept = 0;
    double r2 = 0;
    int first = 0, last = 0; // inclusive index window
};

// Least-squares line through (log x, log y) over [first, last].
inline SlopeFit loglog_slope(std::span<const double> xs, std::span<const double> ys, int first,
                             int last) {
    if (xs.size() != ys.size()) throw parameter_error("loglog_slope: length mismatch");
    if (first < 0 || last >= static_cast<int>(xs.size()) || last - first + 1 < 3)
        throw parameter_error("loglog_slope: need at least 3 points in range");
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    const int m = last - first + 1;
    for (int i = first; i <= last; ++i) {
        if (!(xs[i] > 0) || !(ys[i] > 0))
            throw parameter_error("loglog_slope: values must be positive");
        const double lx = std::log(xs[i]), ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        syy += ly * ly;
    }
    const double vx = sxx - sx * sx / m;
    const double vy = syy - sy * sy / m;
    const double cxy = sxy - sx * sy / m;
    if (vx <= 0) throw parameter_error("loglog_slope: degenerate x range");
    SlopeFit fit;
    fit.slope = cxy / vx;
    fit.intercept = (sy - fit.slope * sx) / m;
    fit.r2 = vy > 0 ? (cxy * cxy) / (vx * vy) : 1.0;
    fit.first = first;
    fit.last = last;
    return fit;
}

// Pearson correlation of (log errors, log values); NaN when either side has
// zero variance.
inline double log_correlation(std::span<const double> errors, std::span<const double> values) {
    if (errors.size() != values.size() || errors.size() < 3)
        throw parameter_error("log_correlation: need matching lengths >= 3");
    const int m = static_cast<int>(errors.size());
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (int i = 0; i < m; ++i) {
        if (!(errors[i] > 0) || !(values[i] > 0))
            throw parameter_error("log_correlation: entries must be positive");
        const double lx = std::log(errors[i]), ly = std::log(values[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        syy += ly * ly;
        sxy += lx * ly;
    }
    const double vx = sxx - sx * sx / m;
    const double vy = syy - sy * sy / m;
    if (vx <= 0 || vy <= 0) return std::numeric_limits<double>::quiet_NaN();
    return (sxy - sx * sy / m) / std::sqrt(vx * vy);
}

// CSV rows: layer, A_k, D_k, D_k_se, G_k, G_k_se, R_k ("output" row last).
inline void save_report_csv(const SensitivityReport& rep, const std::filesystem::path& path) {
    io::CsvWriter csv({"layer", "A_k", "D_k", "D_k_se", "G_k", "G_k_se", "R_k"});
    auto row = [&](const std::string& name, const LayerStat& st) {
        csv.push_row({name, io::format_double(st.A), io::format_double(st.D),
                      io::format_double(st.D_se), io::format_double(st.G),
                      io::format_double(st.G_se), io::format_double(st.R)});
    };
    for (std::size_t k = 0; k < rep.layers.size(); ++k) row(io::format_int(static_cast<long long>(k)), rep.layers[k]);
    if (rep.has_output) row("output", rep.output);
    csv.save(path);
}

} // namespace scalelab::sens

#pragma once

// Frequency content of convolution filters: eigenmodes of the discrete
// Laplacian on the filter grid (free boundaries) and the mean squared filter
// projections gamma_{k,l} onto them, tracked across training snapshots.
//
// Path-graph eigenpairs are written in closed form,
//   lambda_m = 4 sin^2(pi m / 2F),  Psi_m(j) ~ cos(pi m (j + 1/2) / F),
// and the 2D grid modes are their tensor products. Degenerate eigenvalues
// are grouped and reported as per-eigenspace sums, which makes the output
// independent of the basis chosen inside each eigenspace.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "scalelab/common.hpp"
#include "scalelab/ioutil.hpp"
#include "scalelab/net.hpp"
#include "scalelab/train.hpp"

namespace scalelab::spectra {

struct LaplacianModes {
    int filter_size = 0;
    int dim = 1;
    std::vector<double> eigenvalues;               // ascending, size F^dim
    std::vector<std::vector<double>> eigenvectors; // unit norm, same order
    std::vector<std::vector<int>> eigenspaces;     // groups of mode indices
};

inline LaplacianModes grid_laplacian_modes(int F, int dim) {
    if (F < 2) throw parameter_error("grid_laplacian_modes: F must be >= 2");
    if (dim != 1 && dim != 2) throw parameter_error("grid_laplacian_modes: dim must be 1 or 2");

    std::vector<double> lam(F);
    std::vector<std::vector<double>> vec(F, std::vector<double>(F));
    for (int m = 0; m < F; ++m) {
        const double s = std::sin(std::numbers::pi * m / (2.0 * F));
        lam[m] = 4.0 * s * s;
        const double c = m == 0 ? std::sqrt(1.0 / F) : std::sqrt(2.0 / F);
        for (int j = 0; j < F; ++j)
            vec[m][j] = c * std::cos(std::numbers::pi * m * (j + 0.5) / F);
    }

    LaplacianModes modes;
    modes.filter_size = F;
    modes.dim = dim;
    if (dim == 1) {
        modes.eigenvalues = lam;
        modes.eigenvectors = vec;
    } else {
        struct Entry {
            double lambda;
            int m1, m2;
        };
        std::vector<Entry> entries;
        for (int m1 = 0; m1 < F; ++m1)
            for (int m2 = 0; m2 < F; ++m2) entries.push_back({lam[m1] + lam[m2], m1, m2});
        std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
            if (a.lambda != b.lambda) return a.lambda < b.lambda;
            if (a.m1 != b.m1) return a.m1 < b.m1;
            return a.m2 < b.m2;
        });
        for (const auto& e : entries) {
            modes.eigenvalues.push_back(e.lambda);
            std::vector<double> psi(static_cast<std::size_t>(F) * F);
            for (int r = 0; r < F; ++r)
                for (int c = 0; c < F; ++c)
                    psi[static_cast<std::size_t>(r) * F + c] = vec[e.m1][r] * vec[e.m2][c];
            modes.eigenvectors.push_back(std::move(psi));
        }
    }
    // group eigenvalues that agree to 1e-9
    for (std::size_t l = 0; l < modes.eigenvalues.size(); ++l) {
        if (l == 0 || modes.eigenvalues[l] - modes.eigenvalues[l - 1] > 1e-9)
            modes.eigenspaces.push_back({});
        modes.eigenspaces.back().push_back(static_cast<int>(l));
    }
    return modes;
}

// gamma per eigenspace: mean over (out, in) channel pairs of the squared
// projection (Psi_l . w)^2, summed over the eigenspace members.
inline std::vector<double> filter_spectrum(std::span<const double> weights, int out_channels,
                                           int in_channels, int filter_len,
                                           const LaplacianModes& modes) {
    const int tapcount = modes.dim == 1 ? modes.filter_size : modes.filter_size * modes.filter_size;
    if (filter_len != tapcount)
        throw parameter_error("filter_spectrum: filter size does not match the mode grid");
    if (weights.size() != static_cast<std::size_t>(out_channels) * in_channels * filter_len)
        throw parameter_error("filter_spectrum: weight count mismatch");

    const int pairs = out_channels * in_channels;
    std::vector<double> gamma_mode(modes.eigenvectors.size(), 0.0);
    for (int p = 0; p < pairs; ++p) {
        const double* w = weights.data() + static_cast<std::size_t>(p) * filter_len;
        for (std::size_t l = 0; l < modes.eigenvectors.size(); ++l) {
            double proj = 0;
            const auto& psi = modes.eigenvectors[l];
            for (int t = 0; t < filter_len; ++t) proj += psi[t] * w[t];
            gamma_mode[l] += proj * proj;
        }
    }
    std::vector<double> gamma(modes.eigenspaces.size(), 0.0);
    for (std::size_t e = 0; e < modes.eigenspaces.size(); ++e)
        for (int l : modes.eigenspaces[e]) gamma[e] += gamma_mode[l] / pairs;
    return gamma;
}

inline std::vector<double> filter_spectrum(const net::Network& network, int layer,
                                           const LaplacianModes& modes) {
    if (layer < 0 || layer >= network.depth())
        throw parameter_error("filter_spectrum: layer out of range");
    const auto& l = network.layers[layer];
    return filter_spectrum(l.weights, l.out_channels, l.in_channels, l.filter_size, modes);
}

struct SpectrumTrace {
    std::vector<long> epochs;
    std::vector<double> eigenvalues;                       // representative per eigenspace
    std::vector<std::vector<std::vector<double>>> gamma;   // [layer][space][time]
    std::vector<std::vector<std::vector<double>>> ratio;   // gamma(t) / gamma(0)
    std::vector<std::vector<char>> excluded;               // gamma(0) == 0
};

// Per-layer, per-eigenspace evolution of gamma relative to initialization.
// Requires the t = 0 snapshot first; eigenspaces with zero initial
// projection are excluded from ratios (flagged, ratio NaN).
inline SpectrumTrace spectrum_evolution(const std::vector<net::FilterSnapshot>& snapshots,
                                        const LaplacianModes& modes) {
    if (snapshots.empty() || snapshots.front().epoch != 0)
        throw parameter_error("spectrum_evolution: snapshots must start at epoch 0");
    const int layers = static_cast<int>(snapshots.front().layers.size());
    const int spaces = static_cast<int>(modes.eigenspaces.size());
    const int times = static_cast<int>(snapshots.size());

    SpectrumTrace tr;
    tr.epochs.reserve(times);
    for (const auto& s : snapshots) tr.epochs.push_back(s.epoch);
    for (const auto& group : modes.eigenspaces) tr.eigenvalues.push_back(modes.eigenvalues[group.front()]);
    tr.gamma.assign(layers, std::vector<std::vector<double>>(spaces, std::vector<double>(times, 0.0)));
    tr.ratio = tr.gamma;
    tr.excluded.assign(layers, std::vector<char>(spaces, 0));

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int t = 0; t < times; ++t) {
        const auto& snap = snapshots[t];
        if (static_cast<int>(snap.layers.size()) != layers)
            throw parameter_error("spectrum_evolution: snapshot layer count mismatch");
        for (int k = 0; k < layers; ++k) {
            const auto& lf = snap.layers[k];
            const auto g = filter_spectrum(lf.weights, lf.out_channels, lf.in_channels,
                                           lf.filter_size, modes);
            for (int e = 0; e < spaces; ++e) tr.gamma[k][e][t] = g[e];
        }
    }
    for (int k = 0; k < layers; ++k)
        for (int e = 0; e < spaces; ++e) {
            const double g0 = tr.gamma[k][e][0];
            if (!(g0 > 0)) {
                tr.excluded[k][e] = 1;
                for (int t = 0; t < times; ++t) tr.ratio[k][e][t] = nan;
            } else {
                for (int t = 0; t < times; ++t) tr.ratio[k][e][t] = tr.gamma[k][e][t] / g0;
            }
        }
    return tr;
}

// CSV rows: layer, eigenvalue, eigenspace-index, t, gamma, ratio.
inline void save_trace_csv(const SpectrumTrace& tr, const std::filesystem::path& path) {
    io::CsvWriter csv({"layer", "eigenvalue", "eigenspace", "t", "gamma", "ratio"});
    for (std::size_t k = 0; k < tr.gamma.size(); ++k)
        for (std::size_t e = 0; e < tr.gamma[k].size(); ++e)
            for (std::size_t t = 0; t < tr.epochs.size(); ++t)
                csv.push_row({io::format_int(static_cast<long long>(k + 1)),
                              io::format_double(tr.eigenvalues[e]),
                              io::format_int(static_cast<long long>(e)),
                              io::format_int(tr.epochs[t]),
                              io::format_double(tr.gamma[k][e][t]),
                              io::format_double(tr.ratio[k][e][t])});
    csv.save(path);
}

} // namespace scalelab::spectra

#pragma once

// Analytic oracles for receptive-field diffusion: circulant stochastic
// matrix powers (the random-walk master equation), their Gaussian
// asymptotics, and the predicted sensitivity scaling exponents.
//
// Conventions. A homogeneous stride-1 layer averages a patch of F pixels.
// The patch of output position a covers input positions a - F/2 .. a + F/2
// for odd F and a - F/2 .. a + F/2 - 1 for even F (one extra tap on the
// left), with circular boundary. Equivalently, one layer is one step of a
// random walk whose jump is uniform over F contiguous integers; for even F
// the jump set is asymmetric and the profile drifts by +1/2 pixel per step.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <vector>

#include "scalelab/common.hpp"
#include "scalelab/ioutil.hpp"

namespace scalelab::theory {

// Drift (pixels/layer) and diffusion coefficient (pixels^2/layer) of the
// profile evolution, with variance(k steps) = 2 * diffusion * k.
struct DiffusionParams {
    int filter_size = 3;
    double diffusion = 0;
    double drift = 0;

    // Exact per-step moments of the master equation. The jump is uniform
    // over F contiguous integers, so the variance is (F^2 - 1) / 12 for
    // either parity; odd F has zero mean, even F drifts by +1/2.
    static DiffusionParams master_equation(int F) {
        if (F < 2) throw parameter_error("DiffusionParams: F must be >= 2");
        DiffusionParams p;
        p.filter_size = F;
        p.diffusion = (static_cast<double>(F) * F - 1.0) / 24.0;
        p.drift = (F % 2 == 0) ? 0.5 : 0.0;
        return p;
    }

    // Closed-form continuum coefficients, D^(1) = (F-1)^3 / (12F) for odd F
    // and D^(2) = (F^3 - 3F^2 + 6F - 4) / (12F), v^(2) = (1-F) / (2F) for
    // even F. These replace the discrete jump moments by integrals over the
    // jump interval; they approach the exact moments only for large F and
    // are kept for reference and comparison plots.
    static DiffusionParams continuum_limit(int F) {
        if (F < 2) throw parameter_error("DiffusionParams: F must be >= 2");
        DiffusionParams p;
        p.filter_size = F;
        const double f = F;
        if (F % 2 == 1) {
            p.diffusion = (f - 1) * (f - 1) * (f - 1) / (12 * f);
            p.drift = 0.0;
        } else {
            p.diffusion = (f * f * f - 3 * f * f + 6 * f - 4) / (12 * f);
            p.drift = (f - 1) / (2 * f); // toward +infinity, see note above
        }
        return p;
    }
};

struct Profile {
    int length = 0; // L
    int depth = 0;  // k
    int origin = 0; // i
    std::vector<double> values;
};

// k applications of the homogeneous averaging step to delta_i, i.e. the
// column i of M^k for the circulant stochastic matrix M. Iterated kernel
// application, O(k L F).
inline Profile circulant_power(int L, int F, int k, int i) {
    if (F < 2 || L <= F) throw parameter_error("circulant_power: need L > F >= 2");
    if (k < 0) throw parameter_error("circulant_power: k must be >= 0");
    if (i < 0 || i >= L) throw parameter_error("circulant_power: origin out of bounds");
    Profile prof;
    prof.length = L;
    prof.depth = k;
    prof.origin = i;
    prof.values.assign(L, 0.0);
    prof.values[i] = 1.0;
    std::vector<double> next(L, 0.0);
    const int tap0 = -(F / 2);
    const double w = 1.0 / F;
    for (int step = 0; step < k; ++step) {
        for (int a = 0; a < L; ++a) {
            double acc = 0;
            for (int t = 0; t < F; ++t) {
                int j = a + tap0 + t;
                if (j < 0) j += L;
                else if (j >= L) j -= L;
                acc += prof.values[j];
            }
            next[a] = w * acc;
        }
        prof.values.swap(next);
    }
    return prof;
}

// Gaussian asymptotic profile, value(a) = exp(-(a - i - v k)^2 / (4 D k))
// / (2 sqrt(pi D k)), wrapped on the circle using the three nearest
// periodic images (tail truncation below 1e-12 in the tested regimes).
inline Profile gaussian_profile(int L, int F, int k, int i, const DiffusionParams& params) {
    if (k < 1) throw parameter_error("gaussian_profile: k must be >= 1");
    if (i < 0 || i >= L) throw parameter_error("gaussian_profile: origin out of bounds");
    Profile prof;
    prof.length = L;
    prof.depth = k;
    prof.origin = i;
    prof.values.assign(L, 0.0);
    const double var = 2.0 * params.diffusion * k;
    const double mean = i + params.drift * k;
    const double norm = 1.0 / (2.0 * std::sqrt(std::numbers::pi * params.diffusion * k));
    for (int a = 0; a < L; ++a) {
        double v = 0;
        for (int image = -1; image <= 1; ++image) {
            const double d = a + image * static_cast<double>(L) - mean;
            v += norm * std::exp(-d * d / (2.0 * var));
        }
        prof.values[a] = v;
    }
    return prof;
}

inline Profile gaussian_profile(int L, int F, int k, int i) {
    return gaussian_profile(L, F, k, i, DiffusionParams::master_equation(F));
}

// Circular-aware moments: positions are unwrapped around the profile peak.
inline double profile_mean_position(const Profile& p) {
    const int L = p.length;
    int peak = 0;
    for (int a = 1; a < L; ++a)
        if (p.values[a] > p.values[peak]) peak = a;
    double mass = 0, mean = 0;
    for (int a = 0; a < L; ++a) {
        int off = a - peak;
        if (off > L / 2) off -= L;
        if (off < -(L / 2)) off += L;
        mass += p.values[a];
        mean += p.values[a] * (peak + off);
    }
    if (mass <= 0) throw geometry_error("profile_mean_position: zero-mass profile");
    return mean / mass;
}

inline double profile_variance(const Profile& p) {
    const int L = p.length;
    const double mu = profile_mean_position(p);
    int peak = 0;
    for (int a = 1; a < L; ++a)
        if (p.values[a] > p.values[peak]) peak = a;
    double mass = 0, var = 0;
    for (int a = 0; a < L; ++a) {
        int off = a - peak;
        if (off > L / 2) off -= L;
        if (off < -(L / 2)) off += L;
        const double d = (peak + off) - mu;
        mass += p.values[a];
        var += p.values[a] * d * d;
    }
    return var / mass;
}

// Predicted exponents: D_k ~ A_k^{-alpha_D}, G_k ~ A_k^{+alpha_G},
// R_k ~ A_k^{-alpha_R}; task 1 is the stride-1 setting, task 2 stride F.
struct ExponentTable {
    int task = 1;
    double alpha_D = 0;
    double alpha_G = 0;
    double alpha_R = 0;
};

inline ExponentTable predicted_exponents(int task) {
    if (task == 1) return ExponentTable{1, 2.0, 1.0, 3.0};
    if (task == 2) return ExponentTable{2, 1.0, 1.0, 2.0};
    throw parameter_error("predicted_exponents: task must be 1 or 2");
}

// CSV rows: position, value, prediction.
inline void save_profile_csv(const Profile& measured, const Profile& predicted,
                             const std::filesystem::path& path) {
    if (measured.length != predicted.length)
        throw parameter_error("save_profile_csv: length mismatch");
    io::CsvWriter csv({"position", "value", "prediction"});
    for (int a = 0; a < measured.length; ++a)
        csv.push_row({io::format_int(a), io::format_double(measured.values[a]),
                      io::format_double(predicted.values[a])});
    csv.save(path);
}

} // namespace scalelab::theory

#pragma once

// Pixel-displacement diffeomorphisms and norm-matched Gaussian noise
// (optionally ReLU-rectified) for two-pixel inputs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "scalelab/common.hpp"
#include "scalelab/data.hpp"
#include "scalelab/rng.hpp"

namespace scalelab::perturb {

enum class Kind { diffeo, noise, rectified_noise };

struct PerturbationPair {
    data::Input original;
    std::vector<double> perturbed;
    Kind kind = Kind::diffeo;
    double displacement_norm = 0; // |perturbed - original|_2
    std::vector<data::Coord> moved; // diffeo only: new active positions
};

// Per-pixel noise variance matched to the diffeomorphism ensemble:
// both active pixels move by one step, each contributing pixel_count/2 to
// |tau(x) - x|^2, so E|tau(x)-x|^2 / pixel_count = 2 in 1D and 2D alike.
inline constexpr double matched_noise_variance = 2.0;

// Move each active pixel by exactly 1 in a uniformly random direction
// (2 directions in 1D, 4 axis neighbors in 2D). Moves that leave the array
// or land on the other pixel's occupied position are resampled; landing on
// a slot the first pixel just vacated is legal. Intensities are preserved.
inline PerturbationPair diffeo(const data::Input& x, std::uint64_t seed) {
    if (x.active.size() != 2) throw parameter_error("diffeo: input must have two active pixels");
    auto eng = rng::make_engine(rng::derive(seed, "diffeo"));

    const int L = x.length;
    const int dim = x.dim;
    std::vector<data::Coord> pos = {x.active[0], x.active[1]};

    auto in_bounds = [&](data::Coord c) {
        if (c.x < 0 || c.x >= L) return false;
        if (dim == 2 && (c.y < 0 || c.y >= L)) return false;
        return true;
    };

    const std::vector<data::Coord> steps_1d = {{-1, 0}, {+1, 0}};
    const std::vector<data::Coord> steps_2d = {{-1, 0}, {+1, 0}, {0, -1}, {0, +1}};
    const auto& steps = dim == 1 ? steps_1d : steps_2d;

    for (int p = 0; p < 2; ++p) {
        const data::Coord other = pos[1 - p];
        std::vector<data::Coord> legal;
        for (const auto& s : steps) {
            data::Coord t{pos[p].x + s.x, pos[p].y + s.y};
            if (in_bounds(t) && !(t == other)) legal.push_back(t);
        }
        if (legal.empty())
            throw geometry_error("diffeo: active pixel has no legal move");
        std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
        pos[p] = legal[pick(eng)];
    }

    PerturbationPair out;
    out.original = x;
    out.kind = Kind::diffeo;
    out.moved = pos;
    out.perturbed.assign(x.pixels.size(), 0.0);
    const double v = std::sqrt(x.pixel_count() / 2.0);
    out.perturbed[x.flat_index(pos[0])] += v;
    out.perturbed[x.flat_index(pos[1])] += v;
    double sq = 0;
    for (std::size_t i = 0; i < out.perturbed.size(); ++i) {
        const double d = out.perturbed[i] - x.pixels[i];
        sq += d * d;
    }
    out.displacement_norm = std::sqrt(sq);
    return out;
}

// x + eta with eta iid N(0, matched_noise_variance) per pixel; if rectified,
// x + max(0, eta) instead (noise pre-rectified before injection).
inline PerturbationPair matched_noise(const data::Input& x, bool rectified, std::uint64_t seed) {
    if (x.pixels.empty()) throw parameter_error("matched_noise: empty input");
    auto eng = rng::make_engine(rng::derive(seed, "noise"));
    std::normal_distribution<double> gauss(0.0, std::sqrt(matched_noise_variance));

    PerturbationPair out;
    out.original = x;
    out.kind = rectified ? Kind::rectified_noise : Kind::noise;
    out.perturbed.resize(x.pixels.size());
    double sq = 0;
    for (std::size_t i = 0; i < x.pixels.size(); ++i) {
        double eta = gauss(eng);
        if (rectified) eta = std::max(0.0, eta);
        out.perturbed[i] = x.pixels[i] + eta;
        sq += eta * eta;
    }
    out.displacement_norm = std::sqrt(sq);
    return out;
}

} // namespace scalelab::perturb

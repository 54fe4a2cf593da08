#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "scalelab/perturb.hpp"

using namespace scalelab;
using Catch::Approx;

TEST_CASE("diffeo moves both pixels by one step", "[perturb]") {
    auto x = data::two_pixel(32, 5, 15);
    auto pair = perturb::diffeo(x, 42);
    REQUIRE(pair.moved.size() == 2);
    for (int p = 0; p < 2; ++p)
        REQUIRE(std::abs(pair.moved[p].x - x.active[p].x) == 1);
    // disjoint moves: |tau(x) - x|^2 = 2L
    REQUIRE(pair.displacement_norm * pair.displacement_norm == Approx(64.0));
}

TEST_CASE("diffeo squared displacement is L or 2L", "[perturb]") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        auto x = data::two_pixel(16, 7, 8); // adjacent pair exercises collisions
        auto pair = perturb::diffeo(x, seed);
        const double sq = pair.displacement_norm * pair.displacement_norm;
        const bool disjoint =
            pair.moved[0].x != x.active[0].x && pair.moved[0].x != x.active[1].x &&
            pair.moved[1].x != x.active[0].x && pair.moved[1].x != x.active[1].x;
        if (disjoint)
            REQUIRE(sq == Approx(32.0));
        else
            REQUIRE((sq == Approx(32.0) || sq == Approx(16.0)));
        // intensities preserved
        std::vector<double> vals;
        for (double v : pair.perturbed)
            if (v != 0) vals.push_back(v);
        REQUIRE(vals == std::vector<double>{std::sqrt(8.0), std::sqrt(8.0)});
    }
}

TEST_CASE("boundary pixel always moves inward", "[perturb]") {
    for (std::uint64_t seed = 0; seed < 16; ++seed) {
        auto x = data::two_pixel(32, 0, 10);
        auto pair = perturb::diffeo(x, seed);
        REQUIRE(pair.moved[0].x == 1);
    }
}

TEST_CASE("diffeo with no legal move raises a geometry error", "[perturb]") {
    auto x = data::two_pixel(2, 0, 1);
    REQUIRE_THROWS_AS(perturb::diffeo(x, 0), geometry_error);
}

TEST_CASE("inverting the displacement restores the input", "[perturb]") {
    auto x = data::two_pixel(32, 9, 20);
    auto pair = perturb::diffeo(x, 3);
    std::vector<double> restored(x.pixels.size(), 0.0);
    const double v = std::sqrt(16.0);
    for (int p = 0; p < 2; ++p) {
        const int delta = pair.moved[p].x - x.active[p].x;
        restored[pair.moved[p].x - delta] += v;
    }
    REQUIRE(restored == x.pixels);
}

TEST_CASE("2D diffeo uses axis moves within bounds", "[perturb]") {
    auto x = data::two_pixel(8, data::Coord{0, 0}, data::Coord{4, 4}, 2);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto pair = perturb::diffeo(x, seed);
        for (int p = 0; p < 2; ++p) {
            const int dx = std::abs(pair.moved[p].x - x.active[p].x);
            const int dy = std::abs(pair.moved[p].y - x.active[p].y);
            REQUIRE(dx + dy == 1); // one axis step
            REQUIRE(std::max(dx, dy) <= 1);
            REQUIRE(pair.moved[p].x >= 0);
            REQUIRE(pair.moved[p].y >= 0);
        }
    }
}

TEST_CASE("matched noise magnitude matches the diffeo ensemble", "[perturb]") {
    // E|eta|^2 = 2L = 64 at L = 32; Monte Carlo within 3%
    auto x = data::two_pixel(32, 5, 15);
    double acc = 0;
    const int n = 10000;
    for (int s = 0; s < n; ++s) {
        auto pair = perturb::matched_noise(x, false, s);
        acc += pair.displacement_norm * pair.displacement_norm;
    }
    REQUIRE(acc / n == Approx(64.0).epsilon(0.03));
}

TEST_CASE("rectified noise is nonnegative with mean sigma/sqrt(2 pi)", "[perturb]") {
    auto x = data::two_pixel(32, 5, 15);
    double mean = 0;
    long count = 0;
    const int draws = 4000; // 4000 * 32 pixels > 1e5 samples
    for (int s = 0; s < draws; ++s) {
        auto pair = perturb::matched_noise(x, true, 900 + s);
        for (std::size_t i = 0; i < pair.perturbed.size(); ++i) {
            const double d = pair.perturbed[i] - x.pixels[i];
            REQUIRE(d >= 0.0);
            mean += d;
            ++count;
        }
    }
    mean /= count;
    const double expected = std::sqrt(2.0) / std::sqrt(2.0 * std::numbers::pi);
    REQUIRE(mean == Approx(expected).epsilon(0.03));
}

TEST_CASE("noise draws are seed-reproducible", "[perturb]") {
    auto x = data::two_pixel(32, 5, 15);
    auto a = perturb::matched_noise(x, false, 1234);
    auto b = perturb::matched_noise(x, false, 1234);
    REQUIRE(a.perturbed == b.perturbed);
    auto c = perturb::diffeo(x, 77);
    auto d = perturb::diffeo(x, 77);
    REQUIRE(c.perturbed == d.perturbed);
}

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <set>

#include "scalelab/data.hpp"

using namespace scalelab;
using Catch::Approx;

TEST_CASE("single pixel probes", "[data]") {
    auto in = data::single_pixel(4, 2);
    REQUIRE(in.pixels == std::vector<double>{0, 0, 1, 0});
    REQUIRE(in.active.size() == 1);
    REQUIRE_THROWS_AS(data::single_pixel(4, 7), parameter_error);
    REQUIRE_THROWS_AS(data::single_pixel(4, -1), parameter_error);
}

TEST_CASE("two-pixel inputs carry value sqrt(L/2)", "[data]") {
    auto in = data::two_pixel(32, 5, 15);
    int nonzero = 0;
    for (double v : in.pixels)
        if (v != 0) {
            REQUIRE(v == Approx(4.0)); // sqrt(32/2)
            ++nonzero;
        }
    REQUIRE(nonzero == 2);
    double sq = 0;
    for (double v : in.pixels) sq += v * v;
    REQUIRE(sq == Approx(32.0).epsilon(1e-9));

    auto in2 = data::two_pixel(8, data::Coord{1, 2}, data::Coord{5, 7}, 2);
    double sq2 = 0;
    for (double v : in2.pixels) sq2 += v * v;
    REQUIRE(sq2 == Approx(64.0).epsilon(1e-9));
}

TEST_CASE("task 1 labeling rule", "[data]") {
    // xi = 14: pixels at 5 and 15 -> d = 10 -> +1; at 2 and 22 -> d = 20 -> -1
    REQUIRE(data::pair_distance({5, 0}, {15, 0}, 1) == 10.0);
    REQUIRE(data::task1_label(14, 10) == +1);
    REQUIRE(data::pair_distance({2, 0}, {22, 0}, 1) == 20.0);
    REQUIRE(data::task1_label(14, 20) == -1);
}

TEST_CASE("task 2 labeling rule", "[data]") {
    REQUIRE(data::task2_label(4, {1, 0}, {3, 0}, 1) == +1); // both in [0,4)
    REQUIRE(data::task2_label(4, {3, 0}, {4, 0}, 1) == -1); // [0,4) vs [4,8)
}

TEST_CASE("gen_task1 is balanced and respects the gap band", "[data]") {
    auto ds = data::gen_task1(32, 14, 2, 1024, 1, 0);
    int plus = 0;
    for (const auto& ex : ds.examples) {
        if (ex.label == +1) ++plus;
        // label oracle recheck from coordinates
        const double d = data::pair_distance(ex.input.active[0], ex.input.active[1], 1);
        REQUIRE(d == ex.distance);
        REQUIRE(data::task1_label(14, d) == ex.label);
        // distances avoid the open band (xi - g/2, xi + g/2)
        REQUIRE((d <= 13.0 || d >= 15.0));
        REQUIRE(d <= 16.0); // capped at L/2
        double sq = 0;
        for (double v : ex.input.pixels) sq += v * v;
        REQUIRE(sq == Approx(32.0).epsilon(1e-9));
    }
    REQUIRE(plus == 512);
    REQUIRE(static_cast<int>(ds.examples.size()) - plus == 512);
}

TEST_CASE("gen_task1 parameter errors", "[data]") {
    REQUIRE_THROWS_AS(data::gen_task1(16, 14, 2, 10, 1, 0), parameter_error); // L < 2 xi
    REQUIRE_THROWS_AS(data::gen_task1(32, 15, 4, 10, 1, 0), parameter_error); // xi+g/2 > L/2
    REQUIRE_THROWS_AS(data::gen_task1(32, 1, 4, 10, 1, 0), parameter_error);  // no + distances
    REQUIRE_THROWS_AS(data::gen_task1(32, 14, 0, 10, 1, 0), parameter_error); // gap <= 0
}

TEST_CASE("gen_task1 determinism and seed separation", "[data]") {
    auto a = data::gen_task1(32, 14, 2, 128, 1, 7);
    auto b = data::gen_task1(32, 14, 2, 128, 1, 7);
    auto c = data::gen_task1(32, 14, 2, 128, 1, 8);
    REQUIRE(a.examples.size() == b.examples.size());
    bool identical_ab = true, identical_ac = true;
    for (std::size_t i = 0; i < a.examples.size(); ++i) {
        if (!(a.examples[i].input.active == b.examples[i].input.active)) identical_ab = false;
        if (!(a.examples[i].input.active == c.examples[i].input.active)) identical_ac = false;
    }
    REQUIRE(identical_ab);
    REQUIRE_FALSE(identical_ac);
}

TEST_CASE("gen_task2 matches the patch partition", "[data]") {
    auto ds = data::gen_task2(128, 32, 1024, 1, 0);
    int plus = 0;
    for (const auto& ex : ds.examples) {
        if (ex.label == +1) ++plus;
        REQUIRE(data::task2_label(32, ex.input.active[0], ex.input.active[1], 1) == ex.label);
        REQUIRE(ex.distance == (ex.label > 0 ? 1.0 : 0.0));
    }
    REQUIRE(plus == 512);
    REQUIRE_THROWS_AS(data::gen_task2(10, 3, 8, 1, 0), parameter_error);  // xi does not divide L
    REQUIRE_THROWS_AS(data::gen_task2(8, 8, 8, 1, 0), parameter_error);   // single patch
}

TEST_CASE("train/test split is disjoint and sized 80/20", "[data]") {
    auto ds = data::gen_task1(32, 14, 2, 200, 1, 3);
    REQUIRE(ds.train_indices.size() == 160);
    REQUIRE(ds.test_indices.size() == 40);
    std::set<int> seen(ds.train_indices.begin(), ds.train_indices.end());
    for (int i : ds.test_indices) REQUIRE(seen.count(i) == 0);

    data::make_split_counts(ds, 48, 100, 11);
    REQUIRE(ds.train_indices.size() == 48);
    REQUIRE(ds.test_indices.size() == 100);
    std::set<int> tr(ds.train_indices.begin(), ds.train_indices.end());
    for (int i : ds.test_indices) REQUIRE(tr.count(i) == 0);
}

TEST_CASE("2D generators label by euclidean distance and patches", "[data]") {
    auto ds = data::gen_task1(32, 8, 2, 64, 2, 5);
    for (const auto& ex : ds.examples) {
        const double d = data::pair_distance(ex.input.active[0], ex.input.active[1], 2);
        REQUIRE(d == Approx(ex.distance));
        REQUIRE(data::task1_label(8, d) == ex.label);
        REQUIRE((d <= 7.0 || d >= 9.0));
        double sq = 0;
        for (double v : ex.input.pixels) sq += v * v;
        REQUIRE(sq == Approx(32.0 * 32.0).epsilon(1e-9));
    }
    auto ds2 = data::gen_task2(16, 4, 64, 2, 5);
    for (const auto& ex : ds2.examples)
        REQUIRE(data::task2_label(4, ex.input.active[0], ex.input.active[1], 2) == ex.label);
}

TEST_CASE("dataset JSONL round trip", "[data]") {
    auto ds = data::gen_task1(32, 11, 4, 60, 1, 9);
    const auto path = std::filesystem::temp_directory_path() / "scalelab_test_dataset.jsonl";
    data::save_jsonl(ds, path);
    auto back = data::load_jsonl(path);
    REQUIRE(back.params.L == ds.params.L);
    REQUIRE(back.params.xi == ds.params.xi);
    REQUIRE(back.train_indices == ds.train_indices);
    REQUIRE(back.test_indices == ds.test_indices);
    REQUIRE(back.examples.size() == ds.examples.size());
    for (std::size_t i = 0; i < ds.examples.size(); ++i) {
        REQUIRE(back.examples[i].label == ds.examples[i].label);
        REQUIRE(back.examples[i].distance == ds.examples[i].distance);
        REQUIRE(back.examples[i].input.pixels == ds.examples[i].input.pixels);
    }
    std::filesystem::remove(path);
}

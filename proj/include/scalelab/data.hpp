#pragma once

// Scale-detection datasets: two-pixel inputs labeled by pixel distance
// (task 1) or shared-patch membership (task 2), plus single-pixel probes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "scalelab/common.hpp"
#include "scalelab/ioutil.hpp"
#include "scalelab/rng.hpp"

namespace scalelab::data {

struct Coord {
    int x = 0;
    int y = 0; // unused when dim == 1

    friend bool operator==(const Coord&, const Coord&) = default;
};

// A 1D (length L) or 2D (L x L, row-major) pixel array with one probe pixel
// or two active pixels of value sqrt(pixel_count / 2), so that for two-pixel
// inputs |x|^2 equals the pixel count.
struct Input {
    int length = 0; // L
    int dim = 1;    // 1 or 2
    std::vector<double> pixels;
    std::vector<Coord> active;

    int pixel_count() const { return dim == 1 ? length : length * length; }
    int flat_index(Coord c) const { return dim == 1 ? c.x : c.x * length + c.y; }
};

inline void check_coord(int L, int dim, Coord c, const char* who) {
    const bool ok_x = c.x >= 0 && c.x < L;
    const bool ok_y = dim == 1 ? c.y == 0 : (c.y >= 0 && c.y < L);
    if (!ok_x || !ok_y)
        throw parameter_error(std::string(who) + ": coordinate out of bounds");
}

// All-zero array with a single unit pixel at i.
inline Input single_pixel(int L, Coord i, int dim = 1) {
    if (L < 1 || (dim != 1 && dim != 2)) throw parameter_error("single_pixel: bad L or dim");
    check_coord(L, dim, i, "single_pixel");
    Input in;
    in.length = L;
    in.dim = dim;
    in.pixels.assign(dim == 1 ? L : L * L, 0.0);
    in.active = {i};
    in.pixels[in.flat_index(i)] = 1.0;
    return in;
}

inline Input single_pixel(int L, int i, int dim = 1) { return single_pixel(L, Coord{i, 0}, dim); }

// x = sqrt(pixel_count/2) * (delta_i + delta_j).
inline Input two_pixel(int L, Coord i, Coord j, int dim = 1) {
    if (L < 2 || (dim != 1 && dim != 2)) throw parameter_error("two_pixel: bad L or dim");
    check_coord(L, dim, i, "two_pixel");
    check_coord(L, dim, j, "two_pixel");
    if (i == j) throw parameter_error("two_pixel: active pixels must be distinct");
    Input in;
    in.length = L;
    in.dim = dim;
    in.pixels.assign(dim == 1 ? L : L * L, 0.0);
    in.active = {i, j};
    const double v = std::sqrt(in.pixel_count() / 2.0);
    in.pixels[in.flat_index(i)] = v;
    in.pixels[in.flat_index(j)] = v;
    return in;
}

inline Input two_pixel(int L, int i, int j, int dim = 1) {
    return two_pixel(L, Coord{i, 0}, Coord{j, 0}, dim);
}

// Euclidean distance between pixel coordinates (no wrap-around).
inline double pair_distance(Coord a, Coord b, int dim) {
    if (dim == 1) return std::abs(a.x - b.x);
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::hypot(dx, dy);
}

// Task 1 rule: y = sign(xi - d).
inline int task1_label(double xi, double d) { return xi > d ? +1 : -1; }

// Task 2 rule: +1 iff both pixels fall in the same side-xi patch of the
// fixed non-overlapping partition anchored at 0.
inline bool same_patch(int xi, Coord a, Coord b, int dim) {
    if (dim == 1) return a.x / xi == b.x / xi;
    return a.x / xi == b.x / xi && a.y / xi == b.y / xi;
}

inline int task2_label(int xi, Coord a, Coord b, int dim) {
    return same_patch(xi, a, b, dim) ? +1 : -1;
}

struct LabeledExample {
    Input input;
    int label = 0;    // +1 or -1
    double distance = 0; // task 1: pixel distance; task 2: same-patch flag (1/0)
};

struct DatasetParams {
    int task = 1;
    int L = 0;
    double xi = 0;
    double gap = 0; // task 1 only
    int dim = 1;
    int n = 0;
    std::uint64_t seed = 0;
};

struct Dataset {
    DatasetParams params;
    std::vector<LabeledExample> examples;
    std::vector<int> train_indices;
    std::vector<int> test_indices;
};

// Disjoint uniform train/test split.
inline void make_split(Dataset& ds, double train_fraction, std::uint64_t seed) {
    const int n = static_cast<int>(ds.examples.size());
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    auto eng = rng::make_engine(seed);
    std::shuffle(idx.begin(), idx.end(), eng);
    const int n_train = static_cast<int>(std::lround(train_fraction * n));
    ds.train_indices.assign(idx.begin(), idx.begin() + n_train);
    ds.test_indices.assign(idx.begin() + n_train, idx.end());
    std::sort(ds.train_indices.begin(), ds.train_indices.end());
    std::sort(ds.test_indices.begin(), ds.test_indices.end());
}

// Split with exact subset sizes (n_train + n_test <= n).
inline void make_split_counts(Dataset& ds, int n_train, int n_test, std::uint64_t seed) {
    const int n = static_cast<int>(ds.examples.size());
    if (n_train + n_test > n) throw parameter_error("make_split_counts: subsets exceed dataset size");
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    auto eng = rng::make_engine(seed);
    std::shuffle(idx.begin(), idx.end(), eng);
    ds.train_indices.assign(idx.begin(), idx.begin() + n_train);
    ds.test_indices.assign(idx.begin() + n_train, idx.begin() + n_train + n_test);
    std::sort(ds.train_indices.begin(), ds.train_indices.end());
    std::sort(ds.test_indices.begin(), ds.test_indices.end());
}

namespace detail {

// Feasible task-1 distances per class. Distances are capped at L/2 so that
// the straight-line metric of the labels agrees with the wrap-around
// separation seen by circular networks.
struct Task1Bands {
    int d_plus_max;   // positive class: d in [1, d_plus_max]
    int d_minus_min;  // negative class: d in [d_minus_min, d_max]
    int d_max;
};

inline Task1Bands task1_bands(int L, double xi, double gap) {
    Task1Bands b{};
    b.d_max = L / 2;
    b.d_plus_max = static_cast<int>(std::floor(xi - gap / 2 + 1e-12));
    b.d_minus_min = static_cast<int>(std::ceil(xi + gap / 2 - 1e-12));
    return b;
}

// Displacement vectors (canonical form) whose length falls in a task-1 class.
inline std::vector<Coord> feasible_offsets_2d(int L, double lo, double hi) {
    std::vector<Coord> out;
    const int m = L - 1;
    for (int dx = 0; dx <= m; ++dx)
        for (int dy = (dx == 0 ? 1 : -m); dy <= m; ++dy) {
            const double d = std::hypot(static_cast<double>(dx), static_cast<double>(dy));
            if (d >= lo && d <= hi && d <= L / 2.0) out.push_back(Coord{dx, dy});
        }
    return out;
}

} // namespace detail

// Task 1: two active pixels labeled by sign(xi - d); distances inside the
// open band (xi - g/2, xi + g/2) never occur. Labels alternate for exact
// class balance; the distance is drawn uniformly over the feasible values
// for the class, then the position uniformly over in-bounds placements.
inline Dataset gen_task1(int L, double xi, double gap, int n, int dim, std::uint64_t seed) {
    if (dim != 1 && dim != 2) throw parameter_error("gen_task1: dim must be 1 or 2");
    if (n < 1) throw parameter_error("gen_task1: n must be positive");
    if (gap <= 0) throw parameter_error("gen_task1: gap must be positive");
    if (L < 2 * xi) throw parameter_error("gen_task1: L must be at least 2*xi");
    const auto bands = detail::task1_bands(L, xi, gap);
    if (bands.d_plus_max < 1)
        throw parameter_error("gen_task1: no feasible positive-class distance (xi - gap/2 < 1)");
    if (bands.d_minus_min > bands.d_max)
        throw parameter_error("gen_task1: xi + gap/2 exceeds max distance L/2");

    Dataset ds;
    ds.params = DatasetParams{1, L, xi, gap, dim, n, seed};
    ds.examples.reserve(n);
    auto eng = rng::make_engine(rng::derive(seed, "task1"));

    std::vector<Coord> plus2d, minus2d;
    if (dim == 2) {
        plus2d = detail::feasible_offsets_2d(L, 0.5, xi - gap / 2);
        minus2d = detail::feasible_offsets_2d(L, xi + gap / 2, L / 2.0);
        if (plus2d.empty() || minus2d.empty())
            throw parameter_error("gen_task1: no feasible 2D displacement for one class");
    }

    for (int e = 0; e < n; ++e) {
        const int label = (e % 2 == 0) ? +1 : -1;
        if (dim == 1) {
            std::uniform_int_distribution<int> dist_d(
                label > 0 ? 1 : bands.d_minus_min,
                label > 0 ? bands.d_plus_max : bands.d_max);
            const int d = dist_d(eng);
            std::uniform_int_distribution<int> dist_i(0, L - 1 - d);
            const int i = dist_i(eng);
            Input in = two_pixel(L, i, i + d, 1);
            ds.examples.push_back({std::move(in), label, static_cast<double>(d)});
        } else {
            const auto& offs = label > 0 ? plus2d : minus2d;
            std::uniform_int_distribution<std::size_t> dist_v(0, offs.size() - 1);
            const Coord v = offs[dist_v(eng)];
            const int x_lo = std::max(0, -v.x), x_hi = L - 1 - std::max(0, v.x);
            const int y_lo = std::max(0, -v.y), y_hi = L - 1 - std::max(0, v.y);
            std::uniform_int_distribution<int> dist_x(x_lo, x_hi), dist_y(y_lo, y_hi);
            const Coord a{dist_x(eng), dist_y(eng)};
            const Coord b{a.x + v.x, a.y + v.y};
            Input in = two_pixel(L, a, b, 2);
            ds.examples.push_back({std::move(in), label, pair_distance(a, b, 2)});
        }
    }
    make_split(ds, 0.8, rng::derive(seed, "split"));
    return ds;
}

// Task 2: same-patch membership on the fixed grid of side-xi patches.
inline Dataset gen_task2(int L, int xi, int n, int dim, std::uint64_t seed) {
    if (dim != 1 && dim != 2) throw parameter_error("gen_task2: dim must be 1 or 2");
    if (n < 1) throw parameter_error("gen_task2: n must be positive");
    if (xi < 2) throw parameter_error("gen_task2: xi must be at least 2");
    if (xi >= L) throw parameter_error("gen_task2: need at least two patches (xi < L)");
    if (L % xi != 0) throw parameter_error("gen_task2: xi must divide L");

    Dataset ds;
    ds.params = DatasetParams{2, L, static_cast<double>(xi), 0.0, dim, n, seed};
    ds.examples.reserve(n);
    auto eng = rng::make_engine(rng::derive(seed, "task2"));
    const int patches_per_axis = L / xi;

    auto random_cell_in_patch = [&](Coord patch) {
        std::uniform_int_distribution<int> off(0, xi - 1);
        Coord c{patch.x * xi + off(eng), 0};
        if (dim == 2) c.y = patch.y * xi + off(eng);
        return c;
    };
    auto random_cell = [&]() {
        std::uniform_int_distribution<int> dist(0, L - 1);
        Coord c{dist(eng), 0};
        if (dim == 2) c.y = dist(eng);
        return c;
    };

    for (int e = 0; e < n; ++e) {
        const int label = (e % 2 == 0) ? +1 : -1;
        Coord a, b;
        if (label > 0) {
            std::uniform_int_distribution<int> pidx(0, patches_per_axis - 1);
            Coord patch{pidx(eng), dim == 2 ? pidx(eng) : 0};
            a = random_cell_in_patch(patch);
            do { b = random_cell_in_patch(patch); } while (b == a);
        } else {
            a = random_cell();
            do { b = random_cell(); } while (same_patch(xi, a, b, dim));
        }
        Input in = two_pixel(L, a, b, dim);
        ds.examples.push_back({std::move(in), label, label > 0 ? 1.0 : 0.0});
    }
    make_split(ds, 0.8, rng::derive(seed, "split"));
    return ds;
}

// --- JSON-lines serialization -------------------------------------------
// Header record carries the params and split; one record per example.

inline void save_jsonl(const Dataset& ds, const std::filesystem::path& path) {
    std::string text;
    nlohmann::json header{
        {"record", "header"},
        {"task", ds.params.task},
        {"L", ds.params.L},
        {"xi", ds.params.xi},
        {"gap", ds.params.gap},
        {"dim", ds.params.dim},
        {"n", ds.params.n},
        {"seed", ds.params.seed},
        {"train_indices", ds.train_indices},
        {"test_indices", ds.test_indices},
    };
    text += header.dump();
    text += '\n';
    for (const auto& ex : ds.examples) {
        nlohmann::json rec;
        auto& coords = rec["coords"];
        coords = nlohmann::json::array();
        for (const auto& c : ex.input.active) {
            if (ex.input.dim == 1)
                coords.push_back(c.x);
            else
                coords.push_back(nlohmann::json::array({c.x, c.y}));
        }
        rec["label"] = ex.label;
        rec["distance"] = ex.distance;
        text += rec.dump();
        text += '\n';
    }
    io::write_file(path, text);
}

inline Dataset load_jsonl(const std::filesystem::path& path) {
    const std::string text = io::read_file(path);
    Dataset ds;
    std::size_t pos = 0;
    bool have_header = false;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string_view line = io::trim(std::string_view(text).substr(pos, end - pos));
        pos = end + 1;
        if (line.empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line);
        if (!have_header) {
            if (rec.value("record", "") != "header")
                throw io_error("dataset file must start with a header record");
            ds.params.task = rec.at("task").get<int>();
            ds.params.L = rec.at("L").get<int>();
            ds.params.xi = rec.at("xi").get<double>();
            ds.params.gap = rec.at("gap").get<double>();
            ds.params.dim = rec.at("dim").get<int>();
            ds.params.n = rec.at("n").get<int>();
            ds.params.seed = rec.at("seed").get<std::uint64_t>();
            ds.train_indices = rec.at("train_indices").get<std::vector<int>>();
            ds.test_indices = rec.at("test_indices").get<std::vector<int>>();
            have_header = true;
            continue;
        }
        std::vector<Coord> coords;
        for (const auto& c : rec.at("coords")) {
            if (c.is_array())
                coords.push_back(Coord{c.at(0).get<int>(), c.at(1).get<int>()});
            else
                coords.push_back(Coord{c.get<int>(), 0});
        }
        if (coords.size() != 2) throw io_error("example record must list two coordinates");
        LabeledExample ex;
        ex.input = two_pixel(ds.params.L, coords[0], coords[1], ds.params.dim);
        ex.label = rec.at("label").get<int>();
        ex.distance = rec.at("distance").get<double>();
        ds.examples.push_back(std::move(ex));
    }
    if (!have_header) throw io_error("empty dataset file");
    return ds;
}

} // namespace scalelab::data

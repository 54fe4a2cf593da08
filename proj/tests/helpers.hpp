#pragma once

// Shared test oracles, independent of the library implementation paths they
// check: a dense Jacobi eigensolver, explicit graph Laplacians, and small
// numeric utilities.

#include <cmath>
#include <numeric>
#include <vector>

namespace testutil {

// Cyclic Jacobi eigensolver for small symmetric matrices (row-major n x n).
// Returns eigenvalues ascending; eigenvectors[i] matches eigenvalues[i].
struct EigenResult {
    std::vector<double> values;
    std::vector<std::vector<double>> vectors;
};

inline EigenResult jacobi_eigensolve(std::vector<double> a, int n) {
    std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * n + i] = 1.0;
    auto at = [&](std::vector<double>& m, int r, int c) -> double& {
        return m[static_cast<std::size_t>(r) * n + c];
    };
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += at(a, p, q) * at(a, p, q);
        if (off < 1e-26) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                const double apq = at(a, p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (at(a, q, q) - at(a, p, p)) / (2 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1));
                const double c = 1 / std::sqrt(t * t + 1), s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = at(a, k, p), akq = at(a, k, q);
                    at(a, k, p) = c * akp - s * akq;
                    at(a, k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = at(a, p, k), aqk = at(a, q, k);
                    at(a, p, k) = c * apk - s * aqk;
                    at(a, q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = at(v, k, p), vkq = at(v, k, q);
                    at(v, k, p) = c * vkp - s * vkq;
                    at(v, k, q) = s * vkp + c * vkq;
                }
            }
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) {
        return a[static_cast<std::size_t>(i) * n + i] < a[static_cast<std::size_t>(j) * n + j];
    });
    EigenResult res;
    for (int idx : order) {
        res.values.push_back(a[static_cast<std::size_t>(idx) * n + idx]);
        std::vector<double> col(n);
        for (int k = 0; k < n; ++k) col[k] = v[static_cast<std::size_t>(k) * n + idx];
        res.vectors.push_back(std::move(col));
    }
    return res;
}

// Graph Laplacian of the F-node path (free boundaries), row-major.
inline std::vector<double> path_laplacian(int F) {
    std::vector<double> m(static_cast<std::size_t>(F) * F, 0.0);
    for (int i = 0; i < F; ++i) {
        int deg = 0;
        if (i > 0) {
            m[static_cast<std::size_t>(i) * F + i - 1] = -1;
            ++deg;
        }
        if (i + 1 < F) {
            m[static_cast<std::size_t>(i) * F + i + 1] = -1;
            ++deg;
        }
        m[static_cast<std::size_t>(i) * F + i] = deg;
    }
    return m;
}

// Graph Laplacian of the F x F grid (free boundaries) over row-major nodes.
inline std::vector<double> grid_laplacian(int F) {
    const int n = F * F;
    std::vector<double> m(static_cast<std::size_t>(n) * n, 0.0);
    auto id = [F](int r, int c) { return r * F + c; };
    for (int r = 0; r < F; ++r)
        for (int c = 0; c < F; ++c) {
            int deg = 0;
            const int u = id(r, c);
            const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
            for (int q = 0; q < 4; ++q) {
                const int rr = r + dr[q], cc = c + dc[q];
                if (rr < 0 || rr >= F || cc < 0 || cc >= F) continue;
                m[static_cast<std::size_t>(u) * n + id(rr, cc)] = -1;
                ++deg;
            }
            m[static_cast<std::size_t>(u) * n + u] = deg;
        }
    return m;
}

inline double sq_norm(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return s;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace testutil

// Test-only oracles: independent computations the library results are
// checked against. Each deliberately takes the dumbest correct route
// (normal equations, full enumeration, brute-force scans) so a bug in the
// production path cannot hide in a shared implementation.
#pragma once
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "mobdrf/dataset.hpp"
#include "mobdrf/linmod.hpp"
#include "mobdrf/rng.hpp"
#include "mobdrf/stability.hpp"

namespace oracle {

// Gauss-Jordan solve of the normal equations X'X theta = X'y.
// Only valid for well-conditioned full-rank designs.
inline std::vector<double> normal_equations_ols(const mobdrf::Matrix& X,
                                                const std::vector<double>& y) {
    const std::size_t n = X.rows, k = X.cols;
    std::vector<std::vector<double>> aug(k, std::vector<double>(k + 1, 0.0));
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) acc += X(i, a) * X(i, b);
            aug[a][b] = acc;
        }
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += X(i, a) * y[i];
        aug[a][k] = acc;
    }
    for (std::size_t col = 0; col < k; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < k; ++r)
            if (std::abs(aug[r][col]) > std::abs(aug[pivot][col])) pivot = r;
        std::swap(aug[col], aug[pivot]);
        if (std::abs(aug[col][col]) < 1e-12)
            throw std::runtime_error("oracle: singular normal equations");
        const double d = aug[col][col];
        for (double& v : aug[col]) v /= d;
        for (std::size_t r = 0; r < k; ++r) {
            if (r == col) continue;
            const double f = aug[r][col];
            for (std::size_t c = 0; c <= k; ++c) aug[r][c] -= f * aug[col][c];
        }
    }
    std::vector<double> theta(k);
    for (std::size_t a = 0; a < k; ++a) theta[a] = aug[a][k];
    return theta;
}

inline double soft_threshold(double z, double g) {
    if (z > g) return z - g;
    if (z < -g) return z + g;
    return 0.0;
}

// Exact permutation p-value for the fluctuation statistic: enumerates every
// ordering of x with std::next_permutation and counts stat >= observed.
inline double exhaustive_permutation_p(const mobdrf::Matrix& scores,
                                       const mobdrf::SplitVarView& x, double trim) {
    const std::size_t n = x.size();
    const double observed = mobdrf::fluctuation_statistic(scores, x, trim);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t total = 0, ge = 0;
    do {
        mobdrf::SplitVarView pv;
        pv.categorical = x.categorical;
        pv.n_levels = x.n_levels;
        if (x.categorical) {
            pv.codes.resize(n);
            for (std::size_t i = 0; i < n; ++i) pv.codes[i] = x.codes[perm[i]];
        } else {
            pv.num.resize(n);
            for (std::size_t i = 0; i < n; ++i) pv.num[i] = x.num[perm[i]];
        }
        ++total;
        if (mobdrf::fluctuation_statistic(scores, pv, trim) >= observed) ++ge;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(ge) / static_cast<double>(total);
}

// Best single split threshold on step data, by direct SSE over every midpoint.
inline double cart_threshold_scan(const std::vector<double>& x,
                                  const std::vector<double>& y,
                                  std::size_t min_node) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    double best_sse = std::numeric_limits<double>::infinity();
    double best_thr = 0.0;
    for (std::size_t cut = 1; cut < x.size(); ++cut) {
        if (x[order[cut - 1]] == x[order[cut]]) continue;
        if (cut < min_node || x.size() - cut < min_node) continue;
        double suml = 0, sumr = 0;
        for (std::size_t i = 0; i < cut; ++i) suml += y[order[i]];
        for (std::size_t i = cut; i < x.size(); ++i) sumr += y[order[i]];
        const double ml = suml / static_cast<double>(cut);
        const double mr = sumr / static_cast<double>(x.size() - cut);
        double sse = 0;
        for (std::size_t i = 0; i < cut; ++i) sse += (y[order[i]] - ml) * (y[order[i]] - ml);
        for (std::size_t i = cut; i < x.size(); ++i)
            sse += (y[order[i]] - mr) * (y[order[i]] - mr);
        if (sse < best_sse) {
            best_sse = sse;
            best_thr = x[order[cut - 1]] + (x[order[cut]] - x[order[cut - 1]]) / 2.0;
        }
    }
    return best_thr;
}

// small builders ------------------------------------------------------------

inline mobdrf::Dataset make_dataset(std::vector<mobdrf::Column> cols,
                                    std::vector<mobdrf::Role> roles) {
    return mobdrf::Dataset(std::move(cols), std::move(roles));
}

// p numeric partitioning columns, q numeric regression columns, target y
inline mobdrf::Dataset simple_dataset(const std::vector<std::vector<double>>& x,
                                      const std::vector<std::vector<double>>& z,
                                      std::vector<double> y) {
    std::vector<mobdrf::Column> cols;
    std::vector<mobdrf::Role> roles;
    for (std::size_t j = 0; j < x.size(); ++j) {
        cols.push_back(mobdrf::Column::numeric("x" + std::to_string(j + 1), x[j]));
        roles.push_back(mobdrf::Role::Partitioning);
    }
    for (std::size_t j = 0; j < z.size(); ++j) {
        cols.push_back(mobdrf::Column::numeric("z" + std::to_string(j + 1), z[j]));
        roles.push_back(mobdrf::Role::Regression);
    }
    cols.push_back(mobdrf::Column::numeric("y", std::move(y)));
    roles.push_back(mobdrf::Role::Target);
    return make_dataset(std::move(cols), std::move(roles));
}

inline std::vector<std::size_t> all_rows(const mobdrf::Dataset& ds) {
    std::vector<std::size_t> rows(ds.n_rows());
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

} // namespace oracle

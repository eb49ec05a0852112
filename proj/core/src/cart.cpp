#include "mobdrf/cart.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mobdrf {

CartTree CartTree::from_parts(std::vector<CartNode> nodes) {
    CartTree t;
    t.nodes_ = std::move(nodes);
    for (const CartNode& n : t.nodes_)
        if (n.is_leaf()) ++t.n_leaves_;
    return t;
}

namespace {

bool cart_goes_left(const SplitCondition& cond, const Dataset& ds, std::size_t row) {
    const Column& c = ds.col(cond.variable);
    if (!cond.categorical) return c.num[row] <= cond.threshold;
    const std::string& level = c.level_of(row);
    return std::find(cond.left_levels.begin(), cond.left_levels.end(), level) !=
           cond.left_levels.end();
}

} // namespace

double CartTree::predict_row(const Dataset& ds, std::size_t row) const {
    int node = 0;
    while (!nodes_[static_cast<std::size_t>(node)].is_leaf()) {
        const CartNode& nd = nodes_[static_cast<std::size_t>(node)];
        node = cart_goes_left(nd.cond, ds, row) ? nd.left : nd.right;
    }
    return nodes_[static_cast<std::size_t>(node)].value;
}

std::vector<double> CartTree::predict(const Dataset& ds) const {
    std::vector<double> out(ds.n_rows());
    for (std::size_t r = 0; r < ds.n_rows(); ++r) out[r] = predict_row(ds, r);
    return out;
}

namespace {

struct CartSplit {
    SplitCondition cond;
    std::vector<std::size_t> left, right;
    double total_sse = std::numeric_limits<double>::infinity();
    bool found = false;
};

double sse_of(std::span<const double> y, std::span<const std::size_t> rows) {
    double sum = 0.0;
    for (std::size_t r : rows) sum += y[r];
    const double mean = sum / static_cast<double>(rows.size());
    double sse = 0.0;
    for (std::size_t r : rows) {
        const double d = y[r] - mean;
        sse += d * d;
    }
    return sse;
}

// best threshold on one numeric column via a sorted prefix scan
void scan_numeric(const Column& col, std::span<const std::size_t> rows,
                  std::span<const double> y, std::size_t min_node, CartSplit& best) {
    std::vector<std::size_t> sorted(rows.begin(), rows.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [&](std::size_t a, std::size_t b) { return col.num[a] < col.num[b]; });
    const std::size_t n = sorted.size();
    double total = 0.0, total2 = 0.0;
    for (std::size_t r : sorted) {
        total += y[r];
        total2 += y[r] * y[r];
    }
    double acc = 0.0, acc2 = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t r = sorted[i];
        acc += y[r];
        acc2 += y[r] * y[r];
        if (col.num[sorted[i]] == col.num[sorted[i + 1]]) continue;  // not a boundary
        const std::size_t nl = i + 1, nr = n - nl;
        if (nl < min_node || nr < min_node) continue;
        const double sl = acc2 - acc * acc / static_cast<double>(nl);
        const double sr = (total2 - acc2) - (total - acc) * (total - acc) / static_cast<double>(nr);
        const double sse = sl + sr;
        if (sse < best.total_sse) {
            const double thr = col.num[sorted[i]] + (col.num[sorted[i + 1]] - col.num[sorted[i]]) / 2.0;
            best.found = true;
            best.total_sse = sse;
            best.cond = SplitCondition{col.name, false, thr, {}, {}};
            best.left.assign(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(nl));
            best.right.assign(sorted.begin() + static_cast<std::ptrdiff_t>(nl), sorted.end());
        }
    }
}

// levels ordered by mean target, prefix splits (exact for squared error)
void scan_categorical(const Column& col, std::span<const std::size_t> rows,
                      std::span<const double> y, std::size_t min_node, CartSplit& best) {
    const std::size_t L = col.levels.size();
    std::vector<double> sum(L, 0.0);
    std::vector<std::size_t> count(L, 0);
    for (std::size_t r : rows) {
        const auto lvl = static_cast<std::size_t>(col.codes[r]);
        sum[lvl] += y[r];
        ++count[lvl];
    }
    std::vector<std::size_t> observed;
    for (std::size_t l = 0; l < L; ++l)
        if (count[l] > 0) observed.push_back(l);
    if (observed.size() < 2) return;
    std::stable_sort(observed.begin(), observed.end(), [&](std::size_t a, std::size_t b) {
        return sum[a] / static_cast<double>(count[a]) < sum[b] / static_cast<double>(count[b]);
    });
    for (std::size_t cut = 1; cut < observed.size(); ++cut) {
        std::vector<bool> in_left(L, false);
        for (std::size_t i = 0; i < cut; ++i) in_left[observed[i]] = true;
        std::vector<std::size_t> left, right;
        for (std::size_t r : rows)
            (in_left[static_cast<std::size_t>(col.codes[r])] ? left : right).push_back(r);
        if (left.size() < min_node || right.size() < min_node) continue;
        const double sse = sse_of(y, left) + sse_of(y, right);
        if (sse < best.total_sse) {
            SplitCondition cond{col.name, true, 0.0, {}, {}};
            for (std::size_t l = 0; l < L; ++l) {
                if (in_left[l])
                    cond.left_levels.push_back(col.levels[l]);
                else
                    cond.right_levels.push_back(col.levels[l]);
            }
            best.found = true;
            best.total_sse = sse;
            best.cond = std::move(cond);
            best.left = std::move(left);
            best.right = std::move(right);
        }
    }
}

struct CartGrower {
    const Dataset& ds;
    const CartConfig& cfg;
    std::vector<std::size_t> feature_cols;
    double root_sse = 0.0;
    std::vector<CartNode> nodes;

    int build(std::vector<std::size_t> rows, int depth) {
        const std::vector<double>& y = ds.target();
        double sum = 0.0;
        for (std::size_t r : rows) sum += y[r];
        const double mean = sum / static_cast<double>(rows.size());
        double node_sse = 0.0;
        for (std::size_t r : rows) {
            const double d = y[r] - mean;
            node_sse += d * d;
        }

        const auto make_leaf = [&]() {
            CartNode leaf;
            leaf.value = mean;
            leaf.n_rows = rows.size();
            nodes.push_back(std::move(leaf));
            return static_cast<int>(nodes.size() - 1);
        };

        if (cfg.max_depth >= 0 && depth >= cfg.max_depth) return make_leaf();
        if (rows.size() < 2 * cfg.min_node_size || rows.size() < 2) return make_leaf();
        if (node_sse <= 0.0) return make_leaf();

        CartSplit best;
        for (std::size_t ci : feature_cols) {
            const Column& col = ds.col(ci);
            if (col.kind == ColumnKind::Numeric)
                scan_numeric(col, rows, y, cfg.min_node_size, best);
            else
                scan_categorical(col, rows, y, cfg.min_node_size, best);
        }
        if (!best.found) return make_leaf();
        // rpart-style complexity gate, relative to the root deviance
        const double reduction = node_sse - best.total_sse;
        if (!(reduction > cfg.cp * root_sse)) return make_leaf();

        CartNode internal;
        internal.cond = std::move(best.cond);
        internal.n_rows = rows.size();
        const auto self = static_cast<int>(nodes.size());
        nodes.push_back(std::move(internal));
        rows.clear();
        rows.shrink_to_fit();
        const int left = build(std::move(best.left), depth + 1);
        const int right = build(std::move(best.right), depth + 1);
        nodes[static_cast<std::size_t>(self)].left = left;
        nodes[static_cast<std::size_t>(self)].right = right;
        return self;
    }
};

} // namespace

CartTree grow_cart(const Dataset& ds, std::span<const std::size_t> rows,
                   const CartConfig& cfg) {
    if (rows.size() < std::max<std::size_t>(cfg.min_node_size, 1))
        throw DataError("grow_cart: too few rows");
    CartGrower g{ds, cfg, {}, 0.0, {}};
    for (std::size_t i = 0; i < ds.n_cols(); ++i)
        if (ds.role(i) == Role::Partitioning || ds.role(i) == Role::Regression)
            g.feature_cols.push_back(i);
    const std::vector<double>& y = ds.target();
    g.root_sse = sse_of(y, rows);
    std::vector<std::size_t> row_vec(rows.begin(), rows.end());
    g.build(std::move(row_vec), 0);
    return CartTree::from_parts(std::move(g.nodes));
}

} // namespace mobdrf

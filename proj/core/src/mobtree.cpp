#include "mobdrf/mobtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mobdrf/rng.hpp"

namespace mobdrf {

// ---------------------------------------------------------------------------
// MobTree
// ---------------------------------------------------------------------------

MobTree MobTree::from_parts(std::vector<MobNode> nodes, DesignInfo design,
                            std::string target) {
    MobTree t;
    t.nodes_ = std::move(nodes);
    t.design_ = std::move(design);
    t.target_ = std::move(target);
    for (const MobNode& n : t.nodes_)
        if (n.is_leaf()) ++t.n_leaves_;
    return t;
}

namespace {

bool goes_left(const SplitCondition& cond, const Dataset& ds, std::size_t row) {
    const Column& c = ds.col(cond.variable);
    if (!cond.categorical) {
        if (c.kind != ColumnKind::Numeric)
            throw DataError("split on '" + cond.variable + "': expected a numeric column");
        return c.num[row] <= cond.threshold;
    }
    if (c.kind != ColumnKind::Categorical)
        throw DataError("split on '" + cond.variable + "': expected a categorical column");
    const std::string& level = c.level_of(row);
    // membership in the left set goes left; anything else (training right
    // set or a level never seen in training) goes right
    return std::find(cond.left_levels.begin(), cond.left_levels.end(), level) !=
           cond.left_levels.end();
}

} // namespace

int MobTree::route(const Dataset& ds, std::size_t row) const {
    int node = 0;
    while (!nodes_[static_cast<std::size_t>(node)].is_leaf()) {
        const MobNode& nd = nodes_[static_cast<std::size_t>(node)];
        node = goes_left(nd.cond, ds, row) ? nd.left : nd.right;
    }
    return node;
}

int MobTree::assign_leaf(const Dataset& ds, std::size_t row) const {
    return nodes_[static_cast<std::size_t>(route(ds, row))].leaf_id;
}

std::vector<int> MobTree::assign_all(const Dataset& ds) const {
    std::vector<int> out(ds.n_rows());
    for (std::size_t r = 0; r < ds.n_rows(); ++r) out[r] = assign_leaf(ds, r);
    return out;
}

double MobTree::predict_row(const Dataset& ds, std::size_t row) const {
    const MobNode& leaf = nodes_[static_cast<std::size_t>(route(ds, row))];
    const std::size_t rows[1] = {row};
    const DesignMatrix d = build_design(ds, rows, design_);
    return mobdrf::predict(leaf.model, d)[0];
}

std::vector<double> MobTree::predict(const Dataset& ds) const {
    std::vector<std::size_t> all(ds.n_rows());
    std::iota(all.begin(), all.end(), 0);
    const DesignMatrix d = build_design(ds, all, design_);
    std::vector<double> out(ds.n_rows(), 0.0);
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
        const MobNode& leaf = nodes_[static_cast<std::size_t>(route(ds, r))];
        double acc = 0.0;
        for (std::size_t j = 0; j < d.X.cols; ++j) acc += d.X(r, j) * leaf.model.theta[j];
        out[r] = acc;
    }
    return out;
}

const LocalModel& MobTree::leaf_model(int leaf_id) const {
    for (const MobNode& n : nodes_)
        if (n.is_leaf() && n.leaf_id == leaf_id) return n.model;
    throw DataError("no leaf with id " + std::to_string(leaf_id));
}

std::vector<LeafRule> MobTree::extract_rules() const {
    std::vector<LeafRule> rules;
    std::vector<PathAtom> path;
    // depth-first, left before right: leaves come out in leaf_id order
    auto walk = [&](auto&& self, int node) -> void {
        const MobNode& nd = nodes_[static_cast<std::size_t>(node)];
        if (nd.is_leaf()) {
            rules.push_back(LeafRule{nd.leaf_id, path, &nd.model, nd.n_rows});
            return;
        }
        path.push_back(PathAtom{nd.cond, true});
        self(self, nd.left);
        path.back().went_left = false;
        self(self, nd.right);
        path.pop_back();
    };
    walk(walk, 0);
    return rules;
}

// ---------------------------------------------------------------------------
// Growth
// ---------------------------------------------------------------------------

namespace {

struct Grower {
    const Dataset& ds;
    const MobConfig& cfg;
    std::span<const std::size_t> partition_cols;
    DesignInfo info;
    std::size_t min_node;
    std::vector<MobNode> nodes;

    struct SplitPlan {
        SplitCondition cond;
        std::vector<std::size_t> left_rows, right_rows;
        double total_sse = std::numeric_limits<double>::infinity();
        bool found = false;
    };

    double children_sse(const std::vector<std::size_t>& left,
                        const std::vector<std::size_t>& right,
                        std::span<const double> y_all) const {
        const DesignMatrix dl = build_design(ds, left, info);
        const DesignMatrix dr = build_design(ds, right, info);
        const LocalModel ml = fit_ols(dl, gather_rows(y_all, left));
        const LocalModel mr = fit_ols(dr, gather_rows(y_all, right));
        return ml.sse + mr.sse;
    }

    static std::vector<double> gather_rows(std::span<const double> values,
                                           std::span<const std::size_t> rows) {
        std::vector<double> out;
        out.reserve(rows.size());
        for (std::size_t r : rows) out.push_back(values[r]);
        return out;
    }

    SplitPlan best_numeric_split(const Column& col, std::span<const std::size_t> rows,
                                 std::span<const double> y_all) const {
        SplitPlan plan;
        std::vector<std::size_t> sorted(rows.begin(), rows.end());
        std::stable_sort(sorted.begin(), sorted.end(),
                         [&](std::size_t a, std::size_t b) { return col.num[a] < col.num[b]; });
        std::vector<double> uniq;
        for (std::size_t r : sorted)
            if (uniq.empty() || col.num[r] != uniq.back()) uniq.push_back(col.num[r]);
        if (uniq.size() < 2) return plan;
        std::vector<double> candidates;
        candidates.reserve(uniq.size() - 1);
        for (std::size_t i = 0; i + 1 < uniq.size(); ++i)
            candidates.push_back(uniq[i] + (uniq[i + 1] - uniq[i]) / 2.0);
        if (cfg.max_split_candidates > 0 && candidates.size() > cfg.max_split_candidates) {
            // evenly spaced subset of the midpoint grid
            std::vector<double> reduced;
            reduced.reserve(cfg.max_split_candidates);
            const double step = static_cast<double>(candidates.size()) /
                                static_cast<double>(cfg.max_split_candidates);
            for (std::size_t i = 0; i < cfg.max_split_candidates; ++i)
                reduced.push_back(candidates[static_cast<std::size_t>(step * (static_cast<double>(i) + 0.5))]);
            reduced.erase(std::unique(reduced.begin(), reduced.end()), reduced.end());
            candidates = std::move(reduced);
        }
        for (double thr : candidates) {
            std::vector<std::size_t> left, right;
            for (std::size_t r : rows)
                (col.num[r] <= thr ? left : right).push_back(r);
            if (left.size() < min_node || right.size() < min_node) continue;
            const double sse = children_sse(left, right, y_all);
            if (sse < plan.total_sse) {
                plan.found = true;
                plan.total_sse = sse;
                plan.cond = SplitCondition{col.name, false, thr, {}, {}};
                plan.left_rows = std::move(left);
                plan.right_rows = std::move(right);
            }
        }
        return plan;
    }

    SplitPlan best_categorical_split(const Column& col, std::span<const std::size_t> rows,
                                     std::span<const double> y_all,
                                     std::span<const double> parent_resid) const {
        SplitPlan plan;
        // order observed levels by mean parent residual, then scan prefix splits
        const std::size_t L = col.levels.size();
        std::vector<double> resid_sum(L, 0.0);
        std::vector<std::size_t> count(L, 0);
        for (std::size_t idx = 0; idx < rows.size(); ++idx) {
            const auto lvl = static_cast<std::size_t>(col.codes[rows[idx]]);
            resid_sum[lvl] += parent_resid[idx];
            ++count[lvl];
        }
        std::vector<std::size_t> observed;
        for (std::size_t l = 0; l < L; ++l)
            if (count[l] > 0) observed.push_back(l);
        if (observed.size() < 2) return plan;
        std::stable_sort(observed.begin(), observed.end(), [&](std::size_t a, std::size_t b) {
            return resid_sum[a] / static_cast<double>(count[a]) <
                   resid_sum[b] / static_cast<double>(count[b]);
        });
        for (std::size_t cut = 1; cut < observed.size(); ++cut) {
            std::vector<bool> in_left(L, false);
            for (std::size_t i = 0; i < cut; ++i) in_left[observed[i]] = true;
            std::vector<std::size_t> left, right;
            for (std::size_t r : rows)
                (in_left[static_cast<std::size_t>(col.codes[r])] ? left : right).push_back(r);
            if (left.size() < min_node || right.size() < min_node) continue;
            const double sse = children_sse(left, right, y_all);
            if (sse < plan.total_sse) {
                plan.found = true;
                plan.total_sse = sse;
                SplitCondition cond{col.name, true, 0.0, {}, {}};
                // left set: observed levels routed left, in the column's level
                // order; right set: the full-column complement, so the two
                // sides exhaust the column's level universe
                for (std::size_t l = 0; l < L; ++l) {
                    if (in_left[l])
                        cond.left_levels.push_back(col.levels[l]);
                    else
                        cond.right_levels.push_back(col.levels[l]);
                }
                plan.cond = std::move(cond);
                plan.left_rows = std::move(left);
                plan.right_rows = std::move(right);
            }
        }
        return plan;
    }

    int build(std::vector<std::size_t> rows, int depth, std::uint64_t node_seed,
              std::span<const double> y_all) {
        const DesignMatrix d = build_design(ds, rows, info);
        const std::vector<double> y = gather_rows(y_all, rows);
        LocalModel model = fit_ols(d, y);

        const auto make_leaf = [&]() {
            MobNode leaf;
            leaf.model = std::move(model);
            leaf.n_rows = rows.size();
            nodes.push_back(std::move(leaf));
            return static_cast<int>(nodes.size() - 1);
        };

        if (depth >= cfg.max_depth || rows.size() < 2 * min_node) return make_leaf();

        std::vector<std::size_t> candidates;
        for (std::size_t ci : partition_cols)
            if (!make_var_view(ds.col(ci), rows).constant()) candidates.push_back(ci);
        if (candidates.empty()) return make_leaf();

        const Matrix scores = score_contributions(model, d, y);
        StabilityConfig stab = cfg.stability;
        stab.seed = node_seed;
        const SplitSelection sel = select_split_variable(scores, ds, rows, candidates, stab);
        if (!sel.column) return make_leaf();

        const Column& col = ds.col(*sel.column);
        SplitPlan plan;
        if (col.kind == ColumnKind::Numeric) {
            plan = best_numeric_split(col, rows, y_all);
        } else {
            const std::vector<double> yhat = mobdrf::predict(model, d);
            std::vector<double> resid(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) resid[i] = y[i] - yhat[i];
            plan = best_categorical_split(col, rows, y_all, resid);
        }
        if (!plan.found) return make_leaf();

        MobNode internal;
        internal.cond = std::move(plan.cond);
        internal.n_rows = rows.size();
        const auto self = static_cast<int>(nodes.size());
        nodes.push_back(std::move(internal));
        rows.clear();
        rows.shrink_to_fit();
        const int left = build(std::move(plan.left_rows), depth + 1,
                               derive_seed(node_seed, 1), y_all);
        const int right = build(std::move(plan.right_rows), depth + 1,
                                derive_seed(node_seed, 2), y_all);
        nodes[static_cast<std::size_t>(self)].left = left;
        nodes[static_cast<std::size_t>(self)].right = right;
        return self;
    }
};

void assign_leaf_ids(std::vector<MobNode>& nodes) {
    int next = 1;
    auto walk = [&](auto&& self, int node) -> void {
        MobNode& nd = nodes[static_cast<std::size_t>(node)];
        if (nd.is_leaf()) {
            nd.leaf_id = next++;
            return;
        }
        self(self, nd.left);
        self(self, nd.right);
    };
    walk(walk, 0);
}

} // namespace

MobTree grow(const Dataset& ds, std::span<const std::size_t> rows, const MobConfig& cfg,
             std::span<const std::size_t> partition_cols) {
    if (cfg.max_depth < 0) throw DataError("grow: max_depth must be >= 0");
    DesignInfo info = regression_design_info(ds);
    // a leaf must overdetermine its local model
    const std::size_t min_node = std::max(cfg.min_node_size, info.k() + 1);
    if (rows.size() < min_node)
        throw DataError("grow: " + std::to_string(rows.size()) +
                        " rows, need at least " + std::to_string(min_node));

    Grower g{ds, cfg, partition_cols, info, min_node, {}};
    std::vector<std::size_t> row_vec(rows.begin(), rows.end());
    g.build(std::move(row_vec), 0,
            derive_seed(cfg.stability.seed, stream::kStability, 0), ds.target());
    assign_leaf_ids(g.nodes);
    return MobTree::from_parts(std::move(g.nodes), std::move(info), ds.target_name());
}

MobTree grow(const Dataset& ds, std::span<const std::size_t> rows, const MobConfig& cfg) {
    const std::vector<std::size_t> cols = ds.columns_with_role(Role::Partitioning);
    return grow(ds, rows, cfg, cols);
}

} // namespace mobdrf

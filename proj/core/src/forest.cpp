#include "mobdrf/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mobdrf/parallel.hpp"
#include "mobdrf/rng.hpp"

namespace mobdrf {

std::string RuleForest::tree_name(int t) const {
    return "T_" + std::to_string(layer_index) + "_" + std::to_string(t + 1);
}

RuleForest train_forest(const Dataset& ds, int m, const MobConfig& cfg,
                        const PatchSpec& patch, int layer_index, int threads) {
    if (m < 1) throw DataError("train_forest: need at least one tree");
    if (!(patch.row_fraction > 0.0 && patch.row_fraction <= 1.0))
        throw DataError("train_forest: row_fraction must lie in (0, 1]");
    if (!(patch.col_fraction > 0.0 && patch.col_fraction <= 1.0))
        throw DataError("train_forest: col_fraction must lie in (0, 1]");

    const std::size_t n = ds.n_rows();
    const std::vector<std::size_t> part_cols = ds.columns_with_role(Role::Partitioning);
    const auto n_rows_patch = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(patch.row_fraction * static_cast<double>(n))));
    const auto n_cols_patch = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(patch.col_fraction *
                                                 static_cast<double>(part_cols.size()))));
    const std::size_t min_node =
        std::max(cfg.min_node_size, regression_design_info(ds).k() + 1);
    if (n_rows_patch < min_node)
        throw DataError("train_forest: patch of " + std::to_string(n_rows_patch) +
                        " rows is below the minimum node size " + std::to_string(min_node));

    RuleForest forest;
    forest.layer_index = layer_index;
    forest.trees.resize(static_cast<std::size_t>(m));
    forest.meta.resize(static_cast<std::size_t>(m));

    parallel_for(static_cast<std::size_t>(m), threads, [&](std::size_t t) {
        // everything about tree t comes from (patch.seed, t): rows, columns,
        // depth draw and the stability streams inside grow()
        const std::uint64_t tree_seed = derive_seed(patch.seed, stream::kPatch, t);
        Rng rng(tree_seed);

        std::vector<std::size_t> rows(n);
        std::iota(rows.begin(), rows.end(), 0);
        rng.shuffle(rows);
        rows.resize(n_rows_patch);

        std::vector<std::size_t> cols(part_cols);
        rng.shuffle(cols);
        cols.resize(std::min(n_cols_patch, cols.size()));
        std::sort(cols.begin(), cols.end());  // candidate order = schema order

        MobConfig tree_cfg = cfg;
        if (cfg.max_depth >= 2)
            tree_cfg.max_depth = 2 + static_cast<int>(rng.below(
                                         static_cast<std::uint64_t>(cfg.max_depth - 1)));
        tree_cfg.stability.seed = derive_seed(tree_seed, stream::kStability);

        forest.trees[t] = grow(ds, rows, tree_cfg, cols);
        ForestTreeMeta meta;
        meta.patch_seed = tree_seed;
        meta.max_depth = tree_cfg.max_depth;
        for (std::size_t ci : cols) meta.columns.push_back(ds.col(ci).name);
        forest.meta[t] = std::move(meta);
    });
    return forest;
}

EncodedLayer encode(const RuleForest& forest, const Dataset& ds) {
    EncodedLayer layer;
    layer.columns.reserve(forest.trees.size());
    for (int t = 0; t < forest.size(); ++t) {
        const MobTree& tree = forest.trees[static_cast<std::size_t>(t)];
        std::vector<std::string> levels;
        levels.reserve(static_cast<std::size_t>(tree.n_leaves()));
        for (int j = 1; j <= tree.n_leaves(); ++j)
            levels.push_back("R_" + std::to_string(j));
        std::vector<int> codes(ds.n_rows());
        for (std::size_t r = 0; r < ds.n_rows(); ++r)
            codes[r] = tree.assign_leaf(ds, r) - 1;
        layer.columns.push_back(
            Column::categorical(forest.tree_name(t), std::move(codes), std::move(levels)));
    }
    return layer;
}

Dataset compose_layer_input(const EncodedLayer& encoded, const Dataset& ds) {
    std::vector<Column> cols;
    std::vector<Role> roles;
    for (const Column& c : encoded.columns) {
        cols.push_back(c);
        roles.push_back(Role::Partitioning);
    }
    for (std::size_t i = 0; i < ds.n_cols(); ++i) {
        if (ds.role(i) == Role::Regression) {
            cols.push_back(ds.col(i));
            roles.push_back(Role::Regression);
        }
    }
    cols.push_back(ds.col(ds.target_index()));
    roles.push_back(Role::Target);
    return Dataset(std::move(cols), std::move(roles));
}

} // namespace mobdrf

#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "mobdrf/dataset.hpp"
#include "mobdrf/mobtree.hpp"

namespace mobdrf {

// Random patching: every tree sees a seeded row subsample (without
// replacement) and a seeded subset of the partitioning columns. Regression
// columns are never patched out - each local model keeps the full
// interpretable regressor set.
struct PatchSpec {
    double row_fraction = 0.632;
    double col_fraction = 0.5;
    std::uint64_t seed = 0;
};

struct ForestTreeMeta {
    std::uint64_t patch_seed = 0;
    int max_depth = 0;                  // depth assigned to this tree
    std::vector<std::string> columns;   // partitioning columns in the patch
};

struct RuleForest {
    int layer_index = 1;
    std::vector<MobTree> trees;
    std::vector<ForestTreeMeta> meta;

    int size() const { return static_cast<int>(trees.size()); }
    // encoded-feature name for tree t (0-based): T_<layer>_<t+1>
    std::string tree_name(int t) const;
};

// Trains m MOB trees; tree t's randomness (rows, columns, depth draw,
// permutation streams) derives entirely from (patch.seed, t), so the result
// is identical no matter how many threads run the loop. Per-tree depth is
// drawn uniformly from {2..cfg.max_depth} (or pinned when cfg.max_depth < 2).
RuleForest train_forest(const Dataset& ds, int m, const MobConfig& cfg,
                        const PatchSpec& patch, int layer_index, int threads = 1);

// The m categorical leaf-membership columns T_<layer>_<t> with levels
// R_1..R_j(t). Encoding covers every row of ds, training patch or not.
struct EncodedLayer {
    std::vector<Column> columns;
};

EncodedLayer encode(const RuleForest& forest, const Dataset& ds);

// New dataset whose partitioning features are exactly the encoded columns;
// regression columns and target pass through unchanged.
Dataset compose_layer_input(const EncodedLayer& encoded, const Dataset& ds);

} // namespace mobdrf

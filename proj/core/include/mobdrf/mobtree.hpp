#pragma once
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mobdrf/dataset.hpp"
#include "mobdrf/linmod.hpp"
#include "mobdrf/stability.hpp"

namespace mobdrf {

// Binary split on a partitioning variable. Numeric: x <= threshold goes
// left. Categorical: membership in left_levels goes left; anything else,
// including levels never seen during training, goes right. right_levels
// records the observed complement for rendering and rule expansion.
struct SplitCondition {
    std::string variable;
    bool categorical = false;
    double threshold = 0.0;
    std::vector<std::string> left_levels;
    std::vector<std::string> right_levels;
};

struct MobNode {
    int left = -1, right = -1;   // indices into the node pool; -1 for leaves
    SplitCondition cond;         // internal nodes
    int leaf_id = 0;             // leaves: 1-based, depth-first left-to-right
    LocalModel model;            // leaves
    std::size_t n_rows = 0;
    bool is_leaf() const { return left < 0; }
};

struct MobConfig {
    int max_depth = 3;
    std::size_t min_node_size = 20;  // raised to k+1 if the design needs it
    StabilityConfig stability;
    std::size_t max_split_candidates = 0;  // 0 = scan every midpoint
};

struct PathAtom {
    SplitCondition cond;
    bool went_left = false;
};

struct LeafRule {
    int leaf_id = 0;
    std::vector<PathAtom> atoms;  // root-to-leaf order
    const LocalModel* model = nullptr;
    std::size_t n_rows = 0;
};

// Model-based recursive partition: every leaf carries a local least-squares
// model over the regression features; splits happen on the partitioning
// variable with the most significant parameter instability, at the point
// minimizing the children's combined SSE.
class MobTree {
public:
    MobTree() = default;

    int assign_leaf(const Dataset& ds, std::size_t row) const;
    double predict_row(const Dataset& ds, std::size_t row) const;
    std::vector<double> predict(const Dataset& ds) const;
    std::vector<int> assign_all(const Dataset& ds) const;

    std::vector<LeafRule> extract_rules() const;
    const LocalModel& leaf_model(int leaf_id) const;

    int n_leaves() const { return n_leaves_; }
    const std::vector<MobNode>& nodes() const { return nodes_; }
    const DesignInfo& design() const { return design_; }
    const std::string& target_name() const { return target_; }

    // used by grow() and the deserializer
    static MobTree from_parts(std::vector<MobNode> nodes, DesignInfo design,
                              std::string target);

private:
    std::vector<MobNode> nodes_;  // nodes_[0] is the root
    DesignInfo design_;
    std::string target_;
    int n_leaves_ = 0;

    int route(const Dataset& ds, std::size_t row) const;
};

MobTree grow(const Dataset& ds, std::span<const std::size_t> rows, const MobConfig& cfg);
// Restricted candidate set (random patching trains trees on column subsets).
MobTree grow(const Dataset& ds, std::span<const std::size_t> rows, const MobConfig& cfg,
             std::span<const std::size_t> partition_cols);

} // namespace mobdrf

#pragma once
#include <span>
#include <vector>

#include "mobdrf/dataset.hpp"
#include "mobdrf/mobtree.hpp"

namespace mobdrf {

struct CartConfig {
    int max_depth = -1;             // < 0 means unlimited
    std::size_t min_node_size = 5;  // minimum rows per leaf
    double cp = 0.0;                // split kept only if SSE drop > cp * root SSE
};

struct CartNode {
    int left = -1, right = -1;
    SplitCondition cond;
    double value = 0.0;  // leaves: mean of y
    std::size_t n_rows = 0;
    bool is_leaf() const { return left < 0; }
};

// Plain binary regression tree baseline. Partitioning and regression columns
// are both plain split candidates; leaves predict the node mean.
class CartTree {
public:
    CartTree() = default;

    double predict_row(const Dataset& ds, std::size_t row) const;
    std::vector<double> predict(const Dataset& ds) const;
    const std::vector<CartNode>& nodes() const { return nodes_; }
    int n_leaves() const { return n_leaves_; }

    static CartTree from_parts(std::vector<CartNode> nodes);

private:
    std::vector<CartNode> nodes_;
    int n_leaves_ = 0;
};

CartTree grow_cart(const Dataset& ds, std::span<const std::size_t> rows,
                   const CartConfig& cfg);

} // namespace mobdrf

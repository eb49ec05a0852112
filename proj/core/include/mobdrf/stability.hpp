#pragma once
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mobdrf/dataset.hpp"
#include "mobdrf/linmod.hpp"

namespace mobdrf {

struct StabilityConfig {
    double alpha = 0.05;   // significance level for split acceptance
    int permutations = 199;
    double trim = 0.1;     // boundary trim for the ordered-statistic maximum
    std::uint64_t seed = 0;
};

struct StabilityResult {
    std::string variable;
    double statistic = 0.0;
    double p_value = 1.0;
    double adjusted_p = 1.0;  // Bonferroni: min(1, p * #tested variables)
};

// Values of one candidate partitioning variable on the rows under test.
struct SplitVarView {
    bool categorical = false;
    std::vector<double> num;   // !categorical
    std::vector<int> codes;    // categorical
    int n_levels = 0;

    std::size_t size() const { return categorical ? codes.size() : num.size(); }
    bool constant() const;
};

SplitVarView make_var_view(const Column& col, std::span<const std::size_t> rows);

// Score-fluctuation statistic along x.
//
// Numeric/ordered x: rows are sorted by x (ties keep original order), score
// columns are standardized by their root mean square (zero-RMS columns are
// skipped), and the statistic is the maximum over interior breakpoints
// t/n in [trim, 1-trim] of |S(t)|^2 / ((t/n)(1-t/n)) / n for the cumulative
// sum process S.
//
// Categorical x: sum over levels of |sum of standardized scores in level|^2
// divided by the level count.
//
// An all-constant x (or an all-zero score matrix) yields 0.
double fluctuation_statistic(const Matrix& scores, const SplitVarView& x, double trim);

// Permutation p-value for the fluctuation statistic: x is shuffled B times
// with ties counting against rejection, p = (1 + #{stat_b >= stat_obs})/(B+1).
// For n <= 7 all n! orderings are enumerated instead and p is the exact
// fraction, so small-leaf p-values are exact rather than sampled.
StabilityResult permutation_p(const Matrix& scores, const SplitVarView& x,
                              const std::string& var_name, const StabilityConfig& cfg,
                              std::uint64_t stream_seed);

struct SplitSelection {
    std::optional<std::size_t> column;       // index into ds columns
    std::vector<StabilityResult> results;    // one per tested candidate
};

// Tests every non-constant candidate, Bonferroni-adjusts over the tested
// count, and picks the smallest adjusted p below alpha. Ties break toward the
// larger statistic, then toward schema order. Each candidate draws its
// permutations from a substream derived from (cfg.seed, column index) so
// results are independent of evaluation order.
SplitSelection select_split_variable(const Matrix& scores, const Dataset& ds,
                                     std::span<const std::size_t> rows,
                                     std::span<const std::size_t> candidate_cols,
                                     const StabilityConfig& cfg);

} // namespace mobdrf

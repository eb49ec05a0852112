#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "mobdrf/dataset.hpp"

namespace mobdrf {

// Ground-truth region tree for synthetic data: a binary tree of numeric
// threshold splits over partitioning variables whose leaves carry region ids.
struct PlantedNode {
    int var = -1;            // partitioning variable index (internal nodes)
    double threshold = 0.0;  // x[var] <= threshold goes left
    int left = -1, right = -1;
    int region = -1;         // leaves: 0-based region id
    bool is_leaf() const { return left < 0; }
};

struct SynthSpec {
    std::size_t n = 0;
    int p = 1;  // partitioning variables x1..xp
    int q = 1;  // regression variables z1..zq
    std::vector<PlantedNode> tree;              // node 0 is the root
    std::vector<std::vector<double>> betas;     // per region, length q+1 (intercept first)
    std::vector<int> binary_vars;               // vars drawn from {0,1} instead of U[0,1]
    // categorical planted variables: var index -> level count; values drawn
    // uniformly over levels l1..lk, planted thresholds compare the 0-based
    // level code
    std::vector<std::pair<int, int>> categorical_vars;
    double noise_sd = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
    int n_regions() const { return static_cast<int>(betas.size()); }
};

struct SynthResult {
    Dataset data;
    std::vector<int> region;  // planted region id per row
};

// Columns: x1..xp partitioning (uniform on [0,1], or {0,1} for binary vars),
// z1..zq regression (standard normal), target y = [1,z] . beta_region + noise.
SynthResult synth_subgroups(const SynthSpec& spec);

// Named generators used by the CLI and the test harness:
//   one       - single region, constant-coefficient data
//   split1    - two regions split at x1 <= 0.5, betas differ only in the z1 slope
//   split1cat - two regions split on a four-level categorical x1 ({l1,l2} vs rest)
//   xor2      - x1,x2 binary; four cells whose local models interact (the
//               pattern a single depth-1 split cannot express)
SynthSpec synth_preset(const std::string& name, std::size_t n, int p, int q,
                       double noise_sd, std::uint64_t seed);

int planted_region_of(const SynthSpec& spec, const Dataset& ds, std::size_t row);

} // namespace mobdrf

#include "mobdrf/stability.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mobdrf/rng.hpp"

namespace mobdrf {

bool SplitVarView::constant() const {
    if (categorical) {
        for (int c : codes)
            if (c != codes.front()) return false;
        return true;
    }
    for (double v : num)
        if (v != num.front()) return false;
    return true;
}

SplitVarView make_var_view(const Column& col, std::span<const std::size_t> rows) {
    SplitVarView v;
    if (col.kind == ColumnKind::Numeric) {
        v.categorical = false;
        v.num.reserve(rows.size());
        for (std::size_t r : rows) v.num.push_back(col.num[r]);
    } else {
        v.categorical = true;
        v.codes.reserve(rows.size());
        for (std::size_t r : rows) v.codes.push_back(col.codes[r]);
        v.n_levels = static_cast<int>(col.levels.size());
    }
    return v;
}

namespace {

// Standardizes score columns by their root mean square. Columns whose RMS is
// negligible relative to the largest (or exactly zero) are skipped; the skip
// rule is relative so the statistic is invariant to rescaling all scores.
struct StandardizedScores {
    std::vector<std::size_t> cols;
    std::vector<double> inv_rms;
};

StandardizedScores standardize_scores(const Matrix& scores) {
    StandardizedScores st;
    const double n = static_cast<double>(scores.rows);
    std::vector<double> rms(scores.cols, 0.0);
    double max_rms = 0.0;
    for (std::size_t j = 0; j < scores.cols; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < scores.rows; ++i) acc += scores(i, j) * scores(i, j);
        rms[j] = std::sqrt(acc / n);
        max_rms = std::max(max_rms, rms[j]);
    }
    if (max_rms <= 0.0) return st;  // all-zero scores: statistic is 0
    for (std::size_t j = 0; j < scores.cols; ++j) {
        if (rms[j] > 1e-8 * max_rms) {
            st.cols.push_back(j);
            st.inv_rms.push_back(1.0 / rms[j]);
        }
    }
    return st;
}

// order[] must already hold the evaluation order of the rows (sorted by x for
// numeric, anything for categorical).
double statistic_numeric(const Matrix& scores, const StandardizedScores& st,
                         std::span<const std::size_t> order, double trim) {
    const std::size_t n = order.size();
    const double nd = static_cast<double>(n);
    const std::size_t t_lo = static_cast<std::size_t>(std::ceil(trim * nd));
    const std::size_t t_hi = static_cast<std::size_t>(std::floor((1.0 - trim) * nd));
    std::vector<double> cum(st.cols.size(), 0.0);
    double best = 0.0;
    for (std::size_t t = 1; t <= t_hi && t < n; ++t) {
        const std::size_t row = order[t - 1];
        for (std::size_t c = 0; c < st.cols.size(); ++c)
            cum[c] += scores(row, st.cols[c]) * st.inv_rms[c];
        if (t < std::max<std::size_t>(t_lo, 1)) continue;
        double nrm2 = 0.0;
        for (double v : cum) nrm2 += v * v;
        const double frac = static_cast<double>(t) / nd;
        const double stat = nrm2 / (frac * (1.0 - frac)) / nd;
        best = std::max(best, stat);
    }
    return best;
}

double statistic_categorical(const Matrix& scores, const StandardizedScores& st,
                             std::span<const int> codes, int n_levels) {
    std::vector<double> sums(static_cast<std::size_t>(n_levels) * st.cols.size(), 0.0);
    std::vector<std::size_t> counts(static_cast<std::size_t>(n_levels), 0);
    for (std::size_t i = 0; i < codes.size(); ++i) {
        const auto lvl = static_cast<std::size_t>(codes[i]);
        ++counts[lvl];
        double* row = &sums[lvl * st.cols.size()];
        for (std::size_t c = 0; c < st.cols.size(); ++c)
            row[c] += scores(i, st.cols[c]) * st.inv_rms[c];
    }
    double stat = 0.0;
    for (std::size_t lvl = 0; lvl < counts.size(); ++lvl) {
        if (counts[lvl] == 0) continue;
        double nrm2 = 0.0;
        const double* row = &sums[lvl * st.cols.size()];
        for (std::size_t c = 0; c < st.cols.size(); ++c) nrm2 += row[c] * row[c];
        stat += nrm2 / static_cast<double>(counts[lvl]);
    }
    return stat;
}

std::vector<std::size_t> sort_order_by_value(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    return order;
}

double statistic_for(const Matrix& scores, const StandardizedScores& st,
                     const SplitVarView& x, double trim) {
    if (st.cols.empty()) return 0.0;
    if (x.categorical) {
        return statistic_categorical(scores, st, x.codes, x.n_levels);
    }
    const std::vector<std::size_t> order = sort_order_by_value(x.num);
    return statistic_numeric(scores, st, order, trim);
}

} // namespace

double fluctuation_statistic(const Matrix& scores, const SplitVarView& x, double trim) {
    if (x.size() != scores.rows)
        throw InternalError("fluctuation_statistic: size mismatch");
    if (x.constant()) return 0.0;
    const StandardizedScores st = standardize_scores(scores);
    return statistic_for(scores, st, x, trim);
}

namespace {

// applies a permutation to the x values only; scores stay put
SplitVarView permuted_view(const SplitVarView& x, std::span<const std::size_t> perm) {
    SplitVarView p;
    p.categorical = x.categorical;
    p.n_levels = x.n_levels;
    if (x.categorical) {
        p.codes.resize(x.codes.size());
        for (std::size_t i = 0; i < perm.size(); ++i) p.codes[i] = x.codes[perm[i]];
    } else {
        p.num.resize(x.num.size());
        for (std::size_t i = 0; i < perm.size(); ++i) p.num[i] = x.num[perm[i]];
    }
    return p;
}

} // namespace

StabilityResult permutation_p(const Matrix& scores, const SplitVarView& x,
                              const std::string& var_name, const StabilityConfig& cfg,
                              std::uint64_t stream_seed) {
    if (cfg.permutations < 19)
        throw DataError("permutation_p: need at least 19 permutations");
    StabilityResult res;
    res.variable = var_name;

    const StandardizedScores st = standardize_scores(scores);
    const double observed =
        x.constant() ? 0.0 : statistic_for(scores, st, x, cfg.trim);
    res.statistic = observed;

    const std::size_t n = x.size();
    if (n <= 7) {
        // exact: every ordering of x, identity included
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::size_t total = 0, ge = 0;
        do {
            ++total;
            const SplitVarView pv = permuted_view(x, perm);
            if (statistic_for(scores, st, pv, cfg.trim) >= observed) ++ge;
        } while (std::next_permutation(perm.begin(), perm.end()));
        res.p_value = static_cast<double>(ge) / static_cast<double>(total);
    } else {
        Rng rng(stream_seed);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        int ge = 0;
        for (int b = 0; b < cfg.permutations; ++b) {
            rng.shuffle(perm);
            const SplitVarView pv = permuted_view(x, perm);
            if (statistic_for(scores, st, pv, cfg.trim) >= observed) ++ge;
        }
        res.p_value = static_cast<double>(1 + ge) / static_cast<double>(cfg.permutations + 1);
    }
    res.adjusted_p = res.p_value;
    return res;
}

SplitSelection select_split_variable(const Matrix& scores, const Dataset& ds,
                                     std::span<const std::size_t> rows,
                                     std::span<const std::size_t> candidate_cols,
                                     const StabilityConfig& cfg) {
    SplitSelection sel;
    std::vector<std::size_t> tested_cols;
    for (std::size_t ci : candidate_cols) {
        const SplitVarView view = make_var_view(ds.col(ci), rows);
        if (view.constant()) continue;
        StabilityResult r = permutation_p(scores, view, ds.col(ci).name, cfg,
                                          derive_seed(cfg.seed, stream::kStability, ci));
        tested_cols.push_back(ci);
        sel.results.push_back(std::move(r));
    }
    const double m = static_cast<double>(sel.results.size());
    for (auto& r : sel.results) r.adjusted_p = std::min(1.0, r.p_value * m);

    std::size_t best = sel.results.size();
    for (std::size_t i = 0; i < sel.results.size(); ++i) {
        if (sel.results[i].adjusted_p >= cfg.alpha) continue;
        if (best == sel.results.size() ||
            sel.results[i].adjusted_p < sel.results[best].adjusted_p ||
            (sel.results[i].adjusted_p == sel.results[best].adjusted_p &&
             sel.results[i].statistic > sel.results[best].statistic)) {
            best = i;
        }
    }
    if (best < sel.results.size()) sel.column = tested_cols[best];
    return sel;
}

} // namespace mobdrf

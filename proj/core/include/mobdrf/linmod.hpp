#pragma once
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mobdrf/dataset.hpp"

namespace mobdrf {

// Minimal dense row-major matrix; all the linear algebra in this project is
// small (k = a handful of coefficients) so nothing heavier is warranted.
struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

// Recipe for building a design matrix from named dataset columns: a leading
// intercept, numeric columns as-is, categorical columns dummy-coded against
// their first level (the reference level is absorbed into the intercept).
// The level lists are frozen at fit time so the same recipe applied to new
// data keeps column meaning fixed; unseen levels zero every dummy and thus
// fall into the reference level.
struct DesignInfo {
    struct Term {
        std::string column;
        bool is_dummy = false;
        std::string level;  // is_dummy only
    };
    std::vector<std::string> col_names;  // "(Intercept)" first
    std::vector<Term> terms;             // parallel to col_names; terms[0] is the intercept

    std::size_t k() const { return col_names.size(); }
};

struct DesignMatrix {
    Matrix X;
    DesignInfo info;
};

// Design over the dataset's Regression columns (schema order, then level order).
DesignInfo regression_design_info(const Dataset& ds);
// Design over an explicit list of columns (used by the LASSO final learner,
// which one-hot encodes partitioning features as well).
DesignInfo design_info_for(const Dataset& ds, std::span<const std::size_t> cols);

DesignMatrix build_design(const Dataset& ds, std::span<const std::size_t> rows,
                          const DesignInfo& info);
DesignMatrix build_design(const Dataset& ds, std::span<const std::size_t> rows);

// Fitted linear model. `theta` matches `column_map`; columns dropped for rank
// deficiency keep their slot with coefficient 0 and are listed in
// `dropped_columns`.
struct LocalModel {
    std::vector<double> theta;
    std::vector<std::string> column_map;
    std::size_t n_fit = 0;
    double sse = 0.0;
    std::vector<std::string> dropped_columns;
};

// Ordinary least squares via Householder QR with greedy column pivoting.
// Columns whose residual norm falls below 1e-10 * max initial column norm are
// dropped rather than jittered, so the surviving coefficients stay
// interpretable. Degenerate designs degrade gracefully (worst case: all
// columns dropped, every coefficient 0).
LocalModel fit_ols(const DesignMatrix& X, std::span<const double> y);

std::vector<double> predict(const LocalModel& m, const DesignMatrix& X);

// Per-observation score contributions (y_i - yhat_i) * x_i: the gradient
// pieces of the squared loss at the optimum. Each retained column sums to ~0
// by the first-order condition; the parameter-stability tests operate on the
// rows of this matrix.
Matrix score_contributions(const LocalModel& m, const DesignMatrix& X,
                           std::span<const double> y);

struct LassoDiag {
    int sweeps = 0;
    bool converged = false;
    std::vector<double> objective;  // penalized objective after each sweep
};

// L1-penalized least squares, cyclic coordinate descent with soft
// thresholding. Non-intercept columns are centered and scaled to unit
// variance internally (1/n convention); coefficients come back on the
// original scale. Converges when no coefficient moves more than 1e-8 in a
// sweep, capped at 10,000 sweeps.
LocalModel fit_lasso(const DesignMatrix& X, std::span<const double> y,
                     double lambda, LassoDiag* diag = nullptr);

// Smallest lambda for which every non-intercept coefficient is exactly zero.
double lasso_lambda_max(const DesignMatrix& X, std::span<const double> y);

std::vector<double> gather(const std::vector<double>& values,
                           std::span<const std::size_t> rows);

} // namespace mobdrf

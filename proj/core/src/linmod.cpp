#include "mobdrf/linmod.hpp"

#include <algorithm>
#include <cmath>

namespace mobdrf {

std::vector<double> gather(const std::vector<double>& values,
                           std::span<const std::size_t> rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(values[r]);
    return out;
}

// ---------------------------------------------------------------------------
// Design matrices
// ---------------------------------------------------------------------------

DesignInfo design_info_for(const Dataset& ds, std::span<const std::size_t> cols) {
    DesignInfo info;
    info.col_names.push_back("(Intercept)");
    info.terms.push_back({});
    for (std::size_t ci : cols) {
        const Column& c = ds.col(ci);
        if (c.kind == ColumnKind::Numeric) {
            info.col_names.push_back(c.name);
            info.terms.push_back({c.name, false, {}});
        } else {
            // dummy per level except the first (reference absorbed by intercept)
            for (std::size_t l = 1; l < c.levels.size(); ++l) {
                info.col_names.push_back(c.name + "_" + c.levels[l]);
                info.terms.push_back({c.name, true, c.levels[l]});
            }
        }
    }
    return info;
}

DesignInfo regression_design_info(const Dataset& ds) {
    return design_info_for(ds, ds.columns_with_role(Role::Regression));
}

DesignMatrix build_design(const Dataset& ds, std::span<const std::size_t> rows,
                          const DesignInfo& info) {
    if (rows.empty()) throw DataError("build_design: empty row set");
    DesignMatrix d;
    d.info = info;
    d.X = Matrix(rows.size(), info.k());
    for (std::size_t i = 0; i < rows.size(); ++i) d.X(i, 0) = 1.0;
    for (std::size_t j = 1; j < info.terms.size(); ++j) {
        const DesignInfo::Term& term = info.terms[j];
        const Column& c = ds.col(term.column);
        if (!term.is_dummy) {
            if (c.kind != ColumnKind::Numeric)
                throw DataError("design: column '" + term.column + "' is not numeric");
            for (std::size_t i = 0; i < rows.size(); ++i) d.X(i, j) = c.num[rows[i]];
        } else {
            if (c.kind != ColumnKind::Categorical)
                throw DataError("design: column '" + term.column + "' is not categorical");
            // levels unseen at fit time have no dummy and land on the reference
            const int code = c.code_of(term.level);
            for (std::size_t i = 0; i < rows.size(); ++i)
                d.X(i, j) = (code >= 0 && c.codes[rows[i]] == code) ? 1.0 : 0.0;
        }
    }
    return d;
}

DesignMatrix build_design(const Dataset& ds, std::span<const std::size_t> rows) {
    return build_design(ds, rows, regression_design_info(ds));
}

// ---------------------------------------------------------------------------
// OLS via Householder QR with greedy column pivoting
// ---------------------------------------------------------------------------

LocalModel fit_ols(const DesignMatrix& d, std::span<const double> y) {
    const Matrix& X = d.X;
    const std::size_t n = X.rows, k = X.cols;
    if (y.size() != n) throw InternalError("fit_ols: y length mismatch");

    Matrix A = X;  // working copy, reduced in place
    std::vector<double> b(y.begin(), y.end());

    double max_norm = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += A(i, j) * A(i, j);
        max_norm = std::max(max_norm, std::sqrt(s));
    }
    const double tol = 1e-10 * max_norm;

    std::vector<std::size_t> perm(k);
    for (std::size_t j = 0; j < k; ++j) perm[j] = j;
    std::size_t rank = 0;

    const std::size_t steps = std::min(n, k);
    for (std::size_t s = 0; s < steps; ++s) {
        // pick the remaining column with the largest residual norm
        std::size_t best = s;
        double best_norm = -1.0;
        for (std::size_t j = s; j < k; ++j) {
            double acc = 0.0;
            for (std::size_t i = s; i < n; ++i) acc += A(i, perm[j]) * A(i, perm[j]);
            const double norm = std::sqrt(acc);
            if (norm > best_norm + 1e-15 * best_norm) {
                best_norm = norm;
                best = j;
            }
        }
        if (!(best_norm > tol)) break;
        std::swap(perm[s], perm[best]);
        const std::size_t pc = perm[s];

        // Householder vector for A[s:, pc]
        double alpha = 0.0;
        for (std::size_t i = s; i < n; ++i) alpha += A(i, pc) * A(i, pc);
        alpha = std::sqrt(alpha);
        if (A(s, pc) > 0) alpha = -alpha;
        std::vector<double> v(n - s);
        v[0] = A(s, pc) - alpha;
        for (std::size_t i = s + 1; i < n; ++i) v[i - s] = A(i, pc);
        double vnorm2 = 0.0;
        for (double t : v) vnorm2 += t * t;
        if (vnorm2 > 0.0) {
            const auto reflect = [&](auto&& get, auto&& set) {
                double dot = 0.0;
                for (std::size_t i = s; i < n; ++i) dot += v[i - s] * get(i);
                const double f = 2.0 * dot / vnorm2;
                for (std::size_t i = s; i < n; ++i) set(i, get(i) - f * v[i - s]);
            };
            for (std::size_t j = s; j < k; ++j) {
                const std::size_t cj = perm[j];
                reflect([&](std::size_t i) { return A(i, cj); },
                        [&](std::size_t i, double val) { A(i, cj) = val; });
            }
            reflect([&](std::size_t i) { return b[i]; },
                    [&](std::size_t i, double val) { b[i] = val; });
        }
        A(s, pc) = alpha;  // guard against drift in the pivot entry
        ++rank;
    }

    // back-substitution on the rank x rank upper-triangular block
    std::vector<double> coef(rank, 0.0);
    for (std::size_t r = rank; r-- > 0;) {
        double acc = b[r];
        for (std::size_t j = r + 1; j < rank; ++j) acc -= A(r, perm[j]) * coef[j];
        const double diag = A(r, perm[r]);
        coef[r] = diag != 0.0 ? acc / diag : 0.0;
    }

    LocalModel m;
    m.column_map = d.info.col_names;
    m.theta.assign(k, 0.0);
    for (std::size_t r = 0; r < rank; ++r) m.theta[perm[r]] = coef[r];
    m.n_fit = n;
    std::vector<bool> kept(k, false);
    for (std::size_t r = 0; r < rank; ++r) kept[perm[r]] = true;
    for (std::size_t j = 0; j < k; ++j)
        if (!kept[j]) m.dropped_columns.push_back(d.info.col_names[j]);

    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double pred = 0.0;
        for (std::size_t j = 0; j < k; ++j) pred += X(i, j) * m.theta[j];
        const double r = y[i] - pred;
        sse += r * r;
    }
    m.sse = sse;
    return m;
}

std::vector<double> predict(const LocalModel& m, const DesignMatrix& d) {
    if (m.column_map != d.info.col_names)
        throw DataError("predict: design columns do not match the fitted model");
    std::vector<double> out(d.X.rows, 0.0);
    for (std::size_t i = 0; i < d.X.rows; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d.X.cols; ++j) acc += d.X(i, j) * m.theta[j];
        out[i] = acc;
    }
    return out;
}

Matrix score_contributions(const LocalModel& m, const DesignMatrix& d,
                           std::span<const double> y) {
    if (m.column_map != d.info.col_names)
        throw DataError("score_contributions: design columns do not match the fitted model");
    if (y.size() != d.X.rows) throw InternalError("score_contributions: y length mismatch");
    Matrix s(d.X.rows, d.X.cols);
    for (std::size_t i = 0; i < d.X.rows; ++i) {
        double pred = 0.0;
        for (std::size_t j = 0; j < d.X.cols; ++j) pred += d.X(i, j) * m.theta[j];
        const double r = y[i] - pred;
        for (std::size_t j = 0; j < d.X.cols; ++j) s(i, j) = r * d.X(i, j);
    }
    return s;
}

// ---------------------------------------------------------------------------
// LASSO by cyclic coordinate descent
// ---------------------------------------------------------------------------

namespace {

struct Standardized {
    std::vector<double> mean, sd;   // per design column; sd==0 marks a constant
    std::vector<std::size_t> active;  // non-intercept, non-constant columns
    double y_mean = 0.0;
};

Standardized standardize(const DesignMatrix& d, std::span<const double> y) {
    const Matrix& X = d.X;
    Standardized st;
    st.mean.assign(X.cols, 0.0);
    st.sd.assign(X.cols, 0.0);
    const double n = static_cast<double>(X.rows);
    for (double v : y) st.y_mean += v;
    st.y_mean /= n;
    for (std::size_t j = 1; j < X.cols; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < X.rows; ++i) mean += X(i, j);
        mean /= n;
        double var = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < X.rows; ++i) {
            const double c = X(i, j) - mean;
            var += c * c;
            scale += X(i, j) * X(i, j);
        }
        var /= n;
        st.mean[j] = mean;
        // numerically constant columns can't be standardized; they are
        // reported as dropped with coefficient zero
        if (var > 1e-24 * std::max(1.0, scale / n)) {
            st.sd[j] = std::sqrt(var);
            st.active.push_back(j);
        }
    }
    return st;
}

double soft_threshold(double z, double g) {
    if (z > g) return z - g;
    if (z < -g) return z + g;
    return 0.0;
}

} // namespace

double lasso_lambda_max(const DesignMatrix& d, std::span<const double> y) {
    const Standardized st = standardize(d, y);
    const Matrix& X = d.X;
    const double n = static_cast<double>(X.rows);
    double lmax = 0.0;
    for (std::size_t j : st.active) {
        double dot = 0.0;
        for (std::size_t i = 0; i < X.rows; ++i)
            dot += (X(i, j) - st.mean[j]) / st.sd[j] * (y[i] - st.y_mean);
        lmax = std::max(lmax, std::abs(dot) / n);
    }
    return lmax;
}

LocalModel fit_lasso(const DesignMatrix& d, std::span<const double> y,
                     double lambda, LassoDiag* diag) {
    if (lambda < 0.0) throw DataError("fit_lasso: lambda must be >= 0");
    const Matrix& X = d.X;
    const std::size_t n = X.rows;
    if (y.size() != n) throw InternalError("fit_lasso: y length mismatch");

    const Standardized st = standardize(d, y);
    const double nd = static_cast<double>(n);

    // standardized copies of the active columns
    Matrix Z(n, st.active.size());
    for (std::size_t a = 0; a < st.active.size(); ++a) {
        const std::size_t j = st.active[a];
        for (std::size_t i = 0; i < n; ++i)
            Z(i, a) = (X(i, j) - st.mean[j]) / st.sd[j];
    }
    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - st.y_mean;

    std::vector<double> beta(st.active.size(), 0.0);
    constexpr double kTol = 1e-8;
    constexpr int kMaxSweeps = 10000;
    int sweeps = 0;
    bool converged = false;
    if (diag) *diag = {};
    while (sweeps < kMaxSweeps) {
        ++sweeps;
        double max_move = 0.0;
        for (std::size_t a = 0; a < st.active.size(); ++a) {
            double rho = beta[a];
            for (std::size_t i = 0; i < n; ++i) rho += Z(i, a) * resid[i] / nd;
            const double updated = soft_threshold(rho, lambda);
            const double move = updated - beta[a];
            if (move != 0.0) {
                for (std::size_t i = 0; i < n; ++i) resid[i] -= move * Z(i, a);
                beta[a] = updated;
            }
            max_move = std::max(max_move, std::abs(move));
        }
        if (diag) {
            double obj = 0.0;
            for (double r : resid) obj += r * r;
            obj /= 2.0 * nd;
            for (double b : beta) obj += lambda * std::abs(b);
            diag->objective.push_back(obj);
        }
        if (max_move < kTol) {
            converged = true;
            break;
        }
    }
    if (diag) {
        diag->sweeps = sweeps;
        diag->converged = converged;
    }

    LocalModel m;
    m.column_map = d.info.col_names;
    m.theta.assign(X.cols, 0.0);
    double intercept = st.y_mean;
    for (std::size_t a = 0; a < st.active.size(); ++a) {
        const std::size_t j = st.active[a];
        const double orig = beta[a] / st.sd[j];
        m.theta[j] = orig;
        intercept -= orig * st.mean[j];
    }
    m.theta[0] = intercept;
    m.n_fit = n;
    for (std::size_t j = 1; j < X.cols; ++j)
        if (st.sd[j] == 0.0) m.dropped_columns.push_back(d.info.col_names[j]);

    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double pred = 0.0;
        for (std::size_t j = 0; j < X.cols; ++j) pred += X(i, j) * m.theta[j];
        const double r = y[i] - pred;
        sse += r * r;
    }
    m.sse = sse;
    return m;
}

} // namespace mobdrf

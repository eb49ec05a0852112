#include <doctest.h>

#include <cmath>

#include "mobdrf/linmod.hpp"
#include "mobdrf/rng.hpp"
#include "oracles.hpp"

using namespace mobdrf;

namespace {

// mixed numeric + categorical regressors with a planted linear truth
Dataset mixed_regressor_dataset(std::size_t n, std::uint64_t seed,
                                std::vector<double>* truth_out) {
    Rng rng(seed);
    std::vector<double> x(n), z1(n), z2(n);
    std::vector<int> cat(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform01();
        z1[i] = rng.normal();
        z2[i] = rng.normal();
        cat[i] = static_cast<int>(rng.below(3));
    }
    // theta over [intercept, z1, z2, edu_mid, edu_hi] -- "lo" is the reference;
    // levels are pinned explicitly so the dummy order is deterministic
    std::vector<double> theta{1.25, -0.7, 2.0, 0.4, -1.1};
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = theta[0] + theta[1] * z1[i] + theta[2] * z2[i];
        if (cat[i] == 1) y[i] += theta[3];
        if (cat[i] == 2) y[i] += theta[4];
    }
    if (truth_out) *truth_out = theta;
    std::vector<Column> cols{Column::numeric("x1", x), Column::numeric("z1", z1),
                             Column::numeric("z2", z2),
                             Column::categorical("edu", cat, {"lo", "mid", "hi"}),
                             Column::numeric("y", y)};
    std::vector<Role> roles{Role::Partitioning, Role::Regression, Role::Regression,
                            Role::Regression, Role::Target};
    return Dataset(std::move(cols), std::move(roles));
}

} // namespace

TEST_CASE("design matrix shape and dummy coding") {
    const Dataset ds = mixed_regressor_dataset(40, 3, nullptr);
    const DesignMatrix d = build_design(ds, oracle::all_rows(ds));
    // intercept + z1 + z2 + 2 dummies ("lo" absorbed)
    CHECK(d.X.cols == 5);
    CHECK(d.info.col_names[0] == "(Intercept)");
    CHECK(d.info.col_names[3] == "edu_mid");
    CHECK(d.info.col_names[4] == "edu_hi");
    for (std::size_t i = 0; i < d.X.rows; ++i) {
        CHECK(d.X(i, 0) == 1.0);
        CHECK(d.X(i, 3) + d.X(i, 4) <= 1.0);  // at most one dummy fires
    }
    CHECK_THROWS_AS(build_design(ds, std::vector<std::size_t>{}), DataError);
}

TEST_CASE("six-level categorical regressor yields six coefficients") {
    Rng rng(5);
    const std::vector<std::string> levels{"illiteracy", "literacy", "elementary",
                                          "junior", "senior", "college"};
    std::vector<std::string> edu(60);
    std::vector<double> y(60);
    for (std::size_t i = 0; i < 60; ++i) {
        edu[i] = levels[i % 6];
        y[i] = rng.normal();
    }
    std::vector<Column> cols{Column::numeric("x1", std::vector<double>(60, 1.0)),
                             Column::categorical_from_strings("edu", edu),
                             Column::numeric("y", y)};
    std::vector<Role> roles{Role::Partitioning, Role::Regression, Role::Target};
    const Dataset ds(std::move(cols), std::move(roles));
    const DesignMatrix d = build_design(ds, oracle::all_rows(ds));
    CHECK(d.X.cols == 6);  // intercept + 5 dummies
}

TEST_CASE("intercept-only design fits the mean") {
    std::vector<Column> cols{Column::numeric("x1", {0, 1, 2, 3}),
                             Column::categorical_from_strings("z1", {"a", "a", "a", "a"}),
                             Column::numeric("y", {1, 2, 3, 6})};
    std::vector<Role> roles{Role::Partitioning, Role::Regression, Role::Target};
    const Dataset ds(std::move(cols), std::move(roles));
    // single-level categorical contributes no dummy: intercept-only design
    const DesignMatrix d = build_design(ds, oracle::all_rows(ds));
    CHECK(d.X.cols == 1);
    const LocalModel m = fit_ols(d, ds.target());
    CHECK(m.theta[0] == doctest::Approx(3.0));
    double sse = 0;
    for (double v : {1.0, 2.0, 3.0, 6.0}) sse += (v - 3.0) * (v - 3.0);
    CHECK(m.sse == doctest::Approx(sse));
}

TEST_CASE("fit_ols recovers exact coefficients on noiseless data") {
    std::vector<double> truth;
    const Dataset ds = mixed_regressor_dataset(200, 17, &truth);
    const DesignMatrix d = build_design(ds, oracle::all_rows(ds));
    const LocalModel m = fit_ols(d, ds.target());
    REQUIRE(m.theta.size() == truth.size());
    for (std::size_t j = 0; j < truth.size(); ++j)
        CHECK(std::abs(m.theta[j] - truth[j]) <= 1e-8);
    CHECK(m.sse <= 1e-12 * 200);
    CHECK(m.dropped_columns.empty());
}

TEST_CASE("fit_ols agrees with the normal-equations oracle on noisy data") {
    Rng rng(23);
    const std::size_t n = 150;
    std::vector<double> x(n), z(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform01();
        z[i] = rng.normal();
        y[i] = 0.5 + 1.5 * z[i] + rng.normal();
    }
    const Dataset ds = oracle::simple_dataset({x}, {z}, y);
    const DesignMatrix d = build_design(ds, oracle::all_rows(ds));
    const LocalModel m = fit_ols(d, ds.target());
    const std::vector<double> ref = oracle::normal_equations_ols(d.X, y);
    for (std::size_t j = 0; j < ref.size(); ++j)
        CHECK(m.theta[j] == doctest::Approx(ref[j]).epsilon(1e-9));
}

TEST_CASE("duplicated regressor column is dropped without changing predictions") {
    Rng rng(31);
    const std::size_t n = 80;
    std::vector<double> z(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = rng.normal();
        y[i] = 2.0 - 3.0 * z[i] + 0.1 * rng.normal();
    }
    std::vector<Column> cols{Column::numeric("x1", std::vector<double>(n, 0.5)),
                             Column::numeric("z1", z), Column::numeric("z1_copy", z),
                             Column::numeric("y", y)};
    std::vector<Role> roles{Role::Partitioning, Role::Regression, Role::Regression,
                            Role::Target};
    const Dataset dup(std::move(cols), std::move(roles));
    const DesignMatrix d = build_design(dup, oracle::all_rows(dup));
    const LocalModel m = fit_ols(d, dup.target());
    CHECK(m.dropped_columns.size() == 1);
    // the dropped slot reports coefficient 0
    for (std::size_t j = 0; j < m.theta.size(); ++j)
        if (m.column_map[j] == m.dropped_columns[0]) CHECK(m.theta[j] == 0.0);

    const Dataset single = oracle::simple_dataset({std::vector<double>(n, 0.5)}, {z}, y);
    const DesignMatrix ds1 = build_design(single, oracle::all_rows(single));
    const LocalModel m1 = fit_ols(ds1, single.target());
    const std::vector<double> pred_dup = predict(m, d);
    const std::vector<double> pred_single = predict(m1, ds1);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(pred_dup[i] == doctest::Approx(pred_single[i]).epsilon(1e-10));
}

TEST_CASE("predict reproduces hand-computed leaf model arithmetic") {
    // leaf model: 12.1694 - 0.0726*Female - 0.0417*Age + 0.3273*Elementary
    // + 0.5994*Junior + 0.5934*Senior + 0.4786*College - 0.0293*Literacy
    LocalModel m;
    m.column_map = {"(Intercept)", "Female", "Age", "Elementary", "Junior",
                    "Senior",      "College", "Literacy"};
    m.theta = {12.1694, -0.0726, -0.0417, 0.3273, 0.5994, 0.5934, 0.4786, -0.0293};
    m.n_fit = 1;

    DesignMatrix d;
    d.info.col_names = m.column_map;
    d.info.terms.resize(8);
    d.X = Matrix(1, 8);
    d.X(0, 0) = 1.0;   // intercept
    d.X(0, 1) = 1.0;   // Female
    d.X(0, 2) = 80.0;  // Age
    d.X(0, 3) = 1.0;   // Elementary
    const double yhat = predict(m, d)[0];
    CHECK(yhat == doctest::Approx(9.0881).epsilon(1e-12));
}

TEST_CASE("predict rejects mismatched designs") {
    const Dataset ds = mixed_regressor_dataset(30, 2, nullptr);
    const DesignMatrix d = build_design(ds, oracle::all_rows(ds));
    const LocalModel m = fit_ols(d, ds.target());
    DesignMatrix other = d;
    other.info.col_names[1] = "renamed";
    CHECK_THROWS_AS(predict(m, other), DataError);
}

TEST_CASE("score columns sum to zero at the optimum") {
    std::vector<double> truth;
    Rng rng(101);
    for (int rep = 0; rep < 20; ++rep) {
        const Dataset ds = mixed_regressor_dataset(120, 1000 + static_cast<std::uint64_t>(rep),
                                                   &truth);
        std::vector<double> y = ds.target();
        for (double& v : y) v += rng.normal();  // noise so the fit is not exact
        const DesignMatrix d = build_design(ds, oracle::all_rows(ds));
        const LocalModel m = fit_ols(d, y);
        const Matrix s = score_contributions(m, d, y);
        double max_abs_x = 0.0;
        for (double v : d.X.a) max_abs_x = std::max(max_abs_x, std::abs(v));
        const double tol = 1e-6 * static_cast<double>(y.size()) * std::max(1.0, max_abs_x);
        for (std::size_t j = 0; j < s.cols; ++j) {
            double colsum = 0.0;
            for (std::size_t i = 0; i < s.rows; ++i) colsum += s(i, j);
            CHECK(std::abs(colsum) <= tol);
        }
    }
}

TEST_CASE("scores of a perfect fit vanish") {
    const std::size_t n = 50;
    std::vector<double> z(n), y(n);
    Rng rng(4);
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = rng.normal();
        y[i] = 1.0 + 2.0 * z[i];
    }
    const Dataset ds = oracle::simple_dataset({std::vector<double>(n, 0.0)}, {z}, y);
    const DesignMatrix d = build_design(ds, oracle::all_rows(ds));
    const LocalModel m = fit_ols(d, ds.target());
    const Matrix s = score_contributions(m, d, ds.target());
    for (double v : s.a) CHECK(std::abs(v) < 1e-8);
}

TEST_CASE("OLS optimality: perturbing coefficients never lowers the SSE") {
    Rng rng(55);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 60;
        std::vector<double> z1(n), z2(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            z1[i] = rng.normal();
            z2[i] = rng.normal();
            y[i] = 1.0 - z1[i] + 0.5 * z2[i] + 0.3 * rng.normal();
        }
        const Dataset ds = oracle::simple_dataset({std::vector<double>(n, 0.0)}, {z1, z2}, y);
        const DesignMatrix d = build_design(ds, oracle::all_rows(ds));
        const LocalModel m = fit_ols(d, y);
        const auto sse_for = [&](const std::vector<double>& theta) {
            double sse = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double pred = 0.0;
                for (std::size_t j = 0; j < theta.size(); ++j) pred += d.X(i, j) * theta[j];
                sse += (y[i] - pred) * (y[i] - pred);
            }
            return sse;
        };
        for (std::size_t j = 0; j < m.theta.size(); ++j) {
            for (double delta : {1e-4, -1e-4}) {
                std::vector<double> perturbed = m.theta;
                perturbed[j] += delta;
                CHECK(sse_for(perturbed) >= m.sse - 1e-12);
            }
        }
    }
}

TEST_CASE("relabeling categorical levels leaves predictions unchanged") {
    std::vector<double> truth;
    const Dataset ds = mixed_regressor_dataset(90, 71, &truth);
    const DesignMatrix d = build_design(ds, oracle::all_rows(ds));
    const LocalModel m = fit_ols(d, ds.target());
    const std::vector<double> before = predict(m, d);

    // rename levels but keep their order and the codes
    std::vector<Column> cols;
    std::vector<Role> roles;
    for (std::size_t i = 0; i < ds.n_cols(); ++i) {
        Column c = ds.col(i);
        if (c.kind == ColumnKind::Categorical)
            for (auto& level : c.levels) level = "L" + level;
        cols.push_back(std::move(c));
        roles.push_back(ds.role(i));
    }
    const Dataset renamed(std::move(cols), std::move(roles));
    const DesignMatrix d2 = build_design(renamed, oracle::all_rows(renamed));
    const LocalModel m2 = fit_ols(d2, renamed.target());
    const std::vector<double> after = predict(m2, d2);
    for (std::size_t i = 0; i < before.size(); ++i)
        CHECK(before[i] == doctest::Approx(after[i]).epsilon(1e-12));
}

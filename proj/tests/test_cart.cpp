#include <doctest.h>

#include <cmath>

#include "mobdrf/cart.hpp"
#include "mobdrf/rng.hpp"
#include "mobdrf/synth.hpp"
#include "oracles.hpp"

using namespace mobdrf;

TEST_CASE("cp=1 yields a single leaf predicting the mean") {
    const SynthResult data = synth_subgroups(synth_preset("split1", 120, 2, 1, 0.2, 6));
    CartConfig cfg;
    cfg.cp = 1.0;
    cfg.min_node_size = 1;
    const CartTree tree = grow_cart(data.data, oracle::all_rows(data.data), cfg);
    CHECK(tree.n_leaves() == 1);
    double mean = 0;
    for (double v : data.data.target()) mean += v;
    mean /= static_cast<double>(data.data.n_rows());
    CHECK(tree.predict_row(data.data, 0) == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("cp=0 with unlimited depth drives training error to zero on distinct inputs") {
    Rng rng(19);
    const std::size_t n = 90;
    std::vector<double> x(n), z(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform01();  // almost surely all distinct
        z[i] = rng.normal();
        y[i] = rng.normal();
    }
    const Dataset ds = oracle::simple_dataset({x}, {z}, y);
    CartConfig cfg;
    cfg.cp = 0.0;
    cfg.min_node_size = 1;
    cfg.max_depth = -1;
    const CartTree tree = grow_cart(ds, oracle::all_rows(ds), cfg);
    const std::vector<double> pred = tree.predict(ds);
    for (std::size_t i = 0; i < n; ++i) CHECK(pred[i] == doctest::Approx(y[i]).epsilon(1e-10));
}

TEST_CASE("step-function root threshold matches the exhaustive scan oracle") {
    Rng rng(4);
    const std::size_t n = 200;
    std::vector<double> x(n), z(n, 0.0), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform01();
        y[i] = x[i] > 0.5 ? 1.0 : 0.0;
    }
    const Dataset ds = oracle::simple_dataset({x}, {z}, y);
    CartConfig cfg;
    cfg.cp = 0.0;
    cfg.min_node_size = 5;
    const CartTree tree = grow_cart(ds, oracle::all_rows(ds), cfg);
    REQUIRE(!tree.nodes()[0].is_leaf());
    const double oracle_thr = oracle::cart_threshold_scan(x, y, cfg.min_node_size);
    CHECK(tree.nodes()[0].cond.threshold == doctest::Approx(oracle_thr).epsilon(1e-12));
    // and it lands within one observation gap of the true step
    double below = -1e300, above = 1e300;
    for (double v : x) {
        if (v <= 0.5) below = std::max(below, v);
        else above = std::min(above, v);
    }
    CHECK(std::abs(tree.nodes()[0].cond.threshold - 0.5) <= (above - below));
}

TEST_CASE("cart splits on regression columns too") {
    // signal lives in the regression feature; CART treats it as a plain input
    Rng rng(12);
    const std::size_t n = 150;
    std::vector<double> x(n), z(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform01();
        z[i] = rng.uniform01();
        y[i] = z[i] > 0.4 ? 3.0 : -3.0;
    }
    const Dataset ds = oracle::simple_dataset({x}, {z}, y);
    CartConfig cfg;
    cfg.cp = 0.0;
    cfg.min_node_size = 10;
    cfg.max_depth = 1;
    const CartTree tree = grow_cart(ds, oracle::all_rows(ds), cfg);
    REQUIRE(!tree.nodes()[0].is_leaf());
    CHECK(tree.nodes()[0].cond.variable == "z1");
}

TEST_CASE("categorical splits order levels by mean response") {
    const std::size_t n = 120;
    std::vector<std::string> g(n);
    std::vector<double> z(n, 0.0), y(n);
    Rng rng(3);
    for (std::size_t i = 0; i < n; ++i) {
        g[i] = i % 3 == 0 ? "a" : (i % 3 == 1 ? "b" : "c");
        y[i] = (g[i] == "b" ? 5.0 : 0.0) + 0.01 * rng.normal();
    }
    std::vector<Column> cols{Column::categorical_from_strings("g", g),
                             Column::numeric("z1", z), Column::numeric("y", y)};
    std::vector<Role> roles{Role::Partitioning, Role::Regression, Role::Target};
    const Dataset ds(std::move(cols), std::move(roles));
    CartConfig cfg;
    cfg.cp = 0.0;
    cfg.min_node_size = 5;
    cfg.max_depth = 1;
    const CartTree tree = grow_cart(ds, oracle::all_rows(ds), cfg);
    REQUIRE(!tree.nodes()[0].is_leaf());
    const SplitCondition& cond = tree.nodes()[0].cond;
    REQUIRE(cond.categorical);
    // "b" must sit alone on one side
    const bool b_left = cond.left_levels == std::vector<std::string>{"b"};
    const bool b_right = cond.right_levels == std::vector<std::string>{"b"};
    CHECK((b_left || b_right));
}

#include <doctest.h>

#include <sstream>

#include "mobdrf/linmod.hpp"
#include "mobdrf/synth.hpp"
#include "oracles.hpp"

using namespace mobdrf;

TEST_CASE("noiseless single region is exactly constant plus linear term") {
    SynthSpec spec = synth_preset("one", 50, 2, 2, 0.0, 11);
    spec.betas = {{2.5, 0.0, 0.0}};  // y = 2.5 exactly
    const SynthResult r = synth_subgroups(spec);
    for (double v : r.data.col("y").num) CHECK(v == 2.5);
}

TEST_CASE("noiseless data equals the planted piecewise-linear function rowwise") {
    const SynthSpec spec = synth_preset("xor2", 300, 3, 2, 0.0, 4);
    const SynthResult r = synth_subgroups(spec);
    for (std::size_t i = 0; i < r.data.n_rows(); ++i) {
        const int region = planted_region_of(spec, r.data, i);
        CHECK(region == r.region[i]);
        const auto& beta = spec.betas[static_cast<std::size_t>(region)];
        double expect = beta[0];
        for (int j = 0; j < spec.q; ++j)
            expect += beta[static_cast<std::size_t>(j) + 1] *
                      r.data.col("z" + std::to_string(j + 1)).num[i];
        CHECK(r.data.col("y").num[i] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("within-region OLS recovers the planted coefficients at sigma=0") {
    const SynthSpec spec = synth_preset("split1", 400, 2, 2, 0.0, 21);
    const SynthResult r = synth_subgroups(spec);
    for (int region = 0; region < spec.n_regions(); ++region) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < r.data.n_rows(); ++i)
            if (r.region[i] == region) rows.push_back(i);
        REQUIRE(rows.size() > 10);
        const DesignMatrix d = build_design(r.data, rows);
        const LocalModel m = fit_ols(d, gather(r.data.target(), rows));
        const auto& beta = spec.betas[static_cast<std::size_t>(region)];
        for (std::size_t j = 0; j < beta.size(); ++j)
            CHECK(std::abs(m.theta[j] - beta[j]) <= 1e-8);
    }
}

TEST_CASE("seeded synthesis is byte-identical") {
    const SynthSpec spec = synth_preset("xor2", 120, 2, 2, 0.4, 77);
    const SynthResult a = synth_subgroups(spec);
    const SynthResult b = synth_subgroups(spec);
    std::ostringstream ca, cb;
    write_csv(a.data, ca);
    write_csv(b.data, cb);
    CHECK(ca.str() == cb.str());
    CHECK(a.region == b.region);
}

TEST_CASE("xor2 draws binary partitioning variables") {
    const SynthResult r = synth_subgroups(synth_preset("xor2", 200, 2, 1, 0.1, 5));
    for (const char* name : {"x1", "x2"})
        for (double v : r.data.col(name).num) CHECK((v == 0.0 || v == 1.0));
}

TEST_CASE("invalid specs are rejected") {
    SynthSpec bad = synth_preset("one", 10, 1, 1, 0.1, 1);
    bad.betas = {{1.0}};  // needs q+1 = 2 entries
    CHECK_THROWS_AS(synth_subgroups(bad), DataError);
    SynthSpec neg = synth_preset("one", 10, 1, 1, -0.5, 1);
    CHECK_THROWS_AS(synth_subgroups(neg), DataError);
    CHECK_THROWS_AS(synth_preset("nope", 10, 1, 1, 0.1, 1), DataError);
}

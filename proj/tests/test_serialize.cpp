#include <doctest.h>

#include "mobdrf/serialize.hpp"
#include "mobdrf/stack.hpp"
#include "mobdrf/synth.hpp"
#include "oracles.hpp"

using namespace mobdrf;

TEST_CASE("tree serialization round trips exactly") {
    const SynthResult data = synth_subgroups(synth_preset("split1", 300, 3, 2, 0.1, 13));
    MobConfig cfg;
    cfg.max_depth = 3;
    cfg.stability.alpha = 0.1;
    cfg.stability.seed = 5;
    const MobTree tree = grow(data.data, oracle::all_rows(data.data), cfg);

    const std::string text = tree_to_json(tree);
    const MobTree back = tree_from_json(text);
    CHECK(tree_to_json(back) == text);  // byte-stable after one round trip
    REQUIRE(back.nodes().size() == tree.nodes().size());
    for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
        const MobNode& a = tree.nodes()[i];
        const MobNode& b = back.nodes()[i];
        CHECK(a.is_leaf() == b.is_leaf());
        if (!a.is_leaf()) {
            // thresholds bit-exact
            CHECK(a.cond.threshold == b.cond.threshold);
            CHECK(a.cond.left_levels == b.cond.left_levels);
        } else {
            CHECK(a.model.theta == b.model.theta);
            CHECK(a.leaf_id == b.leaf_id);
        }
    }
    // same predictions through the deserialized tree
    CHECK(tree.predict(data.data) == back.predict(data.data));
    CHECK_THROWS_AS(tree_from_json("{\"format\":\"other\"}"), DataError);
}

TEST_CASE("bundle serialization round trips models and predictions") {
    const SynthResult data = synth_subgroups(synth_preset("xor2", 300, 2, 1, 0.4, 21));
    StackConfig cfg;
    cfg.layers = {LayerSpec{4, 3, 0.1}};
    cfg.patch.col_fraction = 1.0;
    cfg.early_stop = false;
    cfg.seed = 3;
    MobDrfModel model = fit_stack(data.data, cfg);
    FinalConfig final_cfg;
    for (Learner l : {Learner::Mob, Learner::Cart, Learner::Lasso})
        fit_final(model, data.data, l, model.n_layers(), final_cfg);

    const std::string text = bundle_to_json(model);
    const MobDrfModel back = bundle_from_json(text);
    CHECK(bundle_to_json(back) == text);
    CHECK(back.n_layers() == model.n_layers());
    CHECK(back.target == model.target);
    CHECK(schema_hash(back.schema) == schema_hash(model.schema));
    CHECK(back.config.seed == model.config.seed);

    for (const FinalModel& fm : model.finals()) {
        const FinalModel* other = back.find_final(fm.learner, fm.layer);
        REQUIRE(other);
        CHECK(predict_final(model, fm, data.data) == predict_final(back, *other, data.data));
    }
}

TEST_CASE("schema hash tracks names, roles and kinds") {
    Schema a;
    a.entries = {{"x", {Role::Partitioning, ColumnKind::Numeric}},
                 {"y", {Role::Target, ColumnKind::Numeric}}};
    Schema b = a;
    CHECK(schema_hash(a) == schema_hash(b));
    b.entries[0].second.role = Role::Regression;
    CHECK(schema_hash(a) != schema_hash(b));
    Schema c = a;
    c.entries[0].first = "renamed";
    CHECK(schema_hash(a) != schema_hash(c));
    Schema d = a;
    d.entries[0].second.kind = ColumnKind::Categorical;
    CHECK(schema_hash(a) != schema_hash(d));
}

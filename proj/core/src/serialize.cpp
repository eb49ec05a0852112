#include "mobdrf/serialize.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mobdrf {

using nlohmann::json;

namespace {

constexpr int kBundleVersion = 1;
constexpr int kTreeVersion = 1;

json model_to_json(const LocalModel& m) {
    json j;
    j["names"] = m.column_map;
    j["theta"] = m.theta;
    j["n"] = m.n_fit;
    j["sse"] = m.sse;
    j["dropped"] = m.dropped_columns;
    return j;
}

LocalModel model_from_json(const json& j) {
    LocalModel m;
    m.column_map = j.at("names").get<std::vector<std::string>>();
    m.theta = j.at("theta").get<std::vector<double>>();
    m.n_fit = j.at("n").get<std::size_t>();
    m.sse = j.at("sse").get<double>();
    m.dropped_columns = j.at("dropped").get<std::vector<std::string>>();
    if (m.theta.size() != m.column_map.size())
        throw DataError("model: theta/name length mismatch");
    return m;
}

json cond_to_json(const SplitCondition& c) {
    json j;
    j["var"] = c.variable;
    if (c.categorical) {
        j["left_levels"] = c.left_levels;
        j["right_levels"] = c.right_levels;
    } else {
        j["threshold"] = c.threshold;
    }
    return j;
}

SplitCondition cond_from_json(const json& j) {
    SplitCondition c;
    c.variable = j.at("var").get<std::string>();
    if (j.contains("threshold")) {
        c.categorical = false;
        c.threshold = j.at("threshold").get<double>();
    } else {
        c.categorical = true;
        c.left_levels = j.at("left_levels").get<std::vector<std::string>>();
        c.right_levels = j.at("right_levels").get<std::vector<std::string>>();
    }
    return c;
}

json mob_node_to_json(const std::vector<MobNode>& nodes, int idx) {
    const MobNode& n = nodes[static_cast<std::size_t>(idx)];
    json j;
    j["n"] = n.n_rows;
    if (n.is_leaf()) {
        j["leaf"] = n.leaf_id;
        j["model"] = model_to_json(n.model);
    } else {
        j["split"] = cond_to_json(n.cond);
        j["left"] = mob_node_to_json(nodes, n.left);
        j["right"] = mob_node_to_json(nodes, n.right);
    }
    return j;
}

int mob_node_from_json(const json& j, std::vector<MobNode>& nodes) {
    MobNode n;
    n.n_rows = j.at("n").get<std::size_t>();
    const auto self = static_cast<int>(nodes.size());
    nodes.push_back(n);
    if (j.contains("leaf")) {
        nodes[static_cast<std::size_t>(self)].leaf_id = j.at("leaf").get<int>();
        nodes[static_cast<std::size_t>(self)].model = model_from_json(j.at("model"));
    } else {
        nodes[static_cast<std::size_t>(self)].cond = cond_from_json(j.at("split"));
        const int left = mob_node_from_json(j.at("left"), nodes);
        const int right = mob_node_from_json(j.at("right"), nodes);
        nodes[static_cast<std::size_t>(self)].left = left;
        nodes[static_cast<std::size_t>(self)].right = right;
    }
    return self;
}

json design_to_json(const DesignInfo& info) {
    json terms = json::array();
    for (const auto& t : info.terms) {
        json jt;
        jt["column"] = t.column;
        if (t.is_dummy) jt["level"] = t.level;
        terms.push_back(jt);
    }
    json j;
    j["names"] = info.col_names;
    j["terms"] = terms;
    return j;
}

DesignInfo design_from_json(const json& j) {
    DesignInfo info;
    info.col_names = j.at("names").get<std::vector<std::string>>();
    for (const auto& jt : j.at("terms")) {
        DesignInfo::Term t;
        t.column = jt.at("column").get<std::string>();
        if (jt.contains("level")) {
            t.is_dummy = true;
            t.level = jt.at("level").get<std::string>();
        }
        info.terms.push_back(std::move(t));
    }
    if (info.terms.size() != info.col_names.size())
        throw DataError("design: term/name length mismatch");
    return info;
}

json tree_to_json_obj(const MobTree& tree) {
    json j;
    j["format"] = "mobdrf-tree";
    j["version"] = kTreeVersion;
    j["target"] = tree.target_name();
    j["design"] = design_to_json(tree.design());
    j["root"] = mob_node_to_json(tree.nodes(), 0);
    return j;
}

MobTree tree_from_json_obj(const json& j) {
    if (j.value("format", "") != "mobdrf-tree")
        throw DataError("not a mobdrf tree document");
    if (j.at("version").get<int>() != kTreeVersion)
        throw DataError("unsupported tree version");
    std::vector<MobNode> nodes;
    mob_node_from_json(j.at("root"), nodes);
    return MobTree::from_parts(std::move(nodes), design_from_json(j.at("design")),
                               j.at("target").get<std::string>());
}

json cart_node_to_json(const std::vector<CartNode>& nodes, int idx) {
    const CartNode& n = nodes[static_cast<std::size_t>(idx)];
    json j;
    j["n"] = n.n_rows;
    if (n.is_leaf()) {
        j["value"] = n.value;
    } else {
        j["split"] = cond_to_json(n.cond);
        j["left"] = cart_node_to_json(nodes, n.left);
        j["right"] = cart_node_to_json(nodes, n.right);
    }
    return j;
}

int cart_node_from_json(const json& j, std::vector<CartNode>& nodes) {
    CartNode n;
    n.n_rows = j.at("n").get<std::size_t>();
    const auto self = static_cast<int>(nodes.size());
    nodes.push_back(n);
    if (j.contains("value")) {
        nodes[static_cast<std::size_t>(self)].value = j.at("value").get<double>();
    } else {
        nodes[static_cast<std::size_t>(self)].cond = cond_from_json(j.at("split"));
        const int left = cart_node_from_json(j.at("left"), nodes);
        const int right = cart_node_from_json(j.at("right"), nodes);
        nodes[static_cast<std::size_t>(self)].left = left;
        nodes[static_cast<std::size_t>(self)].right = right;
    }
    return self;
}

json schema_to_json(const Schema& schema) {
    json arr = json::array();
    for (const auto& [name, entry] : schema.entries) {
        json j;
        j["name"] = name;
        j["role"] = role_name(entry.role);
        j["kind"] = kind_name(entry.kind);
        arr.push_back(j);
    }
    return arr;
}

Schema schema_from_json(const json& arr) {
    Schema s;
    for (const auto& j : arr) {
        SchemaEntry e;
        const std::string role = j.at("role").get<std::string>();
        if (role == "partition") e.role = Role::Partitioning;
        else if (role == "regress") e.role = Role::Regression;
        else if (role == "target") e.role = Role::Target;
        else if (role == "ignore") e.role = Role::Ignored;
        else throw DataError("bundle: unknown role '" + role + "'");
        e.kind = j.at("kind").get<std::string>() == "cat" ? ColumnKind::Categorical
                                                          : ColumnKind::Numeric;
        s.entries.emplace_back(j.at("name").get<std::string>(), e);
    }
    return s;
}

json config_to_json(const StackConfig& cfg) {
    json layers = json::array();
    for (const auto& l : cfg.layers) {
        json j;
        j["trees"] = l.trees;
        j["max_depth"] = l.max_depth;
        j["alpha"] = l.alpha;
        layers.push_back(j);
    }
    json j;
    j["layers"] = layers;
    j["row_fraction"] = cfg.patch.row_fraction;
    j["col_fraction"] = cfg.patch.col_fraction;
    j["min_node_size"] = cfg.min_node_size;
    j["permutations"] = cfg.permutations;
    j["trim"] = cfg.trim;
    j["early_stop"] = cfg.early_stop;
    j["early_stop_delta"] = cfg.early_stop_delta;
    j["validation_fraction"] = cfg.validation_fraction;
    j["probe_max_depth"] = cfg.probe_max_depth;
    j["seed"] = cfg.seed;
    return j;
}

StackConfig config_from_json(const json& j) {
    StackConfig cfg;
    cfg.layers.clear();
    for (const auto& jl : j.at("layers")) {
        LayerSpec l;
        l.trees = jl.at("trees").get<int>();
        l.max_depth = jl.at("max_depth").get<int>();
        l.alpha = jl.at("alpha").get<double>();
        cfg.layers.push_back(l);
    }
    cfg.patch.row_fraction = j.at("row_fraction").get<double>();
    cfg.patch.col_fraction = j.at("col_fraction").get<double>();
    cfg.min_node_size = j.at("min_node_size").get<std::size_t>();
    cfg.permutations = j.at("permutations").get<int>();
    cfg.trim = j.at("trim").get<double>();
    cfg.early_stop = j.at("early_stop").get<bool>();
    cfg.early_stop_delta = j.at("early_stop_delta").get<double>();
    cfg.validation_fraction = j.at("validation_fraction").get<double>();
    cfg.probe_max_depth = j.at("probe_max_depth").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

} // namespace

std::string tree_to_json(const MobTree& tree) { return tree_to_json_obj(tree).dump(2) + "\n"; }

MobTree tree_from_json(const std::string& text) {
    return tree_from_json_obj(json::parse(text));
}

std::string schema_hash(const Schema& schema) {
    std::string canon;
    for (const auto& [name, entry] : schema.entries)
        canon += name + "\x1f" + role_name(entry.role) + "\x1f" + kind_name(entry.kind) + "\x1e";
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a 64
    for (unsigned char c : canon) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string bundle_to_json(const MobDrfModel& model) {
    json j;
    j["format"] = "mobdrf-bundle";
    j["version"] = kBundleVersion;
    j["target"] = model.target;
    j["schema"] = schema_to_json(model.schema);
    j["schema_hash"] = schema_hash(model.schema);
    j["config"] = config_to_json(model.config);
    j["regression_design"] = design_to_json(model.regression_design);

    json layers = json::array();
    for (int l = 1; l <= model.n_layers(); ++l) {
        const RuleForest& forest = model.layer(l);
        json trees = json::array();
        for (int t = 0; t < forest.size(); ++t) {
            json jt = tree_to_json_obj(forest.trees[static_cast<std::size_t>(t)]);
            jt["name"] = forest.tree_name(t);
            jt["patch_seed"] = forest.meta[static_cast<std::size_t>(t)].patch_seed;
            jt["patch_depth"] = forest.meta[static_cast<std::size_t>(t)].max_depth;
            jt["patch_columns"] = forest.meta[static_cast<std::size_t>(t)].columns;
            trees.push_back(std::move(jt));
        }
        json jl;
        jl["layer"] = l;
        jl["trees"] = std::move(trees);
        layers.push_back(std::move(jl));
    }
    j["layers"] = std::move(layers);

    json finals = json::array();
    for (const FinalModel& f : model.finals()) {
        json jf;
        jf["learner"] = learner_name(f.learner);
        jf["layer"] = f.layer;
        if (const auto* tree = std::get_if<MobTree>(&f.model)) {
            jf["mob"] = tree_to_json_obj(*tree);
        } else if (const auto* cart = std::get_if<CartTree>(&f.model)) {
            json jc;
            jc["root"] = cart_node_to_json(cart->nodes(), 0);
            jf["cart"] = std::move(jc);
        } else {
            const auto& lasso = std::get<LassoModel>(f.model);
            json jl;
            jl["lambda"] = lasso.lambda;
            jl["design"] = design_to_json(lasso.design);
            jl["model"] = model_to_json(lasso.model);
            jf["lasso"] = std::move(jl);
        }
        finals.push_back(std::move(jf));
    }
    j["final_models"] = std::move(finals);
    return j.dump(2) + "\n";
}

MobDrfModel bundle_from_json(const std::string& text) {
    const json j = json::parse(text);
    if (j.value("format", "") != "mobdrf-bundle")
        throw DataError("not a mobdrf bundle document");
    if (j.at("version").get<int>() != kBundleVersion)
        throw DataError("unsupported bundle version");

    MobDrfModel model;
    model.target = j.at("target").get<std::string>();
    model.schema = schema_from_json(j.at("schema"));
    model.config = config_from_json(j.at("config"));
    model.regression_design = design_from_json(j.at("regression_design"));

    for (const auto& jl : j.at("layers")) {
        RuleForest forest;
        forest.layer_index = jl.at("layer").get<int>();
        for (const auto& jt : jl.at("trees")) {
            forest.trees.push_back(tree_from_json_obj(jt));
            ForestTreeMeta meta;
            meta.patch_seed = jt.at("patch_seed").get<std::uint64_t>();
            meta.max_depth = jt.at("patch_depth").get<int>();
            meta.columns = jt.at("patch_columns").get<std::vector<std::string>>();
            forest.meta.push_back(std::move(meta));
        }
        model.layers().push_back(std::move(forest));
    }
    for (const auto& jf : j.at("final_models")) {
        FinalModel f;
        const auto learner = learner_from_name(jf.at("learner").get<std::string>());
        if (!learner) throw DataError("bundle: unknown learner");
        f.learner = *learner;
        f.layer = jf.at("layer").get<int>();
        if (jf.contains("mob")) {
            f.model = tree_from_json_obj(jf.at("mob"));
        } else if (jf.contains("cart")) {
            std::vector<CartNode> nodes;
            cart_node_from_json(jf.at("cart").at("root"), nodes);
            f.model = CartTree::from_parts(std::move(nodes));
        } else {
            LassoModel lasso;
            lasso.lambda = jf.at("lasso").at("lambda").get<double>();
            lasso.design = design_from_json(jf.at("lasso").at("design"));
            lasso.model = model_from_json(jf.at("lasso").at("model"));
            f.model = std::move(lasso);
        }
        model.finals().push_back(std::move(f));
    }
    return model;
}

void save_bundle(const MobDrfModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write bundle: " + path);
    out << bundle_to_json(model);
    if (!out) throw DataError("failed writing bundle: " + path);
}

MobDrfModel load_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open bundle: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return bundle_from_json(buf.str());
}

} // namespace mobdrf

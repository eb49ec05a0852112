// mobdrf command line: synth | train | evaluate | rules | encode | predict
//
// One global --seed fans out to every random consumer (splits, patches,
// permutation tests), so rerunning a command with the same arguments and
// inputs reproduces its outputs byte for byte, regardless of --threads.

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "mobdrf/dataset.hpp"
#include "mobdrf/rng.hpp"
#include "mobdrf/rules.hpp"
#include "mobdrf/serialize.hpp"
#include "mobdrf/stack.hpp"
#include "mobdrf/synth.hpp"

namespace {

using namespace mobdrf;

constexpr std::uint64_t kDefaultSeed = 20240611;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) out.push_back(item);
    return out;
}

int parse_int(const std::string& s, const std::string& what) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw DataError("invalid " + what + ": '" + s + "'");
    return v;
}

double parse_real(const std::string& s, const std::string& what) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw DataError("invalid " + what + ": '" + s + "'");
    return v;
}

void require_readable(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input file: " + path);
}

void require_writable(const std::string& path) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw DataError("cannot write output file: " + path);
}

Dataset load_input(const std::string& csv, const std::string& schema) {
    LoadReport report;
    Dataset ds = load_csv(csv, schema, &report);
    if (report.rows_dropped > 0)
        std::cerr << csv << ": dropped " << report.rows_dropped << " of " << report.rows_read
                  << " rows with missing values\n";
    return ds;
}

void check_schema(const MobDrfModel& model, const Dataset& ds, const std::string& what) {
    Schema loaded;
    for (std::size_t i = 0; i < ds.n_cols(); ++i)
        loaded.entries.emplace_back(ds.col(i).name, SchemaEntry{ds.role(i), ds.col(i).kind});
    if (schema_hash(loaded) != schema_hash(model.schema))
        throw DataError(what + ": schema does not match the bundle (hash " +
                        schema_hash(loaded) + " vs " + schema_hash(model.schema) + ")");
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string out;
    std::size_t n = 500;
    int p = 3, q = 3;
    std::string regions = "split1";
    double noise = 0.1;
    std::uint64_t seed = kDefaultSeed;
};

int cmd_synth(const SynthArgs& a) {
    require_writable(a.out + ".csv");
    require_writable(a.out + "_regions.csv");
    require_writable(a.out + ".schema");

    const SynthSpec spec = synth_preset(a.regions, a.n, a.p, a.q, a.noise, a.seed);
    const SynthResult result = synth_subgroups(spec);

    write_csv_file(result.data, a.out + ".csv");
    write_schema_file(result.data, a.out + ".schema");
    {
        std::ofstream out(a.out + "_regions.csv", std::ios::binary);
        if (!out) throw DataError("cannot write " + a.out + "_regions.csv");
        out << "region\n";
        for (int r : result.region) out << "R_" << (r + 1) << "\n";
    }
    std::cout << "wrote " << a.out << ".csv (" << result.data.n_rows() << " rows), "
              << a.out << "_regions.csv, " << a.out << ".schema\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string data, schema, out, log;
    int layers = 1;
    std::string trees = "50";
    std::string depths = "5";
    std::string alphas;
    double alpha = 0.1;
    double row_fraction = 0.632, col_fraction = 0.5;
    std::size_t min_node_size = 20;
    int perms = 199;
    double trim = 0.1;
    bool no_early_stop = false;
    double early_stop_delta = 1e-4;
    double val_fraction = 0.2;
    int probe_depth = 2;
    std::string learners = "mob,cart,lasso";
    std::string final_layers = "all";
    int final_depth = 3;
    double final_alpha = 0.1;
    std::size_t final_min_node = 20;
    int cart_depth = -1;
    std::size_t cart_min_node = 5;
    double cp = 0.0;
    std::string lambdas = "0.1";
    std::uint64_t seed = kDefaultSeed;
    int threads = 0;
};

StackConfig stack_config_from(const TrainArgs& a) {
    StackConfig cfg;
    cfg.layers.clear();
    const std::vector<std::string> trees = split_list(a.trees);
    const std::vector<std::string> depths = split_list(a.depths);
    const std::vector<std::string> alphas =
        a.alphas.empty() ? std::vector<std::string>{} : split_list(a.alphas);
    for (int l = 0; l < a.layers; ++l) {
        LayerSpec spec;
        spec.trees = parse_int(trees[std::min<std::size_t>(l, trees.size() - 1)], "--trees");
        spec.max_depth =
            parse_int(depths[std::min<std::size_t>(l, depths.size() - 1)], "--depths");
        spec.alpha = alphas.empty()
                         ? a.alpha
                         : parse_real(alphas[std::min<std::size_t>(l, alphas.size() - 1)],
                                      "--alphas");
        cfg.layers.push_back(spec);
    }
    cfg.patch.row_fraction = a.row_fraction;
    cfg.patch.col_fraction = a.col_fraction;
    cfg.min_node_size = a.min_node_size;
    cfg.permutations = a.perms;
    cfg.trim = a.trim;
    cfg.early_stop = !a.no_early_stop;
    cfg.early_stop_delta = a.early_stop_delta;
    cfg.validation_fraction = a.val_fraction;
    cfg.probe_max_depth = a.probe_depth;
    cfg.seed = a.seed;
    cfg.threads = a.threads > 0 ? a.threads
                                : std::max(1u, std::thread::hardware_concurrency());
    return cfg;
}

int cmd_train(const TrainArgs& a) {
    require_readable(a.data);
    require_readable(a.schema);
    require_writable(a.out);
    const std::string log_path = a.log.empty() ? a.out + ".log" : a.log;
    require_writable(log_path);

    const Dataset train = load_input(a.data, a.schema);
    const StackConfig cfg = stack_config_from(a);

    FitLog log;
    MobDrfModel model = fit_stack(train, cfg, &log);

    FinalConfig final_cfg;
    final_cfg.mob.max_depth = a.final_depth;
    final_cfg.mob.min_node_size = a.final_min_node;
    final_cfg.mob.stability.alpha = a.final_alpha;
    final_cfg.mob.stability.permutations = a.perms;
    final_cfg.mob.stability.trim = a.trim;
    final_cfg.cart.max_depth = a.cart_depth;
    final_cfg.cart.min_node_size = a.cart_min_node;
    final_cfg.cart.cp = a.cp;
    final_cfg.lambdas.clear();
    for (const std::string& l : split_list(a.lambdas))
        final_cfg.lambdas.push_back(parse_real(l, "--lambdas"));

    std::vector<int> layers;
    if (a.final_layers == "all") {
        for (int l = 0; l <= model.n_layers(); ++l) layers.push_back(l);
    } else {
        for (const std::string& l : split_list(a.final_layers))
            layers.push_back(parse_int(l, "--final-layers"));
    }
    for (const std::string& name : split_list(a.learners)) {
        const auto learner = learner_from_name(name);
        if (!learner) throw DataError("unknown learner '" + name + "'");
        for (int l : layers) fit_final(model, train, *learner, l, final_cfg);
    }

    save_bundle(model, a.out);

    std::ostringstream logtext;
    logtext << "train: " << a.data << " (" << train.n_rows() << " rows)\n";
    logtext << "seed: " << a.seed << "\n";
    for (const LayerLog& l : log.layers) {
        char mae[32];
        std::snprintf(mae, sizeof(mae), "%.6f", l.validation_mae);
        logtext << "layer " << l.layer << ": validation MAE " << mae << " (" << l.decision
                << ")\n";
    }
    for (const std::string& w : log.warnings) logtext << "warning: " << w << "\n";
    logtext << "stored layers: " << log.stored_layers << "\n";
    logtext << "final models: " << model.finals().size() << "\n";
    {
        std::ofstream out(log_path, std::ios::binary | std::ios::trunc);
        out << logtext.str();
    }
    std::cout << logtext.str();
    for (const std::string& w : log.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "wrote " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
    std::string bundle, train, test, schema, out;
};

int cmd_evaluate(const EvaluateArgs& a) {
    require_readable(a.bundle);
    require_readable(a.train);
    require_readable(a.test);
    require_readable(a.schema);
    require_writable(a.out + ".csv");
    require_writable(a.out + ".txt");

    const MobDrfModel model = load_bundle(a.bundle);
    const Dataset train = load_input(a.train, a.schema);
    const Dataset test = load_input(a.test, a.schema);
    check_schema(model, train, a.train);
    check_schema(model, test, a.test);

    const EvalReport report = evaluate(model, train, test);
    {
        std::ofstream out(a.out + ".csv", std::ios::binary | std::ios::trunc);
        out << eval_report_csv(report);
    }
    {
        std::ofstream out(a.out + ".txt", std::ios::binary | std::ios::trunc);
        out << eval_report_text(report);
    }
    std::cout << eval_report_text(report);
    std::cout << "wrote " << a.out << ".csv, " << a.out << ".txt\n";
    return 0;
}

// ---------------------------------------------------------------------------
// rules
// ---------------------------------------------------------------------------

struct RulesArgs {
    std::string bundle, data, schema, out;
    std::string learner = "mob";
    int layer = -1;  // -1: deepest layer with a final model of this learner
    bool simplify = false;
};

int cmd_rules(const RulesArgs& a) {
    require_readable(a.bundle);
    require_readable(a.data);
    require_readable(a.schema);
    require_writable(a.out);

    const MobDrfModel model = load_bundle(a.bundle);
    const Dataset reference = load_input(a.data, a.schema);
    check_schema(model, reference, a.data);

    const auto learner = learner_from_name(a.learner);
    if (!learner) throw DataError("unknown learner '" + a.learner + "'");

    int layer = a.layer;
    if (layer < 0) {
        for (const FinalModel& f : model.finals())
            if (f.learner == *learner) layer = std::max(layer, f.layer);
        if (layer < 0)
            throw DataError("bundle has no final " + a.learner + " model");
    }
    const FinalModel* fm = model.find_final(*learner, layer);
    if (!fm)
        throw DataError("bundle has no final " + a.learner + " model at layer " +
                        std::to_string(layer));

    std::ostringstream text;
    text << "# mobdrf rules: learner " << a.learner << ", layer " << layer << "\n";
    text << "# reference rows: " << reference.n_rows() << "\n";

    if (*learner == Learner::Lasso) {
        // no leaf rules to export; list the nonzero one-hot atoms with weights
        const auto& lasso = std::get<LassoModel>(fm->model);
        text << "# nonzero coefficients of the L1 model (lambda "
             << format_double(lasso.lambda) << ")\n";
        char coef[32];
        std::snprintf(coef, sizeof(coef), "%.6f", lasso.model.theta[0]);
        text << "coef: (Intercept) " << coef << "\n";
        for (std::size_t j = 1; j < lasso.model.theta.size(); ++j) {
            if (lasso.model.theta[j] == 0.0) continue;
            std::snprintf(coef, sizeof(coef), "%.6f", lasso.model.theta[j]);
            const DesignInfo::Term& term = lasso.design.terms[j];
            if (term.is_dummy)
                text << "coef: (" << term.column << " = " << term.level << ") " << coef << "\n";
            else
                text << "coef: " << term.column << " " << coef << "\n";
        }
    } else if (*learner == Learner::Mob) {
        const std::vector<SubgroupReport> reports =
            subgroup_reports(model, *fm, reference, a.simplify);
        for (const SubgroupReport& r : reports) {
            text << "\n" << render_subgroup_report(r, reference.n_rows());
        }
    } else {
        throw DataError("rules export supports the mob and lasso learners");
    }

    std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + a.out);
    out << text.str();
    std::cout << "wrote " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// encode
// ---------------------------------------------------------------------------

struct EncodeArgs {
    std::string bundle, data, schema, out;
    int layer = -1;  // -1: deepest stored layer
};

int cmd_encode(const EncodeArgs& a) {
    require_readable(a.bundle);
    require_readable(a.data);
    require_readable(a.schema);
    require_writable(a.out + ".csv");
    require_writable(a.out + ".schema");

    const MobDrfModel model = load_bundle(a.bundle);
    const Dataset ds = load_input(a.data, a.schema);
    check_schema(model, ds, a.data);

    const int layer = a.layer < 0 ? model.n_layers() : a.layer;
    const Dataset rep = transform(model, ds, layer);
    write_csv_file(rep, a.out + ".csv");
    write_schema_file(rep, a.out + ".schema");
    std::cout << "wrote " << a.out << ".csv, " << a.out << ".schema (layer " << layer << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictArgs {
    std::string bundle, data, schema, out;
    std::string learner = "mob";
    int layer = -1;
};

int cmd_predict(const PredictArgs& a) {
    require_readable(a.bundle);
    require_readable(a.data);
    require_readable(a.schema);
    require_writable(a.out);

    const MobDrfModel model = load_bundle(a.bundle);
    const Dataset ds = load_input(a.data, a.schema);
    check_schema(model, ds, a.data);

    const auto learner = learner_from_name(a.learner);
    if (!learner) throw DataError("unknown learner '" + a.learner + "'");
    int layer = a.layer;
    if (layer < 0) {
        for (const FinalModel& f : model.finals())
            if (f.learner == *learner) layer = std::max(layer, f.layer);
        if (layer < 0) throw DataError("bundle has no final " + a.learner + " model");
    }
    const FinalModel* fm = model.find_final(*learner, layer);
    if (!fm)
        throw DataError("bundle has no final " + a.learner + " model at layer " +
                        std::to_string(layer));

    const std::vector<double> pred = predict_final(model, *fm, ds);
    std::vector<int> leaves;
    if (const auto* tree = std::get_if<MobTree>(&fm->model))
        leaves = tree->assign_all(transform(model, ds, fm->layer));

    std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + a.out);
    // input columns pass through, then prediction (and leaf_id for MOB)
    for (std::size_t i = 0; i < ds.n_cols(); ++i) out << ds.col(i).name << ',';
    out << "prediction";
    if (!leaves.empty()) out << ",leaf_id";
    out << '\n';
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
        for (std::size_t i = 0; i < ds.n_cols(); ++i) {
            const Column& c = ds.col(i);
            if (c.kind == ColumnKind::Numeric)
                out << format_double(c.num[r]);
            else
                out << c.level_of(r);
            out << ',';
        }
        out << format_double(pred[r]);
        if (!leaves.empty()) out << ',' << leaves[r];
        out << '\n';
    }
    if (!out) throw DataError("failed writing " + a.out);
    std::cout << "wrote " << a.out << " (" << ds.n_rows() << " predictions)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"model-based deep rule forests"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset with planted subgroups");
    synth->add_option("--out", synth_args.out, "output prefix")->required();
    synth->add_option("--n", synth_args.n, "rows");
    synth->add_option("--p", synth_args.p, "partitioning variables");
    synth->add_option("--q", synth_args.q, "regression variables");
    synth->add_option("--regions", synth_args.regions, "one|split1|split1cat|xor2");
    synth->add_option("--noise", synth_args.noise, "noise standard deviation");
    synth->add_option("--seed", synth_args.seed, "random seed");

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "fit a layered rule-forest model");
    train->add_option("--data", train_args.data, "training CSV")->required();
    train->add_option("--schema", train_args.schema, "schema file")->required();
    train->add_option("--out", train_args.out, "output bundle path")->required();
    train->add_option("--log", train_args.log, "fit log path (default <out>.log)");
    train->add_option("--layers", train_args.layers, "number of layers");
    train->add_option("--trees", train_args.trees, "trees per layer, comma list");
    train->add_option("--depths", train_args.depths, "max tree depth per layer, comma list");
    train->add_option("--alphas", train_args.alphas, "significance level per layer, comma list");
    train->add_option("--alpha", train_args.alpha, "significance level for every layer");
    train->add_option("--row-fraction", train_args.row_fraction, "patch row fraction");
    train->add_option("--col-fraction", train_args.col_fraction, "patch column fraction");
    train->add_option("--min-node-size", train_args.min_node_size, "minimum rows per node");
    train->add_option("--perms", train_args.perms, "permutations per stability test");
    train->add_option("--trim", train_args.trim, "boundary trim for the fluctuation statistic");
    train->add_flag("--no-early-stop", train_args.no_early_stop, "always fit every layer");
    train->add_option("--early-stop-delta", train_args.early_stop_delta,
                      "minimum validation MAE improvement");
    train->add_option("--val-fraction", train_args.val_fraction, "validation slice fraction");
    train->add_option("--probe-depth", train_args.probe_depth, "early-stop probe tree depth");
    train->add_option("--learners", train_args.learners, "final learners, comma list");
    train->add_option("--final-layers", train_args.final_layers,
                      "layers for final learners: all or comma list");
    train->add_option("--final-depth", train_args.final_depth, "final MOB tree depth");
    train->add_option("--final-alpha", train_args.final_alpha, "final MOB significance level");
    train->add_option("--final-min-node", train_args.final_min_node, "final MOB min node size");
    train->add_option("--cart-depth", train_args.cart_depth, "CART max depth (-1 unlimited)");
    train->add_option("--cart-min-node", train_args.cart_min_node, "CART min rows per leaf");
    train->add_option("--cp", train_args.cp, "CART complexity parameter");
    train->add_option("--lambdas", train_args.lambdas, "LASSO lambda grid, comma list");
    train->add_option("--seed", train_args.seed, "random seed");
    train->add_option("--threads", train_args.threads, "worker threads (0 = all cores)");

    EvaluateArgs eval_args;
    auto* evaluate = app.add_subcommand("evaluate", "MAE/RMSE grid over learners and layers");
    evaluate->add_option("--bundle", eval_args.bundle, "model bundle")->required();
    evaluate->add_option("--train", eval_args.train, "training CSV")->required();
    evaluate->add_option("--test", eval_args.test, "testing CSV")->required();
    evaluate->add_option("--schema", eval_args.schema, "schema file")->required();
    evaluate->add_option("--out", eval_args.out, "output prefix")->required();

    RulesArgs rules_args;
    auto* rules = app.add_subcommand("rules", "export subgroup rules");
    rules->add_option("--bundle", rules_args.bundle, "model bundle")->required();
    rules->add_option("--data", rules_args.data, "reference CSV for member counts")->required();
    rules->add_option("--schema", rules_args.schema, "schema file")->required();
    rules->add_option("--out", rules_args.out, "output path")->required();
    rules->add_option("--learner", rules_args.learner, "mob|lasso");
    rules->add_option("--layer", rules_args.layer, "layer (default: deepest fitted)");
    rules->add_flag("--simplify", rules_args.simplify, "also emit tightened conjunctions");

    EncodeArgs encode_args;
    auto* encode = app.add_subcommand("encode", "write a rule-encoded representation");
    encode->add_option("--bundle", encode_args.bundle, "model bundle")->required();
    encode->add_option("--data", encode_args.data, "input CSV")->required();
    encode->add_option("--schema", encode_args.schema, "schema file")->required();
    encode->add_option("--out", encode_args.out, "output prefix")->required();
    encode->add_option("--layer", encode_args.layer, "layer (default: deepest stored)");

    PredictArgs predict_args;
    auto* predict = app.add_subcommand("predict", "per-row predictions");
    predict->add_option("--bundle", predict_args.bundle, "model bundle")->required();
    predict->add_option("--data", predict_args.data, "input CSV")->required();
    predict->add_option("--schema", predict_args.schema, "schema file")->required();
    predict->add_option("--out", predict_args.out, "output path")->required();
    predict->add_option("--learner", predict_args.learner, "mob|cart|lasso");
    predict->add_option("--layer", predict_args.layer, "layer (default: deepest fitted)");

    try {
        app.parse(argc, argv);
        if (synth->parsed()) return cmd_synth(synth_args);
        if (train->parsed()) return cmd_train(train_args);
        if (evaluate->parsed()) return cmd_evaluate(eval_args);
        if (rules->parsed()) return cmd_rules(rules_args);
        if (encode->parsed()) return cmd_encode(encode_args);
        if (predict->parsed()) return cmd_predict(predict_args);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const InternalError& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}

#include "mobdrf/stack.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "mobdrf/rng.hpp"

namespace mobdrf {

std::string learner_name(Learner l) {
    switch (l) {
        case Learner::Mob: return "mob";
        case Learner::Cart: return "cart";
        case Learner::Lasso: return "lasso";
    }
    return "?";
}

std::optional<Learner> learner_from_name(const std::string& s) {
    if (s == "mob") return Learner::Mob;
    if (s == "cart") return Learner::Cart;
    if (s == "lasso") return Learner::Lasso;
    return std::nullopt;
}

const RuleForest& MobDrfModel::layer(int i) const {
    if (i < 1 || i > n_layers())
        throw DataError("no stored layer " + std::to_string(i));
    return layers_[static_cast<std::size_t>(i - 1)];
}

const FinalModel* MobDrfModel::find_final(Learner l, int layer) const {
    for (const FinalModel& f : finals_)
        if (f.learner == l && f.layer == layer) return &f;
    return nullptr;
}

double mae(std::span<const double> y, std::span<const double> yhat) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += std::abs(y[i] - yhat[i]);
    return acc / static_cast<double>(y.size());
}

double rmse(std::span<const double> y, std::span<const double> yhat) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - yhat[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(y.size()));
}

namespace {

Schema schema_of(const Dataset& ds) {
    Schema s;
    for (std::size_t i = 0; i < ds.n_cols(); ++i)
        s.entries.emplace_back(ds.col(i).name, SchemaEntry{ds.role(i), ds.col(i).kind});
    return s;
}

bool has_nonconstant_partitioning(const Dataset& ds) {
    for (std::size_t ci : ds.columns_with_role(Role::Partitioning)) {
        const Column& c = ds.col(ci);
        if (c.kind == ColumnKind::Numeric) {
            for (double v : c.num)
                if (v != c.num.front()) return true;
        } else {
            for (int code : c.codes)
                if (code != c.codes.front()) return true;
        }
    }
    return false;
}

// MOB probe used by early stopping: grown on the non-validation rows of the
// current representation, scored on the validation rows.
double probe_validation_mae(const Dataset& rep, std::span<const std::size_t> fit_rows,
                            std::span<const std::size_t> val_rows,
                            const StackConfig& cfg, double alpha, int layer) {
    MobConfig probe;
    probe.max_depth = cfg.probe_max_depth;
    probe.min_node_size = cfg.min_node_size;
    probe.stability.alpha = alpha;
    probe.stability.permutations = cfg.permutations;
    probe.stability.trim = cfg.trim;
    probe.stability.seed =
        derive_seed(cfg.seed, stream::kValidation, static_cast<std::uint64_t>(layer));
    const MobTree tree = grow(rep, fit_rows, probe);
    const std::vector<double> yhat = tree.predict(rep);
    double acc = 0.0;
    for (std::size_t r : val_rows) acc += std::abs(rep.target()[r] - yhat[r]);
    return acc / static_cast<double>(val_rows.size());
}

} // namespace

MobDrfModel fit_stack(const Dataset& train, const StackConfig& cfg, FitLog* log) {
    if (cfg.layers.empty()) throw DataError("fit_stack: need at least one layer");
    for (const LayerSpec& l : cfg.layers)
        if (l.trees < 1) throw DataError("fit_stack: every layer needs at least one tree");

    MobDrfModel model;
    model.config = cfg;
    model.schema = schema_of(train);
    model.target = train.target_name();
    model.regression_design = regression_design_info(train);

    FitLog local_log;
    FitLog& out_log = log ? *log : local_log;
    out_log = {};

    // held-out slice for the per-layer probe
    std::vector<std::size_t> fit_rows, val_rows;
    if (cfg.early_stop) {
        const std::size_t n = train.n_rows();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(cfg.seed, stream::kValidation));
        rng.shuffle(order);
        auto n_val = static_cast<std::size_t>(
            std::llround(cfg.validation_fraction * static_cast<double>(n)));
        n_val = std::min(std::max<std::size_t>(n_val, 1), n - 1);
        val_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
        fit_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
        std::sort(val_rows.begin(), val_rows.end());
        std::sort(fit_rows.begin(), fit_rows.end());
    }

    double best_mae = std::numeric_limits<double>::infinity();
    if (cfg.early_stop) {
        best_mae = probe_validation_mae(train, fit_rows, val_rows, cfg,
                                        cfg.layers[0].alpha, 0);
        out_log.layers.push_back(LayerLog{0, best_mae, "baseline"});
    }

    Dataset rep = train;  // representation at the current layer
    const int L = static_cast<int>(cfg.layers.size());
    for (int l = 1; l <= L; ++l) {
        const LayerSpec& spec = cfg.layers[static_cast<std::size_t>(l - 1)];
        MobConfig mob;
        mob.max_depth = spec.max_depth;
        mob.min_node_size = cfg.min_node_size;
        mob.stability.alpha = spec.alpha;
        mob.stability.permutations = cfg.permutations;
        mob.stability.trim = cfg.trim;
        PatchSpec patch = cfg.patch;
        patch.seed = derive_seed(cfg.seed, stream::kPatch, static_cast<std::uint64_t>(l));

        RuleForest forest = train_forest(rep, spec.trees, mob, patch, l, cfg.threads);
        const EncodedLayer enc = encode(forest, rep);
        Dataset next = compose_layer_input(enc, rep);

        if (!has_nonconstant_partitioning(next)) {
            out_log.warnings.push_back("layer " + std::to_string(l) +
                                       ": every encoded column is constant; stopping at layer " +
                                       std::to_string(l - 1));
            break;
        }
        if (cfg.early_stop) {
            const double val_mae =
                probe_validation_mae(next, fit_rows, val_rows, cfg, spec.alpha, l);
            if (val_mae <= best_mae - cfg.early_stop_delta) {
                out_log.layers.push_back(LayerLog{l, val_mae, "kept"});
                best_mae = val_mae;
            } else {
                std::ostringstream why;
                why << "stopped: validation MAE " << val_mae << " did not improve on "
                    << best_mae << " by " << cfg.early_stop_delta;
                out_log.layers.push_back(LayerLog{l, val_mae, why.str()});
                break;
            }
        }
        model.layers().push_back(std::move(forest));
        rep = std::move(next);
    }
    out_log.stored_layers = model.n_layers();
    return model;
}

Dataset transform(const MobDrfModel& model, const Dataset& ds, int layer) {
    if (layer < 0 || layer > model.n_layers())
        throw DataError("transform: layer " + std::to_string(layer) + " not stored (have 0.." +
                        std::to_string(model.n_layers()) + ")");
    Dataset rep = ds;
    for (int l = 1; l <= layer; ++l)
        rep = compose_layer_input(encode(model.layer(l), rep), rep);
    return rep;
}

namespace {

std::vector<std::size_t> all_rows(const Dataset& ds) {
    std::vector<std::size_t> rows(ds.n_rows());
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

DesignInfo lasso_design_info(const Dataset& rep) {
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < rep.n_cols(); ++i)
        if (rep.role(i) == Role::Partitioning || rep.role(i) == Role::Regression)
            cols.push_back(i);
    return design_info_for(rep, cols);
}

} // namespace

void fit_final(MobDrfModel& model, const Dataset& train, Learner learner,
               int layer, const FinalConfig& cfg) {
    const Dataset rep = transform(model, train, layer);
    const std::vector<std::size_t> rows = all_rows(rep);

    FinalModel fm;
    fm.learner = learner;
    fm.layer = layer;
    switch (learner) {
        case Learner::Mob: {
            MobConfig mob = cfg.mob;
            if (mob.stability.seed == 0)
                mob.stability.seed = derive_seed(model.config.seed, stream::kFinal,
                                                 static_cast<std::uint64_t>(layer));
            fm.model = grow(rep, rows, mob);
            break;
        }
        case Learner::Cart: {
            fm.model = grow_cart(rep, rows, cfg.cart);
            break;
        }
        case Learner::Lasso: {
            if (cfg.lambdas.empty()) throw DataError("fit_final: empty lambda grid");
            const DesignInfo info = lasso_design_info(rep);
            const DesignMatrix d = build_design(rep, rows, info);
            double chosen = cfg.lambdas[0];
            if (cfg.lambdas.size() > 1) {
                // pick by MAE on a seeded validation slice of the training rows
                std::vector<std::size_t> order = rows;
                Rng rng(derive_seed(model.config.seed, stream::kFinal, 777,
                                    static_cast<std::uint64_t>(layer)));
                rng.shuffle(order);
                const std::size_t n_val = std::max<std::size_t>(1, order.size() / 5);
                std::vector<std::size_t> val(order.begin(),
                                             order.begin() + static_cast<std::ptrdiff_t>(n_val));
                std::vector<std::size_t> fit(order.begin() + static_cast<std::ptrdiff_t>(n_val),
                                             order.end());
                const DesignMatrix dfit = build_design(rep, fit, info);
                const DesignMatrix dval = build_design(rep, val, info);
                const std::vector<double> yfit = gather(rep.target(), fit);
                const std::vector<double> yval = gather(rep.target(), val);
                double best_mae = std::numeric_limits<double>::infinity();
                for (double lam : cfg.lambdas) {
                    const LocalModel candidate = fit_lasso(dfit, yfit, lam);
                    const double m = mae(yval, predict(candidate, dval));
                    if (m < best_mae) {
                        best_mae = m;
                        chosen = lam;
                    }
                }
            }
            LassoModel lm;
            lm.design = info;
            lm.lambda = chosen;
            lm.model = fit_lasso(d, rep.target(), chosen);
            fm.model = std::move(lm);
            break;
        }
    }
    // refitting a (learner, layer) cell replaces the previous fit
    auto& finals = model.finals();
    finals.erase(std::remove_if(finals.begin(), finals.end(),
                                [&](const FinalModel& f) {
                                    return f.learner == learner && f.layer == layer;
                                }),
                 finals.end());
    finals.push_back(std::move(fm));
}

std::vector<double> predict_final(const MobDrfModel& model, const FinalModel& fm,
                                  const Dataset& raw) {
    const Dataset rep = transform(model, raw, fm.layer);
    if (const auto* tree = std::get_if<MobTree>(&fm.model)) return tree->predict(rep);
    if (const auto* tree = std::get_if<CartTree>(&fm.model)) return tree->predict(rep);
    const auto& lasso = std::get<LassoModel>(fm.model);
    const DesignMatrix d = build_design(rep, all_rows(rep), lasso.design);
    return predict(lasso.model, d);
}

EvalReport evaluate(const MobDrfModel& model, const Dataset& train, const Dataset& test) {
    if (model.finals().empty()) throw DataError("evaluate: no final models fitted");
    EvalReport report;
    for (Learner l : {Learner::Lasso, Learner::Cart, Learner::Mob}) {
        for (int layer = 0; layer <= model.n_layers(); ++layer) {
            const FinalModel* fm = model.find_final(l, layer);
            if (!fm) continue;
            EvalCell cell;
            cell.learner = l;
            cell.layer = layer;
            const std::vector<double> train_hat = predict_final(model, *fm, train);
            const std::vector<double> test_hat = predict_final(model, *fm, test);
            cell.train_mae = mae(train.target(), train_hat);
            cell.train_rmse = rmse(train.target(), train_hat);
            cell.test_mae = mae(test.target(), test_hat);
            cell.test_rmse = rmse(test.target(), test_hat);
            report.cells.push_back(cell);
        }
    }
    return report;
}

namespace {

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string display_name(Learner l) {
    switch (l) {
        case Learner::Lasso: return "LASSO";
        case Learner::Cart: return "CART";
        case Learner::Mob: return "MOB tree";
    }
    return "?";
}

} // namespace

std::string eval_report_text(const EvalReport& report) {
    std::ostringstream out;
    out << "Model      Layer   Training              Testing\n";
    out << "                   MAE       RMSE        MAE       RMSE\n";
    Learner last = Learner::Mob;
    bool first = true;
    for (const EvalCell& c : report.cells) {
        std::string name;
        if (first || c.learner != last) name = display_name(c.learner);
        first = false;
        last = c.learner;
        const std::string layer = c.layer == 0 ? "-" : std::to_string(c.layer);
        char line[256];
        std::snprintf(line, sizeof(line), "%-10s %-7s %-9s %-11s %-9s %-9s\n", name.c_str(),
                      layer.c_str(), fixed6(c.train_mae).c_str(), fixed6(c.train_rmse).c_str(),
                      fixed6(c.test_mae).c_str(), fixed6(c.test_rmse).c_str());
        out << line;
    }
    return out.str();
}

std::string eval_report_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "learner,layer,train_mae,train_rmse,test_mae,test_rmse\n";
    for (const EvalCell& c : report.cells) {
        out << learner_name(c.learner) << ',' << c.layer << ',' << fixed6(c.train_mae) << ','
            << fixed6(c.train_rmse) << ',' << fixed6(c.test_mae) << ',' << fixed6(c.test_rmse)
            << '\n';
    }
    return out.str();
}

} // namespace mobdrf

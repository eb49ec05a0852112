#pragma once
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mobdrf/cart.hpp"
#include "mobdrf/dataset.hpp"
#include "mobdrf/forest.hpp"
#include "mobdrf/mobtree.hpp"

namespace mobdrf {

enum class Learner { Mob, Cart, Lasso };

std::string learner_name(Learner l);
std::optional<Learner> learner_from_name(const std::string& s);

struct LayerSpec {
    int trees = 50;
    int max_depth = 5;
    double alpha = 0.1;
};

struct StackConfig {
    std::vector<LayerSpec> layers;
    PatchSpec patch;                 // patch.seed is derived per layer from `seed`
    std::size_t min_node_size = 20;
    int permutations = 199;
    double trim = 0.1;
    bool early_stop = true;
    double early_stop_delta = 1e-4;
    double validation_fraction = 0.2;  // of the training rows, for the probe
    int probe_max_depth = 2;           // depth of the per-layer MOB probe
    std::uint64_t seed = 0;
    int threads = 1;
};

// Final-learner settings; layer choice comes separately.
struct FinalConfig {
    MobConfig mob;       // mob.stability.seed == 0 derives from the stack seed
    CartConfig cart;
    std::vector<double> lambdas = {0.1};  // grid; >1 entry picks by validation MAE
};

struct LassoModel {
    LocalModel model;
    DesignInfo design;  // one-hot recipe over the layer's input features
    double lambda = 0.0;
};

struct FinalModel {
    Learner learner = Learner::Mob;
    int layer = 0;
    std::variant<MobTree, CartTree, LassoModel> model;
};

struct LayerLog {
    int layer = 0;
    double validation_mae = 0.0;
    std::string decision;  // "baseline" | "kept" | "stopped: ..."
};

struct FitLog {
    std::vector<LayerLog> layers;
    std::vector<std::string> warnings;
    int stored_layers = 0;
};

// The layerwise model: stored forests (layer 1..L) plus any fitted final
// learners keyed by (learner, layer).
class MobDrfModel {
public:
    MobDrfModel() = default;

    int n_layers() const { return static_cast<int>(layers_.size()); }
    const RuleForest& layer(int i) const;  // 1-based
    const std::vector<FinalModel>& finals() const { return finals_; }
    const FinalModel* find_final(Learner l, int layer) const;

    StackConfig config;
    Schema schema;              // raw input schema (column order preserved)
    std::string target;
    DesignInfo regression_design;  // frozen at fit time

    std::vector<RuleForest>& layers() { return layers_; }
    const std::vector<RuleForest>& layers() const { return layers_; }
    std::vector<FinalModel>& finals() { return finals_; }

private:
    std::vector<RuleForest> layers_;
    std::vector<FinalModel> finals_;
};

// Iterates train_forest / encode / compose_layer_input. With early stopping
// on, a layer survives only if the held-out MOB-probe MAE improves by at
// least early_stop_delta; the first non-improving layer is discarded and the
// iteration halts. A layer whose encoded columns are all constant is
// discarded with a warning regardless of the early-stop setting.
MobDrfModel fit_stack(const Dataset& train, const StackConfig& cfg, FitLog* log = nullptr);

// Replays the stored encodings through layer `layer` (0 = identity copy).
Dataset transform(const MobDrfModel& model, const Dataset& ds, int layer);

// Fits one final learner on the layer-`layer` representation and records it
// in the model. MOB and CART consume the representation directly; LASSO
// one-hot encodes the partitioning features (reference level R_1) alongside
// the regressors.
void fit_final(MobDrfModel& model, const Dataset& train, Learner learner,
               int layer, const FinalConfig& cfg);

std::vector<double> predict_final(const MobDrfModel& model, const FinalModel& fm,
                                  const Dataset& raw);

struct EvalCell {
    Learner learner = Learner::Mob;
    int layer = 0;
    double train_mae = 0, train_rmse = 0, test_mae = 0, test_rmse = 0;
};

struct EvalReport {
    std::vector<EvalCell> cells;  // learner-major, layer ascending
};

EvalReport evaluate(const MobDrfModel& model, const Dataset& train, const Dataset& test);

double mae(std::span<const double> y, std::span<const double> yhat);
double rmse(std::span<const double> y, std::span<const double> yhat);

// Table-style renderings; both print metrics with six decimals.
std::string eval_report_text(const EvalReport& report);
std::string eval_report_csv(const EvalReport& report);

} // namespace mobdrf

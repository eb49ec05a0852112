#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "mobdrf/forest.hpp"
#include "mobdrf/linmod.hpp"
#include "mobdrf/mobtree.hpp"
#include "mobdrf/stability.hpp"
#include "mobdrf/stack.hpp"
#include "mobdrf/synth.hpp"

using namespace mobdrf;

namespace {

Dataset bench_data(std::size_t n, int p, int q) {
    return synth_subgroups(synth_preset("xor2", n, p, q, 0.5, 7)).data;
}

std::vector<std::size_t> all_rows(const Dataset& ds) {
    std::vector<std::size_t> rows(ds.n_rows());
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

} // namespace

static void BM_FitOls(benchmark::State& state) {
    const Dataset ds = bench_data(static_cast<std::size_t>(state.range(0)), 2, 5);
    const std::vector<std::size_t> rows = all_rows(ds);
    const DesignMatrix d = build_design(ds, rows);
    for (auto _ : state) {
        LocalModel m = fit_ols(d, ds.target());
        benchmark::DoNotOptimize(m);
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FitOls)->RangeMultiplier(4)->Range(256, 4096)->Complexity();

static void BM_FluctuationStatistic(benchmark::State& state) {
    const Dataset ds = bench_data(static_cast<std::size_t>(state.range(0)), 2, 3);
    const std::vector<std::size_t> rows = all_rows(ds);
    const DesignMatrix d = build_design(ds, rows);
    const LocalModel m = fit_ols(d, ds.target());
    const Matrix scores = score_contributions(m, d, ds.target());
    const SplitVarView x = make_var_view(ds.col("x1"), rows);
    for (auto _ : state) {
        const double stat = fluctuation_statistic(scores, x, 0.1);
        benchmark::DoNotOptimize(stat);
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FluctuationStatistic)->RangeMultiplier(4)->Range(256, 4096)->Complexity();

static void BM_PermutationTest(benchmark::State& state) {
    const Dataset ds = bench_data(512, 2, 3);
    const std::vector<std::size_t> rows = all_rows(ds);
    const DesignMatrix d = build_design(ds, rows);
    const LocalModel m = fit_ols(d, ds.target());
    const Matrix scores = score_contributions(m, d, ds.target());
    const SplitVarView x = make_var_view(ds.col("x1"), rows);
    StabilityConfig cfg;
    cfg.permutations = static_cast<int>(state.range(0));
    for (auto _ : state) {
        const StabilityResult r = permutation_p(scores, x, "x1", cfg, 3);
        benchmark::DoNotOptimize(r);
    }
}
BENCHMARK(BM_PermutationTest)->Arg(99)->Arg(199)->Arg(499);

static void BM_GrowMobTree(benchmark::State& state) {
    const Dataset ds = bench_data(static_cast<std::size_t>(state.range(0)), 2, 2);
    const std::vector<std::size_t> rows = all_rows(ds);
    MobConfig cfg;
    cfg.max_depth = 3;
    cfg.stability.alpha = 0.1;
    for (auto _ : state) {
        MobTree tree = grow(ds, rows, cfg);
        benchmark::DoNotOptimize(tree);
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_GrowMobTree)->RangeMultiplier(2)->Range(256, 2048)->Complexity()
    ->Unit(benchmark::kMillisecond);

static void BM_TrainForest(benchmark::State& state) {
    const Dataset ds = bench_data(600, 3, 2);
    MobConfig cfg;
    cfg.max_depth = 3;
    cfg.stability.alpha = 0.1;
    PatchSpec patch;
    patch.seed = 5;
    const int threads = static_cast<int>(state.range(0));
    for (auto _ : state) {
        RuleForest forest = train_forest(ds, 16, cfg, patch, 1, threads);
        benchmark::DoNotOptimize(forest);
    }
}
BENCHMARK(BM_TrainForest)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)
    ->MeasureProcessCPUTime()->UseRealTime();

static void BM_Encode(benchmark::State& state) {
    const Dataset ds = bench_data(static_cast<std::size_t>(state.range(0)), 2, 2);
    MobConfig cfg;
    cfg.max_depth = 3;
    cfg.stability.alpha = 0.1;
    PatchSpec patch;
    patch.seed = 9;
    const RuleForest forest = train_forest(ds, 16, cfg, patch, 1);
    for (auto _ : state) {
        EncodedLayer enc = encode(forest, ds);
        benchmark::DoNotOptimize(enc);
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Encode)->RangeMultiplier(4)->Range(256, 4096)->Complexity();

BENCHMARK_MAIN();

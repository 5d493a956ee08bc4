#include <benchmark/benchmark.h>

#include "raterfuse/fusion.hpp"
#include "raterfuse/metrics.hpp"
#include "raterfuse/rng.hpp"
#include "raterfuse/simgen.hpp"
#include "raterfuse/trainer.hpp"

using namespace raterfuse;

namespace {

const Panel& panel() {
    static const Panel p = [] {
        PanelConfig cfg;
        cfg.n_images = 10000;
        return generate_panel(cfg);
    }();
    return p;
}

void BM_FuseDataset(benchmark::State& state) {
    const auto scheme = static_cast<Scheme>(state.range(0));
    const auto& records = panel().records;
    for (auto _ : state) benchmark::DoNotOptimize(fuse_dataset(records, scheme, SmoothingConfig{}));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(records.size()));
}
BENCHMARK(BM_FuseDataset)->Arg(0)->Arg(1)->Arg(2);

void BM_SensAtSpec(benchmark::State& state) {
    Rng rng(1);
    ScoredSet set;
    for (std::int64_t i = 0; i < state.range(0); ++i) {
        const int y = rng.bernoulli(0.3);
        set.labels.push_back(y);
        set.scores.push_back(rng.normal() + y);
    }
    for (auto _ : state) benchmark::DoNotOptimize(sens_at_spec(set, 0.95));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SensAtSpec)->RangeMultiplier(8)->Range(64, 1 << 18)->Complexity();

void BM_TrainingEpoch(benchmark::State& state) {
    const auto ds = fuse_dataset(panel().records, Scheme::DCLS, SmoothingConfig{});
    std::vector<const FusedEntry*> entries;
    for (const auto& e : ds.entries) entries.push_back(&e);
    const auto samples = samples_from(1, entries);
    TrainConfig cfg;
    cfg.max_epochs = 1;
    const ModelSpec spec{16, static_cast<std::size_t>(state.range(0)), 1, {}, {}, {}, {}};
    for (auto _ : state) benchmark::DoNotOptimize(train_samples(spec, samples, {}, cfg));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(samples.size()));
}
BENCHMARK(BM_TrainingEpoch)->Arg(0)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

// Serial reference vs OpenMP kernels.

#include <benchmark/benchmark.h>

#include "gzk/forest.hpp"
#include "gzk/pipeline.hpp"
#include "gzk/synth.hpp"

using namespace gzk;

namespace {

struct Fixture {
    std::vector<pipeline::RawFrame> frames;
    std::vector<forest::Sample> samples;
    forest::TrainingSet rows;
    forest::ForestModel model;

    Fixture() {
        synth::PopulationConfig cfg;
        cfg.n_subjects = 4;
        cfg.frames_per_region = 60;
        cfg.seed = 1;
        for (auto& sf : synth::generate_population(cfg).frames) frames.push_back(std::move(sf.frame));
        for (const auto& p : pipeline::process_batch(frames, {}))
            if (p && p->eye) samples.push_back({p->feature(FeatureMode::HeadAndEye), p->label});
        rows = forest::to_training_set(samples);
        forest::ForestConfig fc;
        fc.n_trees = 200;
        model = forest::train(rows, fc);
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

ExecPolicy policy(const benchmark::State& s) { return s.range(0) ? ExecPolicy::Parallel : ExecPolicy::Serial; }

void BM_Train(benchmark::State& state) {
    const auto& f = fixture();
    forest::ForestConfig fc;
    fc.n_trees = 32;
    for (auto _ : state) benchmark::DoNotOptimize(forest::train(f.rows, fc, policy(state)));
}

void BM_PredictBatch(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(forest::predict_batch(f.model, f.rows, policy(state)));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.rows.size()));
}

void BM_ProcessBatch(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(pipeline::process_batch(f.frames, {}, policy(state)));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.frames.size()));
}

void BM_ClassifyBatch(benchmark::State& state) {
    const auto& f = fixture();
    pipeline::PipelineConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(pipeline::classify_batch(f.frames, f.model, cfg, policy(state)));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.frames.size()));
}

}  // namespace

BENCHMARK(BM_Train)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictBatch)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ProcessBatch)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ClassifyBatch)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "drcal/datagen.hpp"
#include "drcal/debiased.hpp"
#include "drcal/harness.hpp"
#include "drcal/two_step.hpp"

using namespace drcal;

namespace {

void BM_TwoStep(benchmark::State& state) {
    const SettingId id = static_cast<SettingId>(state.range(0));
    Setting s = Setting::make(id, 400, 100);
    Dataset d = gen_setting(s, {3, 0});
    Family fam = family_for(id);
    TwoStepConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(run_two_step(d, fam, cfg));
    state.SetLabel(to_string(id));
}

void BM_Debiased(benchmark::State& state) {
    Setting s = Setting::make(SettingId::C1, 400, 100);
    Dataset d = gen_setting(s, {4, 0});
    TwoStepConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(debiased_linear(d, cfg));
}

void BM_Replicate(benchmark::State& state) {
    RunConfig cfg;
    cfg.setting = "C1";
    int r = 0;
    for (auto _ : state) benchmark::DoNotOptimize(run_replicate(cfg, r++));
}

}  // namespace

BENCHMARK(BM_TwoStep)
    ->Arg(static_cast<int>(SettingId::C1))
    ->Arg(static_cast<int>(SettingId::C4))
    ->Arg(static_cast<int>(SettingId::C7))
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Debiased)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Replicate)->Unit(benchmark::kMillisecond);

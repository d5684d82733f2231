#include <benchmark/benchmark.h>

#include <random>

#include "drcal/glm_lasso.hpp"
#include "support.hpp"

using namespace drcal;

namespace {

LossKind loss_arg(int64_t k) { return static_cast<LossKind>(k); }

void BM_FitLasso(benchmark::State& state) {
    std::mt19937_64 eng(1);
    const auto n = static_cast<Eigen::Index>(state.range(0)), q = static_cast<Eigen::Index>(state.range(1));
    GlmProblem pb = testing::random_problem(eng, loss_arg(state.range(2)), n, q, false);
    const double lambda = 0.1 * lambda_max(pb);
    for (auto _ : state) benchmark::DoNotOptimize(fit_lasso(pb, lambda));
    state.SetLabel(to_string(pb.loss));
}

void BM_CvSelect(benchmark::State& state) {
    std::mt19937_64 eng(2);
    const auto n = static_cast<Eigen::Index>(state.range(0)), q = static_cast<Eigen::Index>(state.range(1));
    GlmProblem pb = testing::random_problem(eng, LossKind::logistic, n, q, false);
    CvOptions o;
    for (auto _ : state) benchmark::DoNotOptimize(cv_select(pb, o));
}

}  // namespace

BENCHMARK(BM_FitLasso)
    ->ArgsProduct({{400}, {100, 800}, {0, 1, 2}})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CvSelect)->Args({400, 100})->Args({600, 800})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

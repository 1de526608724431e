#include <benchmark/benchmark.h>

#include <random>

#include "mergelab/merge.hpp"
#include "mergelab/metrics.hpp"
#include "mergelab/pareto.hpp"

namespace {

std::vector<float> random_vector(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    std::vector<float> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

void BM_Lerp(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_vector(n, 1);
    const auto b = random_vector(n, 2);
    std::vector<float> out(n);
    for (auto _ : state) {
        mergelab::lerp_into(a, b, 0.3, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * n * 2 * sizeof(float)));
}
BENCHMARK(BM_Lerp)->Arg(1 << 12)->Arg(1 << 20);

void BM_Slerp(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_vector(n, 1);
    const auto b = random_vector(n, 2);
    for (auto _ : state) {
        auto r = mergelab::slerp_tensor(a, b, 0.3);
        benchmark::DoNotOptimize(r.values.data());
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * n * 2 * sizeof(float)));
}
BENCHMARK(BM_Slerp)->Arg(1 << 12)->Arg(1 << 20);

void BM_ParetoFrontier(benchmark::State& state) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<mergelab::Objectives> pts(static_cast<std::size_t>(state.range(0)));
    for (auto& p : pts) p = {dist(rng), dist(rng)};
    for (auto _ : state) {
        auto f = mergelab::pareto_frontier(pts);
        benchmark::DoNotOptimize(f.data());
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ParetoFrontier)->RangeMultiplier(8)->Range(64, 1 << 18)->Complexity(benchmark::oNLogN);

void BM_TextMetrics(benchmark::State& state) {
    const std::string cand = "the patient reports mild chest pain after exercise and denies shortness of breath";
    const std::string ref = "patient reports chest pain with exertion and no shortness of breath at rest";
    for (auto _ : state) {
        benchmark::DoNotOptimize(mergelab::rouge_n(cand, ref, 2));
        benchmark::DoNotOptimize(mergelab::rouge_l(cand, ref));
        benchmark::DoNotOptimize(mergelab::bleu(cand, ref));
    }
}
BENCHMARK(BM_TextMetrics);

}  // namespace

BENCHMARK_MAIN();

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "blr/kernels.hpp"
#include "blr/model.hpp"

namespace {

constexpr std::size_t kItems = 100'000;

blr::DenseModel random_model(std::size_t dim) {
    blr::DenseModel m(dim, 1, kItems);
    std::mt19937_64 rng(42);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    for (auto& w : m.all_user_factors()) w = normal(rng);
    for (auto& w : m.all_item_factors()) w = normal(rng);
    return m;
}

void BM_ScoreAllDense(benchmark::State& state) {
    const auto m = random_model(static_cast<std::size_t>(state.range(0)));
    std::vector<float> out(kItems);
    for (auto _ : state) {
        blr::score_all(m, 0, out);
        benchmark::DoNotOptimize(out.data());
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kItems));
}

void BM_ScoreAllPacked(benchmark::State& state) {
    const auto p = blr::binarize(random_model(static_cast<std::size_t>(state.range(0))));
    std::vector<float> out(kItems);
    for (auto _ : state) {
        blr::score_all(p, 0, out);
        benchmark::DoNotOptimize(out.data());
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kItems));
}

void BM_PackedDot(benchmark::State& state) {
    const std::size_t words = static_cast<std::size_t>(state.range(0)) / blr::kBitsPerWord;
    std::mt19937_64 rng(7);
    std::vector<std::uint32_t> a(words), b(words);
    for (auto& w : a) w = static_cast<std::uint32_t>(rng());
    for (auto& w : b) w = static_cast<std::uint32_t>(rng());
    for (auto _ : state) benchmark::DoNotOptimize(blr::packed_dot(a, b));
}

void BM_DenseDot(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(7);
    std::normal_distribution<float> normal;
    std::vector<float> a(n), b(n);
    for (auto& x : a) x = normal(rng);
    for (auto& x : b) x = normal(rng);
    for (auto _ : state) benchmark::DoNotOptimize(blr::dense_dot(a, b));
}

}  // namespace

BENCHMARK(BM_ScoreAllDense)->RangeMultiplier(2)->Range(32, 1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreAllPacked)->RangeMultiplier(2)->Range(32, 1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PackedDot)->RangeMultiplier(2)->Range(32, 1024);
BENCHMARK(BM_DenseDot)->RangeMultiplier(2)->Range(32, 1024);
BENCHMARK_MAIN();

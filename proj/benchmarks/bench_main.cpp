#include <random>

#include <benchmark/benchmark.h>

#include "marketstates/clustering.hpp"
#include "marketstates/corrmat.hpp"
#include "marketstates/mds.hpp"
#include "marketstates/synth.hpp"

using namespace marketstates;

namespace {

ReturnTable random_returns(std::size_t rows, std::size_t cols, std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 0.01);
    ReturnTable r;
    for (std::size_t i = 0; i < cols; ++i) {
        r.tickers.push_back("T" + std::to_string(10000 + i));
    }
    auto day = std::chrono::sys_days{std::chrono::year{2000} / 1 / 3};
    for (std::size_t t = 0; t < rows; ++t) {
        r.dates.emplace_back(day + std::chrono::days{t});
        for (std::size_t i = 0; i < cols; ++i) {
            r.returns.push_back(normal(gen));
        }
    }
    return r;
}

SectorMap even_sectors(const std::vector<std::string>& tickers, std::size_t n_sectors)
{
    std::string text;
    for (std::size_t i = 0; i < tickers.size(); ++i) {
        text += tickers[i] + ",S" + std::to_string(i % n_sectors) + "\n";
    }
    return parse_sector_map(text, tickers);
}

void BM_EpochCorrelation(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto r = random_returns(20, n, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(epoch_correlation(r, 0, {20, 1}));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EpochCorrelation)->Arg(50)->Arg(150)->Arg(350)->Complexity();

void BM_CoarseGrain(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto r = random_returns(20, n, 2);
    const auto c = epoch_correlation(r, 0, {20, 1});
    const CoarseGrainer cg(r.tickers, even_sectors(r.tickers, 10));
    for (auto _ : state) {
        benchmark::DoNotOptimize(cg.apply(c));
    }
}
BENCHMARK(BM_CoarseGrain)->Arg(150)->Arg(350);

MatrixCloud sector_cloud(std::size_t days)
{
    RegimeSpec spec;
    spec.sector_sizes.assign(10, 5);
    spec.regimes = {{0.3, 0.1}, {0.6, 0.3}, {0.85, 0.65}};
    const std::size_t third = days / 3;
    spec.schedule = {{0, third}, {1, third}, {2, days - 2 * third}};
    const auto market = generate_block_market(spec, 5);
    return build_matrix_cloud(log_returns(market.prices), {20, 1}, &market.sectors, 0.0);
}

void BM_KMeans(benchmark::State& state)
{
    const auto cloud = sector_cloud(static_cast<std::size_t>(state.range(0)));
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(kmeans(cloud.points, {5, seed++, 300, Metric::L1}));
    }
}
BENCHMARK(BM_KMeans)->Arg(1000)->Arg(3500)->Unit(benchmark::kMillisecond);

void BM_DistanceMatrix(benchmark::State& state)
{
    const auto cloud = sector_cloud(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(distance_matrix(cloud, 0));
    }
}
BENCHMARK(BM_DistanceMatrix)->Arg(1000)->Arg(3500)->Unit(benchmark::kMillisecond);

void BM_ClassicalMds(benchmark::State& state)
{
    const auto d = distance_matrix(sector_cloud(static_cast<std::size_t>(state.range(0))), 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(classical_mds(d, 3));
    }
}
BENCHMARK(BM_ClassicalMds)->Arg(1000)->Arg(3500)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "amosl/matrix.hpp"
#include "amosl/rng.hpp"
#include "amosl/transport.hpp"

using namespace amosl;

namespace {

struct Instance {
    Matrix cost;
    std::vector<double> w1, w2;
};

Instance make_instance(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Instance ins;
    ins.cost = Matrix(n, n);
    for (std::size_t k = 0; k < ins.cost.size(); ++k) ins.cost.raw()[k] = uniform(rng, 0.0, 2.0);
    ins.w1.resize(n);
    ins.w2.resize(n);
    for (double& w : ins.w1) w = uniform(rng, 0.1, 3.0);
    for (double& w : ins.w2) w = uniform(rng, 0.1, 3.0);
    return ins;
}

void BM_solve_transport(benchmark::State& state) {
    const Instance ins = make_instance(static_cast<std::size_t>(state.range(0)), 42);
    for (auto _ : state) {
        const TransportPlan plan = solve_transport(ins.cost, ins.w1, ins.w2);
        benchmark::DoNotOptimize(plan.value);
    }
}

void BM_transport_gradients(benchmark::State& state) {
    const Instance ins = make_instance(static_cast<std::size_t>(state.range(0)), 42);
    const TransportPlan plan = solve_transport(ins.cost, ins.w1, ins.w2);
    TransportGradOptions opts;
    opts.mode = state.range(1) == 0 ? TransportGradMode::Envelope : TransportGradMode::KktQp;
    for (auto _ : state) {
        const TransportGrads g = transport_gradients(plan, ins.cost, ins.w1, ins.w2, opts);
        benchmark::DoNotOptimize(g.dcost.raw());
    }
}

void BM_brute_force(benchmark::State& state) {
    std::mt19937_64 rng(7);
    Matrix cost(3, 3);
    for (std::size_t k = 0; k < cost.size(); ++k) cost.raw()[k] = uniform(rng, 0.0, 2.0);
    const std::vector<double> w1{3, 2, 3}, w2{2, 3, 2};
    for (auto _ : state) {
        benchmark::DoNotOptimize(brute_force_transport(cost, w1, w2));
    }
}

}  // namespace

BENCHMARK(BM_solve_transport)->Arg(4)->Arg(8)->Arg(16)->Arg(32);
BENCHMARK(BM_transport_gradients)
    ->Args({8, 0})
    ->Args({8, 1})
    ->Args({16, 0})
    ->Args({16, 1});
BENCHMARK(BM_brute_force);

BENCHMARK_MAIN();

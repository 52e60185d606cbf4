#include <benchmark/benchmark.h>

#include <random>

#include "amosl/config.hpp"
#include "amosl/dataset.hpp"
#include "amosl/model.hpp"
#include "amosl/rng.hpp"
#include "amosl/trainer.hpp"

using namespace amosl;

namespace {

GraphSample make_sample(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    GraphSample g;
    g.label = 0;
    g.x = Matrix(n, d);
    for (std::size_t k = 0; k < g.x.size(); ++k) g.x.raw()[k] = uniform(rng, 0.0, 1.0);
    g.a = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (uniform01(rng) < 0.3) g.a(i, j) = g.a(j, i) = 1.0;
    g.s = synthesize_modality(g.x, seed);
    return g;
}

TrainConfig bench_config() {
    TrainConfig cfg;
    cfg.cheb_k = 3;
    cfg.dropout = 0.1;
    return cfg;
}

void BM_tower_forward(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const GraphSample g = make_sample(n, 8, 5);
    const TrainConfig cfg = bench_config();
    const ConvSpec conv{cfg.conv, cfg.cheb_k};
    const ModelParams params = ModelParams::init(8, 2, conv, cfg.fusion, ModelDims{}, 3);
    const ModalityOperators ops = build_modality_operators(g, conv, cfg.modality2);
    for (auto _ : state) {
        Tape tape(1, TapeMode::Eval);
        const ModelIds ids = register_params(tape, params);
        const ValueId x = tape.input(g.x, false);
        const ValueId z = tower_forward(tape, ops.m1, ids.tower1, x, 0.0);
        benchmark::DoNotOptimize(tape.value(z).raw());
    }
}

void BM_forward_backward(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const GraphSample g = make_sample(n, 8, 5);
    const TrainConfig cfg = bench_config();
    const ConvSpec conv{cfg.conv, cfg.cheb_k};
    const ModelParams params = ModelParams::init(8, 2, conv, cfg.fusion, ModelDims{}, 3);
    const ModalityOperators ops = build_modality_operators(g, conv, cfg.modality2);
    for (auto _ : state) {
        Tape tape(1, TapeMode::Train);
        const ModelIds ids = register_params(tape, params);
        const ForwardOut out = forward_sample(tape, g, ops, ids, cfg);
        tape.backward(loss_root(tape, out, cfg, 0.8));
        benchmark::DoNotOptimize(out.l0_value);
    }
}

}  // namespace

BENCHMARK(BM_tower_forward)->Arg(16)->Arg(32)->Arg(64);
BENCHMARK(BM_forward_backward)->Arg(16)->Arg(32);

BENCHMARK_MAIN();

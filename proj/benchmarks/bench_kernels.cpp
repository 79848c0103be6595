#include <benchmark/benchmark.h>

#include <random>

#include "mgcn/model_zoo.hpp"
#include "mgcn/ops.hpp"
#include "mgcn/trainer.hpp"

using namespace mgcn;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    Tensor t(std::move(shape));
    for (float& v : t.mutable_data()) v = dist(rng);
    return t;
}

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Tensor a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
    for (auto _ : state) benchmark::DoNotOptimize(ops::matmul(a, b));
    state.counters["GFLOP/s"] = benchmark::Counter(2.0 * n * n * n, benchmark::Counter::kIsIterationInvariantRate,
                                                   benchmark::Counter::kIs1000);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256)->Arg(512);

// Second conv of the custom CNN at img 16: (32, 32, 8, 8) -> 64 filters.
void BM_Conv2DForward(benchmark::State& state) {
    const auto c = static_cast<std::size_t>(state.range(0));
    const Tensor x = random_tensor({32, c, 8, 8}, 3), w = random_tensor({2 * c, c, 3, 3}, 4);
    const Tensor b({2 * c}, 0.0f);
    for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, w, b, {1, 1}, Padding::same));
}
BENCHMARK(BM_Conv2DForward)->Arg(32)->Arg(128);

void BM_Conv2DBackward(benchmark::State& state) {
    const Tensor x = random_tensor({32, 32, 8, 8}, 5), r = random_tensor({32, 64, 8, 8}, 6);
    Tensor w = random_tensor({64, 32, 3, 3}, 7);
    const Tensor b({64}, 0.0f);
    w.set_trainable(true);
    for (auto _ : state) {
        GradTape tape;
        tape.backward(ops::sum(ops::mul(ops::conv2d(x, w, b, {1, 1}, Padding::same, &tape), r, &tape), &tape));
        w.clear_grad();
    }
}
BENCHMARK(BM_Conv2DBackward);

void BM_CustomCnnTrainStep(benchmark::State& state) {
    Network net = build_custom_cnn(16);
    net.init(1);
    const Dataset ds = synth_dataset(16, 16, 1);
    std::vector<std::size_t> idx(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const Batch batch = make_batch(ds, idx);
    TrainConfig cfg;
    Optimizer opt(cfg);
    const auto params = net.trainable_parameters();
    net.set_mode(Mode::train);
    for (auto _ : state) {
        GradTape tape;
        const Tensor scores = ops::reshape(net.forward(batch.images, &tape), {idx.size()}, &tape);
        tape.backward(bce_loss(scores, batch.labels, &tape));
        opt.step(params);
    }
}
BENCHMARK(BM_CustomCnnTrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

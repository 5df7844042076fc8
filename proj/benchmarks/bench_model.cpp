#include <benchmark/benchmark.h>

#include "thermodepth/recurrent.hpp"
#include "thermodepth/sensorsim.hpp"
#include "thermodepth/trainer.hpp"

using namespace thermodepth;

namespace {

const SequenceSample& sequence() {
  static const SequenceSample s =
      apply_sensor(render_sequence(make_scene(Suite::kSpriteEntering, 0, GenConfig{})), SensorModel{}, 1);
  return s;
}

void BM_ReservoirStep(benchmark::State& state) {
  ReservoirConfig cfg;
  cfg.neurons = static_cast<int>(state.range(0));
  const ReservoirParams params = init_reservoir(1, cfg, 128);
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(128, 0.1);
  RecurrentState s = RecurrentState::zeros_reservoir(cfg.neurons);
  for (auto _ : state) {
    auto [next, out] = reservoir_step(u, s, params);
    benchmark::DoNotOptimize(out);
    s = std::move(next);
  }
}
BENCHMARK(BM_ReservoirStep)->Arg(32)->Arg(128)->Arg(512);

// Unrolled forward pass over one 8-frame sequence; arg 1 adds the backward pass.
void BM_ForwardSequence(benchmark::State& state) {
  ModelConfig model;
  model.rb = static_cast<RecurrentKind>(state.range(0));
  const bool backward = state.range(1) != 0;
  const ModelParams params = init_params<float>(model);
  const LossConfig loss;
  for (auto _ : state) {
    auto grads = nn::Gradients<float>::zeros_like(params);
    benchmark::DoNotOptimize(
        forward_sequence(sequence(), params, model, loss, 1, std::nullopt, backward ? &grads : nullptr));
  }
  state.SetLabel(std::string(to_string(model.rb)) + (backward ? " fwd+bwd" : " fwd"));
}
BENCHMARK(BM_ForwardSequence)
    ->ArgsProduct({{static_cast<int>(RecurrentKind::kNone), static_cast<int>(RecurrentKind::kReservoir),
                    static_cast<int>(RecurrentKind::kConvGru)},
                   {0, 1}})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

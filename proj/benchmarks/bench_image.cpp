#include <benchmark/benchmark.h>

#include "thermodepth/enhance.hpp"
#include "thermodepth/losses.hpp"
#include "thermodepth/metrics.hpp"
#include "thermodepth/sensorsim.hpp"

using namespace thermodepth;

namespace {

const SequenceSample& sample(Suite suite) {
  static const SequenceSample seqs[] = {
      apply_sensor(render_sequence(make_scene(Suite::kStatic, 0, GenConfig{})), SensorModel{}, 1),
      apply_sensor(render_sequence(make_scene(Suite::kTranslating, 0, GenConfig{})), SensorModel{}, 2),
  };
  return seqs[suite == Suite::kStatic ? 0 : 1];
}

void BM_RenderAndSense(benchmark::State& state) {
  const SceneSpec spec = make_scene(Suite::kSpriteEntering, 0, GenConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(apply_sensor(render_sequence(spec), SensorModel{}, 3));
}
BENCHMARK(BM_RenderAndSense)->Unit(benchmark::kMicrosecond);

void BM_To8BitLinear(benchmark::State& state) {
  const ThermalFrame& f = sample(Suite::kTranslating).frames[0];
  for (auto _ : state) benchmark::DoNotOptimize(to_8bit_linear(f));
}
BENCHMARK(BM_To8BitLinear);

void BM_Clahe(benchmark::State& state) {
  const Image8 img = to_8bit_linear(sample(Suite::kTranslating).frames[0]);
  for (auto _ : state) benchmark::DoNotOptimize(clahe(img, 2.0, 4, 4));
}
BENCHMARK(BM_Clahe);

void BM_GaussianSmooth(benchmark::State& state) {
  const Image8 img = to_8bit_linear(sample(Suite::kTranslating).frames[0]);
  for (auto _ : state) benchmark::DoNotOptimize(gaussian_smooth(img, 1.0));
}
BENCHMARK(BM_GaussianSmooth);

void BM_Refine(benchmark::State& state) {
  const RefineParams params = init_refine_params(RefineConfig{}, 1);
  const ThermalFrame f = raw_to_normalized(sample(Suite::kTranslating).frames[0]);
  for (auto _ : state) benchmark::DoNotOptimize(refine(f, params));
}
BENCHMARK(BM_Refine)->Unit(benchmark::kMicrosecond);

void BM_DetectCorners(benchmark::State& state) {
  const Image8 img = to_8bit_linear(sample(Suite::kTranslating).frames[0]);
  for (auto _ : state) benchmark::DoNotOptimize(detect_corners(img, CornerConfig{}));
}
BENCHMARK(BM_DetectCorners);

void BM_DepthMetrics(benchmark::State& state) {
  const auto& s = sample(Suite::kTranslating);
  for (auto _ : state) benchmark::DoNotOptimize(depth_metrics(s.depths[1], s.depths[0], EvalConfig{}));
}
BENCHMARK(BM_DepthMetrics);

void BM_TotalLoss(benchmark::State& state) {
  const auto& s = sample(Suite::kTranslating);
  for (auto _ : state) {
    benchmark::DoNotOptimize(total_loss(s.depths[1], s.depths[0], s.frames[0], LossConfig{}, 7));
  }
}
BENCHMARK(BM_TotalLoss)->Unit(benchmark::kMicrosecond);

}  // namespace

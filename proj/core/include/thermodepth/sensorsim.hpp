#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "thermodepth/config.hpp"
#include "thermodepth/types.hpp"

namespace thermodepth {

enum class SpriteShape { kRect, kDisk };

struct Sprite {
  SpriteShape shape = SpriteShape::kDisk;
  double size = 10.0;          // side length or diameter, px
  double depth = 1.0;          // m
  double temperature = 40000;  // counts
  double x = 0.0;              // centre at frame 0, px
  double y = 0.0;
  double vx = 0.0;             // own motion, px / frame
  double vy = 0.0;
  bool operator==(const Sprite&) const = default;
};

/// A fronto-parallel background plane plus flat sprites in front of it.
/// The background carries an optional piecewise-constant texture that moves
/// rigidly with the camera.
struct SceneSpec {
  int width = 80;
  int height = 64;
  int n_frames = 8;
  double background_depth = 4.0;
  double background_temperature = 25000;
  double texture_amplitude = 0.0;  // counts; 0 gives a uniform background
  double texture_scale = 8.0;      // mean patch side, px
  double cam_dx = 0.0;             // background shift, px / frame
  double cam_dy = 0.0;
  double frame_period = 1.0 / 30.0;  // s
  std::vector<Sprite> sprites;
  std::uint64_t seed = 1;
  std::string name = "scene";
  bool operator==(const SceneSpec&) const = default;
};

/// Renders radiometric raw frames, exact depth (rounded to whole mm) and the
/// background motion. Sprites move by velocity + camera * (background / own
/// depth); sprites at or behind the background are hidden.
SequenceSample render_sequence(const SceneSpec& spec);

/// Drift, noise, per-frame AGC (non-radiometric only) and NUC freezes, in
/// that order. Noise is drawn from the "sensor.noise" sub-stream of `seed`.
/// Depth and motion pass through untouched.
SequenceSample apply_sensor(const SequenceSample& seq, const SensorModel& model, std::uint64_t seed);

/// Linear-interpolated percentile (p in [0, 100]) of a sample.
double percentile(std::vector<double> values, double p);

/// The AGC map of one frame: p_lo -> 0, p_hi -> 65535, clamped and rounded.
Grid<double> agc_map(const Grid<double>& pixels, double p_lo, double p_hi);

enum class Suite { kStatic, kTranslating, kSpriteEntering, kNucFreeze };
std::string_view to_string(Suite s);
inline constexpr Suite kAllSuites[] = {Suite::kStatic, Suite::kTranslating, Suite::kSpriteEntering, Suite::kNucFreeze};

/// Deterministic scene for sequence `index` of a suite.
SceneSpec make_scene(Suite suite, int index, const GenConfig& gen);
/// Sensor settings used for a suite (the NUC suite enables freezes).
SensorModel suite_sensor(Suite suite, const SensorModel& base);

/// All suites rendered and passed through the sensor model, suite-major.
std::vector<SequenceSample> generate_dataset(const GenConfig& gen, const SensorModel& sensor);

/// Depth pixels whose ground truth never changes over the sequence.
Grid<std::uint8_t> static_mask(const SequenceSample& seq);

}  // namespace thermodepth

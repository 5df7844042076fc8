#pragma once

#include <optional>
#include <string>
#include <vector>

#include "thermodepth/common.hpp"

namespace thermodepth {

inline constexpr double kRawMax = 65535.0;

enum class IntensityMode { kRaw, kNormalized };

/// One thermal image. Raw frames hold integer counts in [0, 65535] (stored
/// exactly as doubles); normalized frames hold reals in [0, 1].
struct ThermalFrame {
  Grid<double> pixels;
  IntensityMode mode = IntensityMode::kRaw;
  double timestamp = 0.0;
  bool radiometric = true;
  int frame_index = 0;
  bool nuc_frozen = false;  // frame repeated by a stream freeze

  int width() const { return pixels.width; }
  int height() const { return pixels.height; }
  bool operator==(const ThermalFrame&) const = default;
};

/// Metric depth in meters plus a validity mask (1 = valid).
struct DepthMap {
  Grid<double> depth;
  Grid<std::uint8_t> valid;
  double min_depth = 0.3;
  double max_depth = 10.0;

  int width() const { return depth.width; }
  int height() const { return depth.height; }
  bool operator==(const DepthMap&) const = default;

  static DepthMap filled(int w, int h, double meters, double min_depth = 0.3, double max_depth = 10.0);
};

/// Background translation of frame t relative to frame 0, in pixels.
struct Motion {
  double dx = 0.0;
  double dy = 0.0;
  bool operator==(const Motion&) const = default;
};

struct SequenceSample {
  std::vector<ThermalFrame> frames;
  std::vector<DepthMap> depths;
  std::optional<std::vector<Motion>> motion_gt;
  std::string sequence_id;
  std::uint64_t seed = 0;  // generator seed, recorded in the dataset meta file

  std::size_t length() const { return frames.size(); }
  bool operator==(const SequenceSample&) const = default;
};

struct MetricsReport {
  double absrel = 0.0;
  double rmse = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double a3 = 0.0;
  double flicker = 0.0;
  double repeatability = 0.0;
  long n_pixels_evaluated = 0;
  std::string config_hash;

  bool operator==(const MetricsReport&) const = default;
};

/// Returns one human-readable description per violated invariant; empty when
/// the sample is well formed.
std::vector<std::string> validate_sequence(const SequenceSample& sample);

/// pixel / 65535, metadata preserved. Throws kDoubleNormalization on a
/// frame that is already normalized.
ThermalFrame raw_to_normalized(const ThermalFrame& frame);

/// Inverse up to quantization: round(v * 65535).
ThermalFrame normalized_to_raw(const ThermalFrame& frame);

}  // namespace thermodepth

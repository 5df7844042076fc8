#pragma once

#include <optional>
#include <string>
#include <vector>

#include "thermodepth/config.hpp"
#include "thermodepth/types.hpp"

namespace thermodepth {

struct DepthScores {
  double absrel = 0.0;
  double rmse = 0.0;
  std::vector<double> accuracy;  // one per threshold, a1 first
  long n_pixels = 0;
};

/// Pixels count when both masks are set and gt lies in [min_depth, max_depth];
/// predictions are clamped to that range, never rescaled. Throws
/// kInvalidArgument when no pixel qualifies.
DepthScores depth_metrics(const DepthMap& pred, const DepthMap& gt, const EvalConfig& cfg);

/// Pools pixels over many frames, so the result equals depth_metrics on the
/// concatenation of all frames.
class DepthMetricsAccumulator {
 public:
  explicit DepthMetricsAccumulator(EvalConfig cfg);
  void add(const DepthMap& pred, const DepthMap& gt);
  DepthScores result() const;

 private:
  EvalConfig cfg_;
  double abs_rel_ = 0.0;
  double sq_ = 0.0;
  std::vector<long> hits_;
  long n_ = 0;
};

/// Mean over consecutive pairs of the mean absolute difference. Values are
/// taken as given; callers pick the scale.
double flicker(const std::vector<Grid<double>>& frames);
/// Thermal frames on the [0, 1] scale (raw counts are divided by 65535).
double flicker(const std::vector<ThermalFrame>& frames);
/// 8-bit images on the [0, 1] scale (divided by 255).
double flicker(const std::vector<Image8>& frames);
/// Like flicker(), restricted to pixels where mask is set.
double masked_flicker(const std::vector<Grid<double>>& frames, const Grid<std::uint8_t>& mask);

struct Corner {
  int x = 0;
  int y = 0;
  double score = 0.0;
  bool operator==(const Corner&) const = default;
};

/// Segment test on the 16-pixel radius-3 circle: a corner has arc_length
/// contiguous circle pixels all brighter than centre + delta or all darker
/// than centre - delta. Score is the largest delta for which that holds.
/// Non-maximum suppression keeps a corner only if no corner within
/// nonmax_radius (Chebyshev) beats it: higher score, then the longer
/// qualifying arc, then the smaller (y, x).
std::vector<Corner> detect_corners(const Image8& image, const CornerConfig& cfg);

struct Repeatability {
  double value = 0.0;     // mean over pairs, in [0, 1]
  int pairs = 0;
  int empty_pairs = 0;    // pairs with no usable detections (scored 0)
};

/// Corners of frame t are shifted by motion[t+1] - motion[t] and matched to
/// the nearest corner of frame t+1 within `repeatability_radius`. Corners
/// within 3 + nonmax_radius px of the border in either frame are ignored. Throws kInvalidArgument when
/// motion is absent.
Repeatability repeatability(const std::vector<Image8>& frames, const std::optional<std::vector<Motion>>& motion,
                            const EvalConfig& cfg);

/// One JSON record per evaluation run.
std::string report_json(const MetricsReport& report);
MetricsReport parse_report_json(const std::string& text);
/// Comparison table shaped like the published ablation tables.
std::string csv_header();
std::string csv_row(const std::string& model, const MetricsReport& report);

}  // namespace thermodepth

#pragma once

// Supervised depth losses. Every term works in double precision and returns
// its gradient with respect to the prediction; masked pixels (pred.valid and
// gt.valid both required) contribute nothing and receive exactly zero
// gradient.

#include <cstdint>
#include <vector>

#include "thermodepth/config.hpp"
#include "thermodepth/types.hpp"

namespace thermodepth {

struct TermResult {
  double value = 0.0;
  Grid<double> d_pred;   // dL/dpred
  Grid<double> d_guide;  // dL/dguide (smoothness only, else empty)
  bool degenerate = false;  // too few valid pixels; value is 0
};

/// (1/n) sum d^2 - (lambda_si/n^2) (sum d)^2 with d = log pred - log gt over
/// valid pixels with positive depths.
TermResult silog_term(const DepthMap& pred, const DepthMap& gt, double lambda_si);

/// mean over valid pixels of (1 - SSIM) / 2 on depths normalized by the gt
/// clamp range. Window statistics are 3x3 means with reflect padding that
/// only count valid pixels.
TermResult ssim_term(const DepthMap& pred, const DepthMap& gt);

struct OrdinalPair {
  int a = 0;  // flat pixel indices
  int b = 0;
  int label = 0;  // +1: a farther, -1: b farther, 0: equal within the ratio
};

/// Uniform pairs of distinct valid pixels, labelled from gt.
std::vector<OrdinalPair> sample_ordinal_pairs(const DepthMap& pred, const DepthMap& gt, int n_pairs,
                                              double ratio_threshold, std::uint64_t seed);

/// Mean of softplus(-r (pred_a - pred_b)) for r != 0 and (pred_a - pred_b)^2
/// for r = 0.
TermResult ordinal_term(const DepthMap& pred, const DepthMap& gt, int n_pairs, double ratio_threshold,
                        std::uint64_t seed);
TermResult ordinal_term(const DepthMap& pred, const std::vector<OrdinalPair>& pairs);

/// With d* = pred / mean(pred): mean over horizontal neighbour pairs of
/// |dx d*| exp(-alpha |dx guide|) plus the same over vertical pairs. Only
/// pairs of two valid pixels count.
TermResult smoothness_term(const DepthMap& pred, const ThermalFrame& guide, double alpha);

double silog_loss(const DepthMap& pred, const DepthMap& gt, double lambda_si);
double ssim_loss(const DepthMap& pred, const DepthMap& gt);
double ordinal_loss(const DepthMap& pred, const DepthMap& gt, int n_pairs, double ratio_threshold, std::uint64_t seed);
double smoothness_loss(const DepthMap& pred, const ThermalFrame& guide, double alpha = 1.0);

struct LossBreakdown {
  double silog = 0.0;
  double ssim = 0.0;
  double ordinal = 0.0;
  double smoothness = 0.0;
  double total = 0.0;

  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown scaled(double s) const;
};

struct TotalLoss {
  LossBreakdown breakdown;
  Grid<double> d_pred;
  Grid<double> d_guide;
  bool degenerate = false;
};

/// lambda1 SIlog + lambda2 SSIM + lambda3 ordinal + lambda4 smoothness.
/// The ordinal sampler is seeded with `seed`.
TotalLoss total_loss(const DepthMap& pred, const DepthMap& gt, const ThermalFrame& guide, const LossConfig& cfg,
                     std::uint64_t seed);

}  // namespace thermodepth

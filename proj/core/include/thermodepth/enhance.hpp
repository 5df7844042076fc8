#pragma once

#include <array>
#include <cstdint>

#include "thermodepth/autograd.hpp"
#include "thermodepth/config.hpp"
#include "thermodepth/types.hpp"

namespace thermodepth {

// ---- refinement network --------------------------------------------------------

/// Registers refine.* tensors (theta) in `set`, initialized from `seed`.
template <typename T>
void register_refine_params(nn::ParameterSet<T>& set, const RefineConfig& cfg, std::uint64_t seed);

/// sigmoid(convs(x) + gain * (x - 0.5)); x is a 1 x (h*w) tensor in [0, 1].
template <typename T>
nn::Var refine_forward(nn::Tape<T>& tape, const RefineConfig& cfg, const nn::ParameterSet<T>& params, nn::Var x);

/// Receptive field side length of the refinement stack.
int refine_receptive_field(const RefineConfig& cfg);

struct RefineParams {
  RefineConfig config;
  nn::ParameterSet<double> params;

  long count() const { return params.trainable_count(); }
};

RefineParams init_refine_params(const RefineConfig& cfg, std::uint64_t seed);

/// Copies the refine.* tensors out of a full model parameter set.
template <typename T>
RefineParams extract_refine_params(const RefineConfig& cfg, const nn::ParameterSet<T>& model_params);

/// Normalized frame in, normalized frame out, values in [0, 1]. Throws
/// kReceptiveField for frames smaller than the receptive field and
/// kInvalidArgument for raw input.
ThermalFrame refine(const ThermalFrame& frame, const RefineParams& params);

/// Quantizes a normalized frame to 8 bits: round(v * 255).
Image8 quantize8(const ThermalFrame& frame);

// ---- classical baselines -------------------------------------------------------

/// Per-frame min-max map of raw counts to [0, 255]; constant frames map to 0.
Image8 to_8bit_linear(const ThermalFrame& frame);

/// Separable Gaussian blur with reflect padding; kernel radius ceil(3 sigma).
Image8 gaussian_smooth(const Image8& image, double sigma);
std::vector<double> gaussian_kernel(double sigma);

/// Tile-wise clipped histogram equalization with bilinear interpolation
/// between tile mappings. clip_limit is a multiple of the mean bin count;
/// infinity disables clipping.
Image8 clahe(const Image8& image, double clip_limit, int tiles_x, int tiles_y);

// ---- colour map ------------------------------------------------------------------

/// 256-entry ironbow-style table with strictly increasing luminance.
const std::array<Rgb8, 256>& colormap_table();
double luminance(const Rgb8& c);
ImageRgb colorize(const ThermalFrame& frame);
ImageRgb colorize(const Image8& image);

}  // namespace thermodepth

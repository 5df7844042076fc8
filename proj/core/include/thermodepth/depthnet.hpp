#pragma once

#include <string>
#include <vector>

#include "thermodepth/autograd.hpp"
#include "thermodepth/config.hpp"
#include "thermodepth/recurrent.hpp"
#include "thermodepth/types.hpp"

namespace thermodepth {

/// Canonical parameter storage (checkpointed as 32-bit floats).
using ModelParams = nn::ParameterSet<float>;

/// Allocates every tensor the configuration needs and initializes it from
/// cfg.init_seed. Reservoir W_in / W are registered as fixed.
template <typename T>
nn::ParameterSet<T> init_params(const ModelConfig& cfg);

struct ParameterCensus {
  long theta = 0;  // refinement
  long phi = 0;    // encoder-decoder
  long psi = 0;    // recurrent block incl. latent squeeze and readout
  long fixed = 0;  // untrained reservoir matrices
  long trainable() const { return theta + phi + psi; }
};

template <typename T>
ParameterCensus census(const nn::ParameterSet<T>& params);

/// psi for the reservoir and the ConvGRU variants of the same backbone.
struct RecurrentCensus {
  ParameterCensus reservoir;
  ParameterCensus convgru;
  ParameterCensus none;
};
RecurrentCensus recurrent_census(const ModelConfig& cfg);

/// Names of the parameters the configuration defines, in registration order,
/// with their logical dims and trainability. Used to verify checkpoints.
struct TensorSpec {
  std::string name;
  std::vector<int> dims;
  nn::ParamGroup group;
  bool trainable;
};
std::vector<TensorSpec> expected_tensors(const ModelConfig& cfg);

/// Multi-scale activations: levels[l] is input / 2^l.
struct FeaturePyramid {
  std::vector<nn::Matrix<double>> levels;
  std::vector<nn::Shape> shapes;
};

template <typename T>
class DepthModel {
 public:
  struct State {
    nn::Var v;       // reservoir membrane potentials
    nn::Var spikes;  // reservoir spikes (spiking mode)
    nn::Var hidden;  // convgru hidden grid
  };

  struct FrameResult {
    nn::Var refined;
    std::vector<nn::Var> pyramid;  // after injection
    nn::Var latent;
    nn::Var rb_out;
    nn::Var depth;  // 1 x (h*w)
    State state;
  };

  DepthModel(const ModelConfig& cfg, const nn::ParameterSet<T>& params);

  const ModelConfig& config() const { return cfg_; }
  nn::Shape input_shape() const { return {1, cfg_.backbone.height, cfg_.backbone.width}; }

  nn::Var refine(nn::Tape<T>& tape, nn::Var x) const;
  std::vector<nn::Var> encode(nn::Tape<T>& tape, nn::Var y) const;
  nn::Var latent_squeeze(nn::Tape<T>& tape, nn::Var bottleneck) const;
  /// Residual broadcast of dense(rb_out) onto the bottleneck (or replacement
  /// when readout_replace is set). Other levels are passed through.
  std::vector<nn::Var> readout_inject(nn::Tape<T>& tape, std::vector<nn::Var> pyramid, nn::Var rb_out) const;
  /// Returns depth in (min_depth, max_depth), shape 1 x (h*w).
  nn::Var decode(nn::Tape<T>& tape, const std::vector<nn::Var>& pyramid) const;

  State initial_state(nn::Tape<T>& tape) const;
  /// refine -> encode -> squeeze -> recurrent step -> inject -> decode.
  FrameResult step(nn::Tape<T>& tape, nn::Var x, const State& prev) const;

 private:
  nn::Var p(nn::Tape<T>& tape, const std::string& name) const { return tape.param(params_, name); }
  nn::Var conv(nn::Tape<T>& tape, nn::Var x, const std::string& prefix, int stride = 1) const;
  nn::Var dwconv(nn::Tape<T>& tape, nn::Var x, const std::string& prefix) const;
  nn::Var stage_block(nn::Tape<T>& tape, nn::Var x, int level) const;

  ModelConfig cfg_;
  const nn::ParameterSet<T>& params_;
};

// ---- pure wrappers (double precision, no gradient recording) -----------------

FeaturePyramid encode(const ThermalFrame& y, const ModelConfig& cfg, const nn::ParameterSet<double>& params);
Eigen::VectorXd latent_squeeze(const nn::Matrix<double>& bottleneck, nn::Shape shape, const ModelConfig& cfg,
                               const nn::ParameterSet<double>& params);
FeaturePyramid readout_inject(const FeaturePyramid& pyramid, const Eigen::VectorXd& rb_out, const ModelConfig& cfg,
                              const nn::ParameterSet<double>& params);
DepthMap decode(const FeaturePyramid& pyramid, const ModelConfig& cfg, const nn::ParameterSet<double>& params);

/// Converts a 1 x (h*w) depth row into a DepthMap with an all-valid mask.
template <typename T>
DepthMap to_depth_map(const nn::Matrix<T>& row, int width, int height, double min_depth, double max_depth);

/// Frame pixels as a 1 x (h*w) row. Raw frames are normalized on the fly.
template <typename T>
nn::Matrix<T> frame_row(const ThermalFrame& frame);

}  // namespace thermodepth

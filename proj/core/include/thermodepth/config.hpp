#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace thermodepth {

enum class BackboneKind { kTinyResidual, kTinyMobile, kTinyEfficient };
enum class RecurrentKind { kNone, kConvGru, kReservoir };
enum class ReservoirMode { kLeakyIntegrator, kSpikingSurrogate };
enum class Activation { kIdentity, kTanh, kSigmoid };
enum class OptimizerKind { kPlainGradient, kMomentum, kAdaptive };

std::string_view to_string(BackboneKind v);
std::string_view to_string(RecurrentKind v);
std::string_view to_string(ReservoirMode v);
std::string_view to_string(Activation v);
std::string_view to_string(OptimizerKind v);
BackboneKind parse_backbone(std::string_view s);
RecurrentKind parse_recurrent(std::string_view s);
ReservoirMode parse_reservoir_mode(std::string_view s);
Activation parse_activation(std::string_view s);
OptimizerKind parse_optimizer(std::string_view s);

/// Encoder-decoder topology. Level l of the pyramid has channels[l - 1]
/// (level 0 uses stem_channels) at input / 2^l resolution.
struct BackboneConfig {
  BackboneKind name = BackboneKind::kTinyEfficient;
  std::vector<int> channels{16, 32, 64, 128};
  int stem_channels = 8;
  int expansion = 4;  // inverted-bottleneck expansion factor
  int width = 80;
  int height = 64;
  int latent_dim = 128;  // K
  bool use_skips = true;
  bool readout_replace = false;  // full spatial replacement instead of residual
  double min_depth = 0.3;
  double max_depth = 10.0;

  int levels() const { return static_cast<int>(channels.size()); }
  bool operator==(const BackboneConfig&) const = default;
};

/// Refinement network: `layers` 3x3 convolutions 1 -> channels -> ... -> 1.
struct RefineConfig {
  bool enabled = true;
  int channels = 16;
  int layers = 4;
  double residual_init = 4.0;
  bool operator==(const RefineConfig&) const = default;
};

/// Reservoir of leaky integrate-and-fire units. v_threshold / v_reset only
/// matter in spiking mode and are placeholders, not measured values.
struct ReservoirConfig {
  int neurons = 32;      // N
  int output_dim = 32;   // rows of W_out
  double spectral_radius = 0.9;
  double exc_fraction = 0.8;
  double density = 1.0;  // fraction of nonzero recurrent weights
  double input_scale = 1.0;
  double tau_m = 1.0;
  double dt = 0.5;
  double r_m = 1.0;
  double w_out_init = 0.01;
  Activation f_out = Activation::kIdentity;
  ReservoirMode mode = ReservoirMode::kLeakyIntegrator;
  double v_threshold = 1.0;
  double v_reset = 0.0;
  double surrogate_slope = 5.0;
  bool operator==(const ReservoirConfig&) const = default;
};

struct ModelConfig {
  BackboneConfig backbone;
  RefineConfig refine;
  RecurrentKind rb = RecurrentKind::kReservoir;
  ReservoirConfig reservoir;
  std::uint64_t init_seed = 1;
  bool operator==(const ModelConfig&) const = default;
};

struct LossWeights {
  double lambda1 = 0.9;  // SIlog
  double lambda2 = 0.4;  // SSIM
  double lambda3 = 0.1;  // ordinal
  double lambda4 = 0.1;  // smoothness
  bool operator==(const LossWeights&) const = default;
};

struct LossConfig {
  LossWeights weights;
  double lambda_si = 0.5;
  int ordinal_pairs = 512;
  double ordinal_ratio = 1.02;
  double edge_alpha = 1.0;
  bool operator==(const LossConfig&) const = default;
};

struct TrainConfig {
  double eta = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdaptive;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int unroll = 8;  // T
  int batch_size = 4;
  int epochs = 125;
  int max_steps = 0;  // 0 = no cap beyond epochs
  std::uint64_t seed = 1;
  LossConfig loss;
  double grad_clip = 5.0;  // <= 0 disables
  int workers = 1;
  int checkpoint_every = 1;  // epochs
  bool operator==(const TrainConfig&) const = default;
};

struct SensorModel {
  double agc_lo = 1.0;
  double agc_hi = 99.0;
  double drift_amplitude = 800.0;
  double drift_period = 16.0;
  int nuc_interval = 0;
  int nuc_freeze_len = 1;
  double noise_sigma = 60.0;
  bool radiometric = false;
  bool operator==(const SensorModel&) const = default;
};

struct CornerConfig {
  int delta = 20;
  int arc_length = 9;
  int nonmax_radius = 3;
  bool operator==(const CornerConfig&) const = default;
};

struct EvalConfig {
  double min_depth = 0.3;
  double max_depth = 10.0;
  std::vector<double> thresholds{1.25, 1.25 * 1.25, 1.25 * 1.25 * 1.25};
  CornerConfig corners;
  double repeatability_radius = 2.0;
  bool operator==(const EvalConfig&) const = default;
};

/// Synthetic data generation suites.
struct GenConfig {
  int sequences_per_suite = 4;
  int frames = 8;
  int width = 80;
  int height = 64;
  std::uint64_t seed = 1;
  bool operator==(const GenConfig&) const = default;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SensorModel sensor;
  EvalConfig eval;
  GenConfig gen;
  bool operator==(const RunConfig&) const = default;
};

/// Throws Error(kConfig) on invariant violations.
void validate(const RunConfig& cfg);
void validate(const ModelConfig& cfg);

/// Structured-text (JSON) form. Unknown keys are rejected; missing keys keep
/// their defaults.
std::string emit_config(const RunConfig& cfg);
RunConfig parse_config(std::string_view text);
std::string emit_model_config(const ModelConfig& cfg);
ModelConfig parse_model_config(std::string_view text);

/// Hash of everything that determines parameter shapes and semantics.
std::string model_config_hash(const ModelConfig& cfg);
std::string run_config_hash(const RunConfig& cfg);

}  // namespace thermodepth

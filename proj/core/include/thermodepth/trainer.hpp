#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "thermodepth/config.hpp"
#include "thermodepth/depthnet.hpp"
#include "thermodepth/losses.hpp"
#include "thermodepth/recurrent.hpp"
#include "thermodepth/types.hpp"

namespace thermodepth {

struct SequenceOutput {
  std::vector<DepthMap> predictions;
  std::vector<ThermalFrame> refined;  // network input after refinement, [0, 1]
  RecurrentState final_state;
  std::vector<LossBreakdown> frame_losses;
  LossBreakdown loss;  // mean over frames
};

/// Unrolls the model over every frame of `sample`, carrying the recurrent
/// state, and scores each frame against its ground truth. The state starts at
/// zeros unless `initial` is given. When `grads` is set, the gradient of the
/// mean frame loss is added into it.
template <typename T>
SequenceOutput forward_sequence(const SequenceSample& sample, const nn::ParameterSet<T>& params,
                                const ModelConfig& model, const LossConfig& loss, std::uint64_t loss_seed,
                                const std::optional<RecurrentState>& initial = std::nullopt,
                                nn::Gradients<T>* grads = nullptr);

/// Seed of the ordinal pair sampler for frame t of a sequence.
std::uint64_t frame_loss_seed(std::uint64_t sequence_seed, int t);

struct TrainStepLog {
  int step = 0;
  int epoch = 0;
  LossBreakdown loss;
  double grad_norm = 0.0;  // before clipping
  double wall_time = 0.0;  // s since start; not part of the determinism contract

  bool same_numbers(const TrainStepLog& o) const;
};

std::string to_json_line(const TrainStepLog& entry);
/// Throws kMalformedData on anything that is not a log record.
TrainStepLog parse_log_line(const std::string& line);
std::vector<TrainStepLog> read_train_log(const std::string& path);

struct TrainOptions {
  std::string out_dir;  // checkpoint.tdck and train_log.jsonl; empty writes nothing
  std::function<void(const TrainStepLog&)> on_step;
  std::optional<ModelParams> initial;  // default: init_params(model)
};

struct TrainResult {
  ModelParams params;
  std::vector<TrainStepLog> log;
  int steps = 0;
};

/// Sequences are cut into consecutive windows of `unroll` frames (shorter
/// sequences are used whole); all windows must have equal length. Each epoch
/// visits the windows in a seeded shuffle, one update per batch. Throws
/// kNonFiniteLoss naming the step when the loss stops being finite.
TrainResult train(const std::vector<SequenceSample>& data, const ModelConfig& model, const TrainConfig& cfg,
                  const TrainOptions& opts = {});

// ---- finite-difference verification ------------------------------------------

struct GradcheckEntry {
  std::string name;
  long index = 0;
  nn::ParamGroup group = nn::ParamGroup::kDepth;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradcheckOptions {
  int width = 40;
  int height = 32;
  int frames = 2;
  int per_group = 24;       // sampled entries per parameter group
  double step = 1e-4;       // central-difference step, scaled by max(1, |w|)
  double abs_floor = 1e-6;  // denominator floor of the relative error
  double tolerance = 1e-4;
  std::uint64_t seed = 1;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  std::map<nn::ParamGroup, double> worst;  // per group
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_rel_error < tolerance; }
};

double relative_error(double analytic, double numeric, double abs_floor);

/// The model configuration actually checked: input resized to the options and
/// the pyramid trimmed to the deepest level the size divides into.
ModelConfig gradcheck_model(const ModelConfig& base, const GradcheckOptions& opts);

/// Double-precision check of the full pipeline on a synthetic instance.
GradcheckReport gradcheck(const ModelConfig& base, const LossConfig& loss, const GradcheckOptions& opts);

/// Quadratic loss on a dense layer, where central differences are exact up
/// to rounding.
GradcheckReport gradcheck_linear_toy(std::uint64_t seed, double tolerance);

// ---- evaluation ----------------------------------------------------------------

struct EvalOutput {
  MetricsReport report;
  std::vector<double> sequence_flicker;  // depth flicker per sequence
  std::vector<SequenceOutput> sequences;
};

/// Mean |z_{t+1} - z_t| of the predictions over pixels whose ground truth is
/// static for the whole sequence.
double depth_flicker(const std::vector<DepthMap>& predictions, const SequenceSample& sample);

/// The 8-bit stream the corner detector sees: quantized refinement output,
/// or the linear 8-bit map of the raw frames when refinement is disabled.
std::vector<Image8> enhanced_stream(const SequenceOutput& out, const SequenceSample& sample, const ModelConfig& model);

/// Depth metrics over every frame, depth flicker and corner repeatability
/// averaged over sequences. Oracle mode replaces predictions by ground truth.
EvalOutput evaluate(const ModelParams& params, const ModelConfig& model, const std::vector<SequenceSample>& data,
                    const EvalConfig& cfg, bool oracle = false);

}  // namespace thermodepth

#include "thermodepth/config.hpp"

#include <json.hpp>
#include <set>

#include "thermodepth/common.hpp"

namespace thermodepth {

using json = nlohmann::ordered_json;

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::pair<E, std::string_view> (&table)[N], std::string_view what) {
  for (const auto& [e, name] : table) {
    if (name == s) return e;
  }
  throw Error(Errc::kConfig, "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

template <typename E, std::size_t N>
std::string_view enum_name(E v, const std::pair<E, std::string_view> (&table)[N]) {
  for (const auto& [e, name] : table) {
    if (e == v) return name;
  }
  return "?";
}

constexpr std::pair<BackboneKind, std::string_view> kBackbones[] = {
    {BackboneKind::kTinyResidual, "tiny-residual"},
    {BackboneKind::kTinyMobile, "tiny-mobile"},
    {BackboneKind::kTinyEfficient, "tiny-efficient"},
};
constexpr std::pair<RecurrentKind, std::string_view> kRecurrents[] = {
    {RecurrentKind::kNone, "none"},
    {RecurrentKind::kConvGru, "convgru"},
    {RecurrentKind::kReservoir, "reservoir"},
};
constexpr std::pair<ReservoirMode, std::string_view> kModes[] = {
    {ReservoirMode::kLeakyIntegrator, "leaky-integrator"},
    {ReservoirMode::kSpikingSurrogate, "spiking-surrogate"},
};
constexpr std::pair<Activation, std::string_view> kActivations[] = {
    {Activation::kIdentity, "identity"},
    {Activation::kTanh, "tanh"},
    {Activation::kSigmoid, "sigmoid"},
};
constexpr std::pair<OptimizerKind, std::string_view> kOptimizers[] = {
    {OptimizerKind::kPlainGradient, "plain-gradient"},
    {OptimizerKind::kMomentum, "momentum"},
    {OptimizerKind::kAdaptive, "adaptive"},
};

// Writes every visited field into a JSON object.
struct Emitter {
  json& j;

  template <typename V>
  void operator()(const char* key, const V& v) {
    if constexpr (std::is_same_v<V, BackboneKind> || std::is_same_v<V, RecurrentKind> ||
                  std::is_same_v<V, ReservoirMode> || std::is_same_v<V, Activation> ||
                  std::is_same_v<V, OptimizerKind>) {
      j[key] = std::string(to_string(v));
    } else {
      j[key] = v;
    }
  }

  template <typename S>
  void section(const char* key, const S& s);
};

// Reads fields present in a JSON object; rejects keys nobody consumed.
struct Reader {
  const json& j;
  std::string path;
  std::set<std::string> seen;

  template <typename V>
  void operator()(const char* key, V& v) {
    seen.insert(key);
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
      if constexpr (std::is_same_v<V, BackboneKind>) {
        v = parse_backbone(it->template get<std::string>());
      } else if constexpr (std::is_same_v<V, RecurrentKind>) {
        v = parse_recurrent(it->template get<std::string>());
      } else if constexpr (std::is_same_v<V, ReservoirMode>) {
        v = parse_reservoir_mode(it->template get<std::string>());
      } else if constexpr (std::is_same_v<V, Activation>) {
        v = parse_activation(it->template get<std::string>());
      } else if constexpr (std::is_same_v<V, OptimizerKind>) {
        v = parse_optimizer(it->template get<std::string>());
      } else {
        v = it->template get<V>();
      }
    } catch (const json::exception& e) {
      throw Error(Errc::kConfig, "key " + path + key + ": " + e.what());
    }
  }

  template <typename S>
  void section(const char* key, S& s);

  void finish() const {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!seen.count(it.key())) throw Error(Errc::kConfig, "unknown config key '" + path + it.key() + "'");
    }
  }
};

template <typename V>
void visit(V& v, std::conditional_t<std::is_same_v<V, Emitter>, const BackboneConfig, BackboneConfig>& s) {
  v("name", s.name);
  v("channels", s.channels);
  v("stem_channels", s.stem_channels);
  v("expansion", s.expansion);
  v("width", s.width);
  v("height", s.height);
  v("latent_dim", s.latent_dim);
  v("use_skips", s.use_skips);
  v("readout_replace", s.readout_replace);
  v("min_depth", s.min_depth);
  v("max_depth", s.max_depth);
}

template <typename V>
void visit(V& v, std::conditional_t<std::is_same_v<V, Emitter>, const RefineConfig, RefineConfig>& s) {
  v("enabled", s.enabled);
  v("channels", s.channels);
  v("layers", s.layers);
  v("residual_init", s.residual_init);
}

template <typename V>
void visit(V& v, std::conditional_t<std::is_same_v<V, Emitter>, const ReservoirConfig, ReservoirConfig>& s) {
  v("neurons", s.neurons);
  v("output_dim", s.output_dim);
  v("spectral_radius", s.spectral_radius);
  v("exc_fraction", s.exc_fraction);
  v("density", s.density);
  v("input_scale", s.input_scale);
  v("tau_m", s.tau_m);
  v("dt", s.dt);
  v("r_m", s.r_m);
  v("w_out_init", s.w_out_init);
  v("f_out", s.f_out);
  v("mode", s.mode);
  v("v_threshold", s.v_threshold);
  v("v_reset", s.v_reset);
  v("surrogate_slope", s.surrogate_slope);
}

template <typename V>
void visit(V& v, std::conditional_t<std::is_same_v<V, Emitter>, const ModelConfig, ModelConfig>& s) {
  v.section("backbone", s.backbone);
  v.section("refine", s.refine);
  v("rb", s.rb);
  v.section("reservoir", s.reservoir);
  v("init_seed", s.init_seed);
}

template <typename V>
void visit(V& v, std::conditional_t<std::is_same_v<V, Emitter>, const LossWeights, LossWeights>& s) {
  v("lambda1", s.lambda1);
  v("lambda2", s.lambda2);
  v("lambda3", s.lambda3);
  v("lambda4", s.lambda4);
}

template <typename V>
void visit(V& v, std::conditional_t<std::is_same_v<V, Emitter>, const LossConfig, LossConfig>& s) {
  v.section("weights", s.weights);
  v("lambda_si", s.lambda_si);
  v("ordinal_pairs", s.ordinal_pairs);
  v("ordinal_ratio", s.ordinal_ratio);
  v("edge_alpha", s.edge_alpha);
}

template <typename V>
void visit(V& v, std::conditional_t<std::is_same_v<V, Emitter>, const TrainConfig, TrainConfig>& s) {
  v("eta", s.eta);
  v("optimizer", s.optimizer);
  v("momentum", s.momentum);
  v("beta1", s.beta1);
  v("beta2", s.beta2);
  v("epsilon", s.epsilon);
  v("unroll", s.unroll);
  v("batch_size", s.batch_size);
  v("epochs", s.epochs);
  v("max_steps", s.max_steps);
  v("seed", s.seed);
  v.section("loss", s.loss);
  v("grad_clip", s.grad_clip);
  v("workers", s.workers);
  v("checkpoint_every", s.checkpoint_every);
}

template <typename V>
void visit(V& v, std::conditional_t<std::is_same_v<V, Emitter>, const SensorModel, SensorModel>& s) {
  v("agc_lo", s.agc_lo);
  v("agc_hi", s.agc_hi);
  v("drift_amplitude", s.drift_amplitude);
  v("drift_period", s.drift_period);
  v("nuc_interval", s.nuc_interval);
  v("nuc_freeze_len", s.nuc_freeze_len);
  v("noise_sigma", s.noise_sigma);
  v("radiometric", s.radiometric);
}

template <typename V>
void visit(V& v, std::conditional_t<std::is_same_v<V, Emitter>, const CornerConfig, CornerConfig>& s) {
  v("delta", s.delta);
  v("arc_length", s.arc_length);
  v("nonmax_radius", s.nonmax_radius);
}

template <typename V>
void visit(V& v, std::conditional_t<std::is_same_v<V, Emitter>, const EvalConfig, EvalConfig>& s) {
  v("min_depth", s.min_depth);
  v("max_depth", s.max_depth);
  v("thresholds", s.thresholds);
  v.section("corners", s.corners);
  v("repeatability_radius", s.repeatability_radius);
}

template <typename V>
void visit(V& v, std::conditional_t<std::is_same_v<V, Emitter>, const GenConfig, GenConfig>& s) {
  v("sequences_per_suite", s.sequences_per_suite);
  v("frames", s.frames);
  v("width", s.width);
  v("height", s.height);
  v("seed", s.seed);
}

template <typename V>
void visit(V& v, std::conditional_t<std::is_same_v<V, Emitter>, const RunConfig, RunConfig>& s) {
  v.section("model", s.model);
  v.section("train", s.train);
  v.section("sensor", s.sensor);
  v.section("eval", s.eval);
  v.section("gen", s.gen);
}

template <typename S>
void Emitter::section(const char* key, const S& s) {
  json sub = json::object();
  Emitter e{sub};
  visit(e, s);
  j[key] = std::move(sub);
}

template <typename S>
void Reader::section(const char* key, S& s) {
  seen.insert(key);
  auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_object()) throw Error(Errc::kConfig, "key " + path + key + " must be an object");
  Reader r{*it, path + key + ".", {}};
  visit(r, s);
  r.finish();
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::kConfig, std::string("malformed config: ") + e.what());
  }
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(Errc::kConfig, msg);
}

}  // namespace

std::string_view to_string(BackboneKind v) { return enum_name(v, kBackbones); }
std::string_view to_string(RecurrentKind v) { return enum_name(v, kRecurrents); }
std::string_view to_string(ReservoirMode v) { return enum_name(v, kModes); }
std::string_view to_string(Activation v) { return enum_name(v, kActivations); }
std::string_view to_string(OptimizerKind v) { return enum_name(v, kOptimizers); }
BackboneKind parse_backbone(std::string_view s) { return parse_enum(s, kBackbones, "backbone"); }
RecurrentKind parse_recurrent(std::string_view s) { return parse_enum(s, kRecurrents, "recurrent block"); }
ReservoirMode parse_reservoir_mode(std::string_view s) { return parse_enum(s, kModes, "reservoir mode"); }
Activation parse_activation(std::string_view s) { return parse_enum(s, kActivations, "activation"); }
OptimizerKind parse_optimizer(std::string_view s) { return parse_enum(s, kOptimizers, "optimizer"); }

void validate(const ModelConfig& m) {
  const auto& b = m.backbone;
  require(b.levels() >= 2, "backbone needs at least 2 downsampling stages");
  for (int c : b.channels) require(c > 0, "backbone channels must be positive");
  require(b.stem_channels > 0 && b.expansion > 0 && b.latent_dim > 0, "backbone sizes must be positive");
  const int div = 1 << b.levels();
  require(b.width > 0 && b.height > 0, "input size must be positive");
  require(b.width % div == 0 && b.height % div == 0,
          "input size " + std::to_string(b.width) + "x" + std::to_string(b.height) + " must be divisible by 2^L = " +
              std::to_string(div));
  require(b.width / div >= 2 && b.height / div >= 2, "bottleneck must be at least 2x2");
  require(b.min_depth > 0 && b.max_depth > b.min_depth, "depth range must satisfy 0 < min < max");
  require(m.refine.layers >= 2 && m.refine.channels > 0, "refine network needs >= 2 layers");
  const auto& r = m.reservoir;
  require(r.neurons > 0 && r.output_dim > 0, "reservoir sizes must be positive");
  require(r.exc_fraction >= 0 && r.exc_fraction <= 1, "exc_fraction must be in [0, 1]");
  require(r.spectral_radius > 0, "spectral_radius must be > 0");
  require(r.tau_m > 0 && r.dt > 0 && r.dt <= r.tau_m, "reservoir requires 0 < dt <= tau_m");
  require(r.density >= 0 && r.density <= 1, "density must be in [0, 1]");
}

void validate(const RunConfig& c) {
  validate(c.model);
  const auto& t = c.train;
  require(t.eta >= 0, "eta must be >= 0");
  require(t.unroll >= 1, "unroll length T must be >= 1");
  require(t.batch_size >= 1, "batch size must be >= 1");
  require(t.epochs >= 0 && t.max_steps >= 0, "epochs and max_steps must be >= 0");
  require(t.workers >= 1, "workers must be >= 1");
  const auto& w = t.loss.weights;
  require(w.lambda1 >= 0 && w.lambda2 >= 0 && w.lambda3 >= 0 && w.lambda4 >= 0, "loss weights must be >= 0");
  require(t.loss.ordinal_pairs >= 1, "ordinal_pairs must be >= 1");
  const auto& s = c.sensor;
  require(s.agc_lo >= 0 && s.agc_hi <= 100 && s.agc_lo < s.agc_hi, "AGC percentiles need 0 <= lo < hi <= 100");
  require(s.noise_sigma >= 0, "noise_sigma must be >= 0");
  require(s.nuc_interval >= 0, "nuc_interval must be >= 0");
  require(s.nuc_interval == 0 || s.nuc_freeze_len >= 1, "nuc_freeze_len must be >= 1 when NUC is enabled");
  require(s.drift_period > 0, "drift_period must be > 0");
  const auto& e = c.eval;
  require(e.min_depth > 0 && e.max_depth > e.min_depth, "eval clamp range must satisfy 0 < min < max");
  require(!e.thresholds.empty(), "eval thresholds must be non-empty");
  for (std::size_t i = 0; i < e.thresholds.size(); ++i) {
    require(e.thresholds[i] > 1.0, "eval thresholds must be > 1");
    if (i) require(e.thresholds[i] > e.thresholds[i - 1], "eval thresholds must strictly increase");
  }
  require(c.gen.frames >= 1 && c.gen.sequences_per_suite >= 1, "gen sizes must be positive");
}

std::string emit_config(const RunConfig& cfg) {
  json j = json::object();
  Emitter e{j};
  visit(e, cfg);
  return j.dump(2) + "\n";
}

RunConfig parse_config(std::string_view text) {
  json j = parse_json(text);
  if (!j.is_object()) throw Error(Errc::kConfig, "config root must be an object");
  RunConfig cfg;
  Reader r{j, "", {}};
  visit(r, cfg);
  r.finish();
  return cfg;
}

std::string emit_model_config(const ModelConfig& cfg) {
  json j = json::object();
  Emitter e{j};
  visit(e, cfg);
  return j.dump();
}

ModelConfig parse_model_config(std::string_view text) {
  json j = parse_json(text);
  ModelConfig cfg;
  Reader r{j, "model.", {}};
  visit(r, cfg);
  r.finish();
  return cfg;
}

std::string model_config_hash(const ModelConfig& cfg) { return hex64(fnv1a64(emit_model_config(cfg))); }

std::string run_config_hash(const RunConfig& cfg) { return hex64(fnv1a64(emit_config(cfg))); }

}  // namespace thermodepth

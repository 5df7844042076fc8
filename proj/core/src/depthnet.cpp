#include "thermodepth/depthnet.hpp"

#include "init_util.hpp"
#include "thermodepth/enhance.hpp"

namespace thermodepth {

using nn::Matrix;
using nn::ParamGroup;
using nn::Shape;
using nn::Tape;
using nn::Var;

namespace {

std::string level(int l) { return "l" + std::to_string(l); }

int level_channels(const BackboneConfig& b, int l) { return l == 0 ? b.stem_channels : b.channels[l - 1]; }

template <typename T>
void register_backbone(nn::ParameterSet<T>& set, const BackboneConfig& b, std::uint64_t seed) {
  const auto g = ParamGroup::kDepth;
  detail::add_conv(set, "enc.stem", b.stem_channels, 1, 3, g, seed);
  for (int l = 1; l <= b.levels(); ++l) {
    const int c = level_channels(b, l);
    const std::string pre = "enc." + level(l);
    detail::add_conv(set, pre + ".down", c, level_channels(b, l - 1), 3, g, seed);
    switch (b.name) {
      case BackboneKind::kTinyResidual:
        detail::add_conv(set, pre + ".block", c, c, 3, g, seed, 0.5);
        break;
      case BackboneKind::kTinyMobile:
        detail::add_dwconv(set, pre + ".dw", c, g, seed);
        detail::add_conv(set, pre + ".pw", c, c, 1, g, seed, 0.5);
        break;
      case BackboneKind::kTinyEfficient: {
        const int e = c * b.expansion;
        detail::add_conv(set, pre + ".expand", e, c, 1, g, seed);
        detail::add_dwconv(set, pre + ".dw", e, g, seed);
        detail::add_conv(set, pre + ".project", c, e, 1, g, seed, 0.5);
        break;
      }
    }
  }
  for (int l = b.levels() - 1; l >= 0; --l) {
    const int cin = level_channels(b, l + 1) + level_channels(b, l);
    detail::add_conv(set, "dec." + level(l), level_channels(b, l), cin, 3, g, seed);
  }
  detail::add_conv(set, "dec.head", 1, level_channels(b, 0), 3, g, seed, 0.5);
}

template <typename T>
void register_recurrent(nn::ParameterSet<T>& set, const ModelConfig& cfg) {
  const auto& b = cfg.backbone;
  const int cb = level_channels(b, b.levels());
  const auto g = ParamGroup::kRecurrent;
  const std::uint64_t seed = cfg.init_seed;
  switch (cfg.rb) {
    case RecurrentKind::kNone:
      break;
    case RecurrentKind::kReservoir: {
      detail::add_conv(set, "rb.latent", b.latent_dim, cb, 1, g, seed, 1.0);
      const ReservoirParams res = init_reservoir(seed, cfg.reservoir, b.latent_dim);
      const int n = cfg.reservoir.neurons;
      set.add("rb.reservoir.w_in", {n, b.latent_dim}, ParamGroup::kFixed, false).value = res.w_in.cast<T>();
      set.add("rb.reservoir.w", {n, n}, ParamGroup::kFixed, false).value = res.w.cast<T>();
      set.add("rb.reservoir.w_out", {cfg.reservoir.output_dim, n}, g).value = res.w_out.cast<T>();
      detail::add_dense(set, "rb.readout", cb, cfg.reservoir.output_dim, g, seed);
      break;
    }
    case RecurrentKind::kConvGru:
      for (const char* gate : {"z", "r", "h"}) {
        detail::add_conv(set, std::string("rb.gru.") + gate, cb, 2 * cb, 3, g, seed, 0.5);
      }
      break;
  }
}

}  // namespace

template <typename T>
nn::ParameterSet<T> init_params(const ModelConfig& cfg) {
  validate(cfg);
  nn::ParameterSet<T> set;
  if (cfg.refine.enabled) register_refine_params(set, cfg.refine, cfg.init_seed);
  register_backbone(set, cfg.backbone, cfg.init_seed);
  register_recurrent(set, cfg);
  return set;
}

template <typename T>
ParameterCensus census(const nn::ParameterSet<T>& params) {
  ParameterCensus c;
  for (const auto& p : params) {
    if (!p.trainable) {
      c.fixed += p.numel();
      continue;
    }
    switch (p.group) {
      case ParamGroup::kRefine: c.theta += p.numel(); break;
      case ParamGroup::kDepth: c.phi += p.numel(); break;
      case ParamGroup::kRecurrent: c.psi += p.numel(); break;
      case ParamGroup::kFixed: c.fixed += p.numel(); break;
    }
  }
  return c;
}

RecurrentCensus recurrent_census(const ModelConfig& cfg) {
  RecurrentCensus rc;
  ModelConfig m = cfg;
  m.rb = RecurrentKind::kReservoir;
  rc.reservoir = census(init_params<float>(m));
  m.rb = RecurrentKind::kConvGru;
  rc.convgru = census(init_params<float>(m));
  m.rb = RecurrentKind::kNone;
  rc.none = census(init_params<float>(m));
  return rc;
}

std::vector<TensorSpec> expected_tensors(const ModelConfig& cfg) {
  // Shapes and names only depend on the config, so a float set is built and
  // described; values are discarded.
  std::vector<TensorSpec> out;
  for (const auto& p : init_params<float>(cfg)) out.push_back({p.name, p.dims, p.group, p.trainable});
  return out;
}

// ---- DepthModel ------------------------------------------------------------------

template <typename T>
DepthModel<T>::DepthModel(const ModelConfig& cfg, const nn::ParameterSet<T>& params) : cfg_(cfg), params_(params) {}

template <typename T>
Var DepthModel<T>::conv(Tape<T>& tape, Var x, const std::string& prefix, int stride) const {
  return nn::conv2d(tape, x, p(tape, prefix + ".w"), p(tape, prefix + ".b"), stride);
}

template <typename T>
Var DepthModel<T>::dwconv(Tape<T>& tape, Var x, const std::string& prefix) const {
  return nn::depthwise_conv2d(tape, x, p(tape, prefix + ".w"), p(tape, prefix + ".b"));
}

template <typename T>
Var DepthModel<T>::stage_block(Tape<T>& tape, Var x, int l) const {
  const std::string pre = "enc." + level(l);
  switch (cfg_.backbone.name) {
    case BackboneKind::kTinyResidual:
      return nn::silu(tape, nn::add(tape, x, conv(tape, x, pre + ".block")));
    case BackboneKind::kTinyMobile: {
      const Var d = nn::silu(tape, dwconv(tape, x, pre + ".dw"));
      return nn::silu(tape, nn::add(tape, x, conv(tape, d, pre + ".pw")));
    }
    case BackboneKind::kTinyEfficient: {
      const Var e = nn::silu(tape, conv(tape, x, pre + ".expand"));
      const Var d = nn::silu(tape, dwconv(tape, e, pre + ".dw"));
      return nn::add(tape, x, conv(tape, d, pre + ".project"));
    }
  }
  return x;
}

template <typename T>
Var DepthModel<T>::refine(Tape<T>& tape, Var x) const {
  if (!cfg_.refine.enabled) return x;
  return refine_forward(tape, cfg_.refine, params_, x);
}

template <typename T>
std::vector<Var> DepthModel<T>::encode(Tape<T>& tape, Var y) const {
  const Shape s = tape.shape(y);
  const int levels = cfg_.backbone.levels();
  const int div = 1 << levels;
  if (s.w % div != 0 || s.h % div != 0) {
    throw Error(Errc::kIndivisibleSize, "encode: input " + std::to_string(s.w) + "x" + std::to_string(s.h) +
                                            " must be divisible by 2^L = " + std::to_string(div));
  }
  std::vector<Var> pyr;
  pyr.push_back(nn::silu(tape, conv(tape, y, "enc.stem")));
  for (int l = 1; l <= levels; ++l) {
    const Var down = nn::silu(tape, conv(tape, pyr.back(), "enc." + level(l) + ".down", 2));
    pyr.push_back(stage_block(tape, down, l));
  }
  return pyr;
}

template <typename T>
Var DepthModel<T>::latent_squeeze(Tape<T>& tape, Var bottleneck) const {
  return nn::global_avg_pool(tape, conv(tape, bottleneck, "rb.latent"));
}

template <typename T>
std::vector<Var> DepthModel<T>::readout_inject(Tape<T>& tape, std::vector<Var> pyramid, Var rb_out) const {
  const int expected = cfg_.reservoir.output_dim;
  if (tape.shape(rb_out).size() != expected) {
    throw Error(Errc::kSizeMismatch, "readout_inject: recurrent output has " +
                                         std::to_string(tape.shape(rb_out).size()) + " values, expected " +
                                         std::to_string(expected));
  }
  const Var mod = nn::dense(tape, p(tape, "rb.readout.w"), rb_out, p(tape, "rb.readout.b"));
  Var& bottleneck = pyramid.back();
  bottleneck = cfg_.backbone.readout_replace ? nn::broadcast(tape, mod, tape.shape(bottleneck))
                                             : nn::broadcast_add(tape, bottleneck, mod);
  return pyramid;
}

template <typename T>
Var DepthModel<T>::decode(Tape<T>& tape, const std::vector<Var>& pyramid) const {
  const int levels = cfg_.backbone.levels();
  Var d = pyramid[levels];
  for (int l = levels - 1; l >= 0; --l) {
    const Var up = nn::upsample2x(tape, d);
    const Var skip = cfg_.backbone.use_skips ? pyramid[l] : nn::zeros_like(tape, pyramid[l]);
    d = nn::silu(tape, conv(tape, nn::concat_channels(tape, {up, skip}), "dec." + level(l)));
  }
  const Var s = nn::sigmoid(tape, conv(tape, d, "dec.head"));
  const T lo = static_cast<T>(cfg_.backbone.min_depth);
  const T hi = static_cast<T>(cfg_.backbone.max_depth);
  return nn::affine(tape, s, hi - lo, lo);
}

template <typename T>
typename DepthModel<T>::State DepthModel<T>::initial_state(Tape<T>& tape) const {
  State st;
  switch (cfg_.rb) {
    case RecurrentKind::kNone:
      break;
    case RecurrentKind::kReservoir: {
      const int n = cfg_.reservoir.neurons;
      st.v = tape.constant(Matrix<T>::Zero(n, 1), Shape{n, 1, 1});
      st.spikes = tape.constant(Matrix<T>::Zero(n, 1), Shape{n, 1, 1});
      break;
    }
    case RecurrentKind::kConvGru:
      // Sized lazily from the first bottleneck so any divisible input works.
      break;
  }
  return st;
}

template <typename T>
typename DepthModel<T>::FrameResult DepthModel<T>::step(Tape<T>& tape, Var x, const State& prev) const {
  FrameResult r;
  r.refined = refine(tape, x);
  r.pyramid = encode(tape, r.refined);
  r.state = prev;
  switch (cfg_.rb) {
    case RecurrentKind::kNone:
      break;
    case RecurrentKind::kReservoir: {
      r.latent = latent_squeeze(tape, r.pyramid.back());
      const rb::ReservoirVars<T> m{p(tape, "rb.reservoir.w_in"), p(tape, "rb.reservoir.w"),
                                   p(tape, "rb.reservoir.w_out")};
      const auto res = rb::reservoir_step(tape, cfg_.reservoir, m, r.latent, prev.v, prev.spikes);
      r.rb_out = res.output;
      r.state.v = res.v;
      if (res.spikes.valid()) r.state.spikes = res.spikes;
      r.pyramid = readout_inject(tape, std::move(r.pyramid), r.rb_out);
      break;
    }
    case RecurrentKind::kConvGru: {
      const rb::ConvGruVars<T> m{p(tape, "rb.gru.z.w"), p(tape, "rb.gru.z.b"), p(tape, "rb.gru.r.w"),
                                 p(tape, "rb.gru.r.b"), p(tape, "rb.gru.h.w"), p(tape, "rb.gru.h.b")};
      Var& bottleneck = r.pyramid.back();
      const Shape bs = tape.shape(bottleneck);
      const Var h_prev = prev.hidden.valid() ? prev.hidden : tape.constant(Matrix<T>::Zero(bs.c, bs.plane()), bs);
      if (tape.shape(h_prev) != bs) {
        throw Error(Errc::kSizeMismatch, "convgru state shape does not match the bottleneck");
      }
      r.rb_out = rb::convgru_step(tape, m, bottleneck, h_prev);
      r.state.hidden = r.rb_out;
      bottleneck = cfg_.backbone.readout_replace ? r.rb_out : nn::add(tape, bottleneck, r.rb_out);
      break;
    }
  }
  r.depth = decode(tape, r.pyramid);
  return r;
}

template class DepthModel<float>;
template class DepthModel<double>;

// ---- pure wrappers ---------------------------------------------------------------

namespace {

FeaturePyramid to_pyramid(const Tape<double>& tape, const std::vector<Var>& vars) {
  FeaturePyramid fp;
  for (Var v : vars) {
    fp.levels.push_back(tape.value(v));
    fp.shapes.push_back(tape.shape(v));
  }
  return fp;
}

std::vector<Var> from_pyramid(Tape<double>& tape, const FeaturePyramid& fp) {
  std::vector<Var> vars;
  for (std::size_t i = 0; i < fp.levels.size(); ++i) vars.push_back(tape.constant(fp.levels[i], fp.shapes[i]));
  return vars;
}

void check_pyramid(const FeaturePyramid& fp, const ModelConfig& cfg) {
  if (static_cast<int>(fp.levels.size()) != cfg.backbone.levels() + 1 || fp.shapes.size() != fp.levels.size()) {
    throw Error(Errc::kSizeMismatch, "feature pyramid has the wrong number of levels");
  }
}

}  // namespace

FeaturePyramid encode(const ThermalFrame& y, const ModelConfig& cfg, const nn::ParameterSet<double>& params) {
  Tape<double> tape(false);
  DepthModel<double> model(cfg, params);
  const Var x = tape.constant(frame_row<double>(y), Shape{1, y.height(), y.width()});
  return to_pyramid(tape, model.encode(tape, x));
}

Eigen::VectorXd latent_squeeze(const Matrix<double>& bottleneck, Shape shape, const ModelConfig& cfg,
                               const nn::ParameterSet<double>& params) {
  Tape<double> tape(false);
  DepthModel<double> model(cfg, params);
  const Var z = model.latent_squeeze(tape, tape.constant(bottleneck, shape));
  return Eigen::Map<const Eigen::VectorXd>(tape.value(z).data(), tape.value(z).size());
}

FeaturePyramid readout_inject(const FeaturePyramid& pyramid, const Eigen::VectorXd& rb_out, const ModelConfig& cfg,
                              const nn::ParameterSet<double>& params) {
  check_pyramid(pyramid, cfg);
  Tape<double> tape(false);
  DepthModel<double> model(cfg, params);
  const int n = static_cast<int>(rb_out.size());
  const Var r = tape.constant(Matrix<double>(rb_out), Shape{n, 1, 1});
  return to_pyramid(tape, model.readout_inject(tape, from_pyramid(tape, pyramid), r));
}

DepthMap decode(const FeaturePyramid& pyramid, const ModelConfig& cfg, const nn::ParameterSet<double>& params) {
  check_pyramid(pyramid, cfg);
  Tape<double> tape(false);
  DepthModel<double> model(cfg, params);
  const Var d = model.decode(tape, from_pyramid(tape, pyramid));
  const Shape s = tape.shape(d);
  return to_depth_map(tape.value(d), s.w, s.h, cfg.backbone.min_depth, cfg.backbone.max_depth);
}

template <typename T>
DepthMap to_depth_map(const Matrix<T>& row, int width, int height, double min_depth, double max_depth) {
  if (row.size() != static_cast<long>(width) * height) {
    throw Error(Errc::kSizeMismatch, "to_depth_map: row length does not match width x height");
  }
  DepthMap d = DepthMap::filled(width, height, 0.0, min_depth, max_depth);
  for (long i = 0; i < row.size(); ++i) d.depth.data[i] = static_cast<double>(row.data()[i]);
  return d;
}

template <typename T>
Matrix<T> frame_row(const ThermalFrame& frame) {
  const double scale = frame.mode == IntensityMode::kRaw ? 1.0 / kRawMax : 1.0;
  Matrix<T> row(1, static_cast<long>(frame.width()) * frame.height());
  for (long i = 0; i < row.size(); ++i) row.data()[i] = static_cast<T>(frame.pixels.data[i] * scale);
  return row;
}

template nn::ParameterSet<float> init_params<float>(const ModelConfig&);
template nn::ParameterSet<double> init_params<double>(const ModelConfig&);
template ParameterCensus census<float>(const nn::ParameterSet<float>&);
template ParameterCensus census<double>(const nn::ParameterSet<double>&);
template DepthMap to_depth_map<float>(const Matrix<float>&, int, int, double, double);
template DepthMap to_depth_map<double>(const Matrix<double>&, int, int, double, double);
template Matrix<float> frame_row<float>(const ThermalFrame&);
template Matrix<double> frame_row<double>(const ThermalFrame&);

}  // namespace thermodepth

#include "thermodepth/recurrent.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace thermodepth {

using nn::Matrix;
using nn::Shape;
using nn::Tape;
using nn::Var;

double spectral_radius(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

ReservoirParams init_reservoir(std::uint64_t seed, const ReservoirConfig& cfg, int input_dim) {
  if (cfg.neurons <= 0 || input_dim <= 0 || cfg.output_dim <= 0) {
    throw Error(Errc::kInvalidArgument, "reservoir sizes must be positive");
  }
  if (!(cfg.spectral_radius > 0)) throw Error(Errc::kInvalidArgument, "spectral radius target must be > 0");
  const int n = cfg.neurons;
  const int n_exc = static_cast<int>(std::lround(cfg.exc_fraction * n));

  ReservoirParams p;
  p.config = cfg;
  Rng in_rng(seed, "reservoir.w_in");
  p.w_in.resize(n, input_dim);
  const double in_std = cfg.input_scale / std::sqrt(static_cast<double>(input_dim));
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < input_dim; ++k) p.w_in(i, k) = in_rng.normal(0.0, in_std);
  }

  Rng w_rng(seed, "reservoir.w");
  for (int attempt = 0;; ++attempt) {
    p.w.resize(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double mag = std::abs(w_rng.normal());
        const bool keep = w_rng.uniform() < cfg.density;
        // Column j is the presynaptic neuron; its sign is fixed by type.
        p.w(i, j) = keep ? (j < n_exc ? mag : -mag) : 0.0;
      }
    }
    const double rho = spectral_radius(p.w);
    if (rho > 1e-12) {
      p.w *= cfg.spectral_radius / rho;
      break;
    }
    if (attempt + 1 >= 5) {
      throw Error(Errc::kDegenerateReservoir, "recurrent matrix had zero spectral radius on 5 consecutive draws");
    }
  }

  Rng out_rng(seed, "reservoir.w_out");
  p.w_out.resize(cfg.output_dim, n);
  for (int i = 0; i < cfg.output_dim; ++i) {
    for (int j = 0; j < n; ++j) p.w_out(i, j) = out_rng.normal(0.0, cfg.w_out_init);
  }
  return p;
}

RecurrentState RecurrentState::zeros_reservoir(int neurons) {
  RecurrentState s;
  s.kind = RecurrentKind::kReservoir;
  s.v = Eigen::VectorXd::Zero(neurons);
  s.spikes = Eigen::VectorXd::Zero(neurons);
  return s;
}

RecurrentState RecurrentState::zeros_convgru(Shape shape) {
  RecurrentState s;
  s.kind = RecurrentKind::kConvGru;
  s.hidden = Matrix<double>::Zero(shape.c, shape.plane());
  s.hidden_shape = shape;
  return s;
}

Eigen::VectorXd lif_euler_step(const Eigen::VectorXd& v, const Eigen::VectorXd& current, const ReservoirConfig& cfg) {
  const double a = cfg.dt / cfg.tau_m;
  return v + a * (-v + cfg.r_m * current);
}

namespace {

template <typename T>
Matrix<T> column(const Eigen::VectorXd& v) {
  return v.cast<T>();
}

template <typename T>
Var apply_activation(Tape<T>& tape, Var x, Activation f) {
  switch (f) {
    case Activation::kTanh: return nn::tanh(tape, x);
    case Activation::kSigmoid: return nn::sigmoid(tape, x);
    case Activation::kIdentity: break;
  }
  return x;
}

Eigen::VectorXd to_vector(const Matrix<double>& m) { return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()); }

}  // namespace

namespace rb {

template <typename T>
ReservoirStepResult<T> reservoir_step(Tape<T>& tape, const ReservoirConfig& cfg, const ReservoirVars<T>& m, Var u,
                                      Var v_prev, Var spikes_prev) {
  const bool spiking = cfg.mode == ReservoirMode::kSpikingSurrogate;
  const Var rate = spiking ? spikes_prev : v_prev;
  const Var drive_in = nn::dense(tape, m.w_in, u, Var{});
  const Var drive_rec = nn::dense(tape, m.w, rate, Var{});
  const Var current = nn::add(tape, drive_in, drive_rec);

  const T a = static_cast<T>(cfg.dt / cfg.tau_m);
  const Var leak = nn::affine(tape, v_prev, T(1) - a, T(0));
  const Var v_pre = nn::add(tape, leak, nn::affine(tape, current, a * static_cast<T>(cfg.r_m), T(0)));

  ReservoirStepResult<T> out;
  if (!spiking) {
    out.v = v_pre;
  } else {
    const T thr = static_cast<T>(cfg.v_threshold);
    const T reset = static_cast<T>(cfg.v_reset);
    const T slope = static_cast<T>(cfg.surrogate_slope);
    const Matrix<T>& vp = tape.value(v_pre);
    Matrix<T> s = (vp.array() >= thr).template cast<T>().matrix();
    // Heaviside forward, fast-sigmoid derivative backward.
    out.spikes = tape.push(s, tape.shape(v_pre), {v_pre}, [v_pre, thr, slope](Tape<T>& t, const Matrix<T>& g) {
      const auto d = (t.value(v_pre).array() - thr).abs() * slope + T(1);
      t.accumulate_expr(v_pre, (g.array() / (d * d)).matrix());
    });
    Matrix<T> v_new = (vp.array() * (T(1) - s.array()) + reset * s.array()).matrix();
    out.v = tape.push(std::move(v_new), tape.shape(v_pre), {v_pre}, [v_pre, s](Tape<T>& t, const Matrix<T>& g) {
      t.accumulate_expr(v_pre, (g.array() * (T(1) - s.array())).matrix());
    });
  }
  out.output = apply_activation(tape, nn::dense(tape, m.w_out, out.v, Var{}), cfg.f_out);
  return out;
}

template <typename T>
Var convgru_step(Tape<T>& tape, const ConvGruVars<T>& m, Var x, Var h_prev) {
  if (tape.shape(x) != tape.shape(h_prev)) {
    throw Error(Errc::kSizeMismatch, "convgru_step: input and state shapes differ");
  }
  const Var hx = nn::concat_channels(tape, {h_prev, x});
  const Var z = nn::sigmoid(tape, nn::conv2d(tape, hx, m.wz, m.bz));
  const Var r = nn::sigmoid(tape, nn::conv2d(tape, hx, m.wr, m.br));
  const Var rh = nn::mul(tape, r, h_prev);
  const Var cand = nn::tanh(tape, nn::conv2d(tape, nn::concat_channels(tape, {rh, x}), m.wh, m.bh));
  return nn::add(tape, h_prev, nn::mul(tape, z, nn::sub(tape, cand, h_prev)));
}

template ReservoirStepResult<float> reservoir_step<float>(Tape<float>&, const ReservoirConfig&,
                                                          const ReservoirVars<float>&, Var, Var, Var);
template ReservoirStepResult<double> reservoir_step<double>(Tape<double>&, const ReservoirConfig&,
                                                            const ReservoirVars<double>&, Var, Var, Var);
template Var convgru_step<float>(Tape<float>&, const ConvGruVars<float>&, Var, Var);
template Var convgru_step<double>(Tape<double>&, const ConvGruVars<double>&, Var, Var);

}  // namespace rb

std::pair<RecurrentState, Eigen::VectorXd> reservoir_step(const Eigen::VectorXd& u, const RecurrentState& state,
                                                          const ReservoirParams& params) {
  const int n = params.config.neurons;
  if (u.size() != params.input_dim()) {
    throw Error(Errc::kSizeMismatch, "reservoir_step: input length " + std::to_string(u.size()) + " != K " +
                                         std::to_string(params.input_dim()));
  }
  if (state.v.size() != n) throw Error(Errc::kSizeMismatch, "reservoir_step: state length != N");

  Tape<double> tape(false);
  rb::ReservoirVars<double> m{tape.constant(params.w_in, Shape{n, 1, static_cast<int>(params.w_in.cols())}),
                              tape.constant(params.w, Shape{n, 1, n}),
                              tape.constant(params.w_out, Shape{static_cast<int>(params.w_out.rows()), 1, n})};
  const Var uv = tape.constant(column<double>(u), Shape{static_cast<int>(u.size()), 1, 1});
  const Var vv = tape.constant(column<double>(state.v), Shape{n, 1, 1});
  const Eigen::VectorXd spikes = state.spikes.size() == n ? state.spikes : Eigen::VectorXd::Zero(n);
  const Var sv = tape.constant(column<double>(spikes), Shape{n, 1, 1});

  const auto res = rb::reservoir_step(tape, params.config, m, uv, vv, sv);

  RecurrentState next;
  next.kind = RecurrentKind::kReservoir;
  next.v = to_vector(tape.value(res.v));
  next.spikes = res.spikes.valid() ? to_vector(tape.value(res.spikes)) : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd y = to_vector(tape.value(res.output));
  if (!next.v.allFinite() || !y.allFinite()) {
    throw Error(Errc::kNonFiniteState, "reservoir state diverged (non-finite membrane potential)");
  }
  return {std::move(next), std::move(y)};
}

ConvGruParams ConvGruParams::zeros(int c) {
  ConvGruParams p;
  p.wz = p.wr = p.wh = Matrix<double>::Zero(c, 2 * c * 9);
  p.bz = p.br = p.bh = Matrix<double>::Zero(c, 1);
  return p;
}

std::pair<RecurrentState, Matrix<double>> convgru_step(const Matrix<double>& x, Shape shape,
                                                       const RecurrentState& state, const ConvGruParams& params) {
  if (state.hidden_shape != shape || state.hidden.rows() != x.rows() || state.hidden.cols() != x.cols()) {
    throw Error(Errc::kSizeMismatch, "convgru_step: state shape does not match input");
  }
  const Shape ws{shape.c, 1, 2 * shape.c * 9};
  const Shape bs{shape.c, 1, 1};
  Tape<double> tape(false);
  rb::ConvGruVars<double> m{tape.constant(params.wz, ws), tape.constant(params.bz, bs),
                            tape.constant(params.wr, ws), tape.constant(params.br, bs),
                            tape.constant(params.wh, ws), tape.constant(params.bh, bs)};
  const Var h = rb::convgru_step(tape, m, tape.constant(x, shape), tape.constant(state.hidden, shape));
  RecurrentState next = state;
  next.hidden = tape.value(h);
  if (!next.hidden.allFinite()) throw Error(Errc::kNonFiniteState, "convgru state is non-finite");
  return {next, next.hidden};
}

}  // namespace thermodepth

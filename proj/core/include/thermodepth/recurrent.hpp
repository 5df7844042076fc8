#pragma once

#include <Eigen/Core>
#include <utility>

#include "thermodepth/autograd.hpp"
#include "thermodepth/config.hpp"

namespace thermodepth {

/// Fixed random input/recurrent matrices plus the trainable readout.
struct ReservoirParams {
  ReservoirConfig config;
  Eigen::MatrixXd w_in;   // N x K, fixed
  Eigen::MatrixXd w;      // N x N, fixed, column-signed
  Eigen::MatrixXd w_out;  // L x N, trainable

  int input_dim() const { return static_cast<int>(w_in.cols()); }
  bool operator==(const ReservoirParams& o) const {
    return config == o.config && w_in == o.w_in && w == o.w && w_out == o.w_out;
  }
};

/// Draws W_in and W, signs columns (first round(exc_fraction * N) excitatory)
/// and rescales W to the target spectral radius. A draw whose spectral radius
/// is zero is redrawn; the fifth failure throws kDegenerateReservoir.
ReservoirParams init_reservoir(std::uint64_t seed, const ReservoirConfig& config, int input_dim);

/// Largest eigenvalue modulus.
double spectral_radius(const Eigen::MatrixXd& m);

struct RecurrentState {
  RecurrentKind kind = RecurrentKind::kNone;
  Eigen::VectorXd v;       // membrane potentials (reservoir)
  Eigen::VectorXd spikes;  // last spike vector (spiking mode)
  nn::Matrix<double> hidden;  // convgru hidden grid, channels x pixels
  nn::Shape hidden_shape;

  static RecurrentState zeros_reservoir(int neurons);
  static RecurrentState zeros_convgru(nn::Shape shape);
};

/// One Euler step of tau_m dV/dt = -V + R_m I.
Eigen::VectorXd lif_euler_step(const Eigen::VectorXd& v, const Eigen::VectorXd& current, const ReservoirConfig& cfg);

/// Reservoir update: I = W_in u + W r(V), Euler step, optional spike/reset,
/// output f_out(W_out V). Throws kNonFiniteState when the state diverges.
std::pair<RecurrentState, Eigen::VectorXd> reservoir_step(const Eigen::VectorXd& u, const RecurrentState& state,
                                                          const ReservoirParams& params);

struct ConvGruParams {
  nn::Matrix<double> wz, bz, wr, br, wh, bh;  // each conv: C x (2C * 9), bias C x 1

  static ConvGruParams zeros(int channels);
};

/// z = sigma(Conv_z[h, x]), r = sigma(Conv_r[h, x]), h~ = tanh(Conv_h[r*h, x]),
/// h' = (1 - z) h + z h~. Output equals the new state.
std::pair<RecurrentState, nn::Matrix<double>> convgru_step(const nn::Matrix<double>& x, nn::Shape shape,
                                                           const RecurrentState& state, const ConvGruParams& params);

namespace rb {

// Tape-level building blocks shared by the pure functions above and the
// depth model, so there is exactly one implementation of each update.

template <typename T>
struct ReservoirVars {
  nn::Var w_in, w, w_out;
};

template <typename T>
struct ReservoirStepResult {
  nn::Var v;
  nn::Var spikes;  // invalid in leaky-integrator mode
  nn::Var output;
};

template <typename T>
ReservoirStepResult<T> reservoir_step(nn::Tape<T>& tape, const ReservoirConfig& cfg, const ReservoirVars<T>& m,
                                      nn::Var u, nn::Var v_prev, nn::Var spikes_prev);

template <typename T>
struct ConvGruVars {
  nn::Var wz, bz, wr, br, wh, bh;
};

template <typename T>
nn::Var convgru_step(nn::Tape<T>& tape, const ConvGruVars<T>& m, nn::Var x, nn::Var h_prev);

}  // namespace rb

}  // namespace thermodepth

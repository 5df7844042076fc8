#pragma once

// Parameter registration helpers shared by the refinement and depth networks.

#include <cmath>
#include <string>

#include "thermodepth/autograd.hpp"

namespace thermodepth::detail {

template <typename T>
void fill_normal(nn::Parameter<T>& p, std::uint64_t seed, double stddev) {
  Rng rng(seed, p.name);
  T* d = p.value.data();
  for (long i = 0; i < p.value.size(); ++i) d[i] = static_cast<T>(rng.normal(0.0, stddev));
}

/// Registers prefix.w (cout x cin x k x k) and prefix.b. gain scales the
/// He-normal standard deviation sqrt(2 / fan_in).
template <typename T>
void add_conv(nn::ParameterSet<T>& set, const std::string& prefix, int cout, int cin, int k, nn::ParamGroup group,
              std::uint64_t seed, double gain = 1.0) {
  auto& w = set.add(prefix + ".w", {cout, cin, k, k}, group);
  fill_normal(w, seed, gain * std::sqrt(2.0 / (cin * k * k)));
  set.add(prefix + ".b", {cout}, group);
}

/// Depthwise 3x3: prefix.w (c x 1 x 3 x 3) and prefix.b.
template <typename T>
void add_dwconv(nn::ParameterSet<T>& set, const std::string& prefix, int c, nn::ParamGroup group, std::uint64_t seed) {
  auto& w = set.add(prefix + ".w", {c, 1, 3, 3}, group);
  fill_normal(w, seed, std::sqrt(2.0 / 9.0));
  set.add(prefix + ".b", {c}, group);
}

template <typename T>
void add_dense(nn::ParameterSet<T>& set, const std::string& prefix, int out, int in, nn::ParamGroup group,
               std::uint64_t seed, double gain = 1.0) {
  auto& w = set.add(prefix + ".w", {out, in}, group);
  fill_normal(w, seed, gain * std::sqrt(1.0 / in));
  set.add(prefix + ".b", {out}, group);
}

}  // namespace thermodepth::detail

#include "thermodepth/enhance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "init_util.hpp"

namespace thermodepth {

using nn::Matrix;
using nn::ParamGroup;
using nn::Shape;
using nn::Tape;
using nn::Var;

namespace {

std::string conv_name(int i) { return "refine.conv" + std::to_string(i); }

void require_normalized(const ThermalFrame& f, const char* what) {
  if (f.mode != IntensityMode::kNormalized) {
    throw Error(Errc::kInvalidArgument, std::string(what) + " expects a normalized frame");
  }
}

std::uint8_t clamp_round8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

// ---- refinement network --------------------------------------------------------

template <typename T>
void register_refine_params(nn::ParameterSet<T>& set, const RefineConfig& cfg, std::uint64_t seed) {
  for (int i = 1; i <= cfg.layers; ++i) {
    const int cin = i == 1 ? 1 : cfg.channels;
    const int cout = i == cfg.layers ? 1 : cfg.channels;
    // The last layer starts small so the residual path dominates early on.
    detail::add_conv(set, conv_name(i), cout, cin, 3, ParamGroup::kRefine, seed, i == cfg.layers ? 0.1 : 1.0);
  }
  auto& gain = set.add("refine.res_gain", {1}, ParamGroup::kRefine);
  gain.value.setConstant(static_cast<T>(cfg.residual_init));
}

template <typename T>
Var refine_forward(Tape<T>& tape, const RefineConfig& cfg, const nn::ParameterSet<T>& params, Var x) {
  const Shape s = tape.shape(x);
  const int rf = refine_receptive_field(cfg);
  if (s.w < rf || s.h < rf) {
    throw Error(Errc::kReceptiveField, "refine: frame " + std::to_string(s.w) + "x" + std::to_string(s.h) +
                                           " is smaller than the " + std::to_string(rf) + "x" + std::to_string(rf) +
                                           " receptive field");
  }
  Var h = x;
  for (int i = 1; i <= cfg.layers; ++i) {
    const std::string n = conv_name(i);
    h = nn::conv2d(tape, h, tape.param(params, n + ".w"), tape.param(params, n + ".b"));
    if (i < cfg.layers) h = nn::silu(tape, h);
  }
  const Var centered = nn::affine(tape, x, T(1), T(-0.5));
  const Var skip = nn::scale_by(tape, tape.param(params, "refine.res_gain"), centered);
  return nn::sigmoid(tape, nn::add(tape, h, skip));
}

int refine_receptive_field(const RefineConfig& cfg) { return 2 * cfg.layers + 1; }

RefineParams init_refine_params(const RefineConfig& cfg, std::uint64_t seed) {
  RefineParams rp;
  rp.config = cfg;
  register_refine_params(rp.params, cfg, seed);
  return rp;
}

template <typename T>
RefineParams extract_refine_params(const RefineConfig& cfg, const nn::ParameterSet<T>& model_params) {
  RefineParams rp;
  rp.config = cfg;
  for (const auto& p : model_params) {
    if (p.group != ParamGroup::kRefine) continue;
    rp.params.add(p.name, p.dims, p.group, p.trainable).value = p.value.template cast<double>();
  }
  if (rp.params.size() == 0) throw Error(Errc::kMissingTensor, "parameter set has no refine.* tensors");
  return rp;
}

ThermalFrame refine(const ThermalFrame& frame, const RefineParams& params) {
  require_normalized(frame, "refine");
  const int w = frame.width();
  const int h = frame.height();
  Tape<double> tape(false);
  const Var x = tape.constant(Eigen::Map<const Matrix<double>>(frame.pixels.data.data(), 1, w * h), Shape{1, h, w});
  const Var y = refine_forward(tape, params.config, params.params, x);
  ThermalFrame out = frame;
  const Matrix<double>& v = tape.value(y);
  std::copy(v.data(), v.data() + v.size(), out.pixels.data.begin());
  return out;
}

Image8 quantize8(const ThermalFrame& frame) {
  require_normalized(frame, "quantize8");
  Image8 out(frame.width(), frame.height());
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = clamp_round8(frame.pixels.data[i] * 255.0);
  return out;
}

// ---- classical baselines -------------------------------------------------------

Image8 to_8bit_linear(const ThermalFrame& frame) {
  Image8 out(frame.width(), frame.height(), 0);
  if (frame.pixels.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(frame.pixels.data.begin(), frame.pixels.data.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (hi <= lo) return out;
  const double scale = 255.0 / (hi - lo);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = clamp_round8((frame.pixels.data[i] - lo) * scale);
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0)) throw Error(Errc::kInvalidArgument, "gaussian sigma must be > 0");
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + r];
  }
  for (double& v : k) v /= sum;
  return k;
}

namespace {

// Mirror without repeating the edge sample: -1 -> 1, n -> n - 2.
int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

Image8 gaussian_smooth(const Image8& image, double sigma) {
  const std::vector<double> k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = image.width;
  const int h = image.height;
  Grid<double> tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * image(reflect(x + i, w), y);
      tmp(x, y) = acc;
    }
  }
  Image8 out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp(x, reflect(y + i, h));
      out(x, y) = clamp_round8(acc);
    }
  }
  return out;
}

Image8 clahe(const Image8& image, double clip_limit, int tiles_x, int tiles_y) {
  if (tiles_x < 1 || tiles_y < 1) throw Error(Errc::kInvalidArgument, "clahe needs at least one tile per axis");
  const int w = image.width;
  const int h = image.height;
  tiles_x = std::min(tiles_x, std::max(w, 1));
  tiles_y = std::min(tiles_y, std::max(h, 1));
  auto edge = [](int i, int n, int tiles) { return static_cast<int>(static_cast<long>(i) * n / tiles); };

  // One 256-entry lookup table per tile.
  std::vector<std::array<double, 256>> lut(static_cast<std::size_t>(tiles_x) * tiles_y);
  for (int ty = 0; ty < tiles_y; ++ty) {
    for (int tx = 0; tx < tiles_x; ++tx) {
      const int x0 = edge(tx, w, tiles_x), x1 = edge(tx + 1, w, tiles_x);
      const int y0 = edge(ty, h, tiles_y), y1 = edge(ty + 1, h, tiles_y);
      std::array<double, 256> hist{};
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) hist[image(x, y)] += 1.0;
      }
      const double n = static_cast<double>(x1 - x0) * (y1 - y0);
      if (std::isfinite(clip_limit)) {
        const double limit = std::max(clip_limit * n / 256.0, 1.0);
        double excess = 0.0;
        for (double& c : hist) {
          if (c > limit) {
            excess += c - limit;
            c = limit;
          }
        }
        for (double& c : hist) c += excess / 256.0;
      }
      auto& table = lut[static_cast<std::size_t>(ty) * tiles_x + tx];
      double cdf = 0.0;
      for (int v = 0; v < 256; ++v) {
        cdf += hist[v];
        table[v] = n > 0 ? 255.0 * cdf / n : 0.0;
      }
    }
  }

  // Bilinear blend of the four nearest tile tables, weighted by distance to
  // tile centres; pixels beyond the outer centres use the nearest tiles.
  auto locate = [&](double p, int n, int tiles, int& i0, int& i1, double& f) {
    const double pos = (p + 0.5) * tiles / n - 0.5;
    if (pos <= 0) {
      i0 = i1 = 0;
      f = 0;
    } else if (pos >= tiles - 1) {
      i0 = i1 = tiles - 1;
      f = 0;
    } else {
      i0 = static_cast<int>(std::floor(pos));
      i1 = i0 + 1;
      f = pos - i0;
    }
  };
  Image8 out(w, h);
  for (int y = 0; y < h; ++y) {
    int ty0, ty1;
    double fy;
    locate(y, h, tiles_y, ty0, ty1, fy);
    for (int x = 0; x < w; ++x) {
      int tx0, tx1;
      double fx;
      locate(x, w, tiles_x, tx0, tx1, fx);
      const int v = image(x, y);
      auto at = [&](int tx, int ty) { return lut[static_cast<std::size_t>(ty) * tiles_x + tx][v]; };
      const double top = (1 - fx) * at(tx0, ty0) + fx * at(tx1, ty0);
      const double bot = (1 - fx) * at(tx0, ty1) + fx * at(tx1, ty1);
      out(x, y) = clamp_round8((1 - fy) * top + fy * bot);
    }
  }
  return out;
}

// ---- colour map ------------------------------------------------------------------

const std::array<Rgb8, 256>& colormap_table() {
  static const std::array<Rgb8, 256> table = {{
#include "ironbow_table.inc"
  }};
  return table;
}

double luminance(const Rgb8& c) { return 0.299 * c.r + 0.587 * c.g + 0.114 * c.b; }

ImageRgb colorize(const Image8& image) {
  const auto& table = colormap_table();
  ImageRgb out(image.width, image.height);
  for (std::size_t i = 0; i < image.size(); ++i) out.data[i] = table[image.data[i]];
  return out;
}

ImageRgb colorize(const ThermalFrame& frame) { return colorize(quantize8(frame)); }

template void register_refine_params<float>(nn::ParameterSet<float>&, const RefineConfig&, std::uint64_t);
template void register_refine_params<double>(nn::ParameterSet<double>&, const RefineConfig&, std::uint64_t);
template Var refine_forward<float>(Tape<float>&, const RefineConfig&, const nn::ParameterSet<float>&, Var);
template Var refine_forward<double>(Tape<double>&, const RefineConfig&, const nn::ParameterSet<double>&, Var);
template RefineParams extract_refine_params<float>(const RefineConfig&, const nn::ParameterSet<float>&);
template RefineParams extract_refine_params<double>(const RefineConfig&, const nn::ParameterSet<double>&);

}  // namespace thermodepth

#include "thermodepth/losses.hpp"

#include <cmath>

namespace thermodepth {

namespace {

void check_shapes(const DepthMap& pred, const DepthMap& other, const char* what) {
  if (!pred.depth.same_shape(other.depth) || !pred.valid.same_shape(other.valid) ||
      !pred.depth.same_shape(pred.valid)) {
    throw Error(Errc::kSizeMismatch, std::string(what) + ": prediction and target shapes differ");
  }
}

bool usable(const DepthMap& pred, const DepthMap& gt, std::size_t i) { return pred.valid.data[i] && gt.valid.data[i]; }

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double logistic(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

int reflect(int i, int n) {
  if (n == 1) return 0;
  if (i < 0) return -i;
  if (i >= n) return 2 * (n - 1) - i;
  return i;
}

}  // namespace

TermResult silog_term(const DepthMap& pred, const DepthMap& gt, double lambda_si) {
  check_shapes(pred, gt, "silog");
  TermResult r;
  r.d_pred = Grid<double>(pred.width(), pred.height(), 0.0);
  std::vector<std::size_t> idx;
  std::vector<double> d;
  for (std::size_t i = 0; i < pred.depth.size(); ++i) {
    if (!usable(pred, gt, i) || !(gt.depth.data[i] > 0) || !(pred.depth.data[i] > 0)) continue;
    idx.push_back(i);
    d.push_back(std::log(pred.depth.data[i]) - std::log(gt.depth.data[i]));
  }
  if (d.empty()) {
    r.degenerate = true;
    return r;
  }
  const double n = static_cast<double>(d.size());
  double sum = 0.0, sq = 0.0;
  for (double v : d) {
    sum += v;
    sq += v * v;
  }
  r.value = sq / n - lambda_si * sum * sum / (n * n);
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double dd = 2.0 * d[k] / n - 2.0 * lambda_si * sum / (n * n);
    r.d_pred.data[idx[k]] = dd / pred.depth.data[idx[k]];
  }
  return r;
}

TermResult ssim_term(const DepthMap& pred, const DepthMap& gt) {
  check_shapes(pred, gt, "ssim");
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  const int w = pred.width();
  const int h = pred.height();
  const double lo = gt.min_depth;
  const double span = gt.max_depth - gt.min_depth;
  TermResult r;
  r.d_pred = Grid<double>(w, h, 0.0);

  Grid<double> x(w, h), y(w, h);
  Grid<std::uint8_t> m(w, h, 0);
  long n_valid = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    x.data[i] = (pred.depth.data[i] - lo) / span;
    y.data[i] = (gt.depth.data[i] - lo) / span;
    m.data[i] = usable(pred, gt, i) ? 1 : 0;
    n_valid += m.data[i];
  }
  if (n_valid == 0) {
    r.degenerate = true;
    return r;
  }

  double total = 0.0;
  for (int py = 0; py < h; ++py) {
    for (int px = 0; px < w; ++px) {
      if (!m(px, py)) continue;
      // Window members with multiplicity (reflection can repeat a pixel).
      int qx[9], qy[9];
      int k = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int sx = reflect(px + dx, w), sy = reflect(py + dy, h);
          if (!m(sx, sy)) continue;
          qx[k] = sx;
          qy[k] = sy;
          ++k;
        }
      }
      const double inv = 1.0 / k;
      double mx = 0, my = 0, exx = 0, eyy = 0, exy = 0;
      for (int j = 0; j < k; ++j) {
        const double a = x(qx[j], qy[j]), b = y(qx[j], qy[j]);
        mx += a;
        my += b;
        exx += a * a;
        eyy += b * b;
        exy += a * b;
      }
      mx *= inv;
      my *= inv;
      const double vx = exx * inv - mx * mx;
      const double vy = eyy * inv - my * my;
      const double cxy = exy * inv - mx * my;
      const double A = 2 * mx * my + kC1;
      const double B = 2 * cxy + kC2;
      const double C = mx * mx + my * my + kC1;
      const double D = vx + vy + kC2;
      const double s = A * B / (C * D);
      total += (1.0 - s) / 2.0;

      // dS/d(mean_x), dS/d(var_x), dS/d(cov_xy), then chain to each member.
      const double dA = B / (C * D), dB = A / (C * D), dC = -s / C, dD = -s / D;
      const double d_mx = dA * 2 * my + dC * 2 * mx;
      const double d_vx = dD;
      const double d_cxy = dB * 2;
      const double g = -0.5 / static_cast<double>(n_valid) / span;
      for (int j = 0; j < k; ++j) {
        const double a = x(qx[j], qy[j]), b = y(qx[j], qy[j]);
        const double ds = inv * (d_mx + d_vx * 2 * (a - mx) + d_cxy * (b - my));
        r.d_pred(qx[j], qy[j]) += g * ds;
      }
    }
  }
  r.value = total / static_cast<double>(n_valid);
  return r;
}

std::vector<OrdinalPair> sample_ordinal_pairs(const DepthMap& pred, const DepthMap& gt, int n_pairs,
                                              double ratio_threshold, std::uint64_t seed) {
  check_shapes(pred, gt, "ordinal");
  if (n_pairs < 1) throw Error(Errc::kInvalidArgument, "ordinal loss needs n_pairs >= 1");
  std::vector<int> valid;
  for (std::size_t i = 0; i < pred.depth.size(); ++i) {
    if (usable(pred, gt, i) && gt.depth.data[i] > 0) valid.push_back(static_cast<int>(i));
  }
  std::vector<OrdinalPair> pairs;
  if (valid.size() < 2) return pairs;
  Rng rng(seed, "ordinal.pairs");
  const int n = static_cast<int>(valid.size());
  pairs.reserve(n_pairs);
  for (int k = 0; k < n_pairs; ++k) {
    const int ia = rng.uniform_int(0, n - 1);
    int ib = rng.uniform_int(0, n - 2);
    if (ib >= ia) ++ib;
    OrdinalPair p{valid[ia], valid[ib], 0};
    const double ga = gt.depth.data[p.a], gb = gt.depth.data[p.b];
    if (ga / gb > ratio_threshold) {
      p.label = 1;
    } else if (gb / ga > ratio_threshold) {
      p.label = -1;
    }
    pairs.push_back(p);
  }
  return pairs;
}

TermResult ordinal_term(const DepthMap& pred, const std::vector<OrdinalPair>& pairs) {
  TermResult r;
  r.d_pred = Grid<double>(pred.width(), pred.height(), 0.0);
  if (pairs.empty()) {
    r.degenerate = true;
    return r;
  }
  const double inv = 1.0 / static_cast<double>(pairs.size());
  double total = 0.0;
  for (const auto& p : pairs) {
    const double diff = pred.depth.data[p.a] - pred.depth.data[p.b];
    double g;
    if (p.label != 0) {
      const double z = -p.label * diff;
      total += softplus(z);
      g = -p.label * logistic(z);
    } else {
      total += diff * diff;
      g = 2.0 * diff;
    }
    r.d_pred.data[p.a] += inv * g;
    r.d_pred.data[p.b] -= inv * g;
  }
  r.value = total * inv;
  return r;
}

TermResult ordinal_term(const DepthMap& pred, const DepthMap& gt, int n_pairs, double ratio_threshold,
                        std::uint64_t seed) {
  return ordinal_term(pred, sample_ordinal_pairs(pred, gt, n_pairs, ratio_threshold, seed));
}

TermResult smoothness_term(const DepthMap& pred, const ThermalFrame& guide, double alpha) {
  if (!guide.pixels.same_shape(pred.depth) || !pred.valid.same_shape(pred.depth)) {
    throw Error(Errc::kSizeMismatch, "smoothness: prediction and guide shapes differ");
  }
  const int w = pred.width();
  const int h = pred.height();
  TermResult r;
  r.d_pred = Grid<double>(w, h, 0.0);
  r.d_guide = Grid<double>(w, h, 0.0);

  double sum = 0.0;
  long n = 0;
  for (std::size_t i = 0; i < pred.depth.size(); ++i) {
    if (!pred.valid.data[i]) continue;
    sum += pred.depth.data[i];
    ++n;
  }
  if (n == 0) {
    r.degenerate = true;
    return r;
  }
  const double mean = sum / static_cast<double>(n);
  const auto& p = pred.depth;
  const auto& g = guide.pixels;

  // dL/dd* accumulated per pixel, converted through the mean afterwards.
  Grid<double> dstar(w, h, 0.0);
  double total = 0.0;
  for (int axis = 0; axis < 2; ++axis) {
    const int dx = axis == 0 ? 1 : 0;
    const int dy = axis == 0 ? 0 : 1;
    long pairs = 0;
    for (int y = 0; y + dy < h; ++y) {
      for (int x = 0; x + dx < w; ++x) {
        if (pred.valid(x, y) && pred.valid(x + dx, y + dy)) ++pairs;
      }
    }
    if (pairs == 0) continue;
    const double inv = 1.0 / static_cast<double>(pairs);
    for (int y = 0; y + dy < h; ++y) {
      for (int x = 0; x + dx < w; ++x) {
        if (!pred.valid(x, y) || !pred.valid(x + dx, y + dy)) continue;
        const double dd = (p(x + dx, y + dy) - p(x, y)) / mean;
        const double dg = g(x + dx, y + dy) - g(x, y);
        const double wgt = std::exp(-alpha * std::abs(dg));
        total += inv * std::abs(dd) * wgt;
        const double gd = inv * sign(dd) * wgt;
        dstar(x + dx, y + dy) += gd;
        dstar(x, y) -= gd;
        const double gg = -inv * std::abs(dd) * wgt * alpha * sign(dg);
        r.d_guide(x + dx, y + dy) += gg;
        r.d_guide(x, y) -= gg;
      }
    }
  }
  r.value = total;

  double dot = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) dot += dstar.data[i] * p.data[i];
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!pred.valid.data[i]) continue;
    r.d_pred.data[i] = dstar.data[i] / mean - dot / (static_cast<double>(n) * mean * mean);
  }
  return r;
}

double silog_loss(const DepthMap& pred, const DepthMap& gt, double lambda_si) {
  return silog_term(pred, gt, lambda_si).value;
}
double ssim_loss(const DepthMap& pred, const DepthMap& gt) { return ssim_term(pred, gt).value; }
double ordinal_loss(const DepthMap& pred, const DepthMap& gt, int n_pairs, double ratio_threshold,
                    std::uint64_t seed) {
  return ordinal_term(pred, gt, n_pairs, ratio_threshold, seed).value;
}
double smoothness_loss(const DepthMap& pred, const ThermalFrame& guide, double alpha) {
  return smoothness_term(pred, guide, alpha).value;
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  silog += o.silog;
  ssim += o.ssim;
  ordinal += o.ordinal;
  smoothness += o.smoothness;
  total += o.total;
  return *this;
}

LossBreakdown LossBreakdown::scaled(double s) const {
  return {silog * s, ssim * s, ordinal * s, smoothness * s, total * s};
}

TotalLoss total_loss(const DepthMap& pred, const DepthMap& gt, const ThermalFrame& guide, const LossConfig& cfg,
                     std::uint64_t seed) {
  check_shapes(pred, gt, "total_loss");
  // Smoothness only sees pixels valid in both maps.
  DepthMap masked = pred;
  for (std::size_t i = 0; i < masked.valid.size(); ++i) masked.valid.data[i] = usable(pred, gt, i) ? 1 : 0;

  const auto& w = cfg.weights;
  const TermResult t1 = silog_term(pred, gt, cfg.lambda_si);
  const TermResult t2 = ssim_term(pred, gt);
  const TermResult t3 = ordinal_term(pred, gt, cfg.ordinal_pairs, cfg.ordinal_ratio, seed);
  const TermResult t4 = smoothness_term(masked, guide, cfg.edge_alpha);

  TotalLoss out;
  out.breakdown = {t1.value, t2.value, t3.value, t4.value, 0.0};
  out.breakdown.total = w.lambda1 * t1.value + w.lambda2 * t2.value + w.lambda3 * t3.value + w.lambda4 * t4.value;
  out.degenerate = t1.degenerate || t2.degenerate || t3.degenerate || t4.degenerate;
  out.d_pred = Grid<double>(pred.width(), pred.height(), 0.0);
  for (std::size_t i = 0; i < out.d_pred.size(); ++i) {
    out.d_pred.data[i] = w.lambda1 * t1.d_pred.data[i] + w.lambda2 * t2.d_pred.data[i] +
                         w.lambda3 * t3.d_pred.data[i] + w.lambda4 * t4.d_pred.data[i];
  }
  out.d_guide = t4.d_guide;
  for (double& v : out.d_guide.data) v *= w.lambda4;
  return out;
}

}  // namespace thermodepth

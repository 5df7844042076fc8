#include "thermodepth/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fmt/format.h>
#include <json.hpp>
#include <limits>
#include <tuple>

namespace thermodepth {

namespace {

bool counts(const DepthMap& pred, const DepthMap& gt, std::size_t i, const EvalConfig& cfg) {
  const double g = gt.depth.data[i];
  return pred.valid.data[i] && gt.valid.data[i] && g >= cfg.min_depth && g <= cfg.max_depth;
}

}  // namespace

DepthMetricsAccumulator::DepthMetricsAccumulator(EvalConfig cfg)
    : cfg_(std::move(cfg)), hits_(cfg_.thresholds.size(), 0) {}

void DepthMetricsAccumulator::add(const DepthMap& pred, const DepthMap& gt) {
  if (!pred.depth.same_shape(gt.depth) || !pred.valid.same_shape(gt.valid)) {
    throw Error(Errc::kSizeMismatch, "depth_metrics: prediction and ground truth shapes differ");
  }
  for (std::size_t i = 0; i < gt.depth.size(); ++i) {
    if (!counts(pred, gt, i, cfg_)) continue;
    const double g = gt.depth.data[i];
    const double p = std::clamp(pred.depth.data[i], cfg_.min_depth, cfg_.max_depth);
    abs_rel_ += std::abs(p - g) / g;
    sq_ += (p - g) * (p - g);
    const double ratio = std::max(p / g, g / p);
    for (std::size_t k = 0; k < hits_.size(); ++k) {
      if (ratio < cfg_.thresholds[k]) ++hits_[k];
    }
    ++n_;
  }
}

DepthScores DepthMetricsAccumulator::result() const {
  if (n_ == 0) throw Error(Errc::kInvalidArgument, "depth_metrics: no valid pixels inside the clamp range");
  DepthScores s;
  const double n = static_cast<double>(n_);
  s.absrel = abs_rel_ / n;
  s.rmse = std::sqrt(sq_ / n);
  for (long h : hits_) s.accuracy.push_back(static_cast<double>(h) / n);
  s.n_pixels = n_;
  return s;
}

DepthScores depth_metrics(const DepthMap& pred, const DepthMap& gt, const EvalConfig& cfg) {
  DepthMetricsAccumulator acc(cfg);
  acc.add(pred, gt);
  return acc.result();
}

// ---- flicker ---------------------------------------------------------------------

double masked_flicker(const std::vector<Grid<double>>& frames, const Grid<std::uint8_t>& mask) {
  if (frames.size() < 2) throw Error(Errc::kInvalidArgument, "flicker needs at least 2 frames");
  for (const auto& f : frames) {
    if (!f.same_shape(frames.front()) || !f.same_shape(mask)) {
      throw Error(Errc::kSizeMismatch, "flicker: frames differ in shape");
    }
  }
  long n = 0;
  for (auto m : mask.data) n += m ? 1 : 0;
  if (n == 0) return 0.0;
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
    double s = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask.data[i]) s += std::abs(frames[t + 1].data[i] - frames[t].data[i]);
    }
    total += s / static_cast<double>(n);
  }
  return total / static_cast<double>(frames.size() - 1);
}

double flicker(const std::vector<Grid<double>>& frames) {
  if (frames.empty()) throw Error(Errc::kInvalidArgument, "flicker needs at least 2 frames");
  return masked_flicker(frames, Grid<std::uint8_t>(frames.front().width, frames.front().height, 1));
}

double flicker(const std::vector<ThermalFrame>& frames) {
  std::vector<Grid<double>> g;
  for (const auto& f : frames) {
    if (f.mode != frames.front().mode) throw Error(Errc::kInvalidArgument, "flicker: frames mix intensity modes");
    Grid<double> v = f.pixels;
    if (f.mode == IntensityMode::kRaw) {
      for (double& p : v.data) p /= kRawMax;
    }
    g.push_back(std::move(v));
  }
  return flicker(g);
}

double flicker(const std::vector<Image8>& frames) {
  std::vector<Grid<double>> g;
  for (const auto& f : frames) {
    Grid<double> v(f.width, f.height);
    for (std::size_t i = 0; i < f.size(); ++i) v.data[i] = f.data[i] / 255.0;
    g.push_back(std::move(v));
  }
  return flicker(g);
}

// ---- corners ---------------------------------------------------------------------

namespace {

constexpr std::array<std::array<int, 2>, 16> kCircle{{{0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0}, {3, 1},
                                                      {2, 2}, {1, 3}, {0, 3}, {-1, 3}, {-2, 2}, {-3, 1},
                                                      {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}}};

// Largest m such that `arc` contiguous entries of diff are all >= m.
int best_arc(const std::array<int, 16>& diff, int arc) {
  int best = std::numeric_limits<int>::min();
  for (int start = 0; start < 16; ++start) {
    int lo = std::numeric_limits<int>::max();
    for (int k = 0; k < arc; ++k) lo = std::min(lo, diff[(start + k) % 16]);
    best = std::max(best, lo);
  }
  return best;
}

// Longest contiguous run of entries of diff that are > delta.
int longest_run(const std::array<int, 16>& diff, int delta) {
  int best = 0, run = 0;
  for (int k = 0; k < 32; ++k) {
    run = diff[k % 16] > delta ? run + 1 : 0;
    best = std::max(best, std::min(run, 16));
  }
  return best;
}

struct Candidate {
  Corner corner;
  int arc = 0;  // longest qualifying arc; breaks score ties toward true corners
};

bool beats(const Candidate& a, const Candidate& b) {
  if (a.corner.score != b.corner.score) return a.corner.score > b.corner.score;
  if (a.arc != b.arc) return a.arc > b.arc;
  return std::tie(a.corner.y, a.corner.x) < std::tie(b.corner.y, b.corner.x);
}

}  // namespace

std::vector<Corner> detect_corners(const Image8& image, const CornerConfig& cfg) {
  if (cfg.arc_length < 1 || cfg.arc_length > 16) throw Error(Errc::kInvalidArgument, "arc_length must be in [1, 16]");
  const int w = image.width;
  const int h = image.height;
  std::vector<Candidate> raw;
  Grid<int> index(w, h, -1);
  for (int y = 3; y < h - 3; ++y) {
    for (int x = 3; x < w - 3; ++x) {
      const int c = image(x, y);
      std::array<int, 16> bright{}, dark{};
      for (int k = 0; k < 16; ++k) {
        const int v = image(x + kCircle[k][0], y + kCircle[k][1]);
        bright[k] = v - c;
        dark[k] = c - v;
      }
      const int sb = best_arc(bright, cfg.arc_length);
      const int sd = best_arc(dark, cfg.arc_length);
      const int score = std::max(sb, sd);
      if (score > cfg.delta) {
        index(x, y) = static_cast<int>(raw.size());
        const int arc = longest_run(sb >= sd ? bright : dark, cfg.delta);
        raw.push_back({{x, y, static_cast<double>(score)}, arc});
      }
    }
  }
  std::vector<Corner> kept;
  const int r = cfg.nonmax_radius;
  for (const Candidate& cand : raw) {
    const Corner& c = cand.corner;
    bool keep = true;
    for (int y = std::max(0, c.y - r); keep && y <= std::min(h - 1, c.y + r); ++y) {
      for (int x = std::max(0, c.x - r); x <= std::min(w - 1, c.x + r); ++x) {
        const int j = index(x, y);
        if (j >= 0 && (x != c.x || y != c.y) && beats(raw[j], cand)) {
          keep = false;
          break;
        }
      }
    }
    if (keep) kept.push_back(c);
  }
  return kept;
}

Repeatability repeatability(const std::vector<Image8>& frames, const std::optional<std::vector<Motion>>& motion,
                            const EvalConfig& cfg) {
  if (!motion) throw Error(Errc::kInvalidArgument, "repeatability needs ground-truth motion");
  if (motion->size() != frames.size()) throw Error(Errc::kSizeMismatch, "motion_gt length differs from frame count");
  Repeatability out;
  if (frames.size() < 2) return out;
  std::vector<std::vector<Corner>> det;
  for (const auto& f : frames) det.push_back(detect_corners(f, cfg.corners));
  const double r2 = cfg.repeatability_radius * cfg.repeatability_radius;
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
    const double dx = (*motion)[t + 1].dx - (*motion)[t].dx;
    const double dy = (*motion)[t + 1].dy - (*motion)[t].dy;
    const int w = frames[t + 1].width;
    const int h = frames[t + 1].height;
    int considered = 0, matched = 0;
    // Near the border, suppression depends on pixels the other frame cannot
    // see, so only corners clear of it on both sides are scored.
    const int m = 3 + cfg.corners.nonmax_radius;
    auto inside = [&](double x, double y) { return x >= m && y >= m && x <= w - 1 - m && y <= h - 1 - m; };
    for (const Corner& c : det[t]) {
      const double wx = c.x + dx, wy = c.y + dy;
      if (!inside(c.x, c.y) || !inside(wx, wy)) continue;
      ++considered;
      for (const Corner& d : det[t + 1]) {
        const double ex = d.x - wx, ey = d.y - wy;
        if (ex * ex + ey * ey <= r2) {
          ++matched;
          break;
        }
      }
    }
    ++out.pairs;
    if (considered == 0) {
      ++out.empty_pairs;
      continue;
    }
    total += static_cast<double>(matched) / considered;
  }
  out.value = total / out.pairs;
  return out;
}

// ---- reporting -------------------------------------------------------------------

std::string report_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["absrel"] = r.absrel;
  j["rmse"] = r.rmse;
  j["a1"] = r.a1;
  j["a2"] = r.a2;
  j["a3"] = r.a3;
  j["flicker"] = r.flicker;
  j["repeatability"] = r.repeatability;
  j["n_pixels_evaluated"] = r.n_pixels_evaluated;
  j["config_hash"] = r.config_hash;
  return j.dump();
}

MetricsReport parse_report_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    MetricsReport r;
    r.absrel = j.at("absrel").get<double>();
    r.rmse = j.at("rmse").get<double>();
    r.a1 = j.at("a1").get<double>();
    r.a2 = j.at("a2").get<double>();
    r.a3 = j.at("a3").get<double>();
    r.flicker = j.at("flicker").get<double>();
    r.repeatability = j.at("repeatability").get<double>();
    r.n_pixels_evaluated = j.at("n_pixels_evaluated").get<long>();
    r.config_hash = j.at("config_hash").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kMalformedData, std::string("malformed metrics report: ") + e.what());
  }
}

std::string csv_header() { return "model,absrel,rmse,a1,a2,a3"; }

std::string csv_row(const std::string& model, const MetricsReport& r) {
  return fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}", model, r.absrel, r.rmse, r.a1, r.a2, r.a3);
}

}  // namespace thermodepth

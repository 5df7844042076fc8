#include "thermodepth/sensorsim.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numbers>

namespace thermodepth {

namespace {

double round_mm(double meters) { return std::round(meters * 1000.0) / 1000.0; }

// Piecewise-constant texture on a world-space grid; cell values come from a
// hash so the texture is unbounded and needs no storage.
double texture(const SceneSpec& s, double wx, double wy) {
  const auto cx = static_cast<std::int64_t>(std::floor(wx / s.texture_scale));
  const auto cy = static_cast<std::int64_t>(std::floor(wy / s.texture_scale));
  std::uint64_t h = splitmix64(s.seed ^ 0x7465787475726531ULL);
  h = splitmix64(h ^ static_cast<std::uint64_t>(cx));
  h = splitmix64(h ^ static_cast<std::uint64_t>(cy));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return s.texture_amplitude * (2.0 * u - 1.0);
}

bool covers(const Sprite& sp, double cx, double cy, int px, int py) {
  const double dx = px - cx, dy = py - cy;
  const double r = sp.size / 2.0;
  if (sp.shape == SpriteShape::kRect) return std::abs(dx) < r && std::abs(dy) < r;
  return dx * dx + dy * dy < r * r;
}

}  // namespace

SequenceSample render_sequence(const SceneSpec& spec) {
  if (spec.width <= 0 || spec.height <= 0) {
    throw Error(Errc::kZeroSizeFrame, fmt::format("scene {} has zero-size frames", spec.name));
  }
  if (spec.n_frames < 1) throw Error(Errc::kInvalidArgument, "scene needs n_frames >= 1");
  if (!(spec.background_depth > 0)) throw Error(Errc::kInvalidArgument, "background depth must be > 0");
  if (spec.texture_amplitude != 0 && !(spec.texture_scale > 0)) {
    throw Error(Errc::kInvalidArgument, "texture_scale must be > 0");
  }

  // Back to front: farther sprites first so nearer ones overwrite them.
  std::vector<Sprite> order;
  for (const auto& sp : spec.sprites) {
    if (!(sp.depth > 0)) throw Error(Errc::kInvalidArgument, "sprite depth must be > 0");
    if (sp.depth < spec.background_depth) order.push_back(sp);
  }
  std::stable_sort(order.begin(), order.end(), [](const Sprite& a, const Sprite& b) { return a.depth > b.depth; });

  SequenceSample out;
  out.sequence_id = spec.name;
  out.seed = spec.seed;
  out.motion_gt.emplace();
  const double bg_depth = round_mm(spec.background_depth);
  for (int t = 0; t < spec.n_frames; ++t) {
    const double shift_x = spec.cam_dx * t, shift_y = spec.cam_dy * t;
    ThermalFrame f;
    f.pixels = Grid<double>(spec.width, spec.height);
    f.mode = IntensityMode::kRaw;
    f.radiometric = true;
    f.timestamp = t * spec.frame_period;
    f.frame_index = t;
    DepthMap d = DepthMap::filled(spec.width, spec.height, bg_depth);
    Grid<double> temp(spec.width, spec.height);
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        temp(x, y) = spec.background_temperature +
                     (spec.texture_amplitude != 0 ? texture(spec, x - shift_x, y - shift_y) : 0.0);
      }
    }
    for (const auto& sp : order) {
      const double parallax = spec.background_depth / sp.depth;
      const double cx = sp.x + (sp.vx + spec.cam_dx * parallax) * t;
      const double cy = sp.y + (sp.vy + spec.cam_dy * parallax) * t;
      const double r = sp.size / 2.0 + 1.0;
      const int x0 = std::max(0, static_cast<int>(std::floor(cx - r)));
      const int x1 = std::min(spec.width - 1, static_cast<int>(std::ceil(cx + r)));
      const int y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
      const int y1 = std::min(spec.height - 1, static_cast<int>(std::ceil(cy + r)));
      const double depth = round_mm(sp.depth);
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          if (!covers(sp, cx, cy, x, y)) continue;
          temp(x, y) = sp.temperature;
          d.depth(x, y) = depth;
        }
      }
    }
    for (std::size_t i = 0; i < temp.size(); ++i) f.pixels.data[i] = std::clamp(std::round(temp.data[i]), 0.0, kRawMax);
    out.frames.push_back(std::move(f));
    out.depths.push_back(std::move(d));
    out.motion_gt->push_back({shift_x, shift_y});
  }
  return out;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw Error(Errc::kInvalidArgument, "percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

Grid<double> agc_map(const Grid<double>& pixels, double p_lo, double p_hi) {
  Grid<double> out(pixels.width, pixels.height, 0.0);
  if (!(p_hi > p_lo)) return out;  // flat frame: no contrast to stretch
  const double scale = kRawMax / (p_hi - p_lo);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data[i] = std::round(std::clamp((pixels.data[i] - p_lo) * scale, 0.0, kRawMax));
  }
  return out;
}

SequenceSample apply_sensor(const SequenceSample& seq, const SensorModel& model, std::uint64_t seed) {
  for (const auto& f : seq.frames) {
    if (f.mode != IntensityMode::kRaw) {
      throw Error(Errc::kNormalizedInput, fmt::format("apply_sensor: frame {} is normalized; raw counts required",
                                                      f.frame_index));
    }
  }
  SequenceSample out = seq;
  Rng noise(seed, "sensor.noise");
  for (std::size_t t = 0; t < out.frames.size(); ++t) {
    ThermalFrame& f = out.frames[t];
    const double drift =
        model.drift_amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / model.drift_period);
    Grid<double> v = f.pixels;
    for (double& p : v.data) {
      p += drift;
      if (model.noise_sigma > 0) p += model.noise_sigma * noise.normal();
    }
    if (!model.radiometric) {
      f.pixels = agc_map(v, percentile(v.data, model.agc_lo), percentile(v.data, model.agc_hi));
    } else {
      for (double& p : v.data) p = std::clamp(std::round(p), 0.0, kRawMax);
      f.pixels = std::move(v);
    }
    f.radiometric = model.radiometric;

    const int n = model.nuc_interval;
    if (n > 0 && t >= static_cast<std::size_t>(n) && static_cast<int>(t % n) < model.nuc_freeze_len) {
      f.pixels = out.frames[t - 1].pixels;
      f.nuc_frozen = true;
    }
  }
  return out;
}

// ---- dataset suites ----------------------------------------------------------------

std::string_view to_string(Suite s) {
  switch (s) {
    case Suite::kStatic: return "static";
    case Suite::kTranslating: return "translating";
    case Suite::kSpriteEntering: return "sprite-entering";
    case Suite::kNucFreeze: return "nuc-freeze";
  }
  return "?";
}

SceneSpec make_scene(Suite suite, int index, const GenConfig& gen) {
  const std::string name = fmt::format("{}_{:02d}", to_string(suite), index);
  Rng rng(gen.seed, "scene/" + name);
  SceneSpec s;
  s.name = name;
  s.seed = splitmix64(gen.seed ^ fnv1a64(name));
  s.width = gen.width;
  s.height = gen.height;
  s.n_frames = gen.frames;
  s.background_depth = round_mm(rng.uniform(3.0, 5.0));
  s.background_temperature = std::round(rng.uniform(20000, 30000));
  s.texture_amplitude = 3000;
  // Nearer walls show coarser texture, as a pinhole camera would.
  s.texture_scale = 8.0 * 4.0 / s.background_depth;

  constexpr double kFocal = 60.0;  // px per meter of object size at 1 m
  const int n_sprites = 2 + rng.uniform_int(0, 1);
  for (int k = 0; k < n_sprites; ++k) {
    Sprite sp;
    sp.shape = rng.uniform() < 0.5 ? SpriteShape::kRect : SpriteShape::kDisk;
    sp.depth = round_mm(rng.uniform(0.8, s.background_depth - 0.8));
    sp.size = std::round(kFocal * rng.uniform(0.3, 0.5) / sp.depth);
    const bool hot = rng.uniform() < 0.6;
    sp.temperature = std::round(hot ? rng.uniform(42000, 58000) : rng.uniform(5000, 14000));
    sp.x = rng.uniform(0.15, 0.85) * gen.width;
    sp.y = rng.uniform(0.15, 0.85) * gen.height;
    s.sprites.push_back(sp);
  }

  switch (suite) {
    case Suite::kStatic:
      break;
    case Suite::kTranslating: {
      static constexpr int kDirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
      const int d = rng.uniform_int(0, 3);
      s.cam_dx = kDirs[d][0];
      s.cam_dy = kDirs[d][1];
      break;
    }
    case Suite::kSpriteEntering: {
      // A hot object crosses into view from one side during the sequence.
      Sprite sp;
      sp.shape = SpriteShape::kDisk;
      sp.depth = round_mm(rng.uniform(1.0, 2.0));
      sp.size = std::round(kFocal * 0.4 / sp.depth);
      sp.temperature = 60000;
      const bool from_left = rng.uniform() < 0.5;
      const double travel = gen.width / 2.0 + sp.size / 2.0;
      const double speed = travel / std::max(1, gen.frames - 1);
      sp.x = from_left ? -sp.size / 2.0 : gen.width + sp.size / 2.0;
      sp.vx = from_left ? speed : -speed;
      sp.y = rng.uniform(0.3, 0.7) * gen.height;
      s.sprites.push_back(sp);
      break;
    }
    case Suite::kNucFreeze:
      s.sprites.front().vx = rng.uniform(-1.5, 1.5);
      s.sprites.front().vy = rng.uniform(-1.0, 1.0);
      break;
  }
  return s;
}

SensorModel suite_sensor(Suite suite, const SensorModel& base) {
  SensorModel m = base;
  if (suite == Suite::kNucFreeze && m.nuc_interval == 0) {
    m.nuc_interval = 3;
    m.nuc_freeze_len = std::max(1, m.nuc_freeze_len);
  }
  return m;
}

std::vector<SequenceSample> generate_dataset(const GenConfig& gen, const SensorModel& sensor) {
  std::vector<SequenceSample> out;
  for (Suite suite : kAllSuites) {
    for (int i = 0; i < gen.sequences_per_suite; ++i) {
      const SceneSpec spec = make_scene(suite, i, gen);
      out.push_back(apply_sensor(render_sequence(spec), suite_sensor(suite, sensor), spec.seed));
    }
  }
  return out;
}

Grid<std::uint8_t> static_mask(const SequenceSample& seq) {
  if (seq.depths.empty()) return {};
  const auto& first = seq.depths.front();
  Grid<std::uint8_t> m(first.width(), first.height(), 1);
  for (const auto& d : seq.depths) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!d.valid.data[i] || d.depth.data[i] != first.depth.data[i]) m.data[i] = 0;
    }
  }
  return m;
}

}  // namespace thermodepth

#include "thermodepth/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace thermodepth {

DepthMap DepthMap::filled(int w, int h, double meters, double min_depth, double max_depth) {
  DepthMap d;
  d.depth = Grid<double>(w, h, meters);
  d.valid = Grid<std::uint8_t>(w, h, 1);
  d.min_depth = min_depth;
  d.max_depth = max_depth;
  return d;
}

namespace {

std::string at_frame(std::size_t i, const std::string& msg) {
  std::ostringstream os;
  os << "frame " << i << ": " << msg;
  return os.str();
}

}  // namespace

std::vector<std::string> validate_sequence(const SequenceSample& sample) {
  std::vector<std::string> out;
  if (sample.frames.empty()) out.push_back("sequence: no frames (length must be >= 1)");
  if (sample.frames.size() != sample.depths.size()) {
    std::ostringstream os;
    os << "sequence: length mismatch, " << sample.frames.size() << " frames vs " << sample.depths.size()
       << " depth maps";
    out.push_back(os.str());
  }
  if (sample.motion_gt && sample.motion_gt->size() != sample.frames.size()) {
    out.push_back("sequence: motion_gt length differs from frame count");
  }

  const int w0 = sample.frames.empty() ? 0 : sample.frames.front().width();
  const int h0 = sample.frames.empty() ? 0 : sample.frames.front().height();

  for (std::size_t i = 0; i < sample.frames.size(); ++i) {
    const ThermalFrame& f = sample.frames[i];
    if (f.width() <= 0 || f.height() <= 0) {
      out.push_back(at_frame(i, "non-positive frame size"));
      continue;
    }
    if (f.pixels.size() != static_cast<std::size_t>(f.width()) * f.height()) {
      out.push_back(at_frame(i, "pixel buffer does not match width x height"));
      continue;
    }
    if (f.width() != w0 || f.height() != h0) out.push_back(at_frame(i, "shape differs from frame 0"));
    if (f.frame_index < 0) out.push_back(at_frame(i, "negative frame_index"));

    const double hi = f.mode == IntensityMode::kRaw ? kRawMax : 1.0;
    const auto bad = std::find_if(f.pixels.data.begin(), f.pixels.data.end(),
                                  [hi](double v) { return !(v >= 0.0 && v <= hi); });
    if (bad != f.pixels.data.end()) {
      std::ostringstream os;
      os << "intensity " << *bad << " outside range [0, " << hi << "] ("
         << (f.mode == IntensityMode::kRaw ? "raw" : "normalized") << " mode)";
      out.push_back(at_frame(i, os.str()));
    }
    if (i > 0 && !(f.timestamp > sample.frames[i - 1].timestamp)) {
      out.push_back(at_frame(i, "timestamp does not strictly increase"));
    }
  }

  for (std::size_t i = 0; i < sample.depths.size(); ++i) {
    const DepthMap& d = sample.depths[i];
    if (!d.depth.same_shape(d.valid)) out.push_back(at_frame(i, "depth and mask shapes differ"));
    if (i < sample.frames.size() && !d.depth.same_shape(sample.frames[i].pixels)) {
      out.push_back(at_frame(i, "depth shape does not match thermal frame"));
    }
    if (!(d.min_depth > 0.0)) out.push_back(at_frame(i, "min_depth must be > 0"));
    if (!(d.max_depth > d.min_depth)) out.push_back(at_frame(i, "max_depth must exceed min_depth"));
    if (d.depth.same_shape(d.valid)) {
      for (std::size_t k = 0; k < d.depth.size(); ++k) {
        if (d.valid.data[k] && !(std::isfinite(d.depth.data[k]) && d.depth.data[k] >= 0.0)) {
          out.push_back(at_frame(i, "valid depth pixel is negative or non-finite"));
          break;
        }
      }
    }
  }
  return out;
}

ThermalFrame raw_to_normalized(const ThermalFrame& frame) {
  if (frame.mode == IntensityMode::kNormalized) {
    throw Error(Errc::kDoubleNormalization, "frame " + std::to_string(frame.frame_index) + " is already normalized");
  }
  ThermalFrame out = frame;
  out.mode = IntensityMode::kNormalized;
  for (double& v : out.pixels.data) v /= kRawMax;
  return out;
}

ThermalFrame normalized_to_raw(const ThermalFrame& frame) {
  if (frame.mode == IntensityMode::kRaw) {
    throw Error(Errc::kInvalidArgument, "frame is already raw");
  }
  ThermalFrame out = frame;
  out.mode = IntensityMode::kRaw;
  for (double& v : out.pixels.data) v = std::round(v * kRawMax);
  return out;
}

}  // namespace thermodepth

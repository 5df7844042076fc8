#include "thermodepth/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "thermodepth/png_io.hpp"

namespace fs = std::filesystem;

namespace thermodepth {

namespace {

std::string frame_file(const fs::path& dir, const char* kind, int index) {
  return (dir / kind / fmt::format("{:06d}.png", index)).string();
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::kMissingFile, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::kMalformedData, where + ": not a number: '" + s + "'");
  }
}

}  // namespace

void write_sequence(const SequenceSample& s, const std::string& dir_str) {
  const auto problems = validate_sequence(s);
  if (!problems.empty()) throw Error(Errc::kInvalidArgument, "cannot write invalid sequence: " + problems.front());
  const fs::path dir(dir_str);
  fs::create_directories(dir / "thermal");
  fs::create_directories(dir / "depth");

  std::ofstream index(dir / "index.csv", std::ios::binary);
  if (!index) throw Error(Errc::kIo, "cannot write " + (dir / "index.csv").string());
  index << "frame_index,timestamp,nuc_flag,motion_x,motion_y\n";
  for (std::size_t t = 0; t < s.frames.size(); ++t) {
    const ThermalFrame& f = s.frames[t];
    if (f.mode != IntensityMode::kRaw) throw Error(Errc::kInvalidArgument, "only raw frames can be stored");
    Grid<std::uint16_t> raw(f.width(), f.height());
    for (std::size_t i = 0; i < raw.size(); ++i) raw.data[i] = static_cast<std::uint16_t>(f.pixels.data[i]);
    write_png16(frame_file(dir, "thermal", f.frame_index), raw);

    const DepthMap& d = s.depths[t];
    Grid<std::uint16_t> mm(d.width(), d.height(), 0);
    for (std::size_t i = 0; i < mm.size(); ++i) {
      if (!d.valid.data[i]) continue;
      const double v = std::round(d.depth.data[i] * 1000.0);
      if (v < 1 || v > 65535) {
        throw Error(Errc::kInvalidArgument, fmt::format("frame {}: depth {} m cannot be stored as 16-bit mm",
                                                        f.frame_index, d.depth.data[i]));
      }
      mm.data[i] = static_cast<std::uint16_t>(v);
    }
    write_png16(frame_file(dir, "depth", f.frame_index), mm);

    index << f.frame_index << ',' << fmt::format("{:.17g}", f.timestamp) << ',' << (f.nuc_frozen ? 1 : 0);
    if (s.motion_gt) {
      const Motion& m = (*s.motion_gt)[t];
      index << ',' << fmt::format("{:.17g}", m.dx) << ',' << fmt::format("{:.17g}", m.dy);
    } else {
      index << ",,";
    }
    index << '\n';
  }

  nlohmann::ordered_json meta;
  meta["sequence_id"] = s.sequence_id;
  meta["radiometric"] = s.frames.empty() ? true : s.frames.front().radiometric;
  meta["min_depth"] = s.depths.empty() ? 0.3 : s.depths.front().min_depth;
  meta["max_depth"] = s.depths.empty() ? 10.0 : s.depths.front().max_depth;
  meta["seed"] = s.seed;
  std::ofstream(dir / "meta.json", std::ios::binary) << meta.dump(2) << '\n';
}

SequenceSample read_sequence(const std::string& dir_str) {
  const fs::path dir(dir_str);
  if (!fs::exists(dir / "index.csv")) throw Error(Errc::kMissingIndex, "missing index.csv in " + dir.string());

  SequenceSample s;
  s.sequence_id = dir.filename().string();
  bool radiometric = true;
  double min_depth = 0.3, max_depth = 10.0;
  if (fs::exists(dir / "meta.json")) {
    try {
      const auto meta = nlohmann::json::parse(read_text(dir / "meta.json"));
      radiometric = meta.value("radiometric", true);
      min_depth = meta.value("min_depth", 0.3);
      max_depth = meta.value("max_depth", 10.0);
      s.seed = meta.value("seed", std::uint64_t{0});
      s.sequence_id = meta.value("sequence_id", s.sequence_id);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::kMalformedData, "malformed meta.json in " + dir.string() + ": " + e.what());
    }
  }

  std::istringstream index(read_text(dir / "index.csv"));
  std::string line;
  std::getline(index, line);  // header
  bool have_motion = true;
  std::vector<Motion> motion;
  int row = 0;
  while (std::getline(index, line)) {
    if (line.empty() || line == "\r") continue;
    const std::string where = fmt::format("{} row {}", (dir / "index.csv").string(), ++row);
    const auto cols = split(line, ',');
    if (cols.size() < 3) throw Error(Errc::kMalformedData, where + ": expected at least 3 columns");
    ThermalFrame f;
    f.frame_index = static_cast<int>(parse_double(cols[0], where));
    f.timestamp = parse_double(cols[1], where);
    f.nuc_frozen = cols[2] == "1";
    f.mode = IntensityMode::kRaw;
    f.radiometric = radiometric;
    if (!s.frames.empty() && !(f.timestamp > s.frames.back().timestamp)) {
      throw Error(Errc::kNonMonotoneTimestamps,
                  fmt::format("{}: timestamp {} of frame {} does not increase past {}", where, f.timestamp,
                              f.frame_index, s.frames.back().timestamp));
    }
    if (cols.size() >= 5 && !cols[3].empty() && !cols[4].empty()) {
      motion.push_back({parse_double(cols[3], where), parse_double(cols[4], where)});
    } else {
      have_motion = false;
    }

    const std::string tpath = frame_file(dir, "thermal", f.frame_index);
    const std::string dpath = frame_file(dir, "depth", f.frame_index);
    for (const auto& p : {tpath, dpath}) {
      if (!fs::exists(p)) throw Error(Errc::kMissingFile, fmt::format("frame {}: missing {}", f.frame_index, p));
    }
    const auto raw = read_png16(tpath);
    const auto mm = read_png16(dpath);
    if (!raw.same_shape(mm)) {
      throw Error(Errc::kShapeMismatch, fmt::format("frame {}: thermal {}x{} vs depth {}x{}", f.frame_index,
                                                    raw.width, raw.height, mm.width, mm.height));
    }
    if (!s.frames.empty() && !raw.same_shape(s.frames.front().pixels)) {
      throw Error(Errc::kShapeMismatch, fmt::format("frame {}: size differs from frame 0", f.frame_index));
    }
    f.pixels = Grid<double>(raw.width, raw.height);
    for (std::size_t i = 0; i < raw.size(); ++i) f.pixels.data[i] = raw.data[i];
    DepthMap d = DepthMap::filled(mm.width, mm.height, 0.0, min_depth, max_depth);
    for (std::size_t i = 0; i < mm.size(); ++i) {
      d.valid.data[i] = mm.data[i] != 0;
      d.depth.data[i] = mm.data[i] / 1000.0;
    }
    s.frames.push_back(std::move(f));
    s.depths.push_back(std::move(d));
  }
  if (s.frames.empty()) throw Error(Errc::kMalformedData, "index.csv in " + dir.string() + " lists no frames");
  if (have_motion) s.motion_gt = std::move(motion);
  return s;
}

void write_dataset(const std::vector<SequenceSample>& samples, const std::string& root) {
  fs::create_directories(root);
  for (const auto& s : samples) {
    if (s.sequence_id.empty() || s.sequence_id.find('/') != std::string::npos) {
      throw Error(Errc::kInvalidArgument, "sequence_id must be a plain directory name");
    }
    write_sequence(s, (fs::path(root) / s.sequence_id).string());
  }
}

std::vector<SequenceSample> read_dataset(const std::string& root) {
  if (!fs::is_directory(root)) throw Error(Errc::kMissingFile, "dataset root " + root + " does not exist");
  if (fs::exists(fs::path(root) / "index.csv")) return {read_sequence(root)};
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw Error(Errc::kMissingIndex, "dataset root " + root + " has no sequences");
  std::vector<SequenceSample> out;
  for (const auto& d : dirs) out.push_back(read_sequence(d.string()));
  return out;
}

std::string dataset_hash(const std::string& root) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::uint64_t h = fnv1a64("");
  for (const auto& f : files) {
    h = fnv1a64(fs::relative(f, root).generic_string(), h);
    h = fnv1a64(read_text(f), h);
  }
  return hex64(h);
}

}  // namespace thermodepth

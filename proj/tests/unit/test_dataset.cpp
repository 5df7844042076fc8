#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_support.hpp"
#include "thermodepth/dataset.hpp"
#include "thermodepth/png_io.hpp"
#include "thermodepth/sensorsim.hpp"

using namespace thermodepth;
using namespace thermodepth::testing;
namespace fs = std::filesystem;

namespace {

SequenceSample two_frame_sample() {
  GenConfig gen;
  gen.frames = 2;
  gen.width = 16;
  gen.height = 12;
  const SceneSpec spec = make_scene(Suite::kTranslating, 0, gen);
  auto s = apply_sensor(render_sequence(spec), SensorModel{}, spec.seed);
  s.depths[1].valid(3, 4) = 0;  // an invalid pixel must survive too
  s.depths[1].depth(3, 4) = 0.0;
  return s;
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("round trip is exact") {
    TempDir dir;
    const auto s = two_frame_sample();
    write_dataset({s}, dir.str());
    const auto back = read_dataset(dir.str());
    REQUIRE(back.size() == 1);
    CHECK(back[0] == s);
  }

  TEST_CASE("png round trips") {
    TempDir dir;
    Grid<std::uint16_t> g(7, 3);
    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] = static_cast<std::uint16_t>(i * 3001);
    write_png16(dir.str("a.png"), g);
    CHECK(read_png16(dir.str("a.png")) == g);
    Image8 im(5, 2);
    for (std::size_t i = 0; i < im.size(); ++i) im.data[i] = static_cast<std::uint8_t>(i * 25);
    write_png8(dir.str("b.png"), im);
    CHECK(read_png8(dir.str("b.png")) == im);
  }

  TEST_CASE("missing depth file names the frame") {
    TempDir dir;
    write_dataset({two_frame_sample()}, dir.str());
    const fs::path seq = fs::path(dir.str()) / two_frame_sample().sequence_id;
    fs::remove(seq / "depth" / "000001.png");
    CHECK(error_of([&] { read_dataset(dir.str()); }) == Errc::kMissingFile);
    CHECK(message_of([&] { read_dataset(dir.str()); }).find("frame 1") != std::string::npos);
  }

  TEST_CASE("decreasing timestamps are rejected") {
    TempDir dir;
    write_dataset({two_frame_sample()}, dir.str());
    const fs::path index = fs::path(dir.str()) / two_frame_sample().sequence_id / "index.csv";
    std::ifstream in(index);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    // Frame 1 at t = 0.0333... becomes t = -1.
    const auto pos = text.find("\n1,");
    const auto comma = text.find(',', pos + 3);
    text.replace(pos + 3, comma - pos - 3, "-1");
    std::ofstream(index) << text;
    CHECK(error_of([&] { read_dataset(dir.str()); }) == Errc::kNonMonotoneTimestamps);
    CHECK(message_of([&] { read_dataset(dir.str()); }).find("timestamp") != std::string::npos);
  }

  TEST_CASE("missing index and shape mismatch are distinct errors") {
    TempDir dir;
    write_dataset({two_frame_sample()}, dir.str());
    const fs::path seq = fs::path(dir.str()) / two_frame_sample().sequence_id;
    write_png16((seq / "depth" / "000000.png").string(), Grid<std::uint16_t>(3, 3, 1000));
    CHECK(error_of([&] { read_dataset(dir.str()); }) == Errc::kShapeMismatch);
    fs::remove(seq / "index.csv");
    CHECK(error_of([&] { read_dataset(dir.str()); }) == Errc::kMissingIndex);
  }

  TEST_CASE("identical generation gives identical dataset hashes") {
    TempDir a, b;
    GenConfig gen;
    gen.sequences_per_suite = 1;
    write_dataset(generate_dataset(gen, SensorModel{}), a.str());
    write_dataset(generate_dataset(gen, SensorModel{}), b.str());
    CHECK(dataset_hash(a.str()) == dataset_hash(b.str()));
    gen.seed = 2;
    TempDir c;
    write_dataset(generate_dataset(gen, SensorModel{}), c.str());
    CHECK(dataset_hash(a.str()) != dataset_hash(c.str()));
  }

  TEST_CASE("radiometric flag is stored per sequence") {
    TempDir dir;
    GenConfig gen;
    gen.sequences_per_suite = 1;
    SensorModel m;
    m.radiometric = true;
    write_dataset(generate_dataset(gen, m), dir.str());
    for (const auto& s : read_dataset(dir.str())) CHECK(s.frames.front().radiometric);
  }
}

#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "thermodepth/config.hpp"
#include "thermodepth/sensorsim.hpp"
#include "thermodepth/types.hpp"

using namespace thermodepth;
using namespace thermodepth::testing;

namespace {

SequenceSample three_frames() {
  SequenceSample s;
  s.sequence_id = "s";
  for (int t = 0; t < 3; ++t) {
    s.frames.push_back(raw_frame(5, 4, 1000.0 * (t + 1), t));
    s.depths.push_back(DepthMap::filled(5, 4, 2.0));
  }
  return s;
}

bool mentions(const std::vector<std::string>& v, const std::string& word) {
  for (const auto& s : v) {
    if (s.find(word) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST_SUITE("core_types") {
  TEST_CASE("well-formed sample has no violations") { CHECK(validate_sequence(three_frames()).empty()); }

  TEST_CASE("short depth list is one length violation") {
    auto s = three_frames();
    s.depths.pop_back();
    const auto v = validate_sequence(s);
    REQUIRE(v.size() == 1);
    CHECK(mentions(v, "length"));
  }

  TEST_CASE("raw intensity above 65535 names the frame and range") {
    auto s = three_frames();
    s.frames[1].pixels(2, 2) = 70000;
    const auto v = validate_sequence(s);
    REQUIRE(v.size() == 1);
    CHECK(mentions(v, "frame 1"));
    CHECK(mentions(v, "range"));
  }

  TEST_CASE("other invariants are reported") {
    auto s = three_frames();
    s.frames[2].timestamp = s.frames[1].timestamp;
    CHECK(mentions(validate_sequence(s), "timestamp"));

    s = three_frames();
    s.frames[1].pixels = Grid<double>(6, 4, 0.0);
    CHECK_FALSE(validate_sequence(s).empty());

    s = three_frames();
    s.depths[0].depth(0, 0) = std::nan("");
    CHECK_FALSE(validate_sequence(s).empty());

    s = three_frames();
    s.depths[0].min_depth = 0.0;
    CHECK_FALSE(validate_sequence(s).empty());

    s = three_frames();
    s.frames[0].mode = IntensityMode::kNormalized;
    CHECK_FALSE(validate_sequence(s).empty());  // 1000 is outside [0, 1]

    CHECK_FALSE(validate_sequence(SequenceSample{}).empty());
  }

  TEST_CASE("raw_to_normalized divides by 65535 and keeps metadata") {
    ThermalFrame f = raw_frame(3, 1, 0.0, 7);
    f.pixels.data = {0, 65535, 32768};
    f.radiometric = false;
    f.nuc_frozen = true;
    const auto n = raw_to_normalized(f);
    CHECK(n.mode == IntensityMode::kNormalized);
    CHECK(n.pixels.data[0] == 0.0);
    CHECK(n.pixels.data[1] == 1.0);
    CHECK(n.pixels.data[2] == 32768.0 / 65535.0);
    CHECK(n.pixels.data[2] == doctest::Approx(0.50000763).epsilon(1e-8));
    CHECK(n.frame_index == 7);
    CHECK(n.timestamp == f.timestamp);
    CHECK(n.radiometric == false);
    CHECK(n.nuc_frozen == true);
  }

  TEST_CASE("double normalization is an error") {
    const auto n = raw_to_normalized(raw_frame(2, 2, 5.0));
    try {
      raw_to_normalized(n);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::kDoubleNormalization);
    }
  }

  TEST_CASE("normalization round trip is exact for every 16-bit value") {
    ThermalFrame f = raw_frame(65536, 1, 0.0);
    for (int v = 0; v < 65536; ++v) f.pixels.data[v] = v;
    CHECK(normalized_to_raw(raw_to_normalized(f)).pixels == f.pixels);
  }

  TEST_CASE("every generated sequence validates") {
    GenConfig gen;
    gen.sequences_per_suite = 2;
    for (const auto& s : generate_dataset(gen, SensorModel{})) {
      INFO(s.sequence_id);
      CHECK(validate_sequence(s).empty());
    }
  }

  TEST_CASE("config emit/parse round trip and unknown keys") {
    RunConfig c;
    c.model.rb = RecurrentKind::kConvGru;
    c.train.eta = 3.5e-4;
    c.eval.thresholds = {1.1, 1.2};
    c.sensor.radiometric = true;
    CHECK(parse_config(emit_config(c)) == c);
    CHECK(parse_config(emit_config(RunConfig{})) == RunConfig{});
    CHECK_THROWS_AS(parse_config(R"({"train": {"etaa": 1}})"), Error);
    CHECK_THROWS_AS(parse_config(R"({"bogus": 1})"), Error);
    CHECK(parse_config(R"({"train": {"eta": 0.5}})").train.eta == 0.5);
    CHECK(run_config_hash(c) != run_config_hash(RunConfig{}));
  }

  TEST_CASE("default loss weights") {
    const LossWeights w;
    CHECK(w.lambda1 == 0.9);
    CHECK(w.lambda2 == 0.4);
    CHECK(w.lambda3 == 0.1);
    CHECK(w.lambda4 == 0.1);
  }

  TEST_CASE("config validation") {
    RunConfig c;
    CHECK_NOTHROW(validate(c));
    c.train.eta = -1;
    CHECK_THROWS_AS(validate(c), Error);
    c = RunConfig{};
    c.train.unroll = 0;
    CHECK_THROWS_AS(validate(c), Error);
    c = RunConfig{};
    c.eval.thresholds = {1.25, 1.2};
    CHECK_THROWS_AS(validate(c), Error);
    c = RunConfig{};
    c.model.backbone.width = 81;
    CHECK_THROWS_AS(validate(c), Error);
    c = RunConfig{};
    c.sensor.agc_lo = 60;
    c.sensor.agc_hi = 40;
    CHECK_THROWS_AS(validate(c), Error);
  }

  TEST_CASE("rng streams are deterministic and independent") {
    Rng a(5, "x"), b(5, "x"), c(5, "y");
    const double va = a.uniform();
    CHECK(va == b.uniform());
    CHECK(va != c.uniform());
    Rng r(9);
    for (int i = 0; i < 1000; ++i) {
      const int k = r.uniform_int(-2, 3);
      CHECK(k >= -2);
      CHECK(k <= 3);
    }
  }
}

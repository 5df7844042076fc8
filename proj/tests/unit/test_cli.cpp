#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <sys/wait.h>

#include "test_support.hpp"
#include "thermodepth/checkpoint.hpp"
#include "thermodepth/dataset.hpp"
#include "thermodepth/metrics.hpp"
#include "thermodepth/png_io.hpp"
#include "thermodepth/trainer.hpp"

using namespace thermodepth;
using namespace thermodepth::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run cli(const std::string& args, const TempDir& dir, const std::string& env = "") {
  const std::string log = dir.str("cli_output.txt");
  const std::string cmd = env + " " + THERMODEPTH_CLI + " " + args + " > " + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(log);
  return r;
}

// 40x32 frames, two per sequence, one sequence per suite, and a model that fits them.
const char* const kSmall =
    " --set gen.width=40 gen.height=32 gen.frames=2 gen.sequences_per_suite=1 model.backbone.width=40"
    " model.backbone.height=32 model.backbone.channels=[8,16,24] model.backbone.latent_dim=16 model.backbone.expansion=2"
    " model.refine.channels=8 model.reservoir.neurons=16 model.reservoir.output_dim=16 train.unroll=2 ";

RunConfig small_run() {
  RunConfig cfg;
  cfg.gen.width = 40;
  cfg.gen.height = 32;
  cfg.gen.frames = 2;
  cfg.gen.sequences_per_suite = 1;
  cfg.model = small_model();
  cfg.train.unroll = 2;
  return cfg;
}

nlohmann::json manifest(const TempDir& dir, const std::string& sub) {
  return nlohmann::json::parse(slurp(fs::path(dir.str(sub)) / "manifest.json"));
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("gen: default manifest, reproducible hash, radiometric flag") {
    TempDir dir("cli");
    REQUIRE(cli("gen --out " + dir.str("a"), dir).code == 0);
    const auto m = manifest(dir, "a");
    CHECK(m["sequences"] == 16);
    CHECK(m["frames"] == 8);
    CHECK(m["radiometric"] == false);

    REQUIRE(cli("gen --out " + dir.str("b"), dir).code == 0);
    CHECK(manifest(dir, "b")["dataset_hash"] == m["dataset_hash"]);
    REQUIRE(cli("gen --seed 3 --out " + dir.str("c") + kSmall, dir).code == 0);
    CHECK(manifest(dir, "c")["dataset_hash"] != m["dataset_hash"]);

    REQUIRE(cli("gen --radiometric --out " + dir.str("r") + kSmall, dir).code == 0);
    CHECK(manifest(dir, "r")["radiometric"] == true);
    const auto data = read_dataset(dir.str("r/data"));
    CHECK(data.size() == 4);
    for (const auto& s : data) CHECK(s.frames[0].radiometric);

    const auto again = cli("gen --out " + dir.str("a"), dir);
    CHECK(again.code == 3);
    CHECK(again.out.find("--force") != std::string::npos);
    CHECK(cli("gen --force --out " + dir.str("a"), dir).code == 0);
  }

  TEST_CASE("resolved config and hash are echoed into the output directory") {
    TempDir dir("cli");
    REQUIRE(cli("gen --seed 4 --out " + dir.str("g") + kSmall, dir).code == 0);
    RunConfig expect = small_run();
    expect.gen.seed = 4;
    expect.train.seed = 4;
    expect.model.init_seed = 4;
    const RunConfig echoed = parse_config(slurp(dir.str("g/config.json")));
    CHECK(echoed == expect);
    CHECK(slurp(dir.str("g/config.hash")) == run_config_hash(expect) + "\n");

    // The echoed file reproduces the run.
    REQUIRE(cli("gen --config " + dir.str("g/config.json") + " --out " + dir.str("h"), dir).code == 0);
    CHECK(manifest(dir, "h")["dataset_hash"] == manifest(dir, "g")["dataset_hash"]);
  }

  TEST_CASE("configuration errors exit with code 2, usage errors with 1") {
    TempDir dir("cli");
    std::ofstream(dir.str("bad.json")) << R"({"train": {"eta": 1e-3, "learning_rate": 2}})";
    CHECK(cli("gen --config " + dir.str("bad.json") + " --out " + dir.str("x"), dir).code == 2);
    CHECK(cli("gen --set train.nope=1 --out " + dir.str("x"), dir).code == 2);
    CHECK(cli("gen --set train.eta=-1 --out " + dir.str("x"), dir).code == 2);
    CHECK(cli("", dir).code == 1);
    CHECK(cli("frobnicate", dir).code == 1);
    CHECK(cli("gen --rb lstm", dir).code == 1);
    CHECK(cli("census --help", dir).code == 0);
  }

  TEST_CASE("train, eval and the run directory") {
    TempDir dir("cli");
    REQUIRE(cli("gen --out " + dir.str("gen") + kSmall, dir).code == 0);
    const std::string data = " --data " + dir.str("gen/data");

    SUBCASE("zero epochs leave the initialization") {
      REQUIRE(cli("train --epochs 0 --out " + dir.str("t0") + data + kSmall, dir).code == 0);
      const auto ck = load_checkpoint(dir.str("t0/checkpoint.tdck"));
      CHECK(ck.config == small_run().model);
      CHECK(ck.params == init_params<float>(small_run().model));
    }

    SUBCASE("rb none trains the feed-forward path") {
      REQUIRE(cli("train --rb none --epochs 1 --out " + dir.str("tn") + data + kSmall, dir).code == 0);
      const auto ck = load_checkpoint(dir.str("tn/checkpoint.tdck"));
      CHECK(ck.config.rb == RecurrentKind::kNone);
      CHECK(ck.params.find("rb.readout.w") == nullptr);
      CHECK(read_train_log(dir.str("tn/train_log.jsonl")).size() == 1);
    }

    SUBCASE("non-finite loss exits with code 4") {
      const auto r = cli("train --epochs 3 --out " + dir.str("nan") + data + kSmall +
                             " --set train.eta=1e30 train.optimizer=\\\"plain-gradient\\\" train.grad_clip=0",
                         dir);
      CHECK(r.code == 4);
      CHECK(r.out.find("non-finite loss at step") != std::string::npos);
    }

    SUBCASE("eval: oracle, determinism and config mismatch") {
      REQUIRE(cli("train --epochs 1 --out " + dir.str("t") + data + kSmall, dir).code == 0);
      const std::string ck = " --checkpoint " + dir.str("t/checkpoint.tdck");
      REQUIRE(cli("eval --oracle --out " + dir.str("o") + ck + data, dir).code == 0);
      const auto oracle = parse_report_json(slurp(dir.str("o/report.json")));
      CHECK(oracle.absrel == 0.0);
      CHECK(oracle.a1 == 1.0);
      CHECK(oracle.a2 == 1.0);
      CHECK(oracle.a3 == 1.0);

      REQUIRE(cli("eval --out " + dir.str("e1") + ck + data, dir).code == 0);
      REQUIRE(cli("eval --out " + dir.str("e2") + ck + data, dir).code == 0);
      CHECK(slurp(dir.str("e1/report.json")) == slurp(dir.str("e2/report.json")));
      const std::string csv = slurp(dir.str("e1/metrics.csv"));
      CHECK(csv.rfind("model,absrel,rmse,a1,a2,a3\nreservoir,", 0) == 0);

      const auto mismatch = cli("eval --rb convgru --out " + dir.str("e3") + ck + data + kSmall, dir);
      CHECK(mismatch.code == 2);
      CHECK(mismatch.out.find("config") != std::string::npos);
      CHECK(cli("eval --out " + dir.str("e4") + " --checkpoint " + dir.str("missing.tdck") + data, dir).code == 3);
    }

    SUBCASE("output root from the environment") {
      const auto r = cli("train --epochs 0" + data + kSmall, dir, "THERMODEPTH_OUTPUT_ROOT=" + dir.str("root"));
      REQUIRE(r.code == 0);
      int runs = 0;
      for (const auto& e : fs::directory_iterator(dir.str("root"))) {
        ++runs;
        CHECK(e.path().filename().string().find("-train-") != std::string::npos);
        CHECK(fs::exists(e.path() / "checkpoint.tdck"));
        CHECK(fs::exists(e.path() / "config.hash"));
      }
      CHECK(runs == 1);
    }
  }

  TEST_CASE("enhance") {
    TempDir dir("cli");
    // One constant sequence plus one textured sequence.
    SequenceSample flat;
    flat.sequence_id = "flat";
    for (int t = 0; t < 3; ++t) {
      flat.frames.push_back(raw_frame(16, 12, 20000, t));
      flat.depths.push_back(DepthMap::filled(16, 12, 2.0));
    }
    write_dataset({flat}, dir.str("flat"));
    REQUIRE(cli("enhance --method raw8 --input " + dir.str("flat") + " --out " + dir.str("e0"), dir).code == 0);
    for (int t = 0; t < 3; ++t) {
      const auto im = read_png8(dir.str("e0/raw8/flat/") + fmt::format("{:06d}.png", t));
      CHECK(im == Image8(16, 12, 0));
    }

    REQUIRE(cli("gen --out " + dir.str("gen") + kSmall, dir).code == 0);
    REQUIRE(cli("train --epochs 0 --out " + dir.str("t") + " --data " + dir.str("gen/data") + kSmall, dir).code == 0);
    const auto r = cli("enhance --input " + dir.str("gen/data") + " --checkpoint " + dir.str("t/checkpoint.tdck") +
                           " --out " + dir.str("e"),
                       dir);
    REQUIRE(r.code == 0);
    for (const char* m : {"raw8", "gauss", "clahe", "trefnet"}) CHECK(fs::is_directory(fs::path(dir.str("e")) / m));
    const auto rec = nlohmann::json::parse(slurp(dir.str("e/comparison.json")));
    CHECK(rec["methods"].size() == 4);
    const std::string f0 = "/translating_00/000000.png";
    CHECK_FALSE(read_png8(dir.str("e/clahe") + f0) == read_png8(dir.str("e/raw8") + f0));
    CHECK(fs::exists(dir.str("e/raw8/translating_00/000000_color.png")));

    const auto missing = cli("enhance --method trefnet --input " + dir.str("gen/data") + " --out " + dir.str("x"), dir);
    CHECK(missing.code == 2);
    CHECK(missing.out.find("--checkpoint") != std::string::npos);
  }

  TEST_CASE("gradcheck exit codes and report") {
    TempDir dir("cli");
    const auto ok = cli("gradcheck", dir);
    CHECK(ok.code == 0);
    for (const char* g : {"theta", "phi", "psi"}) CHECK(ok.out.find(g) != std::string::npos);
    CHECK(ok.out.find("PASS") != std::string::npos);
    CHECK(cli("gradcheck --rb convgru", dir).code == 0);
    CHECK(cli("gradcheck --tolerance 1e-12", dir).code == 4);
  }

  TEST_CASE("plot") {
    TempDir dir("cli");
    std::ofstream(dir.str("empty.jsonl")).close();
    CHECK(cli("plot --log " + dir.str("empty.jsonl") + " --out " + dir.str("p0"), dir).code == 3);
    CHECK_FALSE(fs::exists(dir.str("p0")));

    {
      std::ofstream log(dir.str("log.jsonl"));
      for (int s = 0; s < 2; ++s) {
        TrainStepLog e;
        e.step = s;
        e.loss = {0.5, 0.4, 0.3, 0.2, 1.0 - 0.1 * s};
        log << to_json_line(e) << "\n";
      }
    }
    REQUIRE(cli("plot --log " + dir.str("log.jsonl") + " --out " + dir.str("p1"), dir).code == 0);
    int files = 0;
    for (const auto& e : fs::directory_iterator(dir.str("p1"))) files += e.path().extension() == ".svg";
    CHECK(files == 1);
    CHECK(fs::exists(dir.str("p1/loss_curve.svg")));

    fs::create_directories(dir.str("a"));
    fs::create_directories(dir.str("b"));
    MetricsReport ra, rb;
    ra.absrel = 0.1;
    rb.absrel = 0.2;
    std::ofstream(dir.str("a/report.json")) << report_json(ra);
    std::ofstream(dir.str("b/report.json")) << report_json(rb);
    REQUIRE(cli("plot --report " + dir.str("a/report.json") + " --report " + dir.str("b/report.json") + " --out " +
                    dir.str("p2"),
                dir)
                .code == 0);
    const std::string svg = slurp(dir.str("p2/metrics_bars.svg"));
    CHECK(svg.find(">a<") != std::string::npos);
    CHECK(svg.find(">b<") != std::string::npos);
  }

  TEST_CASE("census lists both recurrent blocks") {
    TempDir dir("cli");
    const auto r = cli("census", dir);
    REQUIRE(r.code == 0);
    const auto rc = recurrent_census(ModelConfig{});
    CHECK(r.out.find("reservoir") != std::string::npos);
    CHECK(r.out.find("convgru") != std::string::npos);
    CHECK(r.out.find(std::to_string(rc.reservoir.psi)) != std::string::npos);
    CHECK(r.out.find(std::to_string(rc.convgru.psi)) != std::string::npos);
  }
}

// Acceptance run: one PASS/FAIL line per criterion. Criteria 6-8 train the
// reservoir and feed-forward models on the synthetic suites, so a full run
// takes roughly twenty minutes on one core.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <optional>
#include <set>

#include "test_support.hpp"
#include "thermodepth/checkpoint.hpp"
#include "thermodepth/dataset.hpp"
#include "thermodepth/enhance.hpp"
#include "thermodepth/losses.hpp"
#include "thermodepth/metrics.hpp"
#include "thermodepth/recurrent.hpp"
#include "thermodepth/sensorsim.hpp"
#include "thermodepth/trainer.hpp"

namespace fs = std::filesystem;
using namespace thermodepth;
using testing::random_depth;
using testing::random_guide;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

// ---- brute-force loss oracles -----------------------------------------------------

bool both_valid(const DepthMap& p, const DepthMap& g, int x, int y) { return p.valid(x, y) && g.valid(x, y); }

double silog_oracle(const DepthMap& p, const DepthMap& g, double lambda) {
  double n = 0, s = 0, s2 = 0;
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      if (!both_valid(p, g, x, y) || p.depth(x, y) <= 0 || g.depth(x, y) <= 0) continue;
      const double d = std::log(p.depth(x, y) / g.depth(x, y));
      n += 1;
      s += d;
      s2 += d * d;
    }
  }
  return n == 0 ? 0.0 : s2 / n - lambda * (s / n) * (s / n);
}

// Per-pixel SSIM over the valid members of a mirrored 3x3 window; two-pass
// moments rather than E[x^2] - E[x]^2.
double ssim_oracle(const DepthMap& p, const DepthMap& g) {
  const int w = g.width(), h = g.height();
  auto mirror = [](int i, int n) { return i < 0 ? -i : (i >= n ? 2 * n - 2 - i : i); };
  auto norm = [&](double d) { return (d - g.min_depth) / (g.max_depth - g.min_depth); };
  double acc = 0;
  int count = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!both_valid(p, g, x, y)) continue;
      std::vector<double> a, b;
      for (int j = -1; j <= 1; ++j) {
        for (int i = -1; i <= 1; ++i) {
          const int sx = mirror(x + i, w), sy = mirror(y + j, h);
          if (!both_valid(p, g, sx, sy)) continue;
          a.push_back(norm(p.depth(sx, sy)));
          b.push_back(norm(g.depth(sx, sy)));
        }
      }
      const double k = static_cast<double>(a.size());
      double ma = 0, mb = 0;
      for (std::size_t q = 0; q < a.size(); ++q) {
        ma += a[q];
        mb += b[q];
      }
      ma /= k;
      mb /= k;
      double va = 0, vb = 0, cab = 0;
      for (std::size_t q = 0; q < a.size(); ++q) {
        va += (a[q] - ma) * (a[q] - ma);
        vb += (b[q] - mb) * (b[q] - mb);
        cab += (a[q] - ma) * (b[q] - mb);
      }
      va /= k;
      vb /= k;
      cab /= k;
      const double c1 = 1e-4, c2 = 9e-4;
      const double s = ((2 * ma * mb + c1) * (2 * cab + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      acc += 0.5 * (1 - s);
      ++count;
    }
  }
  return count == 0 ? 0.0 : acc / count;
}

// Pair losses recomputed from the pair indices alone, labels re-derived from gt.
std::optional<double> ordinal_oracle(const DepthMap& p, const DepthMap& g, const std::vector<OrdinalPair>& pairs,
                                     double ratio) {
  if (pairs.empty()) return 0.0;
  double acc = 0;
  for (const auto& q : pairs) {
    if (q.a == q.b || !p.valid.data[q.a] || !p.valid.data[q.b] || !g.valid.data[q.a] || !g.valid.data[q.b]) {
      return std::nullopt;
    }
    const double ga = g.depth.data[q.a], gb = g.depth.data[q.b];
    const int label = ga > ratio * gb ? 1 : (gb > ratio * ga ? -1 : 0);
    if (label != q.label) return std::nullopt;
    const double diff = p.depth.data[q.a] - p.depth.data[q.b];
    acc += label == 0 ? diff * diff : std::log(1.0 + std::exp(-label * diff));
  }
  return acc / static_cast<double>(pairs.size());
}

double smoothness_oracle(const DepthMap& p, const ThermalFrame& guide, double alpha) {
  double mean = 0;
  int n = 0;
  for (int y = 0; y < p.height(); ++y) {
    for (int x = 0; x < p.width(); ++x) {
      if (p.valid(x, y)) {
        mean += p.depth(x, y);
        ++n;
      }
    }
  }
  if (n == 0) return 0.0;
  mean /= n;
  double total = 0;
  for (auto [dx, dy] : {std::pair{1, 0}, std::pair{0, 1}}) {
    double sum = 0;
    int pairs = 0;
    for (int y = 0; y + dy < p.height(); ++y) {
      for (int x = 0; x + dx < p.width(); ++x) {
        if (!p.valid(x, y) || !p.valid(x + dx, y + dy)) continue;
        const double dd = std::abs(p.depth(x + dx, y + dy) / mean - p.depth(x, y) / mean);
        sum += dd * std::exp(-alpha * std::abs(guide.pixels(x + dx, y + dy) - guide.pixels(x, y)));
        ++pairs;
      }
    }
    if (pairs > 0) total += sum / pairs;
  }
  return total;
}

std::vector<double> metrics_oracle(const DepthMap& pred, const DepthMap& gt, const EvalConfig& cfg) {
  double abs_sum = 0, sq_sum = 0, n = 0;
  std::vector<double> hits(cfg.thresholds.size(), 0);
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!pred.valid(x, y) || !gt.valid(x, y)) continue;
      const double g = gt.depth(x, y);
      if (g < cfg.min_depth || g > cfg.max_depth) continue;
      const double p = std::min(cfg.max_depth, std::max(cfg.min_depth, pred.depth(x, y)));
      abs_sum += std::fabs(p - g) / g;
      sq_sum += (p - g) * (p - g);
      for (std::size_t k = 0; k < hits.size(); ++k) hits[k] += std::max(p / g, g / p) < cfg.thresholds[k];
      n += 1;
    }
  }
  std::vector<double> out{abs_sum / n, std::sqrt(sq_sum / n)};
  for (double h : hits) out.push_back(h / n);
  return out;
}

// ---- shared training state ------------------------------------------------------------

class Workspace {
 public:
  explicit Workspace(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  const fs::path& dir() const { return dir_; }

  const std::vector<SequenceSample>& train_data() {
    if (train_data_.empty()) train_data_ = generate_dataset(GenConfig{}, SensorModel{});
    return train_data_;
  }

  // Same suites, different generator seed: unseen scenes, textures and noise.
  const std::vector<SequenceSample>& heldout_data() {
    if (heldout_.empty()) {
      GenConfig gen;
      gen.seed = 1001;
      heldout_ = generate_dataset(gen, SensorModel{});
    }
    return heldout_;
  }

  std::vector<SequenceSample> heldout_suite(std::string_view suite) {
    std::vector<SequenceSample> out;
    for (const auto& s : heldout_data()) {
      if (s.sequence_id.rfind(std::string(suite) + "_", 0) == 0) out.push_back(s);
    }
    return out;
  }

  struct Trained {
    ModelConfig model;
    ModelParams params;
    double seconds = 0;
    int steps = 0;
  };

  const Trained& trained(RecurrentKind rb) {
    auto& slot = rb == RecurrentKind::kReservoir ? reservoir_ : none_;
    if (!slot) {
      Trained t;
      t.model.rb = rb;
      const std::string tag(to_string(rb));
      TrainOptions opts;
      opts.out_dir = (dir_ / ("train_" + tag)).string();
      opts.on_step = [&](const TrainStepLog& e) {
        if (e.step % 100 == 0) {
          fmt::print("  [{}] step {} total {:.5f} ({:.0f} s)\n", tag, e.step, e.loss.total, e.wall_time);
          std::fflush(stdout);
        }
      };
      const auto t0 = std::chrono::steady_clock::now();
      auto res = train(train_data(), t.model, TrainConfig{}, opts);
      t.seconds = seconds_since(t0);
      t.steps = res.steps;
      t.params = std::move(res.params);
      slot = std::move(t);
    }
    return *slot;
  }

 private:
  fs::path dir_;
  std::vector<SequenceSample> train_data_, heldout_;
  std::optional<Trained> reservoir_, none_;
};

// ---- criteria ----------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  for (auto rb : {RecurrentKind::kReservoir, RecurrentKind::kConvGru}) {
    ModelConfig m;
    m.rb = rb;
    GradcheckOptions opts;  // 32x40, T = 2
    const auto r = gradcheck(m, LossConfig{}, opts);
    const bool groups = r.worst.count(nn::ParamGroup::kRefine) && r.worst.count(nn::ParamGroup::kDepth) &&
                        r.worst.count(nn::ParamGroup::kRecurrent);
    ok = ok && groups && r.max_rel_error < 1e-4;
    detail += fmt::format("{} max rel {:.2e} over {} entries{}; ", to_string(rb), r.max_rel_error, r.entries.size(),
                          groups ? "" : " (missing a group)");
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 300;
  return {ok, detail + fmt::format("{:.1f} s", secs)};
}

Outcome loss_oracles() {
  const double tol = 1e-10;
  double worst[4] = {0, 0, 0, 0};
  bool ok = true;
  double scale_dev = 0;
  bool recompose = true;
  const LossConfig cfg;
  for (int i = 0; i < 20; ++i) {
    Rng rng(100 + i, "acceptance.losses");
    const auto gt = random_depth(rng, 8, 10, 0.5, 8.0, 0.15);
    const auto pred = random_depth(rng, 8, 10, 0.4, 9.0, 0.10);
    const auto guide = random_guide(rng, 8, 10);
    const std::uint64_t seed = 7 + i;

    const double a[4] = {silog_loss(pred, gt, cfg.lambda_si), ssim_loss(pred, gt),
                         ordinal_loss(pred, gt, cfg.ordinal_pairs, cfg.ordinal_ratio, seed),
                         smoothness_loss(pred, guide, cfg.edge_alpha)};
    const auto ord = ordinal_oracle(pred, gt, sample_ordinal_pairs(pred, gt, cfg.ordinal_pairs, cfg.ordinal_ratio, seed),
                                    cfg.ordinal_ratio);
    if (!ord) {
      ok = false;
      continue;
    }
    const double o[4] = {silog_oracle(pred, gt, cfg.lambda_si), ssim_oracle(pred, gt), *ord,
                         smoothness_oracle(pred, guide, cfg.edge_alpha)};
    for (int k = 0; k < 4; ++k) {
      worst[k] = std::max(worst[k], std::abs(a[k] - o[k]) / std::max(1.0, std::abs(o[k])));
      ok = ok && close(a[k], o[k], tol);
    }

    DepthMap scaled = pred;
    for (double& v : scaled.depth.data) v *= 1.0 + 0.37 * (i + 1);
    scale_dev = std::max(scale_dev, std::abs(silog_loss(scaled, gt, 1.0) - silog_loss(pred, gt, 1.0)));

    const auto t = total_loss(pred, gt, guide, cfg, seed);
    const auto& b = t.breakdown;
    const auto& w = cfg.weights;
    recompose = recompose &&
                b.total == w.lambda1 * b.silog + w.lambda2 * b.ssim + w.lambda3 * b.ordinal + w.lambda4 * b.smoothness;
  }
  // Scale invariance holds up to rounding of the logarithms.
  ok = ok && scale_dev < 1e-12 && recompose;
  return {ok, fmt::format("20 instances; worst rel diff silog {:.1e} ssim {:.1e} ordinal {:.1e} smoothness {:.1e}; "
                          "silog(lambda 1) scale deviation {:.1e}; recomposition {}",
                          worst[0], worst[1], worst[2], worst[3], scale_dev, recompose ? "exact" : "inexact")};
}

Outcome metric_oracles() {
  const EvalConfig cfg;
  int mismatches = 0;
  for (int i = 0; i < 50; ++i) {
    Rng rng(200 + i, "acceptance.metrics");
    const auto gt = random_depth(rng, 8, 10, 0.1, 12.0, 0.2);
    const auto pred = random_depth(rng, 8, 10, 0.05, 15.0, 0.1);
    const auto s = depth_metrics(pred, gt, cfg);
    const auto o = metrics_oracle(pred, gt, cfg);
    const bool same =
        s.absrel == o[0] && s.rmse == o[1] && s.accuracy[0] == o[2] && s.accuracy[1] == o[3] && s.accuracy[2] == o[4];
    mismatches += !same;
  }
  const auto a = depth_metrics(DepthMap::filled(1, 1, 1.2), DepthMap::filled(1, 1, 1.0), cfg);
  const auto b = depth_metrics(DepthMap::filled(1, 1, 2.0), DepthMap::filled(1, 1, 1.0), cfg);
  const bool hand = a.accuracy[0] == 1.0 && std::abs(a.absrel - 0.2) < 1e-15 && b.accuracy[2] == 0.0 &&
                    b.absrel == 1.0 && b.rmse == 1.0;
  return {mismatches == 0 && hand, fmt::format("{} of 50 random instances differ from the loop oracle; "
                                               "1.2 vs 1.0 -> a1 {} absrel {:.17g}; 2.0 vs 1.0 -> a3 {}",
                                               mismatches, a.accuracy[0], a.absrel, b.accuracy[2])};
}

Outcome echo_state() {
  auto run = [](double radius) -> double {
    ReservoirConfig cfg;  // N = 32
    cfg.spectral_radius = radius;
    const int k = ModelConfig{}.backbone.latent_dim;
    const auto p = init_reservoir(11, cfg, k);
    Rng rng(12, "acceptance.esp");
    RecurrentState a = RecurrentState::zeros_reservoir(cfg.neurons), b = a;
    for (int i = 0; i < cfg.neurons; ++i) {
      a.v[i] = rng.uniform(-1, 1);
      b.v[i] = rng.uniform(-1, 1);
    }
    try {
      for (int t = 0; t < 200; ++t) {
        Eigen::VectorXd u(k);
        for (int i = 0; i < k; ++i) u[i] = rng.uniform(-1, 1);
        a = reservoir_step(u, a, p).first;
        b = reservoir_step(u, b, p).first;
      }
    } catch (const Error& e) {
      if (e.code() == Errc::kNonFiniteState) return std::numeric_limits<double>::infinity();
      throw;
    }
    return (a.v - b.v).cwiseAbs().maxCoeff();
  };
  const double stable = run(0.9), unstable = run(1.5);
  return {stable < 1e-3 && !(unstable < 1e-3),
          fmt::format("N=32, 200 steps: radius 0.9 gap {:.2e}; radius 1.5 gap {:.2e} (control must not converge)",
                      stable, unstable)};
}

Outcome census_ordering() {
  const auto rc = recurrent_census(ModelConfig{});
  return {rc.reservoir.psi < rc.convgru.psi,
          fmt::format("trainable psi reservoir {} (plus {} fixed) vs convgru {}; theta {} phi {}", rc.reservoir.psi,
                      rc.reservoir.fixed, rc.convgru.psi, rc.reservoir.theta, rc.reservoir.phi)};
}

Outcome toy_overfit(Workspace& ws) {
  const auto& t = ws.trained(RecurrentKind::kReservoir);
  const auto ev = evaluate(t.params, t.model, ws.train_data(), EvalConfig{});
  std::ofstream(ws.dir() / "report_reservoir_train.json") << report_json(ev.report) << "\n";
  const bool ok = ev.report.absrel < 0.15 && ev.report.a1 > 0.70 && t.steps <= 2000 && t.seconds < 1200;
  return {ok, fmt::format("16 sequences, {} steps, {:.0f} s: AbsRel {:.4f} RMSE {:.4f} a1 {:.4f} a2 {:.4f} a3 {:.4f}",
                          t.steps, t.seconds, ev.report.absrel, ev.report.rmse, ev.report.a1, ev.report.a2,
                          ev.report.a3)};
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

Outcome temporal_consistency(Workspace& ws) {
  const auto& res = ws.trained(RecurrentKind::kReservoir);
  const auto& none = ws.trained(RecurrentKind::kNone);
  const auto t0 = std::chrono::steady_clock::now();
  const auto suite = ws.heldout_suite(to_string(Suite::kSpriteEntering));
  const auto er = evaluate(res.params, res.model, suite, EvalConfig{});
  const auto en = evaluate(none.params, none.model, suite, EvalConfig{});
  std::ofstream(ws.dir() / "report_reservoir_heldout_sprite.json") << report_json(er.report) << "\n";
  std::ofstream(ws.dir() / "report_none_heldout_sprite.json") << report_json(en.report) << "\n";
  const double fr = mean(er.sequence_flicker), fn = mean(en.sequence_flicker);
  const double secs = none.seconds + seconds_since(t0);
  const bool ok = fr <= 0.9 * fn && secs < 2 * 1200;
  return {ok, fmt::format("held-out sprite-entering ({} sequences): depth flicker reservoir {:.5f} vs none {:.5f} "
                          "({:+.1f}%, needs <= -10%); none trained in {:.0f} s",
                          suite.size(), fr, fn, 100.0 * (fr / fn - 1.0), none.seconds)};
}

Outcome enhancement_stability(Workspace& ws) {
  const auto& t = ws.trained(RecurrentKind::kReservoir);
  const auto t0 = std::chrono::steady_clock::now();
  auto still = ws.heldout_suite(to_string(Suite::kStatic));
  for (auto& s : ws.heldout_suite(to_string(Suite::kSpriteEntering))) still.push_back(s);
  double fr = 0, fraw = 0;
  for (const auto& s : still) {
    const auto out = forward_sequence<float>(s, t.params, t.model, LossConfig{}, s.seed);
    std::vector<Image8> raw8;
    for (const auto& f : s.frames) raw8.push_back(to_8bit_linear(f));
    fr += flicker(out.refined) / static_cast<double>(still.size());
    fraw += flicker(raw8) / static_cast<double>(still.size());
  }
  double rr = 0, rraw = 0;
  const auto moving = ws.heldout_suite(to_string(Suite::kTranslating));
  for (const auto& s : moving) {
    const auto out = forward_sequence<float>(s, t.params, t.model, LossConfig{}, s.seed);
    std::vector<Image8> raw8;
    for (const auto& f : s.frames) raw8.push_back(to_8bit_linear(f));
    rr += repeatability(enhanced_stream(out, s, t.model), s.motion_gt, EvalConfig{}).value /
          static_cast<double>(moving.size());
    rraw += repeatability(raw8, s.motion_gt, EvalConfig{}).value / static_cast<double>(moving.size());
  }
  const double secs = seconds_since(t0);
  return {fr < fraw && rr >= rraw && secs < 120,
          fmt::format("static AGC suites: flicker refined {:.5f} vs raw 8-bit {:.5f}; translating: repeatability "
                      "refined {:.4f} vs raw 8-bit {:.4f}; {:.1f} s",
                      fr, fraw, rr, rraw, secs)};
}

Outcome determinism(Workspace& ws) {
  // Same-seed training, twice, on the acceptance dataset.
  TrainConfig cfg;
  cfg.max_steps = 8;
  const ModelConfig m;
  std::string hashes[2];
  bool logs_equal = true;
  std::vector<TrainStepLog> first;
  for (int run = 0; run < 2; ++run) {
    TrainOptions opts;
    opts.out_dir = (ws.dir() / fmt::format("determinism_{}", run)).string();
    const auto r = train(ws.train_data(), m, cfg, opts);
    hashes[run] = checkpoint_file_hash(opts.out_dir + "/checkpoint.tdck");
    if (run == 0) {
      first = r.log;
    } else {
      logs_equal = r.log.size() == first.size();
      for (std::size_t i = 0; logs_equal && i < first.size(); ++i) logs_equal = r.log[i].same_numbers(first[i]);
    }
  }

  const fs::path data_dir = ws.dir() / "dataset_roundtrip";
  fs::remove_all(data_dir);
  write_dataset(ws.train_data(), data_dir.string());
  const auto back = read_dataset(data_dir.string());
  auto expect = ws.train_data();  // read back in directory-name order
  std::sort(expect.begin(), expect.end(), [](const auto& a, const auto& b) { return a.sequence_id < b.sequence_id; });
  const bool data_ok = back == expect;
  const fs::path again = ws.dir() / "dataset_roundtrip_2";
  fs::remove_all(again);
  write_dataset(back, again.string());
  const bool data_hash_ok = dataset_hash(data_dir.string()) == dataset_hash(again.string());

  const auto params = init_params<float>(m);
  const std::string ck = (ws.dir() / "roundtrip.tdck").string();
  save_checkpoint(params, m, ck);
  const auto loaded = load_checkpoint(ck, m);
  const bool ck_ok = loaded.params == params && params_hash(loaded.params) == params_hash(params) && loaded.config == m;

  const bool ok = hashes[0] == hashes[1] && logs_equal && data_ok && data_hash_ok && ck_ok;
  return {ok, fmt::format("checkpoints {} ({} / {}), logs {}; dataset round trip {}; checkpoint round trip {}",
                          hashes[0] == hashes[1] ? "identical" : "differ", hashes[0], hashes[1],
                          logs_equal ? "identical" : "differ", data_ok && data_hash_ok ? "bitwise" : "lossy",
                          ck_ok ? "bitwise" : "lossy")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria 1-9"};
  std::string work_dir = "acceptance_work";
  std::vector<int> only;
  app.add_option("--work-dir", work_dir, "scratch directory for datasets, checkpoints and reports");
  app.add_option("--only", only, "run just these criteria");
  CLI11_PARSE(app, argc, argv);

  Workspace ws{fs::path(work_dir)};
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"gradient correctness", gradient_correctness},
      {"loss-term oracles", loss_oracles},
      {"metric oracles", metric_oracles},
      {"echo-state property", echo_state},
      {"parameter-census ordering", census_ordering},
      {"toy overfit", [&] { return toy_overfit(ws); }},
      {"temporal-consistency benefit", [&] { return temporal_consistency(ws); }},
      {"enhancement stability", [&] { return enhancement_stability(ws); }},
      {"determinism and round trips", [&] { return determinism(ws); }},
  };
  const std::set<int> selected(only.begin(), only.end());
  std::vector<std::string> lines;
  int failed = 0;
  for (int k = 1; k <= 9; ++k) {
    if (!selected.empty() && !selected.count(k)) continue;
    const auto& [name, fn] = criteria[k - 1];
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    lines.push_back(fmt::format("criterion {} {}: {} ({})", k, name, o.pass ? "PASS" : "FAIL", o.detail));
    fmt::print("{}\n", lines.back());
    std::fflush(stdout);
  }
  std::ofstream summary(ws.dir() / "summary.txt");
  for (const auto& l : lines) summary << l << "\n";
  fmt::print("{} of {} criteria passed\n", lines.size() - failed, lines.size());
  return failed == 0 ? 0 : 1;
}

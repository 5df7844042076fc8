// thermodepth: data generation, training, evaluation, enhancement, gradient
// checks and plots from one binary.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "thermodepth/checkpoint.hpp"
#include "thermodepth/config.hpp"
#include "thermodepth/dataset.hpp"
#include "thermodepth/enhance.hpp"
#include "thermodepth/metrics.hpp"
#include "thermodepth/png_io.hpp"
#include "thermodepth/sensorsim.hpp"
#include "thermodepth/trainer.hpp"

namespace fs = std::filesystem;
using namespace thermodepth;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string rb;
  bool no_trefnet = false;
  std::optional<int> epochs;
  bool radiometric = false;
  bool force = false;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kMissingFile, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIo, "cannot write " + path.string());
  out << text;
}

// --set a.b.c=value: value is parsed as JSON, falling back to a string.
void apply_set(nlohmann::ordered_json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw Error(Errc::kConfig, "--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::ordered_json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw Error(Errc::kConfig, "unknown config key '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  auto parsed = nlohmann::ordered_json::parse(text, nullptr, false);
  *node = parsed.is_discarded() ? nlohmann::ordered_json(text) : parsed;
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : parse_config(read_file(c.config_path));
  if (!c.sets.empty()) {
    auto j = nlohmann::ordered_json::parse(emit_config(cfg));
    for (const auto& s : c.sets) apply_set(j, s);
    cfg = parse_config(j.dump());
  }
  if (c.seed) {
    cfg.train.seed = *c.seed;
    cfg.gen.seed = *c.seed;
    cfg.model.init_seed = *c.seed;
  }
  if (c.workers) cfg.train.workers = *c.workers;
  if (!c.rb.empty()) cfg.model.rb = parse_recurrent(c.rb);
  if (c.no_trefnet) cfg.model.refine.enabled = false;
  if (c.epochs) cfg.train.epochs = *c.epochs;
  if (c.radiometric) cfg.sensor.radiometric = true;
  validate(cfg);
  return cfg;
}

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

// Explicit --out wins; otherwise a fresh run directory under the output root.
fs::path output_dir(const std::string& explicit_out, const std::string& command, const RunConfig& cfg, bool force) {
  fs::path dir;
  if (!explicit_out.empty()) {
    dir = explicit_out;
  } else {
    const char* root = std::getenv("THERMODEPTH_OUTPUT_ROOT");
    dir = fs::path(root && *root ? root : "runs") /
          fmt::format("{}-{}-{}", timestamp(), command, run_config_hash(cfg).substr(0, 8));
  }
  if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
    throw Error(Errc::kIo, fmt::format("output directory {} exists and is not empty (use --force)", dir.string()));
  }
  fs::create_directories(dir);
  write_file(dir / "config.json", emit_config(cfg) + "\n");
  write_file(dir / "config.hash", run_config_hash(cfg) + "\n");
  return dir;
}

std::string model_label(const ModelConfig& m) {
  std::string s(to_string(m.rb));
  if (!m.refine.enabled) s += "-noTRN";
  return s;
}

// ---- gen ---------------------------------------------------------------------------

int cmd_gen(const Common& c, const std::string& out) {
  const RunConfig cfg = resolve(c);
  const fs::path dir = output_dir(out, "gen", cfg, c.force);
  const auto data = generate_dataset(cfg.gen, cfg.sensor);
  write_dataset(data, (dir / "data").string());
  nlohmann::ordered_json manifest;
  manifest["sequences"] = data.size();
  manifest["frames"] = cfg.gen.frames;
  manifest["width"] = cfg.gen.width;
  manifest["height"] = cfg.gen.height;
  manifest["radiometric"] = cfg.sensor.radiometric;
  manifest["dataset_hash"] = dataset_hash((dir / "data").string());
  manifest["path"] = (dir / "data").string();
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  fmt::print("{}\n", manifest.dump(2));
  return 0;
}

// ---- train -------------------------------------------------------------------------

int cmd_train(const Common& c, const std::string& data_dir, const std::string& out, int max_steps) {
  RunConfig cfg = resolve(c);
  if (max_steps > 0) cfg.train.max_steps = max_steps;
  const auto data = read_dataset(data_dir);
  const fs::path dir = output_dir(out, "train", cfg, c.force);
  TrainOptions opts;
  opts.out_dir = dir.string();
  opts.on_step = [](const TrainStepLog& e) {
    fmt::print("step {:5d} epoch {:4d} total {:.6f} silog {:.5f} ssim {:.5f} ord {:.5f} smooth {:.5f} |g| {:.3f}\n",
               e.step, e.epoch, e.loss.total, e.loss.silog, e.loss.ssim, e.loss.ordinal, e.loss.smoothness,
               e.grad_norm);
  };
  const auto res = train(data, cfg.model, cfg.train, opts);
  const std::string ckpt = (dir / "checkpoint.tdck").string();
  fmt::print("trained {} steps; checkpoint {} ({})\n", res.steps, ckpt, checkpoint_file_hash(ckpt));
  return 0;
}

// ---- eval --------------------------------------------------------------------------

int cmd_eval(const Common& c, const std::string& ckpt_path, const std::string& data_dir, const std::string& out,
             bool oracle, std::string name) {
  const RunConfig cfg = resolve(c);
  const bool pinned = !c.config_path.empty() || !c.sets.empty() || !c.rb.empty() || c.no_trefnet;
  const Checkpoint ck = load_checkpoint(ckpt_path, pinned ? std::optional<ModelConfig>(cfg.model) : std::nullopt);
  const auto data = read_dataset(data_dir);
  const EvalOutput ev = evaluate(ck.params, ck.config, data, cfg.eval, oracle);
  if (name.empty()) name = oracle ? "oracle" : model_label(ck.config);
  const fs::path dir = output_dir(out, "eval", cfg, c.force);
  write_file(dir / "report.json", report_json(ev.report) + "\n");
  write_file(dir / "metrics.csv", csv_header() + "\n" + csv_row(name, ev.report) + "\n");
  fmt::print("{}\n{}\n{}\n", report_json(ev.report), csv_header(), csv_row(name, ev.report));
  return 0;
}

// ---- enhance -----------------------------------------------------------------------

int cmd_enhance(const Common& c, const std::string& input, const std::string& method,
                const std::string& ckpt_path, const std::string& out, double sigma, double clip, int tiles) {
  const RunConfig cfg = resolve(c);
  std::vector<std::string> methods;
  if (method == "all") {
    methods = {"raw8", "gauss", "clahe"};
    if (!ckpt_path.empty()) methods.push_back("trefnet");
  } else {
    methods = {method};
  }
  std::optional<RefineParams> refine_params;
  for (const auto& m : methods) {
    if (m != "raw8" && m != "gauss" && m != "clahe" && m != "trefnet") {
      throw Error(Errc::kConfig, "unknown enhancement method '" + m + "'");
    }
    if (m == "trefnet") {
      if (ckpt_path.empty()) throw Error(Errc::kConfig, "method trefnet needs --checkpoint");
      const Checkpoint ck = load_checkpoint(ckpt_path);
      if (!ck.config.refine.enabled) throw Error(Errc::kConfig, "checkpoint has no refinement network");
      refine_params = extract_refine_params(ck.config.refine, ck.params);
    }
  }
  const auto data = read_dataset(input);
  const fs::path dir = output_dir(out, "enhance", cfg, c.force);
  nlohmann::ordered_json record;
  record["input"] = input;
  for (const auto& m : methods) {
    double flicker_sum = 0.0;
    for (const auto& s : data) {
      std::vector<Image8> frames;
      for (const auto& f : s.frames) {
        const Image8 raw8 = to_8bit_linear(f);
        if (m == "raw8") {
          frames.push_back(raw8);
        } else if (m == "gauss") {
          frames.push_back(gaussian_smooth(raw8, sigma));
        } else if (m == "clahe") {
          frames.push_back(clahe(raw8, clip, tiles, tiles));
        } else {
          frames.push_back(quantize8(refine(raw_to_normalized(f), *refine_params)));
        }
      }
      const fs::path sdir = dir / m / s.sequence_id;
      fs::create_directories(sdir);
      for (std::size_t t = 0; t < frames.size(); ++t) {
        const int idx = s.frames[t].frame_index;
        write_png8((sdir / fmt::format("{:06d}.png", idx)).string(), frames[t]);
        write_png_rgb((sdir / fmt::format("{:06d}_color.png", idx)).string(), colorize(frames[t]));
      }
      const double fl = frames.size() >= 2 ? flicker(frames) : 0.0;
      record["methods"][m]["sequences"][s.sequence_id] = fl;
      flicker_sum += fl;
    }
    record["methods"][m]["mean_flicker"] = flicker_sum / static_cast<double>(data.size());
  }
  write_file(dir / "comparison.json", record.dump(2) + "\n");
  for (const auto& m : methods) fmt::print("{:8s} flicker {:.6f}\n", m, record["methods"][m]["mean_flicker"].get<double>());
  fmt::print("output {}\n", dir.string());
  return 0;
}

// ---- gradcheck ---------------------------------------------------------------------

int cmd_gradcheck(const Common& c, GradcheckOptions opts, int verbose_entries) {
  const RunConfig cfg = resolve(c);
  if (c.seed) opts.seed = *c.seed;
  const auto started = std::chrono::steady_clock::now();
  const GradcheckReport r = gradcheck(cfg.model, cfg.train.loss, opts);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  const ModelConfig checked = gradcheck_model(cfg.model, opts);
  fmt::print("gradcheck rb={} input {}x{} T={} levels={} entries={} ({:.1f} s)\n", to_string(checked.rb),
             opts.height, opts.width, opts.frames, checked.backbone.levels(), r.entries.size(), secs);
  for (const auto& [group, worst] : r.worst) fmt::print("  {:10s} worst relative error {:.3e}\n", group_name(group), worst);
  std::vector<GradcheckEntry> worst = r.entries;
  std::sort(worst.begin(), worst.end(), [](const auto& a, const auto& b) { return a.rel_error > b.rel_error; });
  for (std::size_t i = 0; i < std::min<std::size_t>(verbose_entries, worst.size()); ++i) {
    const auto& e = worst[i];
    fmt::print("  {}[{}] analytic {:.9e} numeric {:.9e} rel {:.2e}\n", e.name, e.index, e.analytic, e.numeric,
               e.rel_error);
  }
  fmt::print("max relative error {:.3e} (tolerance {:.1e}): {}\n", r.max_rel_error, r.tolerance,
             r.passed() ? "PASS" : "FAIL");
  return r.passed() ? 0 : kExitNumerical;
}

// ---- plot --------------------------------------------------------------------------

std::string svg_escape(const std::string& s) {
  std::string o;
  for (char ch : s) {
    if (ch == '<') o += "&lt;";
    else if (ch == '>') o += "&gt;";
    else if (ch == '&') o += "&amp;";
    else o += ch;
  }
  return o;
}

std::string loss_curve_svg(const std::vector<TrainStepLog>& log) {
  constexpr double W = 720, H = 420, L = 60, R = 20, T = 30, B = 50;
  const char* names[] = {"total", "silog", "ssim", "ordinal", "smoothness"};
  const char* colors[] = {"#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd"};
  auto value = [](const TrainStepLog& e, int k) {
    const double v[] = {e.loss.total, e.loss.silog, e.loss.ssim, e.loss.ordinal, e.loss.smoothness};
    return v[k];
  };
  double ymax = 0.0;
  for (const auto& e : log) {
    for (int k = 0; k < 5; ++k) {
      if (std::isfinite(value(e, k))) ymax = std::max(ymax, value(e, k));
    }
  }
  if (ymax <= 0) ymax = 1;
  const double x0 = log.front().step, x1 = std::max<double>(log.back().step, x0 + 1);
  auto px = [&](double s) { return L + (s - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - B - v / ymax * (H - T - B); };
  std::string s = fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">)",
                              W, H);
  s += "\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", L, H - B, W - R, H - B);
  s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", L, T, L, H - B);
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">step</text>\n", (L + W - R) / 2, H - 15);
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3g}</text>\n", L - 5, T + 4, ymax);
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">0</text>\n", L - 5, H - B + 4);
  s += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", L, H - B + 18, log.front().step);
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", W - R, H - B + 18, log.back().step);
  for (int k = 0; k < 5; ++k) {
    std::string pts;
    for (const auto& e : log) {
      if (std::isfinite(value(e, k))) pts += fmt::format("{:.2f},{:.2f} ", px(e.step), py(value(e, k)));
    }
    s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", colors[k], pts);
    s += fmt::format("<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>\n", W - R - 90, T + 14 * k, colors[k], names[k]);
  }
  return s + "</svg>\n";
}

std::string bars_svg(const std::vector<std::pair<std::string, MetricsReport>>& reports) {
  const char* metrics[] = {"absrel", "rmse", "a1", "a2", "a3", "flicker", "repeatability"};
  const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
  auto value = [](const MetricsReport& r, int k) {
    const double v[] = {r.absrel, r.rmse, r.a1, r.a2, r.a3, r.flicker, r.repeatability};
    return v[k];
  };
  constexpr double H = 420, B = 60, T = 30, L = 40, group_w = 110;
  const double bar_w = (group_w - 20) / static_cast<double>(reports.size());
  const double W = L + 7 * group_w + 160;
  std::string s = fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">)",
                              W, H);
  s += "\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", L, H - B, L + 7 * group_w, H - B);
  for (int k = 0; k < 7; ++k) {
    double vmax = 0.0;
    for (const auto& [name, r] : reports) vmax = std::max(vmax, std::abs(value(r, k)));
    if (vmax <= 0) vmax = 1;
    const double gx = L + k * group_w + 10;
    for (std::size_t i = 0; i < reports.size(); ++i) {
      const double v = value(reports[i].second, k);
      const double h = std::abs(v) / vmax * (H - T - B);
      s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"><title>{} {} = {:.6g}</title></rect>\n",
                       gx + i * bar_w, H - B - h, bar_w - 2, h, colors[i % 6], svg_escape(reports[i].first), metrics[k], v);
    }
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", gx + (group_w - 20) / 2, H - B + 18, metrics[k]);
  }
  for (std::size_t i = 0; i < reports.size(); ++i) {
    s += fmt::format("<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>\n", L + 7 * group_w + 10, T + 16 * i, colors[i % 6],
                     svg_escape(reports[i].first));
  }
  s += "<text x=\"10\" y=\"18\">bars scaled per metric to the largest value</text>\n";
  return s + "</svg>\n";
}

int cmd_plot(const Common& c, const std::string& log_path, const std::vector<std::string>& report_paths,
             const std::string& out) {
  if (log_path.empty() && report_paths.empty()) throw Error(Errc::kConfig, "plot needs --log or --report");
  // Parse everything before creating any output.
  std::vector<TrainStepLog> log;
  if (!log_path.empty()) {
    log = read_train_log(log_path);
    if (log.empty()) throw Error(Errc::kMalformedData, "log " + log_path + " has no records");
  }
  std::vector<std::pair<std::string, MetricsReport>> reports;
  for (const auto& p : report_paths) {
    std::string name = fs::path(p).parent_path().filename().string();
    if (name.empty()) name = fs::path(p).stem().string();
    reports.emplace_back(name, parse_report_json(read_file(p)));
  }
  const RunConfig cfg = resolve(c);
  const fs::path dir = output_dir(out, "plot", cfg, c.force);
  if (!log.empty()) {
    write_file(dir / "loss_curve.svg", loss_curve_svg(log));
    fmt::print("wrote {}\n", (dir / "loss_curve.svg").string());
  }
  if (!reports.empty()) {
    write_file(dir / "metrics_bars.svg", bars_svg(reports));
    fmt::print("wrote {}\n", (dir / "metrics_bars.svg").string());
  }
  return 0;
}

// ---- census ------------------------------------------------------------------------

int cmd_census(const Common& c) {
  const RunConfig cfg = resolve(c);
  const RecurrentCensus rc = recurrent_census(cfg.model);
  fmt::print("{:10s} {:>10s} {:>10s} {:>10s} {:>10s} {:>10s}\n", "rb", "theta", "phi", "psi", "fixed", "trainable");
  auto row = [](const char* name, const ParameterCensus& p) {
    fmt::print("{:10s} {:>10d} {:>10d} {:>10d} {:>10d} {:>10d}\n", name, p.theta, p.phi, p.psi, p.fixed, p.trainable());
  };
  row("none", rc.none);
  row("reservoir", rc.reservoir);
  row("convgru", rc.convgru);
  return 0;
}

int exit_code(const Error& e) {
  switch (category_of(e.code())) {
    case ErrorCategory::kConfig: return kExitConfig;
    case ErrorCategory::kData: return kExitData;
    case ErrorCategory::kNumerical: return kExitNumerical;
    case ErrorCategory::kUsage: return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"thermodepth: thermal-to-depth training and evaluation"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", c.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--set", c.sets, "override one config field, e.g. --set train.eta=5e-4");
    sub->add_option("--seed", c.seed, "seed for generation, initialization and training");
    sub->add_option("--workers", c.workers, "parallel batch items (default 1)");
    sub->add_option("--rb", c.rb, "recurrent block")->check(CLI::IsMember({"convgru", "reservoir", "none"}));
    sub->add_flag("--no-trefnet", c.no_trefnet, "disable the refinement network");
    sub->add_option("--epochs", c.epochs, "training epochs");
    sub->add_flag("--radiometric", c.radiometric, "radiometric sensor (no AGC)");
    sub->add_flag("--force", c.force, "allow writing into a non-empty output directory");
  };

  std::string out, data_dir, ckpt, log_path, input, method = "all", name;
  std::vector<std::string> reports;
  int max_steps = 0;
  bool oracle = false;
  double sigma = 1.0, clip = 2.0;
  int tiles = 4;
  GradcheckOptions gc;
  int show_worst = 5;

  auto* gen = app.add_subcommand("gen", "render the synthetic dataset suites");
  add_common(gen);
  gen->add_option("--out", out, "output directory");

  auto* tr = app.add_subcommand("train", "train a model");
  add_common(tr);
  tr->add_option("--data", data_dir, "dataset directory")->required();
  tr->add_option("--out", out, "output directory");
  tr->add_option("--max-steps", max_steps, "stop after this many updates");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(ev);
  ev->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  ev->add_option("--data", data_dir, "dataset directory")->required();
  ev->add_option("--out", out, "output directory");
  ev->add_option("--name", name, "model name in the CSV row");
  ev->add_flag("--oracle", oracle, "score ground truth as the prediction");

  auto* en = app.add_subcommand("enhance", "8-bit enhancement comparison");
  add_common(en);
  en->add_option("--input", input, "dataset or sequence directory")->required();
  en->add_option("--method", method, "raw8, gauss, clahe, trefnet or all")
      ->check(CLI::IsMember({"raw8", "gauss", "clahe", "trefnet", "all"}));
  en->add_option("--checkpoint", ckpt, "checkpoint providing the refinement network");
  en->add_option("--out", out, "output directory");
  en->add_option("--sigma", sigma, "gaussian sigma, px");
  en->add_option("--clip", clip, "CLAHE clip limit");
  en->add_option("--tiles", tiles, "CLAHE tiles per axis");

  auto* gcmd = app.add_subcommand("gradcheck", "finite-difference gradient check");
  add_common(gcmd);
  gcmd->add_option("--tolerance", gc.tolerance, "maximum relative error");
  gcmd->add_option("--per-group", gc.per_group, "entries sampled per parameter group");
  gcmd->add_option("--width", gc.width, "input width");
  gcmd->add_option("--height", gc.height, "input height");
  gcmd->add_option("--frames", gc.frames, "unroll length");
  gcmd->add_option("--step", gc.step, "central-difference step");
  gcmd->add_option("--show-worst", show_worst, "list this many worst entries");

  auto* pl = app.add_subcommand("plot", "SVG loss curves and metric bars");
  add_common(pl);
  pl->add_option("--log", log_path, "train_log.jsonl");
  pl->add_option("--report", reports, "report.json (repeatable)");
  pl->add_option("--out", out, "output directory");

  auto* ce = app.add_subcommand("census", "parameter counts per group");
  add_common(ce);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen(c, out);
    if (*tr) return cmd_train(c, data_dir, out, max_steps);
    if (*ev) return cmd_eval(c, ckpt, data_dir, out, oracle, name);
    if (*en) return cmd_enhance(c, input, method, ckpt, out, sigma, clip, tiles);
    if (*gcmd) return cmd_gradcheck(c, gc, show_worst);
    if (*pl) return cmd_plot(c, log_path, reports, out);
    if (*ce) return cmd_census(c);
  } catch (const Error& e) {
    fmt::print(stderr, "error [{}]: {}\n", errc_name(e.code()), e.what());
    return exit_code(e);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}

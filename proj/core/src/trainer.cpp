#include "thermodepth/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>
#include <thread>

#include "thermodepth/checkpoint.hpp"
#include "thermodepth/enhance.hpp"
#include "thermodepth/metrics.hpp"
#include "thermodepth/sensorsim.hpp"

namespace fs = std::filesystem;

namespace thermodepth {

using nn::Matrix;
using nn::Shape;
using nn::Var;

namespace {

template <typename T>
typename DepthModel<T>::State to_tape_state(nn::Tape<T>& tape, const DepthModel<T>& model,
                                            const std::optional<RecurrentState>& init) {
  auto st = model.initial_state(tape);
  if (!init) return st;
  const ModelConfig& cfg = model.config();
  if (init->kind != cfg.rb) throw Error(Errc::kInvalidArgument, "initial state kind does not match the model");
  if (cfg.rb == RecurrentKind::kReservoir) {
    const int n = cfg.reservoir.neurons;
    if (init->v.size() != n) throw Error(Errc::kSizeMismatch, "initial reservoir state has the wrong size");
    st.v = tape.constant(init->v.cast<T>(), Shape{n, 1, 1});
    if (init->spikes.size() == n) st.spikes = tape.constant(init->spikes.cast<T>(), Shape{n, 1, 1});
  } else if (cfg.rb == RecurrentKind::kConvGru && init->hidden.size() > 0) {
    st.hidden = tape.constant(init->hidden.cast<T>(), init->hidden_shape);
  }
  return st;
}

template <typename T>
RecurrentState from_tape_state(const nn::Tape<T>& tape, const typename DepthModel<T>::State& st, RecurrentKind kind) {
  RecurrentState out;
  out.kind = kind;
  if (kind == RecurrentKind::kReservoir) {
    const auto& v = tape.value(st.v);
    out.v = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(v.data(), v.size()).template cast<double>();
    if (st.spikes.valid()) {
      const auto& s = tape.value(st.spikes);
      out.spikes = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(s.data(), s.size()).template cast<double>();
    }
  } else if (kind == RecurrentKind::kConvGru && st.hidden.valid()) {
    out.hidden = tape.value(st.hidden).template cast<double>();
    out.hidden_shape = tape.shape(st.hidden);
  }
  return out;
}

template <typename T>
Matrix<T> grid_row(const Grid<double>& g, double scale) {
  Matrix<T> row(1, static_cast<long>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) row.data()[i] = static_cast<T>(g.data[i] * scale);
  return row;
}

template <typename T>
ThermalFrame row_frame(const Matrix<T>& row, const ThermalFrame& like) {
  ThermalFrame f = like;
  f.mode = IntensityMode::kNormalized;
  for (long i = 0; i < row.size(); ++i) f.pixels.data[i] = static_cast<double>(row.data()[i]);
  return f;
}

}  // namespace

std::uint64_t frame_loss_seed(std::uint64_t sequence_seed, int t) {
  return splitmix64(sequence_seed ^ splitmix64(static_cast<std::uint64_t>(t) + 0x6f7264696e616cULL));
}

template <typename T>
SequenceOutput forward_sequence(const SequenceSample& sample, const nn::ParameterSet<T>& params,
                                const ModelConfig& model_cfg, const LossConfig& loss, std::uint64_t loss_seed,
                                const std::optional<RecurrentState>& initial, nn::Gradients<T>* grads) {
  if (sample.frames.empty()) throw Error(Errc::kInvalidArgument, "forward_sequence: empty sample");
  if (sample.depths.size() != sample.frames.size()) {
    throw Error(Errc::kSizeMismatch, "forward_sequence: frame and depth counts differ");
  }
  nn::Tape<T> tape(grads != nullptr);
  const DepthModel<T> model(model_cfg, params);
  auto state = to_tape_state(tape, model, initial);

  SequenceOutput out;
  const int n = static_cast<int>(sample.frames.size());
  std::vector<Var> depth_vars, guide_vars;
  std::vector<TotalLoss> losses;
  for (int t = 0; t < n; ++t) {
    const ThermalFrame& frame = sample.frames[t];
    const Var x = tape.constant(frame_row<T>(frame), Shape{1, frame.height(), frame.width()});
    auto r = model.step(tape, x, state);
    state = r.state;
    const auto& gt = sample.depths[t];
    DepthMap pred = to_depth_map(tape.value(r.depth), frame.width(), frame.height(), gt.min_depth, gt.max_depth);
    ThermalFrame guide = row_frame(tape.value(r.refined), frame);
    losses.push_back(total_loss(pred, gt, guide, loss, frame_loss_seed(loss_seed, t)));
    out.frame_losses.push_back(losses.back().breakdown);
    out.loss += losses.back().breakdown;
    out.predictions.push_back(std::move(pred));
    out.refined.push_back(std::move(guide));
    depth_vars.push_back(r.depth);
    guide_vars.push_back(r.refined);
  }
  out.loss = out.loss.scaled(1.0 / n);
  out.final_state = from_tape_state(tape, state, model_cfg.rb);

  if (grads) {
    for (int t = 0; t < n; ++t) {
      tape.accumulate(depth_vars[t], grid_row<T>(losses[t].d_pred, 1.0 / n));
      if (tape.requires_grad(guide_vars[t])) tape.accumulate(guide_vars[t], grid_row<T>(losses[t].d_guide, 1.0 / n));
    }
    tape.backward();
    tape.collect(params, *grads);
  }
  return out;
}

template SequenceOutput forward_sequence<float>(const SequenceSample&, const nn::ParameterSet<float>&,
                                                const ModelConfig&, const LossConfig&, std::uint64_t,
                                                const std::optional<RecurrentState>&, nn::Gradients<float>*);
template SequenceOutput forward_sequence<double>(const SequenceSample&, const nn::ParameterSet<double>&,
                                                 const ModelConfig&, const LossConfig&, std::uint64_t,
                                                 const std::optional<RecurrentState>&, nn::Gradients<double>*);

// ---- log records -------------------------------------------------------------------

bool TrainStepLog::same_numbers(const TrainStepLog& o) const {
  return step == o.step && epoch == o.epoch && loss.silog == o.loss.silog && loss.ssim == o.loss.ssim &&
         loss.ordinal == o.loss.ordinal && loss.smoothness == o.loss.smoothness && loss.total == o.loss.total &&
         grad_norm == o.grad_norm;
}

std::string to_json_line(const TrainStepLog& e) {
  nlohmann::ordered_json j;
  j["step"] = e.step;
  j["epoch"] = e.epoch;
  j["silog"] = e.loss.silog;
  j["ssim"] = e.loss.ssim;
  j["ordinal"] = e.loss.ordinal;
  j["smoothness"] = e.loss.smoothness;
  j["total"] = e.loss.total;
  j["grad_norm"] = e.grad_norm;
  j["wall_time"] = e.wall_time;
  // Non-finite values have no JSON form; they are written as null.
  return j.dump();
}

TrainStepLog parse_log_line(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    auto num = [&](const char* key) {
      const auto& v = j.at(key);
      return v.is_null() ? std::nan("") : v.get<double>();
    };
    TrainStepLog e;
    e.step = j.at("step").get<int>();
    e.epoch = j.at("epoch").get<int>();
    e.loss.silog = num("silog");
    e.loss.ssim = num("ssim");
    e.loss.ordinal = num("ordinal");
    e.loss.smoothness = num("smoothness");
    e.loss.total = num("total");
    e.grad_norm = num("grad_norm");
    e.wall_time = num("wall_time");
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::kMalformedData, std::string("malformed training log record: ") + ex.what());
  }
}

std::vector<TrainStepLog> read_train_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kMissingFile, "cannot read log " + path);
  std::vector<TrainStepLog> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_log_line(line));
  }
  return out;
}

// ---- training ----------------------------------------------------------------------

namespace {

struct Item {
  const SequenceSample* source;
  SequenceSample window;
};

std::vector<Item> make_windows(const std::vector<SequenceSample>& data, int unroll) {
  std::vector<Item> items;
  for (const auto& s : data) {
    const int n = static_cast<int>(s.length());
    if (n <= unroll) {
      items.push_back({&s, s});
      continue;
    }
    for (int start = 0; start + unroll <= n; start += unroll) {
      SequenceSample w;
      w.sequence_id = fmt::format("{}@{}", s.sequence_id, start);
      w.seed = s.seed;
      w.frames.assign(s.frames.begin() + start, s.frames.begin() + start + unroll);
      w.depths.assign(s.depths.begin() + start, s.depths.begin() + start + unroll);
      if (s.motion_gt) w.motion_gt.emplace(s.motion_gt->begin() + start, s.motion_gt->begin() + start + unroll);
      items.push_back({&s, std::move(w)});
    }
  }
  for (const auto& it : items) {
    if (it.window.length() != items.front().window.length()) {
      throw Error(Errc::kShapeMismatch, fmt::format("training windows differ in length ({} has {}, {} has {})",
                                                    it.window.sequence_id, it.window.length(),
                                                    items.front().window.sequence_id,
                                                    items.front().window.length()));
    }
  }
  return items;
}

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const ModelParams& params) : cfg_(cfg), t_(0) {
    for (const auto& p : params) {
      m_.push_back(Matrix<float>::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(Matrix<float>::Zero(p.value.rows(), p.value.cols()));
    }
  }

  void apply(ModelParams& params, const nn::Gradients<float>& g) {
    ++t_;
    const auto eta = static_cast<float>(cfg_.eta);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      if (!p.trainable || !g.defined[i]) continue;
      switch (cfg_.optimizer) {
        case OptimizerKind::kPlainGradient:
          p.value -= eta * g.grads[i];
          break;
        case OptimizerKind::kMomentum:
          m_[i] = static_cast<float>(cfg_.momentum) * m_[i] + g.grads[i];
          p.value -= eta * m_[i];
          break;
        case OptimizerKind::kAdaptive: {
          const auto b1 = static_cast<float>(cfg_.beta1), b2 = static_cast<float>(cfg_.beta2);
          m_[i] = b1 * m_[i] + (1 - b1) * g.grads[i];
          v_[i] = b2 * v_[i] + (1 - b2) * g.grads[i].cwiseProduct(g.grads[i]);
          const auto c1 = static_cast<float>(1.0 - std::pow(cfg_.beta1, t_));
          const auto c2 = static_cast<float>(1.0 - std::pow(cfg_.beta2, t_));
          const auto eps = static_cast<float>(cfg_.epsilon);
          p.value.array() -= eta * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
          break;
        }
      }
    }
  }

 private:
  TrainConfig cfg_;
  int t_;
  std::vector<Matrix<float>> m_, v_;
};

std::uint64_t item_loss_seed(std::uint64_t seed, int step, std::size_t item) {
  return fnv1a64(fmt::format("ordinal/{}/{}/{}", seed, step, item));
}

}  // namespace

TrainResult train(const std::vector<SequenceSample>& data, const ModelConfig& model, const TrainConfig& cfg,
                  const TrainOptions& opts) {
  if (data.empty()) throw Error(Errc::kInvalidArgument, "train: empty dataset");
  if (cfg.unroll < 1) throw Error(Errc::kConfig, "train: unroll must be >= 1");
  if (!(cfg.eta >= 0)) throw Error(Errc::kConfig, "train: eta must be >= 0");
  validate(model);
  const auto items = make_windows(data, cfg.unroll);

  TrainResult res;
  res.params = opts.initial ? *opts.initial : init_params<float>(model);
  Optimizer opt(cfg, res.params);

  std::ofstream log_file;
  std::string ckpt_path;
  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    log_file.open(fs::path(opts.out_dir) / "train_log.jsonl", std::ios::trunc);
    if (!log_file) throw Error(Errc::kIo, "cannot write training log in " + opts.out_dir);
    ckpt_path = (fs::path(opts.out_dir) / "checkpoint.tdck").string();
    save_checkpoint(res.params, model, ckpt_path);
  }

  const auto start = std::chrono::steady_clock::now();
  const int batch = std::max(1, cfg.batch_size);
  const int workers = std::max(1, cfg.workers);
  bool stop = false;
  for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    std::vector<std::size_t> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle(cfg.seed, fmt::format("epoch/{}", epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<int>(i) - 1))]);
    }

    for (std::size_t b0 = 0; b0 < order.size() && !stop; b0 += batch) {
      const std::size_t nb = std::min<std::size_t>(batch, order.size() - b0);
      std::vector<nn::Gradients<float>> g(nb, nn::Gradients<float>::zeros_like(res.params));
      std::vector<LossBreakdown> l(nb);
      auto run = [&](std::size_t k) {
        const std::size_t idx = order[b0 + k];
        l[k] = forward_sequence<float>(items[idx].window, res.params, model, cfg.loss,
                                       item_loss_seed(cfg.seed, res.steps, idx), std::nullopt, &g[k])
                   .loss;
      };
      if (workers == 1 || nb == 1) {
        for (std::size_t k = 0; k < nb; ++k) run(k);
      } else {
        // Items are independent; results land in fixed slots and are reduced
        // in item order below, so the sum does not depend on scheduling.
        for (std::size_t k0 = 0; k0 < nb; k0 += workers) {
          std::vector<std::thread> pool;
          for (std::size_t k = k0; k < std::min<std::size_t>(nb, k0 + workers); ++k) pool.emplace_back(run, k);
          for (auto& th : pool) th.join();
        }
      }
      nn::Gradients<float> total = std::move(g[0]);
      LossBreakdown loss = l[0];
      for (std::size_t k = 1; k < nb; ++k) {
        total.add(g[k]);
        loss += l[k];
      }
      total.scale(1.0f / static_cast<float>(nb));
      loss = loss.scaled(1.0 / static_cast<double>(nb));

      TrainStepLog entry;
      entry.step = res.steps;
      entry.epoch = epoch;
      entry.loss = loss;
      entry.grad_norm = std::sqrt(total.squared_norm());
      entry.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      res.log.push_back(entry);
      if (log_file.is_open()) log_file << to_json_line(entry) << '\n' << std::flush;
      if (opts.on_step) opts.on_step(entry);
      if (!std::isfinite(loss.total) || !std::isfinite(entry.grad_norm)) {
        throw Error(Errc::kNonFiniteLoss, fmt::format("non-finite loss at step {} (epoch {}): total {}, grad norm {}",
                                                      entry.step, epoch, loss.total, entry.grad_norm));
      }
      if (cfg.grad_clip > 0 && entry.grad_norm > cfg.grad_clip) {
        total.scale(static_cast<float>(cfg.grad_clip / entry.grad_norm));
      }
      opt.apply(res.params, total);
      ++res.steps;
      if (cfg.max_steps > 0 && res.steps >= cfg.max_steps) stop = true;
    }
    const bool last = stop || epoch + 1 == cfg.epochs;
    if (!ckpt_path.empty() && (last || (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0))) {
      save_checkpoint(res.params, model, ckpt_path);
    }
  }
  return res;
}

// ---- gradcheck -----------------------------------------------------------------------

double relative_error(double analytic, double numeric, double abs_floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), abs_floor});
  return std::abs(analytic - numeric) / denom;
}

ModelConfig gradcheck_model(const ModelConfig& base, const GradcheckOptions& opts) {
  ModelConfig cfg = base;
  cfg.backbone.width = opts.width;
  cfg.backbone.height = opts.height;
  auto& ch = cfg.backbone.channels;
  while (ch.size() > 1) {
    const int f = 1 << ch.size();
    if (opts.width % f == 0 && opts.height % f == 0) break;
    ch.pop_back();
  }
  return cfg;
}

namespace {

void finalize(GradcheckReport& r) {
  for (const auto& e : r.entries) {
    r.max_rel_error = std::max(r.max_rel_error, e.rel_error);
    r.worst[e.group] = std::max(r.worst[e.group], e.rel_error);
  }
}

}  // namespace

GradcheckReport gradcheck(const ModelConfig& base, const LossConfig& loss, const GradcheckOptions& opts) {
  const ModelConfig cfg = gradcheck_model(base, opts);
  validate(cfg);
  nn::ParameterSet<double> params = init_params<float>(cfg).cast<double>();

  GenConfig gen;
  gen.width = opts.width;
  gen.height = opts.height;
  gen.frames = opts.frames;
  gen.seed = opts.seed;
  const SceneSpec scene = make_scene(Suite::kSpriteEntering, 0, gen);
  const SequenceSample sample = apply_sensor(render_sequence(scene), SensorModel{}, scene.seed);
  const std::uint64_t loss_seed = splitmix64(opts.seed);

  auto g = nn::Gradients<double>::zeros_like(params);
  forward_sequence<double>(sample, params, cfg, loss, loss_seed, std::nullopt, &g);
  auto eval = [&]() { return forward_sequence<double>(sample, params, cfg, loss, loss_seed).loss.total; };

  GradcheckReport report;
  report.tolerance = opts.tolerance;
  Rng rng(opts.seed, "gradcheck.sample");
  for (auto group : {nn::ParamGroup::kRefine, nn::ParamGroup::kDepth, nn::ParamGroup::kRecurrent}) {
    std::vector<std::pair<std::size_t, long>> pool;  // (tensor, first flat index)
    long total = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].group == group && params[i].trainable) {
        pool.emplace_back(i, total);
        total += params[i].numel();
      }
    }
    if (total == 0) continue;
    for (int k = 0; k < opts.per_group; ++k) {
      const long flat = static_cast<long>(rng.uniform() * static_cast<double>(total)) % total;
      std::size_t ti = pool.front().first;
      long offset = flat;
      for (const auto& [i, first] : pool) {
        if (flat >= first && flat < first + params[i].numel()) {
          ti = i;
          offset = flat - first;
        }
      }
      auto& p = params[ti];
      double& w = p.value.data()[offset];
      const double w0 = w;
      const double h = opts.step * std::max(1.0, std::abs(w0));
      w = w0 + h;
      const double up = eval();
      w = w0 - h;
      const double down = eval();
      w = w0;
      GradcheckEntry e;
      e.name = p.name;
      e.index = offset;
      e.group = group;
      e.analytic = g.grads[ti].data()[offset];
      e.numeric = (up - down) / (2 * h);
      e.rel_error = relative_error(e.analytic, e.numeric, opts.abs_floor);
      report.entries.push_back(e);
    }
  }
  finalize(report);
  return report;
}

GradcheckReport gradcheck_linear_toy(std::uint64_t seed, double tolerance) {
  constexpr int kIn = 6, kOut = 3;
  nn::ParameterSet<double> params;
  Rng rng(seed, "gradcheck.toy");
  auto& w = params.add("toy.w", {kOut, kIn}, nn::ParamGroup::kDepth);
  auto& b = params.add("toy.b", {kOut}, nn::ParamGroup::kDepth);
  for (long i = 0; i < w.value.size(); ++i) w.value.data()[i] = rng.normal();
  for (long i = 0; i < b.value.size(); ++i) b.value.data()[i] = rng.normal();
  Matrix<double> x(kIn, 1), y(kOut, 1);
  for (long i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  for (long i = 0; i < y.size(); ++i) y.data()[i] = rng.normal();

  // L = 0.5 |W x + b - y|^2
  auto loss = [&](nn::Gradients<double>* g) {
    nn::Tape<double> tape(g != nullptr);
    const Var out = nn::dense(tape, tape.param(params, "toy.w"), tape.constant(x, Shape{kIn, 1, 1}),
                              tape.param(params, "toy.b"));
    const Matrix<double> r = tape.value(out) - y;
    if (g) {
      tape.accumulate(out, r);
      tape.backward();
      tape.collect(params, *g);
    }
    return 0.5 * r.squaredNorm();
  };
  auto g = nn::Gradients<double>::zeros_like(params);
  loss(&g);

  GradcheckReport report;
  report.tolerance = tolerance;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (long k = 0; k < params[i].numel(); ++k) {
      double& v = params[i].value.data()[k];
      const double v0 = v;
      const double h = 1e-3;
      v = v0 + h;
      const double up = loss(nullptr);
      v = v0 - h;
      const double down = loss(nullptr);
      v = v0;
      GradcheckEntry e;
      e.name = params[i].name;
      e.index = k;
      e.group = params[i].group;
      e.analytic = g.grads[i].data()[k];
      e.numeric = (up - down) / (2 * h);
      e.rel_error = relative_error(e.analytic, e.numeric, 1e-12);
      report.entries.push_back(e);
    }
  }
  finalize(report);
  return report;
}

// ---- evaluation ----------------------------------------------------------------------

double depth_flicker(const std::vector<DepthMap>& predictions, const SequenceSample& sample) {
  std::vector<Grid<double>> z;
  for (const auto& p : predictions) z.push_back(p.depth);
  return masked_flicker(z, static_mask(sample));
}

std::vector<Image8> enhanced_stream(const SequenceOutput& out, const SequenceSample& sample,
                                    const ModelConfig& model) {
  std::vector<Image8> frames;
  for (std::size_t t = 0; t < sample.frames.size(); ++t) {
    frames.push_back(model.refine.enabled ? quantize8(out.refined[t]) : to_8bit_linear(sample.frames[t]));
  }
  return frames;
}

EvalOutput evaluate(const ModelParams& params, const ModelConfig& model, const std::vector<SequenceSample>& data,
                    const EvalConfig& cfg, bool oracle) {
  if (data.empty()) throw Error(Errc::kInvalidArgument, "evaluate: empty dataset");
  EvalOutput out;
  DepthMetricsAccumulator acc(cfg);
  double flicker_sum = 0.0, rep_sum = 0.0;
  int rep_n = 0;
  for (const auto& s : data) {
    SequenceOutput so = forward_sequence<float>(s, params, model, LossConfig{}, s.seed);
    if (oracle) so.predictions = s.depths;
    for (std::size_t t = 0; t < s.length(); ++t) acc.add(so.predictions[t], s.depths[t]);
    if (s.length() >= 2) {
      out.sequence_flicker.push_back(depth_flicker(so.predictions, s));
      flicker_sum += out.sequence_flicker.back();
      if (s.motion_gt) {
        rep_sum += repeatability(enhanced_stream(so, s, model), s.motion_gt, cfg).value;
        ++rep_n;
      }
    }
    out.sequences.push_back(std::move(so));
  }
  const DepthScores d = acc.result();
  out.report.absrel = d.absrel;
  out.report.rmse = d.rmse;
  out.report.a1 = d.accuracy.size() > 0 ? d.accuracy[0] : 0.0;
  out.report.a2 = d.accuracy.size() > 1 ? d.accuracy[1] : 0.0;
  out.report.a3 = d.accuracy.size() > 2 ? d.accuracy[2] : 0.0;
  out.report.n_pixels_evaluated = d.n_pixels;
  out.report.flicker = out.sequence_flicker.empty() ? 0.0 : flicker_sum / static_cast<double>(out.sequence_flicker.size());
  out.report.repeatability = rep_n > 0 ? rep_sum / rep_n : 0.0;
  out.report.config_hash = model_config_hash(model);
  return out;
}

}  // namespace thermodepth

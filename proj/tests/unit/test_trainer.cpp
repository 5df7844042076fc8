#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "test_support.hpp"
#include "thermodepth/checkpoint.hpp"
#include "thermodepth/sensorsim.hpp"
#include "thermodepth/trainer.hpp"

using namespace thermodepth;
using namespace thermodepth::testing;

namespace {

GenConfig small_gen(int frames) {
  GenConfig gen;
  gen.width = 40;
  gen.height = 32;
  gen.frames = frames;
  return gen;
}

SequenceSample sequence(Suite suite, int index, int frames) {
  const auto spec = make_scene(suite, index, small_gen(frames));
  return apply_sensor(render_sequence(spec), suite_sensor(suite, SensorModel{}), spec.seed);
}

std::vector<SequenceSample> tiny_dataset(int frames) {
  std::vector<SequenceSample> data;
  for (Suite s : kAllSuites) data.push_back(sequence(s, 0, frames));
  return data;
}

SequenceSample slice(const SequenceSample& s, int begin, int end) {
  SequenceSample out;
  out.sequence_id = s.sequence_id;
  out.seed = s.seed;
  out.frames.assign(s.frames.begin() + begin, s.frames.begin() + end);
  out.depths.assign(s.depths.begin() + begin, s.depths.begin() + end);
  return out;
}

TrainConfig quick_train() {
  TrainConfig cfg;
  cfg.unroll = 2;
  cfg.batch_size = 2;
  cfg.epochs = 2;
  return cfg;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("unrolling carries the state: [A, B] equals [A] then [B]") {
    for (auto rb : {RecurrentKind::kReservoir, RecurrentKind::kConvGru}) {
      const ModelConfig m = small_model(rb);
      const auto params = init_params<double>(m);
      const auto seq = sequence(Suite::kSpriteEntering, 0, 2);
      const auto both = forward_sequence(seq, params, m, LossConfig{}, 1);
      const auto first = forward_sequence(slice(seq, 0, 1), params, m, LossConfig{}, 1);
      const auto second = forward_sequence(slice(seq, 1, 2), params, m, LossConfig{}, 1, first.final_state);
      CHECK(first.predictions[0] == both.predictions[0]);
      CHECK(second.predictions[0] == both.predictions[1]);
    }
  }

  TEST_CASE("a single frame is one feed-forward pass with one recurrent step from zeros") {
    const ModelConfig m = small_model();
    const auto params = init_params<double>(m);
    const auto seq = slice(sequence(Suite::kStatic, 0, 1), 0, 1);
    const auto a = forward_sequence(seq, params, m, LossConfig{}, 1);
    const auto b = forward_sequence(seq, params, m, LossConfig{}, 1,
                                    RecurrentState::zeros_reservoir(m.reservoir.neurons));
    CHECK(a.predictions[0] == b.predictions[0]);
    CHECK(a.final_state.v.size() == m.reservoir.neurons);
    CHECK(a.final_state.v.cwiseAbs().maxCoeff() > 0.0);
  }

  TEST_CASE("zero readout makes the reservoir model equal the model without one") {
    const ModelConfig with = small_model(RecurrentKind::kReservoir);
    const ModelConfig without = small_model(RecurrentKind::kNone);
    auto rp = init_params<float>(with);
    rp.at("rb.reservoir.w_out").value.setZero();
    rp.at("rb.readout.b").value.setZero();
    auto np = init_params<float>(without);
    for (auto& p : np) p.value = rp.at(p.name).value;

    const auto seq = sequence(Suite::kTranslating, 1, 3);
    const auto a = forward_sequence(seq, rp, with, LossConfig{}, 1);
    const auto b = forward_sequence(seq, np, without, LossConfig{}, 1);
    for (int t = 0; t < 3; ++t) CHECK(a.predictions[t] == b.predictions[t]);
  }

  TEST_CASE("gradients reach every trainable tensor and no fixed one") {
    for (auto rb : {RecurrentKind::kNone, RecurrentKind::kReservoir, RecurrentKind::kConvGru}) {
      const ModelConfig m = small_model(rb);
      const auto params = init_params<float>(m);
      auto g = nn::Gradients<float>::zeros_like(params);
      forward_sequence(sequence(Suite::kSpriteEntering, 0, 2), params, m, LossConfig{}, 3, std::nullopt, &g);
      for (std::size_t i = 0; i < params.size(); ++i) {
        INFO(to_string(rb), " ", params[i].name);
        CHECK(g.defined[i] == params[i].trainable);
        if (params[i].trainable) CHECK(g.grads[i].cwiseAbs().maxCoeff() > 0.0f);
      }
    }
  }

  TEST_CASE("zero learning rate leaves the parameters bitwise unchanged") {
    const ModelConfig m = small_model();
    TrainConfig cfg = quick_train();
    cfg.eta = 0.0;
    const auto res = train(tiny_dataset(2), m, cfg);
    CHECK(res.steps == 4);
    CHECK(res.params == init_params<float>(m));
  }

  TEST_CASE("plain gradient step is p - eta * g") {
    const ModelConfig m = small_model();
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::kPlainGradient;
    cfg.eta = 1e-2;
    cfg.grad_clip = 0;
    cfg.unroll = 2;
    cfg.batch_size = 1;
    cfg.max_steps = 1;
    cfg.loss.weights.lambda3 = 0;  // remove the seeded pair sampling
    const std::vector<SequenceSample> data{sequence(Suite::kStatic, 0, 2)};
    const auto p0 = init_params<float>(m);
    auto g = nn::Gradients<float>::zeros_like(p0);
    forward_sequence(data[0], p0, m, cfg.loss, 0, std::nullopt, &g);
    const auto p1 = train(data, m, cfg).params;
    for (std::size_t i = 0; i < p0.size(); ++i) {
      const nn::Matrix<float> expect = p0[i].trainable ? nn::Matrix<float>(p0[i].value - 1e-2f * g.grads[i])
                                                       : p0[i].value;
      CHECK(p1[i].value.isApprox(expect, 1e-6f));
    }
  }

  TEST_CASE("first adaptive step moves each entry by about eta") {
    const ModelConfig m = small_model();
    TrainConfig cfg;
    cfg.eta = 1e-3;
    cfg.grad_clip = 0;
    cfg.unroll = 2;
    cfg.batch_size = 1;
    cfg.max_steps = 1;
    cfg.loss.weights.lambda3 = 0;
    const std::vector<SequenceSample> data{sequence(Suite::kStatic, 0, 2)};
    const auto p0 = init_params<float>(m);
    auto g = nn::Gradients<float>::zeros_like(p0);
    forward_sequence(data[0], p0, m, cfg.loss, 0, std::nullopt, &g);
    const auto p1 = train(data, m, cfg).params;
    int checked = 0;
    for (std::size_t i = 0; i < p0.size(); ++i) {
      if (!p0[i].trainable) continue;
      for (long k = 0; k < p0[i].value.size(); ++k) {
        const float gk = g.grads[i].data()[k];
        if (std::abs(gk) < 1e-4f) continue;
        const float step = p0[i].value.data()[k] - p1[i].value.data()[k];
        CHECK(step == doctest::Approx(std::copysign(1e-3, gk)).epsilon(1e-2));
        ++checked;
      }
    }
    CHECK(checked > 100);
  }

  TEST_CASE("same seed gives identical logs and checkpoints") {
    const ModelConfig m = small_model();
    const auto data = tiny_dataset(4);
    TempDir a("train-a"), b("train-b");
    TrainOptions oa, ob;
    oa.out_dir = a.str();
    ob.out_dir = b.str();
    const auto ra = train(data, m, quick_train(), oa);
    const auto rb = train(data, m, quick_train(), ob);
    REQUIRE(ra.log.size() == rb.log.size());
    for (std::size_t i = 0; i < ra.log.size(); ++i) CHECK(ra.log[i].same_numbers(rb.log[i]));
    CHECK(ra.params == rb.params);
    CHECK(checkpoint_file_hash(a.str("checkpoint.tdck")) == checkpoint_file_hash(b.str("checkpoint.tdck")));

    const auto disk = read_train_log(a.str("train_log.jsonl"));
    REQUIRE(disk.size() == ra.log.size());
    for (std::size_t i = 0; i < disk.size(); ++i) CHECK(disk[i].same_numbers(ra.log[i]));
    CHECK(load_checkpoint(a.str("checkpoint.tdck")).params == ra.params);

    TrainConfig other = quick_train();
    other.seed = 2;
    CHECK_FALSE(train(data, m, other).log.back().same_numbers(ra.log.back()));
  }

  TEST_CASE("parallel workers reproduce the sequential run") {
    const ModelConfig m = small_model();
    TrainConfig par = quick_train();
    par.workers = 2;
    const auto data = tiny_dataset(2);
    CHECK(train(data, m, par).params == train(data, m, quick_train()).params);
  }

  TEST_CASE("overfitting one batch lowers the loss over every 50-step window") {
    const ModelConfig m = small_model();
    TrainConfig cfg;
    cfg.unroll = 2;
    cfg.batch_size = 4;
    cfg.epochs = 200;
    const auto res = train(tiny_dataset(2), m, cfg);
    REQUIRE(res.log.size() == 200);
    for (std::size_t i = 0; i + 50 < res.log.size(); ++i) {
      INFO("step ", i, ": ", res.log[i].loss.total, " -> ", res.log[i + 50].loss.total);
      CHECK(res.log[i + 50].loss.total < res.log[i].loss.total);
    }
    CHECK(res.log.back().loss.total < 0.5 * res.log.front().loss.total);
  }

  TEST_CASE("a trained model settles on a repeated static frame") {
    const ModelConfig m = small_model();
    TrainConfig cfg;
    cfg.unroll = 8;
    cfg.batch_size = 4;
    cfg.epochs = 150;
    std::vector<SequenceSample> data;
    for (int i = 0; i < 4; ++i) data.push_back(sequence(Suite::kStatic, i, 8));
    const auto params = train(data, m, cfg).params;

    SequenceSample repeated = slice(sequence(Suite::kStatic, 0, 1), 0, 1);
    for (int t = 1; t < 8; ++t) {
      repeated.frames.push_back(repeated.frames[0]);
      repeated.depths.push_back(repeated.depths[0]);
    }
    LossConfig loss;
    loss.weights.lambda3 = 0;  // the pair sampler is reseeded each frame
    const auto out = forward_sequence(repeated, params, m, loss, 1);
    // Two-frame transient from the zero state, then a settling trend.
    for (int t = 4; t < 8; ++t) {
      INFO("frame ", t, ": ", out.frame_losses[t - 1].total, " -> ", out.frame_losses[t].total);
      CHECK(out.frame_losses[t].total <= out.frame_losses[t - 1].total);
    }
    CHECK(out.frame_losses[7].total <= out.frame_losses[0].total);
    auto change = [&](int t) {
      double s = 0;
      for (std::size_t i = 0; i < out.predictions[t].depth.size(); ++i) {
        s += std::abs(out.predictions[t + 1].depth.data[i] - out.predictions[t].depth.data[i]);
      }
      return s;
    };
    CHECK(change(6) < change(0));
  }

  TEST_CASE("non-finite loss aborts naming the step") {
    const ModelConfig m = small_model();
    TrainOptions opts;
    opts.initial = init_params<float>(m);
    opts.initial->at("dec.head.b").value.setConstant(std::numeric_limits<float>::quiet_NaN());
    const auto msg = message_of([&] { train(tiny_dataset(2), m, quick_train(), opts); });
    CHECK(msg.find("step 0") != std::string::npos);
    CHECK(error_of([&] { train(tiny_dataset(2), m, quick_train(), opts); }) == Errc::kNonFiniteLoss);
  }

  TEST_CASE("training input errors") {
    const ModelConfig m = small_model();
    CHECK(error_of([&] { train({}, m, quick_train()); }) == Errc::kInvalidArgument);
    TrainConfig zero = quick_train();
    zero.unroll = 0;
    CHECK(error_of([&] { train(tiny_dataset(2), m, zero); }) == Errc::kConfig);
    // Lengths 3 and 5 with T = 8 leave windows of different length.
    const std::vector<SequenceSample> uneven{sequence(Suite::kStatic, 0, 3), sequence(Suite::kStatic, 1, 5)};
    TrainConfig t8 = quick_train();
    t8.unroll = 8;
    CHECK(error_of([&] { train(uneven, m, t8); }) == Errc::kShapeMismatch);
    // With T = 1 both cut into equal single-frame windows.
    TrainConfig t1 = quick_train();
    t1.unroll = 1;
    t1.max_steps = 1;
    CHECK_NOTHROW(train(uneven, m, t1));
  }

  TEST_CASE("log records round-trip") {
    TrainStepLog e;
    e.step = 12;
    e.epoch = 3;
    e.loss = {0.25, 0.125, 0.5, 0.0625, 0.4};
    e.grad_norm = 1.5;
    e.wall_time = 2.25;
    const auto back = parse_log_line(to_json_line(e));
    CHECK(back.same_numbers(e));
    CHECK(back.wall_time == 2.25);
    e.loss.total = std::numeric_limits<double>::infinity();
    CHECK(std::isnan(parse_log_line(to_json_line(e)).loss.total));
    CHECK(error_of([] { parse_log_line("step 1"); }) == Errc::kMalformedData);
    CHECK(error_of([] { parse_log_line("{\"step\": 1}"); }) == Errc::kMalformedData);
    CHECK(error_of([] { read_train_log("/nonexistent/log.jsonl"); }) == Errc::kMissingFile);
  }

  TEST_CASE("gradcheck on a linear toy is exact to rounding") {
    const auto r = gradcheck_linear_toy(1, 1e-8);
    CHECK(r.passed());
    CHECK(r.max_rel_error < 1e-8);
  }

  TEST_CASE("full-pipeline gradcheck") {
    for (auto rb : {RecurrentKind::kReservoir, RecurrentKind::kConvGru}) {
      ModelConfig m;
      m.rb = rb;
      const auto r = gradcheck(m, LossConfig{}, GradcheckOptions{});
      INFO(to_string(rb), " max rel error ", r.max_rel_error);
      CHECK(r.passed());
      CHECK(r.max_rel_error < 1e-4);
      CHECK(r.entries.size() >= 50);
      CHECK(r.worst.count(nn::ParamGroup::kRefine) == 1);
      CHECK(r.worst.count(nn::ParamGroup::kDepth) == 1);
      CHECK(r.worst.count(nn::ParamGroup::kRecurrent) == 1);
    }
    const auto gm = gradcheck_model(ModelConfig{}, GradcheckOptions{});
    CHECK(gm.backbone.width == 40);
    CHECK(gm.backbone.height == 32);
    CHECK(gm.backbone.levels() == 3);
  }

  TEST_CASE("depth flicker is zero for constant predictions") {
    const auto seq = sequence(Suite::kStatic, 0, 3);
    CHECK(depth_flicker(seq.depths, seq) == 0.0);
    auto moved = seq.depths;
    for (double& v : moved[1].depth.data) v += 0.5;
    CHECK(depth_flicker(moved, seq) > 0.0);
  }
}

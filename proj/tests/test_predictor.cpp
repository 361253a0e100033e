#include <doctest.h>

#include "error.hpp"
#include "predictor.hpp"
#include "tracegen.hpp"

#include <cmath>
#include <fstream>
#include <random>

using namespace canids;

namespace {

PredictorHyper small(std::size_t L = 4, std::size_t e = 6, std::size_t h = 8) {
  PredictorHyper p;
  p.subsequence_length = L;
  p.embed_dim = e;
  p.hidden_dim = h;
  p.batch_size = 16;
  p.learning_rate = 5e-3;
  p.max_epochs = 20;
  p.patience = 5;
  return p;
}

Eigen::MatrixXd random_window(std::size_t L, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Eigen::MatrixXd w(L, k);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    w.data()[i] = u(rng);
  }
  return w;
}

MessageSchema schema(std::size_t k) {
  MessageSchema s;
  s.message_id = 0x10;
  for (std::size_t i = 0; i < k; ++i) {
    s.signal_names.push_back("v" + std::to_string(i));
  }
  return s;
}

Trace sine_trace(std::size_t n, double period_s = 1.0) {
  SignalGenSpec g;
  g.amplitude = 1.0;
  g.period_s = period_s;
  return generate_normal(schema(1), {g}, 0.015 * static_cast<double>(n), 1);
}

std::pair<Trace, Trace> scaled_split(const Trace &t) {
  auto [train, val] = split_train_val(t, 0.8);
  auto [train_s, p] = fit_and_scale(train);
  return {train_s, apply_scaling(val, p)};
}

// Hand-summed layer shapes for the documented architecture.
std::size_t hand_count(std::size_t k, std::size_t e, std::size_t h) {
  const std::size_t embed = e * k + e;
  const std::size_t enc1 = 4 * h * e + 4 * h * h + 4 * h;
  const std::size_t lstm_hh = 4 * h * h + 4 * h * h + 4 * h;
  const std::size_t attn = h * h + h;
  const std::size_t combine = h * 2 * h + h;
  const std::size_t out = k * h + k;
  return embed + enc1 + 3 * lstm_hh + attn + combine + out;
}

} // namespace

TEST_CASE("build_model: deterministic and sized by the closed form") {
  PredictorHyper d;
  const PredictorModel a = build_model(3, d, 7);
  const PredictorModel b = build_model(3, d, 7);
  CHECK(a == b);
  CHECK(!(a == build_model(3, d, 8)));
  // 512 + 49408 + 3 * 33024 + 4160 + 8256 + 195
  CHECK(hand_count(3, 128, 64) == 161603);
  CHECK(a.parameter_count() == 161603);
  CHECK(expected_parameter_count(3, 128, 64) == 161603);
  for (std::size_t k : {1u, 2u, 5u}) {
    const PredictorModel m = build_model(k, small(), 1);
    CHECK(m.parameter_count() == hand_count(k, 6, 8));
  }
}

TEST_CASE("k = 1 model predicts") {
  const PredictorModel m = build_model(1, small(), 3);
  const auto p = predict_next(m, random_window(4, 1, 2));
  CHECK(p.size() == 1);
  CHECK(std::isfinite(p(0)));
}

TEST_CASE("attention: singleton and identical states") {
  const PredictorModel m = build_model(2, small(), 5);
  std::vector<nn::Vector> states = {nn::Vector::Random(8)};
  const auto one = self_attention(states, 0, m);
  REQUIRE(one.weights.size() == 1);
  CHECK(one.weights(0) == 1.0);
  CHECK(one.applied == states[0]);
  states.push_back(states[0]);
  const auto two = self_attention(states, 1, m);
  CHECK(two.weights(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(two.weights(1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("property: attention weights form a probability vector") {
  const PredictorModel m = build_model(3, small(10, 6, 8), 11);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ForwardResult r = forward(m, random_window(10, 3, seed));
    REQUIRE(r.attention.size() == 10);
    for (std::size_t s = 0; s < 10; ++s) {
      CHECK(r.attention[s].size() == static_cast<Eigen::Index>(s + 1));
      CHECK(std::abs(r.attention[s].sum() - 1.0) < 1e-12);
      CHECK((r.attention[s].array() >= 0).all());
    }
  }
}

TEST_CASE("zero weights predict the output bias") {
  PredictorModel m = build_model(2, small(), 1);
  m.weights.set_zero();
  m.weights.output.bias << 0.25, -0.5;
  const ForwardResult r = forward(m, random_window(4, 2, 9));
  for (Eigen::Index s = 0; s < r.predictions.rows(); ++s) {
    CHECK(r.predictions(s, 0) == 0.25);
    CHECK(r.predictions(s, 1) == -0.5);
  }
}

TEST_CASE("property: causality") {
  const PredictorModel m = build_model(3, small(8, 6, 8), 4);
  const Eigen::MatrixXd w = random_window(8, 3, 1);
  const ForwardResult full = forward(m, w);
  for (Eigen::Index s = 1; s <= 8; ++s) {
    // the same weights run over a window truncated to s rows
    PredictorModel shorter = m;
    shorter.hyper.subsequence_length = static_cast<std::size_t>(s);
    const ForwardResult part = forward(shorter, w.topRows(s));
    CHECK(part.predictions == full.predictions.topRows(s));
    // rows after s do not matter either
    Eigen::MatrixXd changed = w;
    changed.bottomRows(8 - s).setConstant(9.0);
    CHECK(forward(m, changed).predictions.topRows(s) == full.predictions.topRows(s));
  }
}

TEST_CASE("predict_next equals forward().last and is repeatable") {
  const PredictorModel m = build_model(2, small(), 2);
  const Eigen::MatrixXd w = random_window(4, 2, 3);
  CHECK(predict_next(m, w) == forward(m, w).last);
  CHECK(predict_next(m, w) == predict_next(m, w));
  CHECK(forward(m, w).last == forward(m, w).predictions.row(3).transpose());
}

TEST_CASE("batched predictions match single windows") {
  const PredictorModel m = build_model(2, small(5, 6, 8), 6);
  const Eigen::MatrixXd signals = random_window(2, 30, 4);
  const std::vector<std::size_t> starts = {0, 7, 13, 24};
  const WindowBatch b = make_batch(signals, 5, starts);
  const nn::Tensor2 p = predict_batch(m, b);
  for (std::size_t j = 0; j < starts.size(); ++j) {
    const Eigen::MatrixXd w = signals.middleCols(starts[j], 5).transpose();
    const nn::Vector single = predict_next(m, w);
    CHECK((p.col(j) - single).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(b.targets.col(j) == signals.col(starts[j] + 5));
  }
}

TEST_CASE("full model gradient check, k = 2, L = 4") {
  for (bool all_steps : {false, true}) {
    PredictorHyper h = small(4, 6, 8);
    h.all_steps_loss = all_steps;
    PredictorModel m = build_model(2, h, 21);
    const Eigen::MatrixXd signals = random_window(2, 12, 5);
    const std::vector<std::size_t> starts = {0, 3, 7};
    const WindowBatch b = make_batch(signals, 4, starts);
    PredictorWeights grad = m.weights;
    grad.set_zero();
    const double loss = loss_and_gradient(m, b, &grad);
    {
      const nn::LeastSquaresTerms t = loss_terms(m, b);
      CHECK(t.scale * (t.predictions - t.targets).squaredNorm() ==
            doctest::Approx(loss).epsilon(1e-12));
    }
    auto views = m.weights.views();
    auto gviews = grad.views();
    std::vector<std::span<const double>> analytic;
    for (auto &g : gviews) {
      analytic.emplace_back(g.values.data(), g.values.size());
    }
    const auto report =
        nn::grad_check_squares([&] { return loss_terms(m, b); }, views, analytic, 1e-4);
    CHECK(report.blocks.size() == 20);
    for (const auto &blk : report.blocks) {
      INFO(blk.name << " all_steps=" << all_steps);
      CHECK(blk.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("training beats persistence on a noiseless sine") {
  const Trace t = sine_trace(2000);
  auto [train_s, val_s] = scaled_split(t);
  PredictorHyper h = small(16, 16, 16);
  h.batch_size = 32;
  h.learning_rate = 2e-3;
  h.max_epochs = 30;
  h.patience = 8;
  const TrainResult r = train(build_model(1, h, 3), train_s, val_s, h);
  const double val = evaluate_loss(r.model, val_s);
  const double persist = persistence_mse(val_s, 16);
  INFO("val " << val << " persistence " << persist);
  CHECK(val < 0.25 * persist);

  // first five epochs of the same fixed configuration do not increase the training loss
  REQUIRE(r.history.epochs.size() >= 5);
  for (std::size_t e = 1; e < 5; ++e) {
    CHECK(r.history.epochs[e].train_loss <= r.history.epochs[e - 1].train_loss);
  }
}

TEST_CASE("training is deterministic") {
  const Trace t = sine_trace(400);
  auto [train_s, val_s] = scaled_split(t);
  PredictorHyper h = small(8, 6, 8);
  h.max_epochs = 3;
  h.patience = 2;
  const TrainResult a = train(build_model(1, h, 9), train_s, val_s, h);
  const TrainResult b = train(build_model(1, h, 9), train_s, val_s, h);
  CHECK(a.model == b.model);
  CHECK(serialize_model(a.model) == serialize_model(b.model));
}

TEST_CASE("patience stop restores the best epoch") {
  // validation is independent noise, so it cannot keep improving
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  Trace train_t = sine_trace(300, 0.4);
  Trace val_t = sine_trace(200, 0.4);
  for (auto &r : val_t.records) {
    r.signals[0] = u(rng);
  }
  auto [train_s, p] = fit_and_scale(train_t);
  const Trace val_s = apply_scaling(val_t, p);
  PredictorHyper h = small(8, 6, 8);
  h.learning_rate = 2e-2;
  h.max_epochs = 60;
  h.patience = 10;
  const TrainResult r = train(build_model(1, h, 4), train_s, val_s, h);
  REQUIRE(r.history.stop_reason == StopReason::Patience);
  const auto &ep = r.history.epochs;
  CHECK(r.history.best_epoch + 10 == ep.size());
  double best = ep[r.history.best_epoch - 1].val_loss;
  for (std::size_t e = r.history.best_epoch; e < ep.size(); ++e) {
    CHECK(ep[e].val_loss >= best);
  }
  for (std::size_t e = 0; e + 1 < r.history.best_epoch; ++e) {
    CHECK(ep[e].val_loss > best);
  }
  CHECK(evaluate_loss(r.model, val_s) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("model file round trip and validation") {
  PredictorModel m = build_model(3, small(), 12);
  ScalingParams sp;
  sp.names = {"a", "b", "c"};
  sp.min = {0, -1, 2};
  sp.max = {1, 1, 5};
  m.scaling = sp;
  const std::string path = std::string(CANIDS_TEST_TMP) + "/model_rt.bin";
  save_model(m, path, "canids test\nseed: 12");
  std::string prov;
  const PredictorModel back = load_model(path, 3, &prov);
  CHECK(back == m);
  CHECK(prov.find("seed: 12") != std::string::npos);

  try {
    load_model(path, 2);
    FAIL("k mismatch accepted");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::Shape);
  }

  std::string bytes = serialize_model(m);
  bytes[0] = 'X';
  const std::string bad = std::string(CANIDS_TEST_TMP) + "/model_bad.bin";
  std::ofstream(bad, std::ios::binary) << bytes;
  try {
    load_model(bad);
    FAIL("bad magic accepted");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::Format);
  }

  std::ofstream(bad, std::ios::binary) << serialize_model(m).substr(0, 200);
  CHECK_THROWS_AS(load_model(bad), Error);
}

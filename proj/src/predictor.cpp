#include "predictor.hpp"

#include "binary_io.hpp"
#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace canids {

using nn::Tensor2;
using nn::Vector;

namespace {

constexpr std::string_view kModelMagic = "CANIDSPM";

struct AttnCache {
  Tensor2 query;
  Eigen::MatrixXd alpha; // (step + 1) x B
  Tensor2 concat;        // [attended ; current] 2H x B
  Tensor2 context;
};

struct ForwardCache {
  std::vector<nn::LstmCache> enc1, enc2, dec1, dec2;
  std::vector<Tensor2> embedded;
  std::vector<Tensor2> encoder_states;
  std::vector<Tensor2> decoder_states;
  std::vector<AttnCache> attention;
  std::vector<Tensor2> predictions;
};

void attention_forward(const PredictorWeights &w, std::span<const Tensor2> states,
                       std::size_t step, AttnCache &c) {
  const Tensor2 &current = states[step];
  const Eigen::Index hd = current.rows();
  const Eigen::Index batch = current.cols();
  const auto n = static_cast<Eigen::Index>(step + 1);

  c.query = nn::linear(w.attn, current);
  Eigen::MatrixXd scores(n, batch);
  for (Eigen::Index j = 0; j < n; ++j) {
    scores.row(j) = (c.query.array() * states[static_cast<std::size_t>(j)].array()).colwise().sum();
  }
  require(scores.allFinite(), ErrorCode::Numeric, "attention scores are not finite");
  const Eigen::RowVectorXd peak = scores.colwise().maxCoeff();
  Eigen::ArrayXXd e = (scores.rowwise() - peak).array().exp();
  const Eigen::RowVectorXd total = e.colwise().sum().matrix();
  c.alpha = (e.rowwise() / total.array()).matrix();

  c.concat.setZero(2 * hd, batch);
  auto attended = c.concat.topRows(hd);
  for (Eigen::Index j = 0; j < n; ++j) {
    attended.array() += states[static_cast<std::size_t>(j)].array().rowwise() * c.alpha.row(j).array();
  }
  c.concat.bottomRows(hd) = current;
  c.context = nn::linear(w.combine, c.concat).array().tanh().matrix();
}

void attention_backward(const PredictorWeights &w, std::span<const Tensor2> states,
                        std::size_t step, const AttnCache &c, const Tensor2 &dcontext,
                        PredictorWeights &grad, std::vector<Tensor2> &dstates) {
  const Tensor2 &current = states[step];
  const Eigen::Index hd = current.rows();
  const auto n = static_cast<Eigen::Index>(step + 1);

  const Tensor2 dz = (dcontext.array() * (1.0 - c.context.array().square())).matrix();
  Tensor2 dconcat;
  nn::linear_backward(w.combine, c.concat, dz, grad.combine, &dconcat);
  const Tensor2 dattended = dconcat.topRows(hd);
  dstates[step] += dconcat.bottomRows(hd);

  Eigen::MatrixXd dalpha(n, current.cols());
  for (Eigen::Index j = 0; j < n; ++j) {
    dalpha.row(j) =
        (dattended.array() * states[static_cast<std::size_t>(j)].array()).colwise().sum();
  }
  const Eigen::RowVectorXd mean = (c.alpha.array() * dalpha.array()).colwise().sum().matrix();
  const Eigen::MatrixXd dscores =
      (c.alpha.array() * (dalpha.rowwise() - mean).array()).matrix();

  Tensor2 dquery = Tensor2::Zero(hd, current.cols());
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto &hj = states[static_cast<std::size_t>(j)];
    dquery.array() += hj.array().rowwise() * dscores.row(j).array();
    dstates[static_cast<std::size_t>(j)].array() +=
        dattended.array().rowwise() * c.alpha.row(j).array() +
        c.query.array().rowwise() * dscores.row(j).array();
  }
  Tensor2 dcurrent;
  nn::linear_backward(w.attn, current, dquery, grad.attn, &dcurrent);
  dstates[step] += dcurrent;
}

void forward_impl(const PredictorModel &model, std::span<const Tensor2> steps,
                  ForwardCache &cache) {
  const PredictorWeights &w = model.weights;
  require(!steps.empty(), ErrorCode::Shape, "forward: empty window");
  const Eigen::Index batch = steps.front().cols();
  const auto hd = static_cast<Eigen::Index>(model.hyper.hidden_dim);
  const std::size_t length = steps.size();
  for (const auto &x : steps) {
    require(x.rows() == static_cast<Eigen::Index>(model.k) && x.cols() == batch,
            ErrorCode::Shape,
            "forward: window has " + std::to_string(x.rows()) + " signals, model expects " +
                std::to_string(model.k));
  }

  cache = ForwardCache{};
  cache.enc1.reserve(length);
  cache.enc2.reserve(length);
  cache.dec1.reserve(length);
  cache.dec2.reserve(length);
  cache.embedded.reserve(length);
  cache.encoder_states.reserve(length);
  cache.decoder_states.reserve(length);
  cache.attention.resize(length);
  cache.predictions.reserve(length);

  const Tensor2 zero = Tensor2::Zero(hd, batch);
  Tensor2 h1 = zero, c1 = zero, h2 = zero, c2 = zero;
  Tensor2 g1 = zero, k1 = zero, g2 = zero, k2 = zero;

  for (std::size_t s = 0; s < length; ++s) {
    cache.embedded.push_back(nn::linear(w.embed, steps[s]));
    auto e1 = nn::lstm_cell_step(w.enc1, cache.embedded.back(), h1, c1);
    h1 = e1.h;
    c1 = std::move(e1.c);
    cache.enc1.push_back(std::move(e1.cache));
    auto e2 = nn::lstm_cell_step(w.enc2, h1, h2, c2);
    h2 = e2.h;
    c2 = std::move(e2.c);
    cache.enc2.push_back(std::move(e2.cache));
    cache.encoder_states.push_back(h2);

    attention_forward(w, cache.encoder_states, s, cache.attention[s]);

    auto d1 = nn::lstm_cell_step(w.dec1, cache.attention[s].context, g1, k1);
    g1 = d1.h;
    k1 = std::move(d1.c);
    cache.dec1.push_back(std::move(d1.cache));
    auto d2 = nn::lstm_cell_step(w.dec2, g1, g2, k2);
    g2 = d2.h;
    k2 = std::move(d2.c);
    cache.dec2.push_back(std::move(d2.cache));
    cache.decoder_states.push_back(g2);

    cache.predictions.push_back(nn::linear(w.output, g2));
    require(cache.predictions.back().allFinite(), ErrorCode::Numeric,
            "forward: non-finite prediction");
  }
}

void backward_impl(const PredictorModel &model, std::span<const Tensor2> steps,
                   const ForwardCache &cache, const std::vector<Tensor2> &dpred,
                   PredictorWeights &grad) {
  const PredictorWeights &w = model.weights;
  const std::size_t length = steps.size();
  const Eigen::Index batch = steps.front().cols();
  const auto hd = static_cast<Eigen::Index>(model.hyper.hidden_dim);
  const Tensor2 zero = Tensor2::Zero(hd, batch);

  std::vector<Tensor2> dcontext(length);
  {
    Tensor2 dh2n = zero, dc2n = zero, dh1n = zero, dc1n = zero;
    Tensor2 dx, dout;
    for (std::size_t s = length; s-- > 0;) {
      Tensor2 dh2 = dh2n;
      if (dpred[s].size() > 0) {
        nn::linear_backward(w.output, cache.decoder_states[s], dpred[s], grad.output, &dout);
        dh2 += dout;
      }
      nn::lstm_cell_backward(w.dec2, cache.dec2[s], dh2, dc2n, grad.dec2, dx, dh2n, dc2n);
      const Tensor2 dh1 = dx + dh1n;
      nn::lstm_cell_backward(w.dec1, cache.dec1[s], dh1, dc1n, grad.dec1, dcontext[s], dh1n,
                             dc1n);
    }
  }

  std::vector<Tensor2> dstates(length, zero);
  for (std::size_t s = 0; s < length; ++s) {
    attention_backward(w, cache.encoder_states, s, cache.attention[s], dcontext[s], grad,
                       dstates);
  }

  Tensor2 dh2n = zero, dc2n = zero, dh1n = zero, dc1n = zero;
  Tensor2 dx, demb;
  for (std::size_t s = length; s-- > 0;) {
    const Tensor2 dh2 = dstates[s] + dh2n;
    nn::lstm_cell_backward(w.enc2, cache.enc2[s], dh2, dc2n, grad.enc2, dx, dh2n, dc2n);
    const Tensor2 dh1 = dx + dh1n;
    nn::lstm_cell_backward(w.enc1, cache.enc1[s], dh1, dc1n, grad.enc1, demb, dh1n, dc1n);
    nn::linear_backward(w.embed, steps[s], demb, grad.embed, nullptr);
  }
}

std::vector<Tensor2> window_steps(const Eigen::MatrixXd &window) {
  std::vector<Tensor2> steps;
  steps.reserve(static_cast<std::size_t>(window.rows()));
  for (Eigen::Index s = 0; s < window.rows(); ++s) {
    steps.push_back(window.row(s).transpose());
  }
  return steps;
}

void add_lstm_views(std::vector<nn::ParamView> &out, const std::string &prefix,
                    nn::LstmParams &p) {
  out.push_back({prefix + ".w_input", {p.w_input.data(), static_cast<std::size_t>(p.w_input.size())}});
  out.push_back(
      {prefix + ".w_hidden", {p.w_hidden.data(), static_cast<std::size_t>(p.w_hidden.size())}});
  out.push_back({prefix + ".bias", {p.bias.data(), static_cast<std::size_t>(p.bias.size())}});
}

void add_linear_views(std::vector<nn::ParamView> &out, const std::string &prefix,
                      nn::Linear &l) {
  out.push_back({prefix + ".weight", {l.weight.data(), static_cast<std::size_t>(l.weight.size())}});
  out.push_back({prefix + ".bias", {l.bias.data(), static_cast<std::size_t>(l.bias.size())}});
}

} // namespace

void PredictorHyper::validate() const {
  require(subsequence_length > 0 && embed_dim > 0 && hidden_dim > 0 && batch_size > 0 &&
              max_epochs > 0 && patience > 0,
          ErrorCode::InvalidArgument, "predictor hyperparameters must be positive");
  require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorCode::InvalidArgument,
          "learning rate must be positive");
  require(patience < max_epochs, ErrorCode::InvalidArgument,
          "patience must be smaller than max_epochs");
}

void PredictorWeights::resize(std::size_t k, std::size_t embed_dim, std::size_t hidden_dim) {
  const auto kk = static_cast<Eigen::Index>(k);
  const auto e = static_cast<Eigen::Index>(embed_dim);
  const auto h = static_cast<Eigen::Index>(hidden_dim);
  embed.resize(e, kk);
  enc1.resize(e, h);
  enc2.resize(h, h);
  attn.resize(h, h);
  combine.resize(h, 2 * h);
  dec1.resize(h, h);
  dec2.resize(h, h);
  output.resize(kk, h);
}

void PredictorWeights::set_zero() {
  embed.set_zero();
  enc1.set_zero();
  enc2.set_zero();
  attn.set_zero();
  combine.set_zero();
  dec1.set_zero();
  dec2.set_zero();
  output.set_zero();
}

std::size_t PredictorWeights::parameter_count() const {
  return embed.parameter_count() + enc1.parameter_count() + enc2.parameter_count() +
         attn.parameter_count() + combine.parameter_count() + dec1.parameter_count() +
         dec2.parameter_count() + output.parameter_count();
}

std::vector<nn::ParamView> PredictorWeights::views() {
  std::vector<nn::ParamView> out;
  add_linear_views(out, "embed", embed);
  add_lstm_views(out, "encoder1", enc1);
  add_lstm_views(out, "encoder2", enc2);
  add_linear_views(out, "attention", attn);
  add_linear_views(out, "combine", combine);
  add_lstm_views(out, "decoder1", dec1);
  add_lstm_views(out, "decoder2", dec2);
  add_linear_views(out, "output", output);
  return out;
}

std::vector<std::pair<std::string, const Tensor2 *>> PredictorWeights::matrices() const {
  return {{"embed.weight", &embed.weight},        {"encoder1.w_input", &enc1.w_input},
          {"encoder1.w_hidden", &enc1.w_hidden},  {"encoder2.w_input", &enc2.w_input},
          {"encoder2.w_hidden", &enc2.w_hidden},  {"attention.weight", &attn.weight},
          {"combine.weight", &combine.weight},    {"decoder1.w_input", &dec1.w_input},
          {"decoder1.w_hidden", &dec1.w_hidden},  {"decoder2.w_input", &dec2.w_input},
          {"decoder2.w_hidden", &dec2.w_hidden},  {"output.weight", &output.weight}};
}

std::vector<std::pair<std::string, const Vector *>> PredictorWeights::vectors() const {
  return {{"embed.bias", &embed.bias},     {"encoder1.bias", &enc1.bias},
          {"encoder2.bias", &enc2.bias},   {"attention.bias", &attn.bias},
          {"combine.bias", &combine.bias}, {"decoder1.bias", &dec1.bias},
          {"decoder2.bias", &dec2.bias},   {"output.bias", &output.bias}};
}

std::size_t expected_parameter_count(std::size_t k, std::size_t embed_dim,
                                     std::size_t hidden_dim) {
  const std::size_t h = hidden_dim;
  const auto lstm = [h](std::size_t in) { return 4 * h * in + 4 * h * h + 4 * h; };
  return (embed_dim * k + embed_dim) + lstm(embed_dim) + lstm(h) + (h * h + h) +
         (2 * h * h + h) + lstm(h) + lstm(h) + (k * h + k);
}

PredictorModel build_model(std::size_t k, const PredictorHyper &hyper, std::uint64_t seed) {
  require(k >= 1, ErrorCode::InvalidArgument, "model needs at least one signal");
  hyper.validate();
  PredictorModel m;
  m.k = k;
  m.hyper = hyper;
  m.weights.resize(k, hyper.embed_dim, hyper.hidden_dim);
  std::mt19937_64 rng(seed);
  nn::init_linear(m.weights.embed, rng);
  nn::init_lstm(m.weights.enc1, rng);
  nn::init_lstm(m.weights.enc2, rng);
  nn::init_linear(m.weights.attn, rng);
  nn::init_linear(m.weights.combine, rng);
  nn::init_lstm(m.weights.dec1, rng);
  nn::init_lstm(m.weights.dec2, rng);
  nn::init_linear(m.weights.output, rng);
  return m;
}

AttentionResult self_attention(std::span<const Vector> encoder_states, std::size_t step,
                               const PredictorModel &model) {
  require(!encoder_states.empty(), ErrorCode::InvalidArgument, "attention: no encoder states");
  require(step < encoder_states.size(), ErrorCode::InvalidArgument,
          "attention: step beyond available states");
  std::vector<Tensor2> states;
  states.reserve(step + 1);
  for (std::size_t j = 0; j <= step; ++j) {
    require(encoder_states[j].size() == static_cast<Eigen::Index>(model.hyper.hidden_dim),
            ErrorCode::Shape, "attention: state width does not match the model");
    states.emplace_back(encoder_states[j]);
  }
  AttnCache c;
  attention_forward(model.weights, states, step, c);
  const auto hd = static_cast<Eigen::Index>(model.hyper.hidden_dim);
  return {c.context.col(0), c.alpha.col(0), c.concat.topRows(hd).col(0)};
}

ForwardResult forward(const PredictorModel &model, const Eigen::MatrixXd &window) {
  require(window.rows() == static_cast<Eigen::Index>(model.hyper.subsequence_length) &&
              window.cols() == static_cast<Eigen::Index>(model.k),
          ErrorCode::Shape,
          "forward: window must be " + std::to_string(model.hyper.subsequence_length) + "x" +
              std::to_string(model.k));
  const auto steps = window_steps(window);
  ForwardCache cache;
  forward_impl(model, steps, cache);
  ForwardResult out;
  out.predictions.resize(window.rows(), window.cols());
  for (std::size_t s = 0; s < steps.size(); ++s) {
    out.predictions.row(static_cast<Eigen::Index>(s)) = cache.predictions[s].col(0).transpose();
    out.attention.push_back(cache.attention[s].alpha.col(0));
  }
  out.last = cache.predictions.back().col(0);
  return out;
}

Vector predict_next(const PredictorModel &model, const Eigen::MatrixXd &window) {
  return forward(model, window).last;
}

WindowBatch make_batch(const Eigen::MatrixXd &signals, std::size_t length,
                       std::span<const std::size_t> starts) {
  const auto batch = static_cast<Eigen::Index>(starts.size());
  WindowBatch b;
  b.steps.assign(length, Tensor2(signals.rows(), batch));
  b.targets.resize(signals.rows(), batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    const auto start = static_cast<Eigen::Index>(starts[static_cast<std::size_t>(j)]);
    require(start + static_cast<Eigen::Index>(length) < signals.cols(), ErrorCode::InvalidArgument,
            "make_batch: window runs past the end of the trace");
    for (std::size_t s = 0; s < length; ++s) {
      b.steps[s].col(j) = signals.col(start + static_cast<Eigen::Index>(s));
    }
    b.targets.col(j) = signals.col(start + static_cast<Eigen::Index>(length));
  }
  return b;
}

Tensor2 predict_batch(const PredictorModel &model, const WindowBatch &batch) {
  ForwardCache cache;
  forward_impl(model, batch.steps, cache);
  return cache.predictions.back();
}

double loss_and_gradient(const PredictorModel &model, const WindowBatch &batch,
                         PredictorWeights *grad) {
  ForwardCache cache;
  forward_impl(model, batch.steps, cache);
  const std::size_t length = batch.steps.size();
  const double k = static_cast<double>(model.k);
  const double b = static_cast<double>(batch.size());

  std::vector<Tensor2> dpred(length);
  double loss = 0.0;
  if (model.hyper.all_steps_loss) {
    const double scale = 1.0 / (k * b * static_cast<double>(length));
    for (std::size_t s = 0; s < length; ++s) {
      const Tensor2 &target = s + 1 < length ? batch.steps[s + 1] : batch.targets;
      const Tensor2 diff = cache.predictions[s] - target;
      loss += diff.squaredNorm() * scale;
      dpred[s] = 2.0 * scale * diff;
    }
  } else {
    const Tensor2 diff = cache.predictions.back() - batch.targets;
    const double scale = 1.0 / (k * b);
    loss = diff.squaredNorm() * scale;
    dpred.back() = 2.0 * scale * diff;
  }
  if (grad != nullptr) {
    backward_impl(model, batch.steps, cache, dpred, *grad);
  }
  return loss;
}

nn::LeastSquaresTerms loss_terms(const PredictorModel &model, const WindowBatch &batch) {
  ForwardCache cache;
  forward_impl(model, batch.steps, cache);
  const std::size_t length = batch.steps.size();
  const std::size_t first = model.hyper.all_steps_loss ? 0 : length - 1;
  const Eigen::Index per = static_cast<Eigen::Index>(model.k) * batch.size();
  const Eigen::Index used = per * static_cast<Eigen::Index>(length - first);
  nn::LeastSquaresTerms t{nn::Vector(used), nn::Vector(used), 1.0 / static_cast<double>(used)};
  for (std::size_t s = first; s < length; ++s) {
    const Tensor2 &target = s + 1 < length ? batch.steps[s + 1] : batch.targets;
    const Eigen::Index at = per * static_cast<Eigen::Index>(s - first);
    t.predictions.segment(at, per) = Eigen::Map<const nn::Vector>(cache.predictions[s].data(), per);
    t.targets.segment(at, per) = Eigen::Map<const nn::Vector>(target.data(), per);
  }
  return t;
}

double evaluate_loss(const PredictorModel &model, const Trace &trace) {
  const std::size_t length = model.hyper.subsequence_length;
  const std::size_t count = window_count(trace.size(), length);
  require(count > 0, ErrorCode::InvalidArgument,
          "trace of " + std::to_string(trace.size()) + " records has no windows of length " +
              std::to_string(length));
  const Eigen::MatrixXd signals = trace.signal_matrix();
  const std::size_t bs = model.hyper.batch_size;
  std::vector<std::size_t> starts;
  double total = 0.0;
  for (std::size_t first = 0; first < count; first += bs) {
    starts.clear();
    for (std::size_t i = first; i < std::min(count, first + bs); ++i) {
      starts.push_back(i);
    }
    const WindowBatch batch = make_batch(signals, length, starts);
    total += (predict_batch(model, batch) - batch.targets).squaredNorm();
  }
  return total / (static_cast<double>(count) * static_cast<double>(model.k));
}

double persistence_mse(const Trace &trace, std::size_t length) {
  const std::size_t count = window_count(trace.size(), length);
  require(count > 0, ErrorCode::InvalidArgument, "trace too short for persistence baseline");
  double total = 0.0;
  const std::size_t k = trace.schema.signal_count();
  for (std::size_t i = 0; i < count; ++i) {
    const auto &prev = trace.records[i + length - 1].signals;
    const auto &next = trace.records[i + length].signals;
    for (std::size_t j = 0; j < k; ++j) {
      const double d = next[j] - prev[j];
      total += d * d;
    }
  }
  return total / (static_cast<double>(count) * static_cast<double>(k));
}

TrainResult train(const PredictorModel &initial, const Trace &train_trace, const Trace &val_trace,
                  const PredictorHyper &hyper, const EpochCallback &on_epoch) {
  hyper.validate();
  require(train_trace.schema.signal_count() == initial.k &&
              val_trace.schema.signal_count() == initial.k,
          ErrorCode::Shape, "train: trace signal count does not match the model");
  const std::size_t length = hyper.subsequence_length;
  require(length == initial.hyper.subsequence_length && hyper.embed_dim == initial.hyper.embed_dim &&
              hyper.hidden_dim == initial.hyper.hidden_dim,
          ErrorCode::InvalidArgument, "train: hyperparameters disagree with the model shape");
  const std::size_t count = window_count(train_trace.size(), length);
  require(count > 0, ErrorCode::InvalidArgument,
          "train: training trace shorter than subsequence length + 1");
  require(window_count(val_trace.size(), length) > 0, ErrorCode::InvalidArgument,
          "train: validation trace shorter than subsequence length + 1");

  TrainResult result;
  result.model = initial;
  result.model.hyper = hyper;
  PredictorModel &model = result.model;

  PredictorWeights grad = model.weights;
  auto param_views = model.weights.views();
  auto grad_views = grad.views();
  std::vector<std::span<double>> params;
  std::vector<std::span<const double>> grads;
  std::vector<std::size_t> sizes;
  for (std::size_t i = 0; i < param_views.size(); ++i) {
    params.push_back(param_views[i].values);
    grads.emplace_back(grad_views[i].values);
    sizes.push_back(param_views[i].values.size());
  }
  nn::AdamState adam(nn::AdamConfig{hyper.learning_rate}, sizes);

  const Eigen::MatrixXd signals = train_trace.signal_matrix();
  double best = std::numeric_limits<double>::infinity();
  PredictorWeights best_weights = model.weights;
  std::size_t stale = 0;
  std::vector<std::size_t> starts;

  for (std::size_t epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    double total = 0.0;
    for (std::size_t first = 0; first < count; first += hyper.batch_size) {
      starts.clear();
      for (std::size_t i = first; i < std::min(count, first + hyper.batch_size); ++i) {
        starts.push_back(i);
      }
      const WindowBatch batch = make_batch(signals, length, starts);
      grad.set_zero();
      const double loss = loss_and_gradient(model, batch, &grad);
      require(std::isfinite(loss), ErrorCode::Numeric,
              "training diverged (non-finite loss) in epoch " + std::to_string(epoch));
      total += loss * static_cast<double>(starts.size());
      nn::adam_step(adam, params, grads);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = total / static_cast<double>(count);
    stats.val_loss = evaluate_loss(model, val_trace);
    require(std::isfinite(stats.val_loss), ErrorCode::Numeric,
            "training diverged (non-finite validation loss) in epoch " + std::to_string(epoch));
    result.history.epochs.push_back(stats);
    if (on_epoch) {
      on_epoch(stats);
    }

    if (stats.val_loss < best) {
      best = stats.val_loss;
      best_weights = model.weights;
      result.history.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= hyper.patience) {
      result.history.stop_reason = StopReason::Patience;
      break;
    }
  }
  model.weights = best_weights;
  return result;
}

std::string serialize_model(const PredictorModel &model, const std::string &provenance) {
  BinaryWriter w;
  w.bytes(kModelMagic);
  w.u32(model.version);
  w.str(provenance);
  const PredictorHyper &h = model.hyper;
  w.u32(static_cast<std::uint32_t>(model.k));
  w.u32(static_cast<std::uint32_t>(h.subsequence_length));
  w.u32(static_cast<std::uint32_t>(h.embed_dim));
  w.u32(static_cast<std::uint32_t>(h.hidden_dim));
  w.u32(static_cast<std::uint32_t>(h.batch_size));
  w.f64(h.learning_rate);
  w.u32(static_cast<std::uint32_t>(h.max_epochs));
  w.u32(static_cast<std::uint32_t>(h.patience));
  w.u8(h.all_steps_loss ? 1 : 0);
  w.u8(model.scaling ? 1 : 0);
  if (model.scaling) {
    const ScalingParams &s = *model.scaling;
    w.u32(static_cast<std::uint32_t>(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i) {
      w.str(s.names[i]);
      w.f64(s.min[i]);
      w.f64(s.max[i]);
    }
  }

  const auto mats = model.weights.matrices();
  const auto vecs = model.weights.vectors();
  w.u32(static_cast<std::uint32_t>(mats.size() + vecs.size()));
  for (const auto &[name, m] : mats) {
    w.str(name);
    w.matrix(*m);
  }
  for (const auto &[name, v] : vecs) {
    w.str(name);
    w.matrix(*v);
  }
  return w.data();
}

void save_model(const PredictorModel &model, const std::string &path,
                const std::string &provenance) {
  BinaryWriter w;
  w.bytes(serialize_model(model, provenance));
  w.save(path);
}

PredictorModel load_model(const std::string &path, std::optional<std::size_t> expected_k,
                          std::string *provenance) {
  BinaryReader r = BinaryReader::open(path);
  require(r.bytes(kModelMagic.size()) == kModelMagic, ErrorCode::Format,
          path + ": not a predictor model file (bad magic)");
  PredictorModel m;
  m.version = r.u32();
  require(m.version == kModelFormatVersion, ErrorCode::Format,
          path + ": unsupported model version " + std::to_string(m.version));
  std::string prov = r.str();
  if (provenance != nullptr) {
    *provenance = prov;
  }
  m.k = r.u32();
  PredictorHyper &h = m.hyper;
  h.subsequence_length = r.u32();
  h.embed_dim = r.u32();
  h.hidden_dim = r.u32();
  h.batch_size = r.u32();
  h.learning_rate = r.f64();
  h.max_epochs = r.u32();
  h.patience = r.u32();
  h.all_steps_loss = r.u8() != 0;
  if (r.u8() != 0) {
    ScalingParams s;
    const std::uint32_t n = r.u32();
    require(n == m.k, ErrorCode::Shape, path + ": scaling block does not match the signal count");
    for (std::uint32_t i = 0; i < n; ++i) {
      s.names.push_back(r.str());
      s.min.push_back(r.f64());
      s.max.push_back(r.f64());
    }
    m.scaling = std::move(s);
  }
  require(m.k >= 1, ErrorCode::Shape, path + ": model declares zero signals");
  if (expected_k) {
    require(m.k == *expected_k, ErrorCode::Shape,
            path + ": model has " + std::to_string(m.k) + " signals, expected " +
                std::to_string(*expected_k));
  }
  m.weights.resize(m.k, h.embed_dim, h.hidden_dim);

  const auto mats = m.weights.matrices();
  const auto vecs = m.weights.vectors();
  const std::uint32_t blocks = r.u32();
  require(blocks == mats.size() + vecs.size(), ErrorCode::Format,
          path + ": unexpected block count " + std::to_string(blocks));
  auto read_block = [&](const std::string &name, Eigen::MatrixXd &dst) {
    const std::string got = r.str();
    require(got == name, ErrorCode::Format, path + ": expected block " + name + ", found " + got);
    Eigen::MatrixXd block = r.matrix();
    require(block.rows() == dst.rows() && block.cols() == dst.cols(), ErrorCode::Shape,
            path + ": block " + name + " has shape " + std::to_string(block.rows()) + "x" +
                std::to_string(block.cols()) + ", expected " + std::to_string(dst.rows()) + "x" +
                std::to_string(dst.cols()));
    dst = std::move(block);
  };
  for (const auto &[name, ptr] : mats) {
    read_block(name, const_cast<Tensor2 &>(*ptr));
  }
  for (const auto &[name, ptr] : vecs) {
    Eigen::MatrixXd tmp(ptr->size(), 1);
    read_block(name, tmp);
    const_cast<Vector &>(*ptr) = tmp.col(0);
  }
  require(r.at_end(), ErrorCode::Format, path + ": trailing bytes after the last block");
  return m;
}

std::string to_string(StopReason reason) {
  return reason == StopReason::Patience ? "patience" : "max_epochs";
}

} // namespace canids

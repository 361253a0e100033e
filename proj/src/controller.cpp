#include "controller.hpp"

#include "baselines.hpp"
#include "error.hpp"

#include <cstdio>
#include <istream>
#include <ostream>

namespace canids {

RateChecker::RateChecker(double period_s, double tol) : expected_period_s(period_s), tolerance(tol) {
  require(period_s > 0.0, ErrorCode::InvalidArgument, "rate check: period must be positive");
  require(tol > 0.0 && tol < 1.0, ErrorCode::InvalidArgument,
          "rate check: tolerance must lie in (0, 1)");
}

RateVerdict RateChecker::check(double timestamp) {
  if (!last_timestamp) {
    last_timestamp = timestamp;
    return RateVerdict::Ok;
  }
  const double dt = timestamp - *last_timestamp;
  require(dt >= 0.0, ErrorCode::InvalidArgument, "rate check: timestamp decreased");
  last_timestamp = timestamp;
  recent.push_back(dt);
  if (recent.size() > recent_capacity) {
    recent.pop_front();
  }
  if (dt < (1.0 - tolerance) * expected_period_s) {
    return RateVerdict::TooFast;
  }
  if (dt > (1.0 + tolerance) * expected_period_s) {
    return RateVerdict::TooSlow;
  }
  return RateVerdict::Ok;
}

HistoryBuffer::HistoryBuffer(std::size_t capacity, std::size_t k)
    : capacity_(capacity), k_(k), slots_(capacity) {
  require(capacity >= 1, ErrorCode::InvalidArgument, "history buffer needs capacity >= 1");
}

void HistoryBuffer::push(const Eigen::VectorXd &v) {
  require(static_cast<std::size_t>(v.size()) == k_, ErrorCode::Shape,
          "history buffer: entry has the wrong width");
  slots_[head_] = v;
  head_ = (head_ + 1) % capacity_;
  if (count_ < capacity_) {
    ++count_;
  }
}

Eigen::MatrixXd HistoryBuffer::window() const {
  Eigen::MatrixXd w(static_cast<Eigen::Index>(count_), static_cast<Eigen::Index>(k_));
  const std::size_t oldest = (head_ + capacity_ - count_) % capacity_;
  for (std::size_t i = 0; i < count_; ++i) {
    w.row(static_cast<Eigen::Index>(i)) = slots_[(oldest + i) % capacity_].transpose();
  }
  return w;
}

const Eigen::VectorXd &HistoryBuffer::newest() const {
  require(count_ > 0, ErrorCode::InvalidArgument, "history buffer is empty");
  return slots_[(head_ + capacity_ - 1) % capacity_];
}

OnlinePipeline::OnlinePipeline(const PredictorModel &model, const Detector &detector,
                               const ScalingParams &scaling, double nominal_period_s,
                               const OnlineConfig &config)
    : model_(model), detector_(detector), scaling_(scaling), config_(config),
      rate_(nominal_period_s, config.rate_tolerance),
      buffer_(model.hyper.subsequence_length, model.k) {
  require(is_model_variant(detector.variant), ErrorCode::InvalidArgument,
          "online pipeline: " + to_string(detector.variant) + " is an offline baseline");
  require(detector.k == model.k, ErrorCode::Shape,
          "online pipeline: detector expects " + std::to_string(detector.k) +
              " signals, model has " + std::to_string(model.k));
  require(scaling.size() == model.k, ErrorCode::Shape,
          "online pipeline: scaling parameters do not match the model");
}

Detection OnlinePipeline::process(const TraceRecord &raw) {
  require(raw.signals.size() == model_.k, ErrorCode::Shape,
          "online pipeline: frame has " + std::to_string(raw.signals.size()) +
              " signals, model expects " + std::to_string(model_.k));
  Detection d;
  d.timestamp = raw.timestamp;
  d.rate = rate_.check(raw.timestamp);
  if (d.rate == RateVerdict::TooFast) {
    d.disposition = Disposition::DroppedRateViolation;
    d.score = kRateViolationScore;
    return d;
  }

  Eigen::VectorXd x(static_cast<Eigen::Index>(model_.k));
  for (std::size_t i = 0; i < model_.k; ++i) {
    x(static_cast<Eigen::Index>(i)) = scaling_.scale(i, raw.signals[i]);
  }
  if (!buffer_.full()) {
    buffer_.push(x);
    d.score = kWarmupScore;
    return d;
  }

  const Eigen::VectorXd pred = predict_next(model_, buffer_.window());
  d.score = detector_.score(pred, x);
  ++scored_;
  if (detector_.is_anomaly(d.score)) {
    d.disposition = Disposition::DroppedAnomalous;
    ++substituted_run_;
    if (config_.resync_after > 0 && substituted_run_ > config_.resync_after) {
      buffer_.push(x);
    } else if (config_.substitution == Substitution::Prediction) {
      buffer_.push(pred);
    } else {
      const Eigen::VectorXd last = buffer_.newest();
      buffer_.push(last);
    }
  } else {
    substituted_run_ = 0;
    buffer_.push(x);
  }
  return d;
}

std::vector<Detection> run_online(const Trace &raw, const PredictorModel &model,
                                  const Detector &detector, const ScalingParams &scaling,
                                  const OnlineConfig &config) {
  require(!raw.scaling, ErrorCode::InvalidArgument,
          "online pipeline expects raw frames; the trace is already scaled");
  require(raw.schema.signal_count() == model.k, ErrorCode::Shape,
          "online pipeline: trace has " + std::to_string(raw.schema.signal_count()) +
              " signals, model expects " + std::to_string(model.k));
  OnlinePipeline p(model, detector, scaling, raw.schema.nominal_period_s(), config);
  std::vector<Detection> out;
  out.reserve(raw.size());
  for (const auto &r : raw.records) {
    out.push_back(p.process(r));
  }
  return out;
}

std::vector<Detection> run_baseline(const Trace &scaled, const Detector &detector) {
  require(!is_model_variant(detector.variant), ErrorCode::InvalidArgument,
          "run_baseline: " + to_string(detector.variant) + " needs the predictor");
  const Eigen::MatrixXd signals = scaled.signal_matrix();
  const auto n = static_cast<std::size_t>(signals.cols());
  std::vector<Detection> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].timestamp = scaled.records[i].timestamp;
  }
  const BaselineParams &b = detector.baseline;
  if (detector.variant == Variant::Lof) {
    const auto lof = lof_scores(signals.transpose(), {b.lof_neighbors, b.lof_threshold});
    for (std::size_t i = 0; i < n; ++i) {
      out[i].score = b.lof_threshold - lof[i];
      out[i].disposition = lof[i] > b.lof_threshold ? Disposition::DroppedAnomalous
                                                    : Disposition::Delivered;
    }
    return out;
  }
  BollingerConfig cfg;
  cfg.band_width = b.band_width;
  if (detector.variant == Variant::SmaBollinger) {
    cfg.mode = BandMode::Sma;
    cfg.window = b.sma_window;
  } else {
    cfg.mode = BandMode::Ewma;
    cfg.window = b.ewma_span;
  }
  const MessageFlags flags = bollinger_message_flags(signals, cfg);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].score = flags.scores[i];
    out[i].disposition = flags.flags[i] ? Disposition::DroppedAnomalous : Disposition::Delivered;
  }
  return out;
}

std::size_t run_live(std::istream &in, std::ostream &out, OnlinePipeline &pipeline,
                     const MessageSchema &schema) {
  std::string line;
  std::size_t lineno = 0;
  std::size_t frames = 0;
  out << "timestamp,disposition,score,rate\n" << std::flush;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty() || line[0] == '#' || line.rfind("timestamp", 0) == 0) {
      continue;
    }
    const Trace one = parse_trace(line, schema, "stdin:" + std::to_string(lineno));
    const Detection d = pipeline.process(one.records.front());
    char score[64];
    std::snprintf(score, sizeof score, "%.9g", d.score);
    char ts[64];
    std::snprintf(ts, sizeof ts, "%.9g", d.timestamp);
    out << ts << ',' << to_string(d.disposition) << ',' << score << ',' << to_string(d.rate)
        << '\n'
        << std::flush;
    ++frames;
  }
  return frames;
}

} // namespace canids

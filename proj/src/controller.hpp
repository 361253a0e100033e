#pragma once

#include "detector.hpp"
#include "eval.hpp"
#include "predictor.hpp"
#include "trace.hpp"

#include <Eigen/Dense>

#include <deque>
#include <iosfwd>
#include <optional>
#include <vector>

namespace canids {

struct RateChecker {
  double expected_period_s = 0.015;
  double tolerance = 0.2;
  std::optional<double> last_timestamp;
  std::deque<double> recent; // last few inter-arrival times
  std::size_t recent_capacity = 8;

  RateChecker() = default;
  RateChecker(double period_s, double tol);

  // Compares the gap to the previous frame, whatever happened to it.
  RateVerdict check(double timestamp);
};

class HistoryBuffer {
public:
  HistoryBuffer(std::size_t capacity, std::size_t k);

  void push(const Eigen::VectorXd &v);
  bool full() const { return count_ == capacity_; }
  std::size_t size() const { return count_; }
  std::size_t capacity() const { return capacity_; }
  // size() x k, oldest row first.
  Eigen::MatrixXd window() const;
  const Eigen::VectorXd &newest() const;

private:
  std::size_t capacity_;
  std::size_t k_;
  std::vector<Eigen::VectorXd> slots_;
  std::size_t head_ = 0; // next slot to overwrite
  std::size_t count_ = 0;
};

enum class Substitution { Prediction, FreezeLast };

struct OnlineConfig {
  double rate_tolerance = 0.2;
  Substitution substitution = Substitution::Prediction;
  // After this many consecutive substituted frames the buffer takes the
  // observation again (frames are still scored and flagged). 0 = never.
  std::size_t resync_after = 0;
};

inline constexpr double kWarmupScore = 1e9;
inline constexpr double kRateViolationScore = -1e9;

// One message id's stream processor.
class OnlinePipeline {
public:
  OnlinePipeline(const PredictorModel &model, const Detector &detector,
                 const ScalingParams &scaling, double nominal_period_s,
                 const OnlineConfig &config = {});

  Detection process(const TraceRecord &raw);

  const HistoryBuffer &buffer() const { return buffer_; }
  std::size_t scored_frames() const { return scored_; }

private:
  const PredictorModel &model_;
  const Detector &detector_;
  ScalingParams scaling_;
  OnlineConfig config_;
  RateChecker rate_;
  HistoryBuffer buffer_;
  std::size_t scored_ = 0;
  std::size_t substituted_run_ = 0;
};

std::vector<Detection> run_online(const Trace &raw, const PredictorModel &model,
                                  const Detector &detector, const ScalingParams &scaling,
                                  const OnlineConfig &config = {});

// Offline baselines over a whole scaled trace.
std::vector<Detection> run_baseline(const Trace &scaled, const Detector &detector);

// Reads trace rows (header and comments optional) line by line and answers
// each with a detection row, flushing as it goes.
std::size_t run_live(std::istream &in, std::ostream &out, OnlinePipeline &pipeline,
                     const MessageSchema &schema);

} // namespace canids

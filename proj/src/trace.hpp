#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace canids {

using MessageId = std::uint32_t;

inline constexpr std::size_t kDefaultSubsequenceLength = 32;

struct MessageSchema {
  MessageId message_id = 0;
  double nominal_period_ms = 15.0;
  std::vector<std::string> signal_names;

  std::size_t signal_count() const { return signal_names.size(); }
  double nominal_period_s() const { return nominal_period_ms * 1e-3; }

  // Throws on k == 0, non-positive period or duplicate names.
  void validate() const;

  bool operator==(const MessageSchema &) const = default;
};

struct TraceRecord {
  double timestamp = 0.0; // seconds
  MessageId message_id = 0;
  std::vector<double> signals;
  std::uint8_t label = 0;

  bool operator==(const TraceRecord &) const = default;
};

// Per-signal min/max taken from a training trace.
struct ScalingParams {
  std::vector<std::string> names;
  std::vector<double> min;
  std::vector<double> max;

  std::size_t size() const { return min.size(); }
  double range(std::size_t i) const;
  double scale(std::size_t i, double v) const;
  double unscale(std::size_t i, double v) const;

  bool operator==(const ScalingParams &) const = default;
};

struct Trace {
  MessageSchema schema;
  std::vector<TraceRecord> records;
  std::optional<ScalingParams> scaling;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  double duration() const;

  // Record-level invariants: id match, signal width, labels, monotone time.
  void validate() const;

  // k x n matrix with one column per record.
  Eigen::MatrixXd signal_matrix() const;
  std::vector<std::uint8_t> labels() const;

  bool operator==(const Trace &) const = default;
};

struct WindowPair {
  Eigen::MatrixXd input; // L x k
  Eigen::VectorXd target;
};

std::string format_message_id(MessageId id);
MessageId parse_message_id(const std::string &text);

// CSV: optional leading '#' comment lines, then a header row
// `timestamp,message_id,k,sig_1..sig_k,label`, then one row per record.
Trace load_trace(const std::string &path, const MessageSchema &schema);
Trace parse_trace(const std::string &text, const MessageSchema &schema,
                  const std::string &origin = "<memory>");
void write_trace(const std::string &path, const Trace &trace,
                 const std::string &provenance = {});
std::string format_trace(const Trace &trace, const std::string &provenance = {});

ScalingParams fit_scaling(const Trace &trace);
std::pair<Trace, ScalingParams> fit_and_scale(const Trace &trace);
Trace apply_scaling(const Trace &trace, const ScalingParams &params);
Trace unscale(const Trace &trace);

void write_scaling(const std::string &path, const ScalingParams &params,
                   const std::string &provenance = {});
ScalingParams load_scaling(const std::string &path);

std::pair<Trace, Trace> split_train_val(const Trace &trace, double ratio);

std::size_t window_count(std::size_t n, std::size_t length);
std::vector<WindowPair> windows(const Trace &trace,
                                std::size_t length = kDefaultSubsequenceLength);

} // namespace canids

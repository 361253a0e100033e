#pragma once

#include "ocsvm.hpp"
#include "predictor.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace canids {

enum class DeviationMode { Diff, Sum, Avg, Max };

// Signed per-signal deviation pred - actual.
Eigen::VectorXd deviation_vector(const Eigen::VectorXd &pred, const Eigen::VectorXd &actual);
// Sum / Avg / Max of |pred - actual|; Diff is rejected (it is not a scalar).
double deviation_scalar(const Eigen::VectorXd &pred, const Eigen::VectorXd &actual,
                        DeviationMode mode);
// Detector input: the vector for Diff, a single entry otherwise.
Eigen::VectorXd deviation_features(const Eigen::VectorXd &pred, const Eigen::VectorXd &actual,
                                   DeviationMode mode);

struct StaticThreshold {
  double threshold = 0.0;
  double percentile = 99.9;

  bool is_anomaly(double max_abs_deviation) const { return max_abs_deviation > threshold; }
  bool operator==(const StaticThreshold &) const = default;
};

// Percentile (linear interpolation between order statistics) of the
// max-abs component of each deviation.
StaticThreshold fit_static_threshold(std::span<const Eigen::VectorXd> deviations,
                                     double percentile = 99.9);

enum class Variant { ST, Diff, Sum, Avg, Max, SmaBollinger, EwmaBollinger, Lof };

std::string to_string(Variant v);
std::optional<Variant> parse_variant(const std::string &name);
bool is_model_variant(Variant v); // uses the predictor
std::string to_string(DeviationMode m);

struct DetectorParams {
  OcsvmParams ocsvm;
  double percentile = 99.9;
};

struct BaselineParams {
  std::size_t sma_window = 20;
  std::size_t ewma_span = 20;
  double band_width = 2.0;
  std::size_t lof_neighbors = 20;
  double lof_threshold = 1.5;

  bool operator==(const BaselineParams &) const = default;
};

inline constexpr std::uint32_t kDetectorFormatVersion = 1;

// What `fit-detector` produces: one of the model variants or a baseline
// configuration. Scores are oriented so that lower means more anomalous and
// a negative score is an anomaly.
struct Detector {
  Variant variant = Variant::Diff;
  std::size_t k = 0;
  std::optional<OcsvmModel> ocsvm;
  std::optional<StaticThreshold> threshold;
  BaselineParams baseline;

  double score(const Eigen::VectorXd &pred, const Eigen::VectorXd &actual) const;
  bool is_anomaly(double score) const { return score < 0.0; }

  bool operator==(const Detector &) const = default;
};

std::optional<DeviationMode> deviation_mode(Variant v);

// Deviations of the model's next-step predictions over every window of a
// scaled trace.
std::vector<Eigen::VectorXd> training_deviations(const PredictorModel &model,
                                                 const Trace &scaled);

Detector fit_detector(const PredictorModel &model, const Trace &scaled, Variant variant,
                      const DetectorParams &params);
Detector fit_detector_from_deviations(std::span<const Eigen::VectorXd> deviations,
                                      Variant variant, const DetectorParams &params);
Detector make_baseline_detector(Variant variant, std::size_t k, const BaselineParams &params);

void save_detector(const Detector &d, const std::string &path, const std::string &provenance = {});
std::string serialize_detector(const Detector &d, const std::string &provenance = {});
Detector load_detector(const std::string &path, std::string *provenance = nullptr);

} // namespace canids

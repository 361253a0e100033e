#include "detector.hpp"

#include "binary_io.hpp"
#include "error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace canids {

namespace {

constexpr std::string_view kDetectorMagic = "CANIDSDT";

void check_lengths(const Eigen::VectorXd &pred, const Eigen::VectorXd &actual) {
  require(pred.size() == actual.size() && pred.size() > 0, ErrorCode::Shape,
          "deviation: prediction has " + std::to_string(pred.size()) + " signals, frame has " +
              std::to_string(actual.size()));
}

struct VariantName {
  Variant v;
  const char *name;
};

constexpr VariantName kVariantNames[] = {
    {Variant::ST, "ST"},          {Variant::Diff, "Diff"},
    {Variant::Sum, "Sum"},        {Variant::Avg, "Avg"},
    {Variant::Max, "Max"},        {Variant::SmaBollinger, "SMA-BB"},
    {Variant::EwmaBollinger, "EWMA-BB"}, {Variant::Lof, "LOF"},
};

} // namespace

Eigen::VectorXd deviation_vector(const Eigen::VectorXd &pred, const Eigen::VectorXd &actual) {
  check_lengths(pred, actual);
  return pred - actual;
}

double deviation_scalar(const Eigen::VectorXd &pred, const Eigen::VectorXd &actual,
                        DeviationMode mode) {
  check_lengths(pred, actual);
  const Eigen::ArrayXd a = (pred - actual).array().abs();
  switch (mode) {
  case DeviationMode::Sum:
    return a.sum();
  case DeviationMode::Avg:
    return a.sum() / static_cast<double>(a.size());
  case DeviationMode::Max:
    return a.maxCoeff();
  case DeviationMode::Diff:
    break;
  }
  fail(ErrorCode::InvalidArgument, "deviation: Diff mode has no scalar reduction");
}

Eigen::VectorXd deviation_features(const Eigen::VectorXd &pred, const Eigen::VectorXd &actual,
                                   DeviationMode mode) {
  if (mode == DeviationMode::Diff) {
    return deviation_vector(pred, actual);
  }
  Eigen::VectorXd out(1);
  out(0) = deviation_scalar(pred, actual, mode);
  return out;
}

StaticThreshold fit_static_threshold(std::span<const Eigen::VectorXd> deviations,
                                     double percentile) {
  require(!deviations.empty(), ErrorCode::InvalidArgument,
          "static threshold: no training deviations");
  require(percentile > 50.0 && percentile <= 100.0, ErrorCode::InvalidArgument,
          "static threshold: percentile must lie in (50, 100]");
  std::vector<double> m;
  m.reserve(deviations.size());
  for (const auto &d : deviations) {
    require(d.size() > 0 && d.allFinite(), ErrorCode::Numeric,
            "static threshold: empty or non-finite deviation");
    m.push_back(d.cwiseAbs().maxCoeff());
  }
  std::sort(m.begin(), m.end());
  const double pos = percentile / 100.0 * static_cast<double>(m.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, m.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  double t = m[lo] + frac * (m[hi] - m[lo]);
  // A perfect predictor would give 0; keep the threshold strictly positive.
  t = std::max(t, 1e-12);
  return {t, percentile};
}

std::string to_string(Variant v) {
  for (const auto &e : kVariantNames) {
    if (e.v == v) {
      return e.name;
    }
  }
  return "?";
}

std::optional<Variant> parse_variant(const std::string &name) {
  const std::string &bare = name;
  for (const auto &e : kVariantNames) {
    std::string n = e.name;
    if (n.size() == bare.size() &&
        std::equal(n.begin(), n.end(), bare.begin(), [](char a, char b) {
          return std::tolower(static_cast<unsigned char>(a)) ==
                 std::tolower(static_cast<unsigned char>(b));
        })) {
      return e.v;
    }
  }
  return std::nullopt;
}

bool is_model_variant(Variant v) {
  return v == Variant::ST || v == Variant::Diff || v == Variant::Sum || v == Variant::Avg ||
         v == Variant::Max;
}

std::string to_string(DeviationMode m) {
  switch (m) {
  case DeviationMode::Diff:
    return "Diff";
  case DeviationMode::Sum:
    return "Sum";
  case DeviationMode::Avg:
    return "Avg";
  case DeviationMode::Max:
    return "Max";
  }
  return "?";
}

std::optional<DeviationMode> deviation_mode(Variant v) {
  switch (v) {
  case Variant::Diff:
    return DeviationMode::Diff;
  case Variant::Sum:
    return DeviationMode::Sum;
  case Variant::Avg:
    return DeviationMode::Avg;
  case Variant::Max:
    return DeviationMode::Max;
  default:
    return std::nullopt;
  }
}

double Detector::score(const Eigen::VectorXd &pred, const Eigen::VectorXd &actual) const {
  require(static_cast<std::size_t>(pred.size()) == k, ErrorCode::Shape,
          "detector: expected " + std::to_string(k) + " signals, got " +
              std::to_string(pred.size()));
  if (variant == Variant::ST) {
    require(threshold.has_value(), ErrorCode::InvalidArgument, "detector: missing threshold");
    return threshold->threshold - deviation_scalar(pred, actual, DeviationMode::Max);
  }
  const auto mode = deviation_mode(variant);
  require(mode.has_value() && ocsvm.has_value(), ErrorCode::InvalidArgument,
          "detector: variant " + to_string(variant) + " does not score predictions");
  return ocsvm_decision(*ocsvm, deviation_features(pred, actual, *mode));
}

std::vector<Eigen::VectorXd> training_deviations(const PredictorModel &model,
                                                 const Trace &scaled) {
  const std::size_t length = model.hyper.subsequence_length;
  const std::size_t count = window_count(scaled.size(), length);
  require(count > 0, ErrorCode::InvalidArgument,
          "detector: trace has no windows of length " + std::to_string(length));
  require(scaled.schema.signal_count() == model.k, ErrorCode::Shape,
          "detector: trace signal count does not match the model");
  const Eigen::MatrixXd signals = scaled.signal_matrix();
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  std::vector<std::size_t> starts;
  for (std::size_t first = 0; first < count; first += model.hyper.batch_size) {
    starts.clear();
    for (std::size_t i = first; i < std::min(count, first + model.hyper.batch_size); ++i) {
      starts.push_back(i);
    }
    const WindowBatch batch = make_batch(signals, length, starts);
    const Eigen::MatrixXd pred = predict_batch(model, batch);
    for (Eigen::Index b = 0; b < batch.size(); ++b) {
      out.push_back(pred.col(b) - batch.targets.col(b));
    }
  }
  return out;
}

Detector fit_detector_from_deviations(std::span<const Eigen::VectorXd> deviations,
                                      Variant variant, const DetectorParams &params) {
  require(is_model_variant(variant), ErrorCode::InvalidArgument,
          "detector: " + to_string(variant) + " is a baseline and is not fitted on deviations");
  require(!deviations.empty(), ErrorCode::InvalidArgument, "detector: no training deviations");
  Detector d;
  d.variant = variant;
  d.k = static_cast<std::size_t>(deviations.front().size());
  if (variant == Variant::ST) {
    d.threshold = fit_static_threshold(deviations, params.percentile);
    return d;
  }
  const DeviationMode mode = *deviation_mode(variant);
  const Eigen::Index dim = mode == DeviationMode::Diff ? static_cast<Eigen::Index>(d.k) : 1;
  Eigen::MatrixXd points(static_cast<Eigen::Index>(deviations.size()), dim);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.k));
  for (std::size_t i = 0; i < deviations.size(); ++i) {
    require(static_cast<std::size_t>(deviations[i].size()) == d.k, ErrorCode::Shape,
            "detector: deviations have inconsistent widths");
    points.row(static_cast<Eigen::Index>(i)) =
        deviation_features(deviations[i], zero, mode).transpose();
  }
  d.ocsvm = fit_ocsvm(points, params.ocsvm);
  return d;
}

Detector fit_detector(const PredictorModel &model, const Trace &scaled, Variant variant,
                      const DetectorParams &params) {
  const auto devs = training_deviations(model, scaled);
  return fit_detector_from_deviations(devs, variant, params);
}

Detector make_baseline_detector(Variant variant, std::size_t k, const BaselineParams &params) {
  require(!is_model_variant(variant), ErrorCode::InvalidArgument,
          "detector: " + to_string(variant) + " is not a baseline");
  require(params.sma_window >= 2 && params.ewma_span >= 2, ErrorCode::InvalidArgument,
          "baseline: window and span must be at least 2");
  require(params.band_width > 0.0, ErrorCode::InvalidArgument,
          "baseline: band width must be positive");
  require(params.lof_neighbors >= 1 && params.lof_threshold > 1.0, ErrorCode::InvalidArgument,
          "baseline: LOF needs k >= 1 and a threshold above 1");
  Detector d;
  d.variant = variant;
  d.k = k;
  d.baseline = params;
  return d;
}

std::string serialize_detector(const Detector &d, const std::string &provenance) {
  BinaryWriter w;
  w.bytes(kDetectorMagic);
  w.u32(kDetectorFormatVersion);
  w.str(provenance);
  w.str(to_string(d.variant));
  w.u32(static_cast<std::uint32_t>(d.k));
  w.u8(d.threshold ? 1 : 0);
  if (d.threshold) {
    w.f64(d.threshold->threshold);
    w.f64(d.threshold->percentile);
  }
  w.u8(d.ocsvm ? 1 : 0);
  if (d.ocsvm) {
    write_ocsvm(w, *d.ocsvm);
  }
  w.u32(static_cast<std::uint32_t>(d.baseline.sma_window));
  w.u32(static_cast<std::uint32_t>(d.baseline.ewma_span));
  w.f64(d.baseline.band_width);
  w.u32(static_cast<std::uint32_t>(d.baseline.lof_neighbors));
  w.f64(d.baseline.lof_threshold);
  return w.data();
}

void save_detector(const Detector &d, const std::string &path, const std::string &provenance) {
  BinaryWriter w;
  w.bytes(serialize_detector(d, provenance));
  w.save(path);
}

Detector load_detector(const std::string &path, std::string *provenance) {
  BinaryReader r = BinaryReader::open(path);
  require(r.bytes(kDetectorMagic.size()) == kDetectorMagic, ErrorCode::Format,
          path + ": not a detector file (bad magic)");
  const std::uint32_t version = r.u32();
  require(version == kDetectorFormatVersion, ErrorCode::Format,
          path + ": unsupported detector version " + std::to_string(version));
  std::string prov = r.str();
  if (provenance != nullptr) {
    *provenance = prov;
  }
  Detector d;
  const std::string name = r.str();
  const auto v = parse_variant(name);
  require(v.has_value(), ErrorCode::Format, path + ": unknown variant " + name);
  d.variant = *v;
  d.k = r.u32();
  if (r.u8() != 0) {
    StaticThreshold t;
    t.threshold = r.f64();
    t.percentile = r.f64();
    d.threshold = t;
  }
  if (r.u8() != 0) {
    d.ocsvm = read_ocsvm(r);
  }
  d.baseline.sma_window = r.u32();
  d.baseline.ewma_span = r.u32();
  d.baseline.band_width = r.f64();
  d.baseline.lof_neighbors = r.u32();
  d.baseline.lof_threshold = r.f64();
  require(r.at_end(), ErrorCode::Format, path + ": trailing bytes in detector file");
  require(d.variant != Variant::ST || d.threshold.has_value(), ErrorCode::Format,
          path + ": static-threshold detector without a threshold");
  require(!deviation_mode(d.variant) || d.ocsvm.has_value(), ErrorCode::Format,
          path + ": ocsvm detector without a model");
  return d;
}

} // namespace canids

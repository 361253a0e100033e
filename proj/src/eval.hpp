#pragma once

#include "tracegen.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace canids {

struct ConfusionCounts {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::size_t total() const { return tp + tn + fp + fn; }
  ConfusionCounts &operator+=(const ConfusionCounts &o);
  bool operator==(const ConfusionCounts &) const = default;
};

ConfusionCounts confusion(std::span<const std::uint8_t> labels,
                          std::span<const std::uint8_t> predictions);

// 0/0 ratios are reported as 0 with the matching flag set.
struct Metrics {
  ConfusionCounts counts;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double fpr = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
  bool fpr_undefined = false;
};

Metrics metrics(const ConfusionCounts &c);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocResult {
  std::vector<RocPoint> points; // from (0,0) to (1,1)
  double auc = 0.0;
};

// Scores where lower means more anomalous. Each distinct score is one
// threshold, so tied scores give a diagonal segment.
RocResult roc_auc(std::span<const std::uint8_t> labels, std::span<const double> scores);

// One row of a detection log.
enum class Disposition { Delivered, DroppedAnomalous, DroppedRateViolation };
enum class RateVerdict { Ok, TooFast, TooSlow };

std::string to_string(Disposition d);
std::optional<Disposition> parse_disposition(const std::string &s);
std::string to_string(RateVerdict v);
std::optional<RateVerdict> parse_rate_verdict(const std::string &s);

struct Detection {
  double timestamp = 0.0;
  Disposition disposition = Disposition::Delivered;
  double score = 0.0;
  RateVerdict rate = RateVerdict::Ok;

  bool dropped() const { return disposition != Disposition::Delivered; }
  // Any alarm, including a late frame that was still delivered.
  bool alarm() const { return dropped() || rate == RateVerdict::TooSlow; }
  bool operator==(const Detection &) const = default;
};

inline constexpr const char *kNoAttack = "No attack";
inline constexpr const char *kOverall = "Overall";

struct KindReport {
  std::string kind;
  std::size_t records = 0;   // records inside intervals of this kind
  Metrics whole;             // kind records + clean records
  Metrics interval;          // kind records only
  std::optional<RocResult> roc; // over the whole-trace selection, when both classes occur
};

struct AttackReport {
  Metrics overall;
  std::optional<RocResult> overall_roc;
  std::vector<KindReport> kinds; // in attack-kind order, "No attack" last
};

struct ReportOptions {
  double nominal_period_s = 0.015;
  // A dropping interval counts as detected when an alarm fires within
  // [t_start, t_end + grace * period].
  double dropping_grace_periods = 1.5;
};

// `labels` and `timestamps` come from the ground-truth trace; detections
// must line up with it frame for frame.
AttackReport attack_report(std::span<const double> timestamps,
                           std::span<const std::uint8_t> labels,
                           std::span<const Detection> detections, const AttackManifest &manifest,
                           const ReportOptions &options = {});

// Rows `metric,attack_kind,value`.
std::string format_report_csv(const AttackReport &r, const std::string &provenance = {});
std::string format_report_table(const AttackReport &r, const std::string &title);
std::string format_roc_csv(const RocResult &roc, const std::string &provenance = {});

// Side-by-side table, one column per named report, for a single metric.
std::string format_comparison(std::span<const std::pair<std::string, AttackReport>> reports,
                              const std::string &metric);

double metric_value(const Metrics &m, const std::string &metric);

std::string format_detections(std::span<const Detection> d, const std::string &provenance = {});
std::vector<Detection> parse_detections(const std::string &text,
                                        const std::string &origin = "<memory>");
std::vector<Detection> load_detections(const std::string &path, std::string *provenance = nullptr);

} // namespace canids

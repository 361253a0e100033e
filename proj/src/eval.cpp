#include "eval.hpp"

#include "error.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace canids {

namespace {

double ratio(std::size_t num, std::size_t den, bool &undefined) {
  undefined = den == 0;
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<std::string> split(const std::string &line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

void add(ConfusionCounts &c, bool label, bool pred) {
  if (label) {
    ++(pred ? c.tp : c.fn);
  } else {
    ++(pred ? c.fp : c.tn);
  }
}

struct Scored {
  std::vector<std::uint8_t> labels;
  std::vector<double> scores;

  void push(bool label, double score) {
    labels.push_back(label ? 1 : 0);
    scores.push_back(score);
  }
  void append(const Scored &o) {
    labels.insert(labels.end(), o.labels.begin(), o.labels.end());
    scores.insert(scores.end(), o.scores.begin(), o.scores.end());
  }
  std::optional<RocResult> roc() const {
    const bool pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
    const bool neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
    if (!pos || !neg) {
      return std::nullopt;
    }
    return roc_auc(labels, scores);
  }
};

constexpr double kNoEvidenceScore = 1e9;

} // namespace

ConfusionCounts &ConfusionCounts::operator+=(const ConfusionCounts &o) {
  tp += o.tp;
  tn += o.tn;
  fp += o.fp;
  fn += o.fn;
  return *this;
}

ConfusionCounts confusion(std::span<const std::uint8_t> labels,
                          std::span<const std::uint8_t> predictions) {
  require(labels.size() == predictions.size(), ErrorCode::InvalidArgument,
          "confusion: " + std::to_string(labels.size()) + " labels vs " +
              std::to_string(predictions.size()) + " predictions");
  require(!labels.empty(), ErrorCode::InvalidArgument, "confusion: no records");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] <= 1 && predictions[i] <= 1, ErrorCode::InvalidArgument,
            "confusion: labels and predictions must be 0 or 1");
    add(c, labels[i] == 1, predictions[i] == 1);
  }
  return c;
}

Metrics metrics(const ConfusionCounts &c) {
  require(c.total() > 0, ErrorCode::InvalidArgument, "metrics: empty confusion counts");
  Metrics m;
  m.counts = c;
  bool unused = false;
  m.accuracy = ratio(c.tp + c.tn, c.total(), unused);
  m.precision = ratio(c.tp, c.tp + c.fp, m.precision_undefined);
  m.recall = ratio(c.tp, c.tp + c.fn, m.recall_undefined);
  m.fpr = ratio(c.fp, c.fp + c.tn, m.fpr_undefined);
  const double pr = m.precision + m.recall;
  m.f1_undefined = m.precision_undefined || m.recall_undefined || pr == 0.0;
  m.f1 = pr == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / pr;
  return m;
}

RocResult roc_auc(std::span<const std::uint8_t> labels, std::span<const double> scores) {
  require(labels.size() == scores.size(), ErrorCode::InvalidArgument,
          "roc: labels and scores differ in length");
  std::size_t pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] <= 1, ErrorCode::InvalidArgument, "roc: labels must be 0 or 1");
    require(!std::isnan(scores[i]), ErrorCode::Numeric, "roc: NaN score");
    pos += labels[i];
  }
  const std::size_t neg = labels.size() - pos;
  require(pos > 0 && neg > 0, ErrorCode::InvalidArgument,
          "roc: AUC undefined with a single class present");

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  RocResult r;
  r.points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  double area = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t dtp = 0, dfp = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? dtp : dfp) += 1;
      ++j;
    }
    // Trapezoid in count units; normalised at the end.
    area += static_cast<double>(dfp) * (static_cast<double>(tp) + 0.5 * static_cast<double>(dtp));
    tp += dtp;
    fp += dfp;
    r.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                        static_cast<double>(tp) / static_cast<double>(pos)});
    i = j;
  }
  r.auc = area / (static_cast<double>(pos) * static_cast<double>(neg));
  return r;
}

std::string to_string(Disposition d) {
  switch (d) {
  case Disposition::Delivered:
    return "delivered";
  case Disposition::DroppedAnomalous:
    return "dropped_anomalous";
  case Disposition::DroppedRateViolation:
    return "dropped_rate";
  }
  return "?";
}

std::optional<Disposition> parse_disposition(const std::string &s) {
  for (auto d : {Disposition::Delivered, Disposition::DroppedAnomalous,
                 Disposition::DroppedRateViolation}) {
    if (to_string(d) == s) {
      return d;
    }
  }
  return std::nullopt;
}

std::string to_string(RateVerdict v) {
  switch (v) {
  case RateVerdict::Ok:
    return "ok";
  case RateVerdict::TooFast:
    return "too_fast";
  case RateVerdict::TooSlow:
    return "too_slow";
  }
  return "?";
}

std::optional<RateVerdict> parse_rate_verdict(const std::string &s) {
  for (auto v : {RateVerdict::Ok, RateVerdict::TooFast, RateVerdict::TooSlow}) {
    if (to_string(v) == s) {
      return v;
    }
  }
  return std::nullopt;
}

AttackReport attack_report(std::span<const double> timestamps,
                           std::span<const std::uint8_t> labels,
                           std::span<const Detection> detections, const AttackManifest &manifest,
                           const ReportOptions &options) {
  require(timestamps.size() == labels.size(), ErrorCode::InvalidArgument,
          "report: timestamps and labels differ in length");
  require(detections.size() == labels.size(), ErrorCode::InvalidArgument,
          "report: " + std::to_string(detections.size()) + " detections for " +
              std::to_string(labels.size()) + " ground-truth records");
  require(!labels.empty() || !manifest.intervals.empty(), ErrorCode::InvalidArgument,
          "report: nothing to evaluate");
  for (std::size_t i = 0; i < detections.size(); ++i) {
    require(std::abs(detections[i].timestamp - timestamps[i]) <= 1e-6, ErrorCode::InvalidArgument,
            "report: detection " + std::to_string(i + 1) + " at t=" +
                fmt(detections[i].timestamp) + " does not match ground truth t=" +
                fmt(timestamps[i]));
  }

  constexpr std::size_t kinds = std::size(kAllAttackKinds);
  std::array<ConfusionCounts, kinds> kind_counts{};
  std::array<Scored, kinds> kind_scored{};
  std::array<std::size_t, kinds> kind_records{};
  std::array<bool, kinds> present{};
  ConfusionCounts clean;
  Scored clean_scored;

  for (const auto &iv : manifest.intervals) {
    present[static_cast<std::size_t>(iv.kind)] = true;
  }

  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool label = labels[i] == 1;
    const bool pred = detections[i].dropped();
    const auto at = manifest.interval_at(timestamps[i]);
    if (at) {
      const auto k = static_cast<std::size_t>(manifest.intervals[*at].kind);
      add(kind_counts[k], label, pred);
      kind_scored[k].push(label, detections[i].score);
      ++kind_records[k];
    } else {
      require(!label, ErrorCode::InvalidArgument,
              "report: record at t=" + fmt(timestamps[i]) +
                  " is labelled anomalous but lies outside every manifest interval");
      add(clean, label, pred);
      clean_scored.push(label, detections[i].score);
    }
  }

  // Dropped records have no rows, so each dropping interval is one virtual
  // positive that any nearby alarm detects.
  for (const auto &iv : manifest.intervals) {
    if (iv.kind != AttackKind::Dropping) {
      continue;
    }
    const double until = iv.t_end + options.dropping_grace_periods * options.nominal_period_s;
    bool hit = false;
    double best = kNoEvidenceScore;
    for (const auto &d : detections) {
      if (d.timestamp >= iv.t_start && d.timestamp <= until) {
        hit = hit || d.alarm();
        best = std::min(best, d.alarm() ? std::min(d.score, -kNoEvidenceScore) : d.score);
      }
    }
    const auto k = static_cast<std::size_t>(AttackKind::Dropping);
    add(kind_counts[k], true, hit);
    kind_scored[k].push(true, best);
  }

  AttackReport report;
  ConfusionCounts overall = clean;
  Scored overall_scored = clean_scored;
  for (std::size_t k = 0; k < kinds; ++k) {
    if (!present[k]) {
      continue;
    }
    overall += kind_counts[k];
    overall_scored.append(kind_scored[k]);

    KindReport row;
    row.kind = to_string(kAllAttackKinds[k]);
    row.records = kind_records[k];
    ConfusionCounts whole = kind_counts[k];
    whole += clean;
    row.whole = metrics(whole);
    row.interval = metrics(kind_counts[k]);
    Scored sel = kind_scored[k];
    sel.append(clean_scored);
    row.roc = sel.roc();
    report.kinds.push_back(std::move(row));
  }
  if (clean.total() > 0) {
    KindReport row;
    row.kind = kNoAttack;
    row.records = clean.total();
    row.whole = metrics(clean);
    row.interval = row.whole;
    report.kinds.push_back(std::move(row));
  }
  report.overall = metrics(overall);
  report.overall_roc = overall_scored.roc();
  return report;
}

double metric_value(const Metrics &m, const std::string &metric) {
  if (metric == "accuracy") return m.accuracy;
  if (metric == "precision") return m.precision;
  if (metric == "recall") return m.recall;
  if (metric == "f1") return m.f1;
  if (metric == "fpr") return m.fpr;
  fail(ErrorCode::InvalidArgument, "unknown metric " + metric);
}

std::string format_report_csv(const AttackReport &r, const std::string &provenance) {
  std::ostringstream out;
  out << comment_block(provenance) << "metric,attack_kind,value\n";
  auto emit = [&](const std::string &prefix, const std::string &kind, const Metrics &m) {
    out << prefix << "accuracy," << kind << ',' << fmt(m.accuracy) << '\n';
    out << prefix << "precision," << kind << ',' << fmt(m.precision) << '\n';
    out << prefix << "recall," << kind << ',' << fmt(m.recall) << '\n';
    out << prefix << "f1," << kind << ',' << fmt(m.f1) << '\n';
    out << prefix << "fpr," << kind << ',' << fmt(m.fpr) << '\n';
    out << prefix << "tp," << kind << ',' << m.counts.tp << '\n';
    out << prefix << "tn," << kind << ',' << m.counts.tn << '\n';
    out << prefix << "fp," << kind << ',' << m.counts.fp << '\n';
    out << prefix << "fn," << kind << ',' << m.counts.fn << '\n';
    auto flag = [&](const char *name, bool v) {
      if (v) {
        out << prefix << name << "_undefined," << kind << ",1\n";
      }
    };
    flag("precision", m.precision_undefined);
    flag("recall", m.recall_undefined);
    flag("f1", m.f1_undefined);
    flag("fpr", m.fpr_undefined);
  };
  emit("", kOverall, r.overall);
  if (r.overall_roc) {
    out << "auc," << kOverall << ',' << fmt(r.overall_roc->auc) << '\n';
  }
  for (const auto &k : r.kinds) {
    emit("", k.kind, k.whole);
    if (k.roc) {
      out << "auc," << k.kind << ',' << fmt(k.roc->auc) << '\n';
    }
    if (k.kind != kNoAttack) {
      emit("interval_", k.kind, k.interval);
    }
  }
  return out.str();
}

std::string format_report_table(const AttackReport &r, const std::string &title) {
  std::ostringstream out;
  out << title << '\n';
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %9s %9s %9s %9s %9s %9s\n", "attack", "accuracy",
                "precision", "recall", "f1", "fpr", "auc");
  out << line;
  auto row = [&](const std::string &name, const Metrics &m, const std::optional<RocResult> &roc) {
    std::snprintf(line, sizeof line, "%-12s %9s %9s %9s %9s %9s %9s\n", name.c_str(),
                  fixed(m.accuracy).c_str(),
                  m.precision_undefined ? "undef" : fixed(m.precision).c_str(),
                  m.recall_undefined ? "undef" : fixed(m.recall).c_str(),
                  m.f1_undefined ? "undef" : fixed(m.f1).c_str(), fixed(m.fpr).c_str(),
                  roc ? fixed(roc->auc).c_str() : "-");
    out << line;
  };
  for (const auto &k : r.kinds) {
    row(k.kind, k.whole, k.roc);
  }
  row(kOverall, r.overall, r.overall_roc);
  return out.str();
}

std::string format_comparison(std::span<const std::pair<std::string, AttackReport>> reports,
                              const std::string &metric) {
  std::ostringstream out;
  out << metric << " by attack scenario\n";
  char cell[64];
  std::snprintf(cell, sizeof cell, "%-12s", "attack");
  out << cell;
  for (const auto &[name, _] : reports) {
    std::snprintf(cell, sizeof cell, " %10s", name.c_str());
    out << cell;
  }
  out << '\n';
  std::vector<std::string> rows;
  for (const auto &[_, rep] : reports) {
    for (const auto &k : rep.kinds) {
      if (std::find(rows.begin(), rows.end(), k.kind) == rows.end()) {
        rows.push_back(k.kind);
      }
    }
  }
  rows.push_back(kOverall);
  for (const auto &name : rows) {
    std::snprintf(cell, sizeof cell, "%-12s", name.c_str());
    out << cell;
    for (const auto &[_, rep] : reports) {
      const Metrics *m = name == kOverall ? &rep.overall : nullptr;
      for (const auto &k : rep.kinds) {
        if (k.kind == name) {
          m = &k.whole;
        }
      }
      std::snprintf(cell, sizeof cell, " %10s", m ? fixed(metric_value(*m, metric)).c_str() : "-");
      out << cell;
    }
    out << '\n';
  }
  return out.str();
}

std::string format_roc_csv(const RocResult &roc, const std::string &provenance) {
  std::ostringstream out;
  out << comment_block(provenance) << "fpr,tpr\n";
  for (const auto &p : roc.points) {
    out << fmt(p.fpr) << ',' << fmt(p.tpr) << '\n';
  }
  return out.str();
}

std::string format_detections(std::span<const Detection> d, const std::string &provenance) {
  std::ostringstream out;
  out << comment_block(provenance) << "timestamp,disposition,score,rate\n";
  for (const auto &x : d) {
    out << fmt(x.timestamp) << ',' << to_string(x.disposition) << ',' << fmt(x.score) << ','
        << to_string(x.rate) << '\n';
  }
  return out.str();
}

std::vector<Detection> parse_detections(const std::string &text, const std::string &origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  std::vector<Detection> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty() || line[0] == '#') {
      continue;
    }
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (!header) {
      require(line == "timestamp,disposition,score,rate" || line == "timestamp,disposition,score",
              ErrorCode::Format, where + "unexpected header '" + line + "'");
      header = true;
      continue;
    }
    const auto cells = split(line);
    require(cells.size() == 3 || cells.size() == 4, ErrorCode::Format,
            where + "expected 3 or 4 columns, found " + std::to_string(cells.size()));
    Detection d;
    try {
      std::size_t used = 0;
      d.timestamp = std::stod(cells[0], &used);
      require(used == cells[0].size(), ErrorCode::Format, where + "bad timestamp");
      d.score = std::stod(cells[2], &used);
      require(used == cells[2].size(), ErrorCode::Format, where + "bad score");
    } catch (const std::logic_error &) {
      fail(ErrorCode::Format, where + "non-numeric value");
    }
    const auto disp = parse_disposition(cells[1]);
    require(disp.has_value(), ErrorCode::Format, where + "unknown disposition '" + cells[1] + "'");
    d.disposition = *disp;
    if (cells.size() == 4) {
      const auto rv = parse_rate_verdict(cells[3]);
      require(rv.has_value(), ErrorCode::Format, where + "unknown rate verdict '" + cells[3] + "'");
      d.rate = *rv;
    }
    require(out.empty() || d.timestamp >= out.back().timestamp, ErrorCode::Format,
            where + "timestamps decrease");
    out.push_back(d);
  }
  require(header, ErrorCode::Format, origin + ": missing header");
  return out;
}

std::vector<Detection> load_detections(const std::string &path, std::string *provenance) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (provenance != nullptr) {
    provenance->clear();
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line) && !line.empty() && line[0] == '#') {
      *provenance += line.substr(line.rfind("# ", 0) == 0 ? 2 : 1) + "\n";
    }
  }
  return parse_detections(text, path);
}

} // namespace canids

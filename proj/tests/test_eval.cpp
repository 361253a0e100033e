#include <doctest.h>

#include "error.hpp"
#include "eval.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

using namespace canids;

namespace {

using Labels = std::vector<std::uint8_t>;

struct Instance {
  Labels labels;
  std::vector<double> scores;
};

Instance random_instance(std::size_t n, std::uint64_t seed, int levels) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Instance in;
  do {
    in.labels.clear();
    in.scores.clear();
    for (std::size_t i = 0; i < n; ++i) {
      in.labels.push_back(u(rng) < 0.4);
      // positives lean low; levels > 0 quantises so ties are common
      double s = u(rng) - 0.3 * in.labels.back();
      if (levels > 0) {
        s = std::round(s * levels) / levels;
      }
      in.scores.push_back(s);
    }
  } while (std::count(in.labels.begin(), in.labels.end(), 1) == 0 ||
           std::count(in.labels.begin(), in.labels.end(), 0) == 0);
  return in;
}

Detection det(double t, Disposition d, double score = 0.0, RateVerdict r = RateVerdict::Ok) {
  Detection x;
  x.timestamp = t;
  x.disposition = d;
  x.score = score;
  x.rate = r;
  return x;
}

const KindReport *row(const AttackReport &r, const std::string &kind) {
  for (const auto &k : r.kinds) {
    if (k.kind == kind) {
      return &k;
    }
  }
  return nullptr;
}

} // namespace

TEST_CASE("confusion counts") {
  const Labels a = {1, 0}, pa = {1, 0};
  CHECK(confusion(a, pa) == ConfusionCounts{1, 1, 0, 0});
  const Labels b = {1, 1, 0, 0}, pb = {1, 0, 1, 0};
  CHECK(confusion(b, pb) == ConfusionCounts{1, 1, 1, 1});
  const Labels z(7, 0);
  const ConfusionCounts c = confusion(z, z);
  CHECK(c.tn == 7);
  CHECK(c.tp + c.fp + c.fn == 0);
}

TEST_CASE("metrics arithmetic") {
  const Metrics m = metrics(ConfusionCounts{2, 6, 1, 1});
  CHECK(m.precision == doctest::Approx(2.0 / 3));
  CHECK(m.recall == doctest::Approx(2.0 / 3));
  CHECK(m.f1 == doctest::Approx(2.0 / 3));
  CHECK(m.accuracy == doctest::Approx(0.8));
  CHECK(m.fpr == doctest::Approx(1.0 / 7));
  const Metrics p = metrics(ConfusionCounts{5, 5, 0, 0});
  CHECK(p.accuracy == 1.0);
  CHECK(p.f1 == 1.0);
  CHECK(p.fpr == 0.0);
  const Metrics u = metrics(ConfusionCounts{0, 4, 0, 2});
  CHECK(u.precision == 0.0);
  CHECK(u.precision_undefined);
  CHECK(!u.recall_undefined);
}

TEST_CASE("property: metrics are permutation invariant") {
  std::mt19937_64 rng(7);
  const auto in = random_instance(200, 1, 0);
  Labels pred;
  for (double s : in.scores) {
    pred.push_back(s < 0.3);
  }
  const ConfusionCounts c = confusion(in.labels, pred);
  std::vector<std::size_t> idx(200);
  std::iota(idx.begin(), idx.end(), 0);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(idx.begin(), idx.end(), rng);
    Labels l2, p2;
    for (auto i : idx) {
      l2.push_back(in.labels[i]);
      p2.push_back(pred[i]);
    }
    CHECK(confusion(l2, p2) == c);
    CHECK(metrics(confusion(l2, p2)).f1 == metrics(c).f1);
  }
}

TEST_CASE("auc: separated and all tied") {
  const Labels l = {1, 1, 0, 0};
  const std::vector<double> sep = {0.1, 0.2, 0.8, 0.9};
  CHECK(roc_auc(l, sep).auc == 1.0);
  const std::vector<double> tied(4, 0.5);
  const RocResult r = roc_auc(l, tied);
  CHECK(r.auc == 0.5);
  CHECK(r.points.size() == 2);
  CHECK_THROWS_AS(roc_auc(Labels{1, 1}, std::vector<double>{0.1, 0.2}), Error);
}

TEST_CASE("auc equals the pairwise statistic") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const int levels = seed % 3 == 0 ? 0 : (seed % 3 == 1 ? 4 : 1);
    const auto in = random_instance(20 + 5 * (seed % 7), seed, levels);
    INFO("seed " << seed);
    CHECK(std::abs(roc_auc(in.labels, in.scores).auc - oracle::pairwise_auc(in.labels, in.scores)) <
          1e-9);
  }
}

TEST_CASE("property: auc invariant under monotone transforms") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto in = random_instance(60, seed + 500, seed % 2 ? 5 : 0);
    const double base = roc_auc(in.labels, in.scores).auc;
    std::vector<double> ex, cube;
    for (double s : in.scores) {
      ex.push_back(std::exp(3 * s));
      cube.push_back(s * s * s + 2 * s);
    }
    CHECK(roc_auc(in.labels, ex).auc == doctest::Approx(base).epsilon(1e-12));
    CHECK(roc_auc(in.labels, cube).auc == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("property: roc curve shape") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto in = random_instance(40, seed + 900, seed % 2 ? 3 : 0);
    const RocResult r = roc_auc(in.labels, in.scores);
    CHECK(r.points.front().fpr == 0.0);
    CHECK(r.points.front().tpr == 0.0);
    CHECK(r.points.back().fpr == 1.0);
    CHECK(r.points.back().tpr == 1.0);
    for (std::size_t i = 1; i < r.points.size(); ++i) {
      CHECK(r.points[i].fpr >= r.points[i - 1].fpr);
      CHECK(r.points[i].tpr >= r.points[i - 1].tpr);
    }
  }
}

TEST_CASE("attack report partitions by manifest interval") {
  // 20 records at 1 s spacing; constant attack on [5, 10)
  std::vector<double> ts;
  Labels labels;
  std::vector<Detection> d;
  for (int i = 0; i < 20; ++i) {
    ts.push_back(i);
    labels.push_back(i >= 5 && i < 10);
    const bool flag = (i >= 6 && i < 10) || i == 15;
    d.push_back(det(i, flag ? Disposition::DroppedAnomalous : Disposition::Delivered,
                    flag ? -1.0 : 1.0));
  }
  AttackManifest m;
  m.intervals.push_back({AttackKind::Constant, 5, 10});
  const AttackReport r = attack_report(ts, labels, d, m);
  REQUIRE(r.kinds.size() == 2);
  CHECK(r.kinds[0].kind == "Constant");
  CHECK(r.kinds[1].kind == kNoAttack);
  CHECK(r.overall.counts == ConfusionCounts{4, 14, 1, 1});
  CHECK(r.kinds[0].interval.counts == ConfusionCounts{4, 0, 0, 1});
  CHECK(r.kinds[1].whole.counts == ConfusionCounts{0, 14, 1, 0});
  CHECK(r.kinds[0].whole.counts == r.overall.counts);
  ConfusionCounts sum = r.kinds[0].interval.counts;
  sum += r.kinds[1].whole.counts;
  CHECK(sum == r.overall.counts);
  CHECK(r.kinds[0].records == 5);
}

TEST_CASE("per-kind counts add up to the overall counts") {
  std::mt19937_64 rng(3);
  std::vector<double> ts;
  Labels labels;
  std::vector<Detection> d;
  AttackManifest m;
  m.intervals.push_back({AttackKind::Constant, 10, 20});
  m.intervals.push_back({AttackKind::Replay, 30, 40});
  m.intervals.push_back({AttackKind::Continuous, 50, 60});
  for (int i = 0; i < 80; ++i) {
    ts.push_back(i);
    labels.push_back(m.interval_at(i).has_value());
    d.push_back(det(i, rng() % 3 == 0 ? Disposition::DroppedAnomalous : Disposition::Delivered));
  }
  const AttackReport r = attack_report(ts, labels, d, m);
  ConfusionCounts sum;
  for (const auto &k : r.kinds) {
    sum += k.kind == kNoAttack ? k.whole.counts : k.interval.counts;
  }
  CHECK(sum == r.overall.counts);
}

TEST_CASE("dropping interval is one virtual positive") {
  // hand-labelled stream: 15 ms frames with [0.30, 0.45) removed
  AttackManifest m;
  m.intervals.push_back({AttackKind::Dropping, 0.30, 0.45});
  std::vector<double> ts;
  for (int i = 0; i < 40; ++i) {
    const double t = 0.015 * i;
    if (!m.interval_at(t)) {
      ts.push_back(t);
    }
  }
  REQUIRE(ts.size() == 29);
  const Labels labels(ts.size(), 0);
  std::vector<Detection> quiet, late;
  bool after_gap = false;
  for (double t : ts) {
    quiet.push_back(det(t, Disposition::Delivered, 1.0));
    // the first frame after the gap arrives late
    const bool first_after = t > 0.30 && !after_gap;
    after_gap = after_gap || first_after;
    late.push_back(det(t, Disposition::Delivered, 1.0,
                       first_after ? RateVerdict::TooSlow : RateVerdict::Ok));
  }
  const AttackReport missed = attack_report(ts, labels, quiet, m);
  const AttackReport caught = attack_report(ts, labels, late, m);
  CHECK(row(missed, "Dropping")->interval.counts == ConfusionCounts{0, 0, 0, 1});
  CHECK(row(caught, "Dropping")->interval.counts == ConfusionCounts{1, 0, 0, 0});
  CHECK(caught.overall.counts.tp == 1);
  // a late frame is an alarm, not a dropped record
  CHECK(caught.overall.counts.fp == 0);
}

TEST_CASE("report rejects mismatches") {
  const std::vector<double> ts = {0, 1, 2};
  const Labels labels = {0, 1, 0};
  const std::vector<Detection> d = {det(0, Disposition::Delivered), det(1, Disposition::Delivered),
                                    det(2, Disposition::Delivered)};
  AttackManifest none;
  CHECK_THROWS_AS(attack_report(ts, labels, d, none), Error);
  const std::vector<Detection> short_d = {det(0, Disposition::Delivered)};
  AttackManifest m;
  m.intervals.push_back({AttackKind::Constant, 1, 2});
  CHECK_THROWS_AS(attack_report(ts, labels, short_d, m), Error);
  CHECK_NOTHROW(attack_report(ts, labels, d, m));
}

TEST_CASE("report csv rows") {
  std::vector<double> ts;
  Labels labels;
  std::vector<Detection> d;
  for (int i = 0; i < 10; ++i) {
    ts.push_back(i);
    labels.push_back(i >= 3 && i < 6);
    d.push_back(det(i, i == 4 ? Disposition::DroppedAnomalous : Disposition::Delivered,
                    i == 4 ? -1 : 1));
  }
  AttackManifest m;
  m.intervals.push_back({AttackKind::Constant, 3, 6});
  const std::string csv = format_report_csv(attack_report(ts, labels, d, m), "canids\nseed: 1");
  CHECK(csv.find("# seed: 1\n") != std::string::npos);
  CHECK(csv.find("metric,attack_kind,value\n") != std::string::npos);
  CHECK(csv.find("accuracy,Constant,") != std::string::npos);
  CHECK(csv.find("f1,No attack,") != std::string::npos);
  CHECK(csv.find("tp,Overall,1\n") != std::string::npos);
}

TEST_CASE("detections round trip") {
  std::vector<Detection> d = {det(0, Disposition::Delivered, 1e9, RateVerdict::Ok),
                              det(0.015, Disposition::DroppedAnomalous, -0.0125, RateVerdict::Ok),
                              det(0.0165, Disposition::DroppedRateViolation, -1e9,
                                  RateVerdict::TooFast),
                              det(0.09, Disposition::Delivered, 0.25, RateVerdict::TooSlow)};
  const std::string text = format_detections(d, "variant: Diff");
  CHECK(text.find("timestamp,disposition,score,rate\n") != std::string::npos);
  CHECK(parse_detections(text) == d);
  const std::string path = std::string(CANIDS_TEST_TMP) + "/dets_rt.csv";
  std::ofstream(path) << text;
  std::string prov;
  CHECK(load_detections(path, &prov) == d);
  CHECK(prov == "variant: Diff\n");
  CHECK_THROWS_AS(parse_detections("timestamp,disposition,score,rate\n0,maybe,1,ok\n"), Error);
}

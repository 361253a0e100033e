// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include "baselines.hpp"
#include "config.hpp"
#include "controller.hpp"
#include "detector.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "ocsvm.hpp"
#include "oracles.hpp"
#include "pipeline.hpp"
#include "predictor.hpp"
#include "tracegen.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace canids;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char *f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Eigen::MatrixXd gaussian(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 1);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x.data()[i] = g(rng);
  }
  return x;
}

// ---- 1 ----------------------------------------------------------------

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  PredictorHyper h;
  h.subsequence_length = 4;
  h.embed_dim = 8;
  h.hidden_dim = 8;
  PredictorModel m = build_model(2, h, 1);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  Eigen::MatrixXd signals(2, 16);
  for (Eigen::Index i = 0; i < signals.size(); ++i) {
    signals.data()[i] = u(rng);
  }
  const std::vector<std::size_t> starts = {0, 5, 11};
  const WindowBatch b = make_batch(signals, 4, starts);
  PredictorWeights grad = m.weights;
  grad.set_zero();
  loss_and_gradient(m, b, &grad);
  auto views = m.weights.views();
  auto gviews = grad.views();
  std::vector<std::span<const double>> analytic;
  for (auto &g : gviews) {
    analytic.emplace_back(g.values.data(), g.values.size());
  }
  const auto r =
      nn::grad_check_squares([&] { return loss_terms(m, b); }, views, analytic, 1e-4);
  std::size_t entries = 0;
  for (const auto &blk : r.blocks) {
    entries += blk.checked;
  }
  const double secs = seconds_since(t0);
  return {r.passed() && !r.blocks.empty() && secs < 60,
          format("worst relative error %.2e over %zu blocks / %zu entries (< 1e-4), %.1f s",
                 r.max_rel_error(), r.blocks.size(), entries, secs)};
}

// ---- 2 ----------------------------------------------------------------

Outcome ocsvm_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const double nus[] = {0.1, 0.3, 0.5};
  double worst_alpha = 0.0;
  int worst_agree = 100;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 8 + seed % 18; // 8..25
    const std::size_t d = 1 + seed % 3;
    const double nu = nus[(seed / 3) % 3];
    const auto x = gaussian(n, d, 1000 + seed);
    OcsvmParams p;
    p.nu = nu;
    p.tol = 1e-10;
    const OcsvmModel m = fit_ocsvm(x, p);
    const auto o = oracle::solve_ocsvm_dual(x, nu, 1.0 / static_cast<double>(d));
    worst_alpha = std::max(worst_alpha, (dense_alphas(m) - o.alpha).cwiseAbs().maxCoeff());
    int agree = 0;
    for (const auto &q : oracle::decision_grid(d)) {
      agree += (ocsvm_decision(m, q) < 0) == (o.decision(q) < 0);
    }
    worst_agree = std::min(worst_agree, agree);
  }
  const double secs = seconds_since(t0);
  return {worst_alpha < 1e-3 && worst_agree == 100 && secs < 60,
          format("20 instances: max |alpha - oracle| %.2e (< 1e-3), min sign agreement %d/100, "
                 "%.1f s",
                 worst_alpha, worst_agree, secs)};
}

// ---- 3 ----------------------------------------------------------------

Outcome nu_property() {
  const auto x = gaussian(200, 2, 3);
  OcsvmParams p;
  p.nu = 0.1;
  // the guarantee is a property of the optimum, so solve to QP accuracy
  p.tol = 1e-10;
  const OcsvmModel m = fit_ocsvm(x, p);
  std::size_t outside = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    outside += ocsvm_decision(m, Eigen::VectorXd(x.row(i).transpose())) < 0;
  }
  const double out_frac = static_cast<double>(outside) / 200.0;
  const double sv_frac = static_cast<double>(m.support_count()) / 200.0;
  return {out_frac <= 0.1 + 1.0 / 200 && sv_frac >= 0.1 - 1.0 / 200,
          format("outlier fraction %.3f (<= 0.105), support fraction %.3f (>= 0.095)", out_frac,
                 sv_frac)};
}

// ---- 4 ----------------------------------------------------------------

Outcome predictor_learning() {
  const auto t0 = std::chrono::steady_clock::now();
  MessageSchema s;
  s.message_id = 0x244;
  s.signal_names = {"wave", "ramp", "walk"};
  SignalGenSpec sine;
  sine.lo = -1.5;
  sine.hi = 1.5;
  sine.amplitude = 1.0;
  sine.period_s = 2.0;
  sine.noise_std = 0.002;
  // 50 steps per cycle; the reset is the part persistence cannot predict
  SignalGenSpec ramp;
  ramp.kind = SignalKind::RampReset;
  ramp.lo = 0;
  ramp.hi = 100;
  ramp.period_s = 0.75;
  // bounded tightly enough that training visits the whole range
  SignalGenSpec walk;
  walk.kind = SignalKind::RandomWalk;
  walk.lo = -1;
  walk.hi = 1;
  walk.step = 0.02;
  const Trace t = generate_normal(s, {sine, ramp, walk}, 20000 * 0.015, 21);
  auto [train_raw, val_raw] = split_train_val(t, 0.8);
  auto [train_s, p] = fit_and_scale(train_raw);
  const Trace val_s = apply_scaling(val_raw, p);

  PredictorHyper h;
  h.subsequence_length = 8;
  h.embed_dim = 32;
  h.hidden_dim = 32;
  h.batch_size = 64;
  h.learning_rate = 3e-3;
  h.max_epochs = 100;
  h.patience = 10;
  const TrainResult r = train(build_model(3, h, 4), train_s, val_s, h);
  const double val = evaluate_loss(r.model, val_s);
  const double persist = persistence_mse(val_s, h.subsequence_length);
  const double secs = seconds_since(t0);
  return {t.size() == 20000 && val < 0.25 * persist && secs < 900,
          format("%zu steps: validation MSE %.3e vs persistence %.3e (ratio %.3f < 0.25), "
                 "%zu epochs, %.0f s",
                 t.size(), val, persist, val / persist, r.history.epochs.size(), secs)};
}

// ---- 5, 6, 7 ----------------------------------------------------------

const char *kModelVariants[] = {"Diff", "ST", "Sum", "Avg", "Max"};
const char *kBaselines[] = {"SMA-BB", "EWMA-BB", "LOF"};

struct SeedResult {
  std::map<std::string, double> suite_f1;      // default suite, overall
  std::map<std::string, double> continuous_f1; // continuous-only scenario
  double constant_auc = 0.0;                   // Diff, constant-only scenario
  double constant_offset = 0.0;
};

const AttackSpec &find_spec(const std::vector<AttackSpec> &specs, AttackKind kind) {
  for (const auto &s : specs) {
    if (s.kind == kind) {
      return s;
    }
  }
  fail(ErrorCode::InvalidArgument, "suite has no " + to_string(kind) + " attack");
}

AttackReport evaluate(const Trace &attacked, const AttackManifest &manifest,
                      const std::vector<Detection> &d) {
  std::vector<double> ts;
  for (const auto &r : attacked.records) {
    ts.push_back(r.timestamp);
  }
  ReportOptions o;
  o.nominal_period_s = attacked.schema.nominal_period_s();
  return attack_report(ts, attacked.labels(), d, manifest, o);
}

SeedResult run_seed(const ExperimentConfig &base, std::uint64_t seed) {
  ExperimentConfig cfg = base;
  cfg.seed = seed;
  const Trace train_t = generate_normal(cfg.schema, cfg.generator.signals,
                                        cfg.generator.duration_s, cfg.generator_seed());
  const Trace clean = generate_normal(cfg.schema, cfg.generator.signals, cfg.generator.duration_s,
                                      cfg.generator_seed() + 1000);
  auto [tr, va] = split_train_val(train_t, cfg.train_ratio);
  auto [tr_s, scaling] = fit_and_scale(tr);
  const PredictorModel model =
      train(build_model(cfg.schema.signal_count(), cfg.predictor, cfg.model_seed()), tr_s,
            apply_scaling(va, scaling), cfg.predictor)
          .model;
  const Trace train_scaled = apply_scaling(train_t, scaling);
  const std::size_t k = cfg.schema.signal_count();

  std::map<std::string, Detector> dets;
  for (const char *v : kModelVariants) {
    dets[v] = fit_detector(model, train_scaled, *parse_variant(v), cfg.detector);
  }
  for (const char *v : kBaselines) {
    dets[v] = make_baseline_detector(*parse_variant(v), k, cfg.baselines);
  }
  auto detect = [&](const std::string &v, const Trace &attacked) {
    const Detector &d = dets.at(v);
    if (is_model_variant(d.variant)) {
      return run_online(attacked, model, d, scaling, cfg.online);
    }
    return run_baseline(apply_scaling(attacked, scaling), d);
  };

  SeedResult out;
  const auto suite = default_attack_suite(clean, cfg.attacks.target_signal);
  AttackManifest m_suite;
  const Trace attacked = inject_attacks(clean, suite, cfg.attack_seed(), &m_suite);
  for (const char *v : kModelVariants) {
    out.suite_f1[v] = evaluate(attacked, m_suite, detect(v, attacked)).overall.f1;
  }

  AttackManifest m_cont;
  const Trace cont = inject_attacks(clean, {find_spec(suite, AttackKind::Continuous)},
                                    cfg.attack_seed(), &m_cont);
  for (const char *v : {"Diff", "SMA-BB", "EWMA-BB", "LOF"}) {
    out.continuous_f1[v] = evaluate(cont, m_cont, detect(v, cont)).overall.f1;
  }

  // the suite's constant attack, forced 0.2 of the scaled range above the clean maximum
  AttackSpec cs = find_spec(suite, AttackKind::Constant);
  double hi = -INFINITY;
  for (const auto &r : clean.records) {
    hi = std::max(hi, r.signals[cs.target_signal]);
  }
  cs.value = hi + 0.2 * scaling.range(cs.target_signal);
  AttackManifest m_const;
  const Trace constant = inject_attacks(clean, {cs}, cfg.attack_seed(), &m_const);
  const AttackReport rc = evaluate(constant, m_const, detect("Diff", constant));
  out.constant_auc = rc.overall_roc ? rc.overall_roc->auc : 0.0;
  out.constant_offset = (cs.value - hi) / scaling.range(cs.target_signal);
  return out;
}

const std::vector<SeedResult> &scenario_results() {
  static const std::vector<SeedResult> results = [] {
    const ExperimentConfig cfg = load_config(std::string(CANIDS_CONFIG_DIR) + "/acceptance.yaml");
    std::vector<SeedResult> r;
    for (std::uint64_t s = 0; s < 3; ++s) {
      r.push_back(run_seed(cfg, cfg.seed + 10 * s));
    }
    return r;
  }();
  return results;
}

Outcome variant_ordering() {
  const auto &res = scenario_results();
  std::map<std::string, double> mean;
  for (const auto &r : res) {
    for (const auto &[v, f1] : r.suite_f1) {
      mean[v] += f1 / static_cast<double>(res.size());
    }
  }
  bool pass = true;
  std::string detail = "mean F1 over 3 seeds:";
  for (const char *v : kModelVariants) {
    detail += format(" %s %.3f", v, mean[v]);
    pass = pass && mean["Diff"] >= mean[v];
  }
  return {pass, detail};
}

Outcome baseline_ordering() {
  const auto &res = scenario_results();
  bool pass = true;
  std::string detail = "continuous-attack F1 per seed (Diff / SMA-BB / EWMA-BB / LOF):";
  for (const auto &r : res) {
    const auto &f = r.continuous_f1;
    detail += format(" [%.3f %.3f %.3f %.3f]", f.at("Diff"), f.at("SMA-BB"), f.at("EWMA-BB"),
                     f.at("LOF"));
    for (const char *b : kBaselines) {
      pass = pass && f.at("Diff") >= f.at(b);
    }
  }
  return {pass, detail};
}

Outcome constant_floor() {
  const auto &res = scenario_results();
  bool pass = true;
  std::string detail = "Diff AUC on the constant attack per seed:";
  for (const auto &r : res) {
    detail += format(" %.3f (offset %.4f)", r.constant_auc, r.constant_offset);
    pass = pass && r.constant_auc >= 0.9 && r.constant_offset >= 0.2 - 1e-12;
  }
  return {pass, detail};
}

// ---- 8 ----------------------------------------------------------------

Outcome rate_precheck() {
  MessageSchema s;
  s.message_id = 0x50;
  s.signal_names = {"x"};
  SignalGenSpec g;
  const Trace clean = generate_normal(s, {g}, 10000 * 0.015, 3);
  RateChecker exact(0.015, 0.2);
  std::size_t violations = 0;
  for (const auto &r : clean.records) {
    violations += exact.check(r.timestamp) != RateVerdict::Ok;
  }

  AttackSpec a;
  a.kind = AttackKind::DDoS;
  a.t_start = 60.0;
  a.t_end = 61.5;
  a.multiplier = 10.0;
  const Trace flooded = inject_attack(clean, a, 5);
  RateChecker rc(0.015, 0.2);
  std::size_t since = 0, first = 0;
  for (const auto &r : flooded.records) {
    const RateVerdict v = rc.check(r.timestamp);
    if (r.timestamp >= a.t_start) {
      ++since;
      if (v == RateVerdict::TooFast && first == 0) {
        first = since;
      }
    }
  }
  return {clean.size() == 10000 && violations == 0 && first >= 1 && first <= 3,
          format("flood flagged at frame %zu after onset (<= 3); %zu violations on %zu clean "
                 "frames",
                 first, violations, clean.size())};
}

// ---- 9 ----------------------------------------------------------------

Outcome metrics_oracle() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    const std::size_t n = 20 + seed * 7;
    const int levels = seed % 2 == 0 ? 0 : static_cast<int>(2 + seed % 5); // odd seeds tie-heavy
    std::vector<std::uint8_t> labels;
    std::vector<double> scores;
    for (std::size_t i = 0; i < n; ++i) {
      labels.push_back(i % 3 == 0 ? 1 : u(rng) < 0.3);
      double sc = u(rng) - 0.25 * labels.back();
      if (levels) {
        sc = std::round(sc * levels) / levels;
      }
      scores.push_back(sc);
    }
    worst = std::max(worst, std::abs(roc_auc(labels, scores).auc -
                                     oracle::pairwise_auc(labels, scores)));
  }
  return {worst < 1e-9, format("50 score sets (25 tie-heavy): max |trapezoid - pairwise| %.2e",
                               worst)};
}

// ---- 10 ---------------------------------------------------------------

Outcome determinism() {
  const std::string d = std::string(CANIDS_TEST_TMP) + "/acceptance";
  fs::remove_all(d);
  fs::create_directories(d);
  ExperimentConfig cfg = load_config(std::string(CANIDS_CONFIG_DIR) + "/acceptance.yaml");
  cfg.generator.duration_s = 15;
  cfg.predictor.max_epochs = 3;
  cfg.predictor.patience = 2;
  cmd_gen(cfg, d + "/a.csv");
  cmd_gen(cfg, d + "/b.csv");
  cmd_train(d + "/a.csv", cfg, d + "/a.bin");
  cmd_train(d + "/b.csv", cfg, d + "/b.bin");
  const bool traces_same = slurp(d + "/a.csv") == slurp(d + "/b.csv");
  const bool models_same = slurp(d + "/a.bin") == slurp(d + "/b.bin");

  std::string prov;
  const PredictorModel m = load_model(d + "/a.bin", std::nullopt, &prov);
  save_model(m, d + "/c.bin", prov);
  const bool model_rt = load_model(d + "/c.bin") == m && slurp(d + "/c.bin") == slurp(d + "/a.bin");

  const Trace t = load_trace(d + "/a.csv", cfg.schema);
  write_trace(d + "/t.csv", t, read_header_comments(d + "/a.csv"));
  const bool trace_rt = load_trace(d + "/t.csv", cfg.schema) == t &&
                        slurp(d + "/t.csv") == slurp(d + "/a.csv");
  return {traces_same && models_same && model_rt && trace_rt,
          format("rerun trace identical: %s, rerun model identical: %s, model round trip: %s, "
                 "trace round trip: %s",
                 traces_same ? "yes" : "no", models_same ? "yes" : "no", model_rt ? "yes" : "no",
                 trace_rt ? "yes" : "no")};
}

// ---- 11 ---------------------------------------------------------------

Outcome parameter_count() {
  const std::size_t k = 3, e = 128, h = 64;
  const std::size_t embed = e * k + e;
  const std::size_t enc1 = 4 * h * (e + h) + 4 * h;
  const std::size_t lstm_hh = 4 * h * (h + h) + 4 * h; // enc2, dec1, dec2
  const std::size_t attn = h * h + h;
  const std::size_t combine = h * 2 * h + h;
  const std::size_t out = k * h + k;
  const std::size_t hand = embed + enc1 + 3 * lstm_hh + attn + combine + out;
  const std::size_t built = build_model(k, PredictorHyper{}, 1).parameter_count();
  return {built == hand && expected_parameter_count(k, e, h) == hand,
          format("k=3 E=128 H=64: build_model %zu, hand sum %zu. Note: the reported reference "
                 "figure is 331k, about 2x this count; the documented layers do not account "
                 "for the difference (informational, not gated)",
                 built, hand)};
}

} // namespace

int main(int argc, char **argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradient_check},
      {"OCSVM oracle equivalence", ocsvm_oracle},
      {"nu-property", nu_property},
      {"predictor learning vs persistence", predictor_learning},
      {"variant ordering (Diff >= ST/Sum/Avg/Max)", variant_ordering},
      {"baseline ordering on continuous attack", baseline_ordering},
      {"constant-attack AUC floor", constant_floor},
      {"DDoS rate pre-check", rate_precheck},
      {"ROC-AUC vs pairwise oracle", metrics_oracle},
      {"determinism and round trips", determinism},
      {"parameter count", parameter_count},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    only.insert(std::atoi(argv[i]));
  }
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) {
      continue;
    }
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception &e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id,
                criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

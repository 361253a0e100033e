#include "config.hpp"

#include "error.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

namespace canids {

namespace {

class Reader {
public:
  explicit Reader(std::string origin) : origin_(std::move(origin)) {}

  [[noreturn]] void error(const YAML::Node &at, const std::string &msg) const {
    const int line = at.IsDefined() ? at.Mark().line : -1;
    if (line < 0) {
      fail(ErrorCode::Config, origin_ + ": " + msg);
    }
    fail(ErrorCode::Config, origin_ + ":" + std::to_string(line + 1) + ": " + msg);
  }

  void keys(const YAML::Node &map, const std::string &section,
            std::initializer_list<const char *> allowed) const {
    if (!map.IsMap()) {
      error(map, "'" + section + "' must be a mapping");
    }
    for (const auto &kv : map) {
      const std::string key = kv.first.as<std::string>();
      bool ok = false;
      for (const char *a : allowed) {
        ok = ok || key == a;
      }
      if (!ok) {
        error(kv.first, "unknown key '" + key + "' in '" + section + "'");
      }
    }
  }

  std::string str(const YAML::Node &n, const std::string &what) const {
    if (!n.IsScalar()) {
      error(n, "'" + what + "' must be a scalar");
    }
    return n.Scalar();
  }

  double real(const YAML::Node &n, const std::string &what) const {
    const std::string s = str(n, what);
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used == s.size() && std::isfinite(v)) {
        return v;
      }
    } catch (const std::logic_error &) {
    }
    error(n, "'" + what + "' must be a finite number, got '" + s + "'");
  }

  std::uint64_t count(const YAML::Node &n, const std::string &what) const {
    const std::string s = str(n, what);
    try {
      std::size_t used = 0;
      const long long v = std::stoll(s, &used, 0);
      if (used == s.size() && v >= 0) {
        return static_cast<std::uint64_t>(v);
      }
    } catch (const std::logic_error &) {
    }
    error(n, "'" + what + "' must be a non-negative integer, got '" + s + "'");
  }

  bool boolean(const YAML::Node &n, const std::string &what) const {
    const std::string s = str(n, what);
    if (s == "true" || s == "yes" || s == "on") {
      return true;
    }
    if (s == "false" || s == "no" || s == "off") {
      return false;
    }
    error(n, "'" + what + "' must be true or false, got '" + s + "'");
  }

  template <typename F> void optional(const YAML::Node &map, const char *key, F &&apply) const {
    const YAML::Node n = map[key];
    if (n.IsDefined() && !n.IsNull()) {
      apply(n);
    }
  }

  // Re-raises a validation failure at the given node.
  template <typename F> void checked(const YAML::Node &at, F &&fn) const {
    try {
      fn();
    } catch (const Error &e) {
      error(at, e.what());
    }
  }

private:
  std::string origin_;
};

SignalGenSpec parse_generator(const Reader &rd, const YAML::Node &n, std::size_t i) {
  const std::string where = "generator.signals[" + std::to_string(i) + "]";
  rd.keys(n, where,
          {"kind", "lo", "hi", "amplitude", "offset", "period_s", "phase", "step", "hold_s",
           "noise_std"});
  SignalGenSpec g;
  if (!n["kind"].IsDefined()) {
    rd.error(n, where + " needs a 'kind'");
  }
  const auto kind = parse_signal_kind(rd.str(n["kind"], where + ".kind"));
  if (!kind) {
    rd.error(n["kind"], "unknown signal kind '" + n["kind"].Scalar() +
                            "' (expected sine, ramp-reset, random-walk or step-hold)");
  }
  g.kind = *kind;
  rd.optional(n, "lo", [&](const YAML::Node &v) { g.lo = rd.real(v, where + ".lo"); });
  rd.optional(n, "hi", [&](const YAML::Node &v) { g.hi = rd.real(v, where + ".hi"); });
  rd.optional(n, "amplitude", [&](const YAML::Node &v) { g.amplitude = rd.real(v, "amplitude"); });
  rd.optional(n, "offset", [&](const YAML::Node &v) { g.offset = rd.real(v, "offset"); });
  rd.optional(n, "period_s", [&](const YAML::Node &v) { g.period_s = rd.real(v, "period_s"); });
  rd.optional(n, "phase", [&](const YAML::Node &v) { g.phase = rd.real(v, "phase"); });
  rd.optional(n, "step", [&](const YAML::Node &v) { g.step = rd.real(v, "step"); });
  rd.optional(n, "hold_s", [&](const YAML::Node &v) { g.hold_s = rd.real(v, "hold_s"); });
  rd.optional(n, "noise_std", [&](const YAML::Node &v) { g.noise_std = rd.real(v, "noise_std"); });
  if (!(g.lo < g.hi)) {
    rd.error(n, where + ": lo must be below hi");
  }
  if (g.noise_std < 0.0) {
    rd.error(n["noise_std"], where + ": noise_std must be >= 0");
  }
  if ((g.kind == SignalKind::Sine || g.kind == SignalKind::RampReset) && g.period_s <= 0.0) {
    rd.error(n, where + ": period_s must be positive");
  }
  if (g.kind == SignalKind::StepHold && g.hold_s <= 0.0) {
    rd.error(n, where + ": hold_s must be positive");
  }
  return g;
}

FloodPayload parse_payload(const Reader &rd, const YAML::Node &n) {
  const std::string s = rd.str(n, "flood_payload");
  if (s == "repeat-last") {
    return FloodPayload::RepeatLast;
  }
  if (s == "uniform-random") {
    return FloodPayload::UniformRandom;
  }
  rd.error(n, "flood_payload must be repeat-last or uniform-random, got '" + s + "'");
}

AttackSpec parse_attack(const Reader &rd, const YAML::Node &n, std::size_t i) {
  const std::string where = "attacks.list[" + std::to_string(i) + "]";
  rd.keys(n, where,
          {"kind", "signal", "t_start", "t_end", "value", "increment", "source_start",
           "multiplier", "payload"});
  AttackSpec a;
  if (!n["kind"].IsDefined()) {
    rd.error(n, where + " needs a 'kind'");
  }
  const auto kind = parse_attack_kind(rd.str(n["kind"], where + ".kind"));
  if (!kind) {
    rd.error(n["kind"], "unknown attack kind '" + n["kind"].Scalar() + "'");
  }
  a.kind = *kind;
  for (const char *req : {"t_start", "t_end"}) {
    if (!n[req].IsDefined()) {
      rd.error(n, where + " needs '" + req + "'");
    }
  }
  a.t_start = rd.real(n["t_start"], "t_start");
  a.t_end = rd.real(n["t_end"], "t_end");
  if (!(a.t_start < a.t_end)) {
    rd.error(n["t_start"], where + ": t_start must precede t_end");
  }
  rd.optional(n, "signal", [&](const YAML::Node &v) { a.target_signal = rd.count(v, "signal"); });
  rd.optional(n, "value", [&](const YAML::Node &v) { a.value = rd.real(v, "value"); });
  rd.optional(n, "increment", [&](const YAML::Node &v) { a.increment = rd.real(v, "increment"); });
  rd.optional(n, "source_start",
              [&](const YAML::Node &v) { a.source_start = rd.real(v, "source_start"); });
  rd.optional(n, "multiplier", [&](const YAML::Node &v) { a.multiplier = rd.real(v, "multiplier"); });
  rd.optional(n, "payload", [&](const YAML::Node &v) { a.payload = parse_payload(rd, v); });

  auto need = [&](const char *key) {
    if (!n[key].IsDefined()) {
      rd.error(n, where + ": " + to_string(a.kind) + " attack needs '" + key + "'");
    }
  };
  switch (a.kind) {
  case AttackKind::Constant:
    need("value");
    break;
  case AttackKind::Continuous:
    need("value");
    need("increment");
    if (a.increment == 0.0) {
      rd.error(n["increment"], where + ": increment must be non-zero");
    }
    break;
  case AttackKind::Replay:
    need("source_start");
    if (a.source_start + (a.t_end - a.t_start) > a.t_start) {
      rd.error(n["source_start"], where + ": replay source must end before the target starts");
    }
    break;
  case AttackKind::DDoS:
    if (a.multiplier <= 1.0) {
      rd.error(n["multiplier"], where + ": multiplier must exceed 1");
    }
    break;
  case AttackKind::Dropping:
    break;
  }
  return a;
}

} // namespace

std::uint64_t fnv1a64(const std::string &bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig &cfg) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(cfg.source)));
  return buf;
}

ExperimentConfig parse_config(const std::string &text, const std::string &origin) {
  Reader rd(origin);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException &e) {
    fail(ErrorCode::Config,
         origin + ":" + std::to_string(e.mark.line + 1) + ": YAML syntax error: " + e.msg);
  }
  if (!root.IsDefined() || root.IsNull()) {
    fail(ErrorCode::Config, origin + ": configuration is empty");
  }
  rd.keys(root, "top level",
          {"seed", "output_dir", "schema", "generator", "attacks", "predictor", "detector",
           "baselines", "online"});

  ExperimentConfig cfg;
  cfg.source = text;
  cfg.origin = origin;
  rd.optional(root, "seed", [&](const YAML::Node &v) { cfg.seed = rd.count(v, "seed"); });
  rd.optional(root, "output_dir",
              [&](const YAML::Node &v) { cfg.output_dir = rd.str(v, "output_dir"); });

  const YAML::Node schema = root["schema"];
  if (!schema.IsDefined()) {
    rd.error(root, "missing required section 'schema'");
  }
  rd.keys(schema, "schema", {"message_id", "period_ms", "signals"});
  if (!schema["message_id"].IsDefined() || !schema["signals"].IsDefined()) {
    rd.error(schema, "'schema' needs 'message_id' and 'signals'");
  }
  rd.checked(schema["message_id"], [&] {
    cfg.schema.message_id = parse_message_id(rd.str(schema["message_id"], "message_id"));
  });
  rd.optional(schema, "period_ms",
              [&](const YAML::Node &v) { cfg.schema.nominal_period_ms = rd.real(v, "period_ms"); });
  const YAML::Node names = schema["signals"];
  if (!names.IsSequence()) {
    rd.error(names, "'schema.signals' must be a list of names");
  }
  for (const auto &nm : names) {
    cfg.schema.signal_names.push_back(rd.str(nm, "schema.signals"));
  }
  rd.checked(schema, [&] { cfg.schema.validate(); });
  const std::size_t k = cfg.schema.signal_count();

  rd.optional(root, "generator", [&](const YAML::Node &g) {
    rd.keys(g, "generator", {"duration_s", "signals"});
    rd.optional(g, "duration_s",
                [&](const YAML::Node &v) { cfg.generator.duration_s = rd.real(v, "duration_s"); });
    if (cfg.generator.duration_s * 1e3 < cfg.schema.nominal_period_ms) {
      rd.error(g["duration_s"], "generator.duration_s is shorter than one message period");
    }
    const YAML::Node sigs = g["signals"];
    if (sigs.IsDefined()) {
      if (!sigs.IsSequence()) {
        rd.error(sigs, "'generator.signals' must be a list");
      }
      std::size_t i = 0;
      for (const auto &s : sigs) {
        cfg.generator.signals.push_back(parse_generator(rd, s, i++));
      }
      if (cfg.generator.signals.size() != k) {
        rd.error(sigs, "generator.signals has " + std::to_string(cfg.generator.signals.size()) +
                           " entries but the schema declares " + std::to_string(k) + " signals");
      }
    }
  });

  rd.optional(root, "attacks", [&](const YAML::Node &a) {
    rd.keys(a, "attacks", {"default_suite", "target_signal", "flood_payload", "list"});
    rd.optional(a, "default_suite", [&](const YAML::Node &v) {
      cfg.attacks.default_suite = rd.boolean(v, "default_suite");
    });
    rd.optional(a, "target_signal", [&](const YAML::Node &v) {
      cfg.attacks.target_signal = rd.count(v, "target_signal");
      if (cfg.attacks.target_signal >= k) {
        rd.error(v, "attacks.target_signal is out of range for " + std::to_string(k) + " signals");
      }
    });
    rd.optional(a, "flood_payload",
                [&](const YAML::Node &v) { cfg.attacks.flood_payload = parse_payload(rd, v); });
    rd.optional(a, "list", [&](const YAML::Node &l) {
      if (!l.IsSequence()) {
        rd.error(l, "'attacks.list' must be a list");
      }
      std::size_t i = 0;
      for (const auto &spec : l) {
        AttackSpec s = parse_attack(rd, spec, i++);
        if ((s.kind == AttackKind::Constant || s.kind == AttackKind::Continuous) &&
            s.target_signal >= k) {
          rd.error(spec, "attack signal index is out of range");
        }
        cfg.attacks.list.push_back(s);
      }
    });
  });

  rd.optional(root, "predictor", [&](const YAML::Node &p) {
    rd.keys(p, "predictor",
            {"subsequence_length", "embed_dim", "hidden_dim", "batch_size", "learning_rate",
             "max_epochs", "patience", "all_steps_loss", "train_ratio"});
    PredictorHyper &h = cfg.predictor;
    rd.optional(p, "subsequence_length",
                [&](const YAML::Node &v) { h.subsequence_length = rd.count(v, "subsequence_length"); });
    rd.optional(p, "embed_dim", [&](const YAML::Node &v) { h.embed_dim = rd.count(v, "embed_dim"); });
    rd.optional(p, "hidden_dim",
                [&](const YAML::Node &v) { h.hidden_dim = rd.count(v, "hidden_dim"); });
    rd.optional(p, "batch_size",
                [&](const YAML::Node &v) { h.batch_size = rd.count(v, "batch_size"); });
    rd.optional(p, "learning_rate",
                [&](const YAML::Node &v) { h.learning_rate = rd.real(v, "learning_rate"); });
    rd.optional(p, "max_epochs",
                [&](const YAML::Node &v) { h.max_epochs = rd.count(v, "max_epochs"); });
    rd.optional(p, "patience", [&](const YAML::Node &v) { h.patience = rd.count(v, "patience"); });
    rd.optional(p, "all_steps_loss",
                [&](const YAML::Node &v) { h.all_steps_loss = rd.boolean(v, "all_steps_loss"); });
    rd.optional(p, "train_ratio", [&](const YAML::Node &v) {
      cfg.train_ratio = rd.real(v, "train_ratio");
      if (!(cfg.train_ratio > 0.0 && cfg.train_ratio < 1.0)) {
        rd.error(v, "predictor.train_ratio must lie in (0, 1)");
      }
    });
    rd.checked(p, [&] { h.validate(); });
  });

  rd.optional(root, "detector", [&](const YAML::Node &d) {
    rd.keys(d, "detector",
            {"variant", "nu", "gamma", "percentile", "tol", "max_iter", "cache_mb"});
    rd.optional(d, "variant", [&](const YAML::Node &v) {
      const auto var = parse_variant(rd.str(v, "variant"));
      if (!var) {
        rd.error(v, "unknown variant '" + v.Scalar() +
                        "' (expected ST, Diff, Sum, Avg, Max, SMA-BB, EWMA-BB or LOF)");
      }
      cfg.variant = *var;
    });
    OcsvmParams &o = cfg.detector.ocsvm;
    rd.optional(d, "nu", [&](const YAML::Node &v) {
      o.nu = rd.real(v, "nu");
      if (!(o.nu > 0.0 && o.nu <= 1.0)) {
        rd.error(v, "detector.nu must lie in (0, 1]");
      }
    });
    rd.optional(d, "gamma", [&](const YAML::Node &v) {
      if (v.IsScalar() && v.Scalar() == "auto") {
        o.gamma = 0.0;
        return;
      }
      o.gamma = rd.real(v, "gamma");
      if (o.gamma <= 0.0) {
        rd.error(v, "detector.gamma must be positive or 'auto'");
      }
    });
    rd.optional(d, "percentile", [&](const YAML::Node &v) {
      cfg.detector.percentile = rd.real(v, "percentile");
      if (!(cfg.detector.percentile > 50.0 && cfg.detector.percentile <= 100.0)) {
        rd.error(v, "detector.percentile must lie in (50, 100]");
      }
    });
    rd.optional(d, "tol", [&](const YAML::Node &v) {
      o.tol = rd.real(v, "tol");
      if (o.tol <= 0.0) {
        rd.error(v, "detector.tol must be positive");
      }
    });
    rd.optional(d, "max_iter", [&](const YAML::Node &v) { o.max_iter = rd.count(v, "max_iter"); });
    rd.optional(d, "cache_mb", [&](const YAML::Node &v) { o.cache_mb = rd.count(v, "cache_mb"); });
  });

  rd.optional(root, "baselines", [&](const YAML::Node &b) {
    rd.keys(b, "baselines",
            {"sma_window", "ewma_span", "band_width", "lof_neighbors", "lof_threshold"});
    BaselineParams &p = cfg.baselines;
    rd.optional(b, "sma_window", [&](const YAML::Node &v) { p.sma_window = rd.count(v, "sma_window"); });
    rd.optional(b, "ewma_span", [&](const YAML::Node &v) { p.ewma_span = rd.count(v, "ewma_span"); });
    rd.optional(b, "band_width", [&](const YAML::Node &v) { p.band_width = rd.real(v, "band_width"); });
    rd.optional(b, "lof_neighbors",
                [&](const YAML::Node &v) { p.lof_neighbors = rd.count(v, "lof_neighbors"); });
    rd.optional(b, "lof_threshold",
                [&](const YAML::Node &v) { p.lof_threshold = rd.real(v, "lof_threshold"); });
    rd.checked(b, [&] { make_baseline_detector(Variant::Lof, k, p); });
  });

  rd.optional(root, "online", [&](const YAML::Node &o) {
    rd.keys(o, "online", {"rate_tolerance", "substitution", "resync_after"});
    rd.optional(o, "rate_tolerance", [&](const YAML::Node &v) {
      cfg.online.rate_tolerance = rd.real(v, "rate_tolerance");
      if (!(cfg.online.rate_tolerance > 0.0 && cfg.online.rate_tolerance < 1.0)) {
        rd.error(v, "online.rate_tolerance must lie in (0, 1)");
      }
    });
    rd.optional(o, "substitution", [&](const YAML::Node &v) {
      const std::string s = rd.str(v, "substitution");
      if (s == "prediction") {
        cfg.online.substitution = Substitution::Prediction;
      } else if (s == "freeze-last") {
        cfg.online.substitution = Substitution::FreezeLast;
      } else {
        rd.error(v, "online.substitution must be prediction or freeze-last, got '" + s + "'");
      }
    });
    rd.optional(o, "resync_after",
                [&](const YAML::Node &v) { cfg.online.resync_after = rd.count(v, "resync_after"); });
  });

  return cfg;
}

ExperimentConfig load_config(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

} // namespace canids

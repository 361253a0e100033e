#include "tracegen.hpp"

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace canids {

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x5eedu};
  return std::mt19937_64(seq);
}

double reflect(double v, double lo, double hi) {
  const double span = hi - lo;
  if (span <= 0.0) {
    return lo;
  }
  // Fold into [lo, hi] by mirroring at both bounds.
  double u = std::fmod(v - lo, 2.0 * span);
  if (u < 0.0) {
    u += 2.0 * span;
  }
  return u <= span ? lo + u : hi - (u - span);
}

void validate_gen(const SignalGenSpec &g, std::size_t i) {
  const std::string where = "generator " + std::to_string(i) + ": ";
  require(g.lo < g.hi, ErrorCode::InvalidArgument, where + "lo must be below hi");
  require(g.noise_std >= 0.0, ErrorCode::InvalidArgument, where + "noise_std must be >= 0");
  if (g.kind == SignalKind::Sine || g.kind == SignalKind::RampReset) {
    require(g.period_s > 0.0, ErrorCode::InvalidArgument, where + "period must be positive");
  }
  if (g.kind == SignalKind::RandomWalk) {
    require(g.step >= 0.0, ErrorCode::InvalidArgument, where + "step must be >= 0");
  }
  if (g.kind == SignalKind::StepHold) {
    require(g.hold_s > 0.0, ErrorCode::InvalidArgument, where + "hold_s must be positive");
  }
}

std::pair<std::vector<double>, std::vector<double>> value_ranges(const Trace &trace) {
  const std::size_t k = trace.schema.signal_count();
  std::vector<double> lo(k, 0.0);
  std::vector<double> hi(k, 0.0);
  if (!trace.empty()) {
    lo = trace.records.front().signals;
    hi = lo;
    for (const auto &r : trace.records) {
      for (std::size_t i = 0; i < k; ++i) {
        lo[i] = std::min(lo[i], r.signals[i]);
        hi[i] = std::max(hi[i], r.signals[i]);
      }
    }
  }
  return {lo, hi};
}

} // namespace

std::string to_string(AttackKind kind) {
  switch (kind) {
  case AttackKind::Constant:
    return "Constant";
  case AttackKind::Continuous:
    return "Continuous";
  case AttackKind::Replay:
    return "Replay";
  case AttackKind::Dropping:
    return "Dropping";
  case AttackKind::DDoS:
    return "DDoS";
  }
  return "?";
}

std::optional<AttackKind> parse_attack_kind(const std::string &name) {
  for (AttackKind k : kAllAttackKinds) {
    std::string a = to_string(k);
    std::string b = name;
    std::transform(a.begin(), a.end(), a.begin(), ::tolower);
    std::transform(b.begin(), b.end(), b.begin(), ::tolower);
    if (a == b) {
      return k;
    }
  }
  return std::nullopt;
}

std::string to_string(SignalKind kind) {
  switch (kind) {
  case SignalKind::Sine:
    return "sine";
  case SignalKind::RampReset:
    return "ramp-reset";
  case SignalKind::RandomWalk:
    return "random-walk";
  case SignalKind::StepHold:
    return "step-hold";
  }
  return "?";
}

std::optional<SignalKind> parse_signal_kind(const std::string &name) {
  for (SignalKind k : {SignalKind::Sine, SignalKind::RampReset, SignalKind::RandomWalk,
                       SignalKind::StepHold}) {
    if (to_string(k) == name) {
      return k;
    }
  }
  return std::nullopt;
}

std::optional<std::size_t> AttackManifest::interval_at(double t) const {
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    if (intervals[i].contains(t)) {
      return i;
    }
  }
  return std::nullopt;
}

Trace generate_normal(const MessageSchema &schema, const std::vector<SignalGenSpec> &gens,
                      double duration_s, std::uint64_t seed) {
  schema.validate();
  const std::size_t k = schema.signal_count();
  require(gens.size() == k, ErrorCode::InvalidArgument,
          "need one generator per signal (" + std::to_string(k) + "), got " +
              std::to_string(gens.size()));
  for (std::size_t i = 0; i < k; ++i) {
    validate_gen(gens[i], i);
  }
  const double period = schema.nominal_period_s();
  require(duration_s >= period, ErrorCode::InvalidArgument,
          "duration is shorter than one message period");
  const auto n = static_cast<std::size_t>(std::floor(duration_s / period + 1e-9));

  Trace trace;
  trace.schema = schema;
  trace.records.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    auto &r = trace.records[j];
    r.timestamp = static_cast<double>(j) * period;
    r.message_id = schema.message_id;
    r.signals.resize(k);
  }

  for (std::size_t i = 0; i < k; ++i) {
    const SignalGenSpec &g = gens[i];
    auto rng = make_rng(seed, i);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double walk = std::clamp(g.offset, g.lo, g.hi);
    double level = g.lo + (g.hi - g.lo) * unit(rng);
    const double jump_prob = std::min(1.0, period / g.hold_s);

    for (std::size_t j = 0; j < n; ++j) {
      const double t = trace.records[j].timestamp;
      double v = 0.0;
      switch (g.kind) {
      case SignalKind::Sine:
        v = g.offset + g.amplitude * std::sin(2.0 * std::numbers::pi * t / g.period_s + g.phase);
        break;
      case SignalKind::RampReset: {
        double frac = t / g.period_s + g.phase;
        // snap so a cycle boundary that lands on the grid resets on that step
        frac = std::max(0.0, frac - std::floor(frac + 1e-9));
        v = g.lo + (g.hi - g.lo) * frac;
        break;
      }
      case SignalKind::RandomWalk:
        if (j > 0) {
          walk = reflect(walk + g.step * gauss(rng), g.lo, g.hi);
        }
        v = walk;
        break;
      case SignalKind::StepHold:
        if (j > 0 && unit(rng) < jump_prob) {
          level = g.lo + (g.hi - g.lo) * unit(rng);
        }
        v = level;
        break;
      }
      if (g.noise_std > 0.0) {
        v += g.noise_std * gauss(rng);
      }
      trace.records[j].signals[i] = std::clamp(v, g.lo, g.hi);
    }
  }
  return trace;
}

Trace inject_attack(const Trace &trace, const AttackSpec &spec, std::uint64_t seed) {
  require(!trace.empty(), ErrorCode::InvalidArgument, "cannot attack an empty trace");
  const std::size_t k = trace.schema.signal_count();
  const double period = trace.schema.nominal_period_s();
  const double first = trace.records.front().timestamp;
  const double last = trace.records.back().timestamp + period;
  const std::string name = to_string(spec.kind);

  require(spec.t_start < spec.t_end, ErrorCode::InvalidArgument,
          name + " attack: interval start must precede end");
  require(spec.t_start >= first && spec.t_end <= last + 1e-9, ErrorCode::InvalidArgument,
          name + " attack: interval lies outside the trace");
  for (const auto &r : trace.records) {
    require(!(spec.contains(r.timestamp) && r.label != 0), ErrorCode::InvalidArgument,
            name + " attack: interval already contains attacked records");
  }
  if (spec.kind == AttackKind::Constant || spec.kind == AttackKind::Continuous) {
    require(spec.target_signal < k, ErrorCode::InvalidArgument,
            name + " attack: target signal out of range");
  }

  Trace out = trace;
  switch (spec.kind) {
  case AttackKind::Constant:
    for (auto &r : out.records) {
      if (spec.contains(r.timestamp)) {
        r.signals[spec.target_signal] = spec.value;
        r.label = 1;
      }
    }
    break;

  case AttackKind::Continuous: {
    bool started = false;
    double current = 0.0;
    for (auto &r : out.records) {
      if (!spec.contains(r.timestamp)) {
        continue;
      }
      if (!started) {
        started = true;
        current = r.signals[spec.target_signal];
        const double gap = spec.value - current;
        require(gap == 0.0 || (spec.increment != 0.0 && (gap > 0.0) == (spec.increment > 0.0)),
                ErrorCode::InvalidArgument,
                "Continuous attack: target unreachable with the given increment sign");
      } else {
        current += spec.increment;
        if ((spec.increment > 0.0 && current > spec.value) ||
            (spec.increment < 0.0 && current < spec.value)) {
          current = spec.value;
        }
      }
      r.signals[spec.target_signal] = current;
      r.label = 1;
    }
    break;
  }

  case AttackKind::Replay: {
    const double length = spec.t_end - spec.t_start;
    const double src_end = spec.source_start + length;
    require(spec.source_start >= first, ErrorCode::InvalidArgument,
            "Replay attack: source interval lies outside the trace");
    require(src_end <= spec.t_start + 1e-12, ErrorCode::InvalidArgument,
            "Replay attack: source interval overlaps or follows the target");
    std::vector<std::vector<double>> source;
    for (const auto &r : trace.records) {
      if (r.timestamp >= spec.source_start && r.timestamp < src_end) {
        source.push_back(r.signals);
      }
    }
    require(!source.empty(), ErrorCode::InvalidArgument,
            "Replay attack: source interval holds no records");
    std::size_t j = 0;
    for (auto &r : out.records) {
      if (spec.contains(r.timestamp)) {
        r.signals = source[j % source.size()];
        r.label = 1;
        ++j;
      }
    }
    break;
  }

  case AttackKind::Dropping:
    std::erase_if(out.records, [&](const TraceRecord &r) { return spec.contains(r.timestamp); });
    break;

  case AttackKind::DDoS: {
    require(spec.multiplier > 1.0, ErrorCode::InvalidArgument,
            "DDoS attack: multiplier must exceed 1");
    const double spacing = period / spec.multiplier;
    auto [lo, hi] = value_ranges(trace);
    auto rng = make_rng(seed, 0xdd05);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<TraceRecord> merged;
    std::size_t src = 0;
    // Flood frames sit half a slot off the nominal grid.
    for (std::size_t j = 0;; ++j) {
      const double t = spec.t_start + (static_cast<double>(j) + 0.5) * spacing;
      if (t >= spec.t_end) {
        break;
      }
      while (src < out.records.size() && out.records[src].timestamp <= t) {
        merged.push_back(out.records[src]);
        ++src;
      }
      TraceRecord flood;
      flood.timestamp = t;
      flood.message_id = trace.schema.message_id;
      flood.label = 1;
      if (spec.payload == FloodPayload::RepeatLast && !merged.empty()) {
        flood.signals = merged.back().signals;
      } else {
        flood.signals.resize(k);
        for (std::size_t i = 0; i < k; ++i) {
          flood.signals[i] = lo[i] + (hi[i] - lo[i]) * unit(rng);
        }
      }
      merged.push_back(std::move(flood));
    }
    for (; src < out.records.size(); ++src) {
      merged.push_back(out.records[src]);
    }
    out.records = std::move(merged);
    break;
  }
  }
  return out;
}

Trace inject_attacks(const Trace &trace, const std::vector<AttackSpec> &specs,
                     std::uint64_t seed, AttackManifest *manifest) {
  Trace out = trace;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    out = inject_attack(out, specs[i], seed + i);
    if (manifest != nullptr) {
      manifest->intervals.push_back({specs[i].kind, specs[i].t_start, specs[i].t_end});
    }
  }
  return out;
}

std::vector<AttackSpec> default_attack_suite(const Trace &trace, std::size_t target_signal) {
  require(trace.size() >= 20, ErrorCode::InvalidArgument,
          "trace is too short for the default attack suite");
  require(target_signal < trace.schema.signal_count(), ErrorCode::InvalidArgument,
          "target signal out of range");
  const double t0 = trace.records.front().timestamp;
  const double d = trace.records.back().timestamp + trace.schema.nominal_period_s() - t0;
  auto [lo, hi] = value_ranges(trace);
  const double range = std::max(hi[target_signal] - lo[target_signal], 1e-12);
  auto at = [&](double frac) { return t0 + frac * d; };

  std::vector<AttackSpec> suite;

  AttackSpec constant;
  constant.kind = AttackKind::Constant;
  constant.target_signal = target_signal;
  constant.t_start = at(0.10);
  constant.t_end = at(0.20);
  constant.value = hi[target_signal] + 0.2 * range;
  suite.push_back(constant);

  AttackSpec continuous;
  continuous.kind = AttackKind::Continuous;
  continuous.target_signal = target_signal;
  continuous.t_start = at(0.25);
  continuous.t_end = at(0.35);
  double start_value = lo[target_signal];
  for (const auto &r : trace.records) {
    if (continuous.contains(r.timestamp)) {
      start_value = r.signals[target_signal];
      break;
    }
  }
  const double mid = 0.5 * (lo[target_signal] + hi[target_signal]);
  continuous.value = start_value < mid ? hi[target_signal] : lo[target_signal];
  continuous.increment = (start_value < mid ? 1.0 : -1.0) * 0.005 * range;
  suite.push_back(continuous);

  AttackSpec replay;
  replay.kind = AttackKind::Replay;
  replay.t_start = at(0.50);
  replay.t_end = at(0.60);
  replay.source_start = at(0.37);
  suite.push_back(replay);

  AttackSpec dropping;
  dropping.kind = AttackKind::Dropping;
  dropping.t_start = at(0.65);
  dropping.t_end = at(0.75);
  suite.push_back(dropping);

  AttackSpec ddos;
  ddos.kind = AttackKind::DDoS;
  ddos.t_start = at(0.80);
  ddos.t_end = at(0.90);
  ddos.multiplier = 10.0;
  suite.push_back(ddos);

  return suite;
}

void write_manifest(const std::string &path, const AttackManifest &manifest,
                    const std::string &provenance) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::Write, "cannot write " + path);
  if (!provenance.empty()) {
    std::istringstream in(provenance);
    std::string line;
    while (std::getline(in, line)) {
      out << "# " << line << '\n';
    }
  }
  out << "kind,t_start,t_end\n";
  char buf[96];
  for (const auto &iv : manifest.intervals) {
    std::snprintf(buf, sizeof(buf), ",%.17g,%.17g\n", iv.t_start, iv.t_end);
    out << to_string(iv.kind) << buf;
  }
  require(static_cast<bool>(out), ErrorCode::Write, "write failed for " + path);
}

AttackManifest load_manifest(const std::string &path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path);
  AttackManifest m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.rfind("kind,", 0) == 0) {
      continue;
    }
    std::istringstream row(line);
    std::string kind;
    std::string a;
    std::string b;
    const std::string where = path + ":" + std::to_string(line_no) + ": ";
    require(std::getline(row, kind, ',') && std::getline(row, a, ',') &&
                std::getline(row, b),
            ErrorCode::Format, where + "expected kind,t_start,t_end");
    auto parsed = parse_attack_kind(kind);
    require(parsed.has_value(), ErrorCode::Format, where + "unknown attack kind '" + kind + "'");
    AttackInterval iv{*parsed, 0.0, 0.0};
    try {
      iv.t_start = std::stod(a);
      iv.t_end = std::stod(b);
    } catch (const std::exception &) {
      fail(ErrorCode::Format, where + "non-numeric interval bound");
    }
    require(iv.t_start < iv.t_end, ErrorCode::Format, where + "empty interval");
    m.intervals.push_back(iv);
  }
  return m;
}

} // namespace canids

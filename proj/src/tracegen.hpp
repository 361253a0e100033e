#pragma once

#include "trace.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace canids {

enum class SignalKind { Sine, RampReset, RandomWalk, StepHold };

// One generator per signal. Values are clamped to [lo, hi] after noise.
struct SignalGenSpec {
  SignalKind kind = SignalKind::Sine;
  double lo = -1.0;
  double hi = 1.0;
  double amplitude = 1.0; // sine
  double offset = 0.0;    // sine centre; random-walk start
  double period_s = 1.0;  // sine / ramp period
  double phase = 0.0;     // sine: radians; ramp: cycle fraction
  double step = 0.01;     // random-walk step standard deviation
  double hold_s = 0.5;    // step-hold mean dwell time
  double noise_std = 0.0;
};

enum class AttackKind { Constant, Continuous, Replay, Dropping, DDoS };
enum class FloodPayload { RepeatLast, UniformRandom };

inline constexpr AttackKind kAllAttackKinds[] = {AttackKind::Constant, AttackKind::Continuous,
                                                 AttackKind::Replay, AttackKind::Dropping,
                                                 AttackKind::DDoS};

std::string to_string(AttackKind kind);
std::optional<AttackKind> parse_attack_kind(const std::string &name);
std::string to_string(SignalKind kind);
std::optional<SignalKind> parse_signal_kind(const std::string &name);

// Attack intervals are half-open: a record at time t is attacked when
// t_start <= t < t_end.
struct AttackSpec {
  AttackKind kind = AttackKind::Constant;
  std::size_t target_signal = 0; // Constant / Continuous
  double t_start = 0.0;
  double t_end = 0.0;
  double value = 0.0;     // Constant: forced value; Continuous: target value
  double increment = 0.0; // Continuous: signed per-record step
  double source_start = 0.0; // Replay: source interval begins here
  double multiplier = 10.0;  // DDoS: flood rate relative to nominal
  FloodPayload payload = FloodPayload::RepeatLast;

  bool contains(double t) const { return t >= t_start && t < t_end; }
};

struct AttackInterval {
  AttackKind kind;
  double t_start;
  double t_end;

  bool contains(double t) const { return t >= t_start && t < t_end; }
  bool operator==(const AttackInterval &) const = default;
};

// Ground truth beyond per-record labels. Dropped records have no rows, so
// their intervals are only recoverable from here.
struct AttackManifest {
  std::vector<AttackInterval> intervals;

  // Index into `intervals` of the interval covering t, if any.
  std::optional<std::size_t> interval_at(double t) const;
  bool operator==(const AttackManifest &) const = default;
};

Trace generate_normal(const MessageSchema &schema, const std::vector<SignalGenSpec> &gens,
                      double duration_s, std::uint64_t seed);

Trace inject_attack(const Trace &trace, const AttackSpec &spec, std::uint64_t seed);

// Applies specs left to right and records every interval in the manifest.
Trace inject_attacks(const Trace &trace, const std::vector<AttackSpec> &specs,
                     std::uint64_t seed, AttackManifest *manifest = nullptr);

// One attack of each kind, each over 10% of the trace duration, on disjoint
// intervals. Payload magnitudes are expressed relative to the per-signal raw
// range of `trace`.
std::vector<AttackSpec> default_attack_suite(const Trace &trace, std::size_t target_signal = 0);

void write_manifest(const std::string &path, const AttackManifest &manifest,
                    const std::string &provenance = {});
AttackManifest load_manifest(const std::string &path);

} // namespace canids

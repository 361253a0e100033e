#pragma once

#include "controller.hpp"
#include "detector.hpp"
#include "predictor.hpp"
#include "tracegen.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace canids {

struct GeneratorConfig {
  double duration_s = 300.0;
  std::vector<SignalGenSpec> signals;
};

struct AttackConfig {
  bool default_suite = true;
  std::size_t target_signal = 0;
  FloodPayload flood_payload = FloodPayload::RepeatLast;
  std::vector<AttackSpec> list; // applied after the default suite
};

struct ExperimentConfig {
  MessageSchema schema;
  GeneratorConfig generator;
  AttackConfig attacks;
  PredictorHyper predictor;
  double train_ratio = 0.8;
  Variant variant = Variant::Diff;
  DetectorParams detector;
  BaselineParams baselines;
  OnlineConfig online;
  std::uint64_t seed = 1;
  std::string output_dir = ".";

  std::string source;   // raw text, for hashing
  std::string origin;   // path or label used in messages

  // Per-stage seeds derived from `seed`.
  std::uint64_t generator_seed() const { return seed; }
  std::uint64_t attack_seed() const { return seed + 1; }
  std::uint64_t model_seed() const { return seed + 2; }
};

// Throws Error(Config) with "origin:line: message" on any problem.
ExperimentConfig parse_config(const std::string &text, const std::string &origin = "<config>");
ExperimentConfig load_config(const std::string &path);

std::uint64_t fnv1a64(const std::string &bytes);
std::string config_hash(const ExperimentConfig &cfg);

} // namespace canids

#include <doctest.h>

#include "config.hpp"
#include "error.hpp"

#include <string>

using namespace canids;

namespace {

const char *kMinimal = R"(schema:
  message_id: 0x1A0
  signals: [a, b]
)";

std::string config_error(const std::string &text) {
  try {
    parse_config(text, "cfg.yaml");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::Config);
    return e.what();
  }
  FAIL("config accepted: " << text);
  return {};
}

} // namespace

TEST_CASE("minimal config gets the defaults") {
  const ExperimentConfig c = parse_config(kMinimal);
  CHECK(c.schema.message_id == 0x1A0);
  CHECK(c.schema.nominal_period_ms == 15.0);
  CHECK(c.schema.signal_count() == 2);
  CHECK(c.variant == Variant::Diff);
  CHECK(c.seed == 1);
  CHECK(c.predictor.subsequence_length == 32);
  CHECK(c.predictor.embed_dim == 128);
  CHECK(c.predictor.hidden_dim == 64);
  CHECK(c.detector.percentile == 99.9);
  CHECK(c.online.rate_tolerance == 0.2);
  CHECK(c.online.substitution == Substitution::Prediction);
  CHECK(c.online.resync_after == 0);
  CHECK(c.attacks.default_suite);
}

TEST_CASE("bundled toy config parses") {
  const ExperimentConfig c = load_config(std::string(CANIDS_CONFIG_DIR) + "/toy.yaml");
  CHECK(c.seed == 7);
  CHECK(c.schema.signal_names == std::vector<std::string>{"speed", "rpm", "throttle"});
  REQUIRE(c.generator.signals.size() == 3);
  CHECK(c.generator.signals[1].kind == SignalKind::RampReset);
  CHECK(c.predictor.subsequence_length == 8);
  CHECK(c.baselines.lof_neighbors == 20);
  CHECK(c.model_seed() == 9);
}

TEST_CASE("errors carry the line") {
  std::string e = config_error(std::string(kMinimal) + "predictor:\n  hiden_dim: 3\n");
  CHECK(e.find("cfg.yaml:5:") != std::string::npos);
  CHECK(e.find("hiden_dim") != std::string::npos);

  e = config_error(std::string(kMinimal) + "detector:\n  variant: Median\n");
  CHECK(e.find("cfg.yaml:5:") != std::string::npos);
  CHECK(e.find("Median") != std::string::npos);

  e = config_error(std::string(kMinimal) + "detector:\n  nu: 1.5\n");
  CHECK(e.find(":5:") != std::string::npos);

  e = config_error(std::string(kMinimal) + "online:\n  rate_tolerance: 1.0\n");
  CHECK(e.find(":5:") != std::string::npos);

  e = config_error("schema: [\n");
  CHECK(e.find("cfg.yaml:") != std::string::npos);

  e = config_error(std::string(kMinimal) + "bogus: 1\n");
  CHECK(e.find(":4:") != std::string::npos);
}

TEST_CASE("schema and section checks") {
  config_error("seed: 3\n");
  config_error("schema:\n  message_id: 0x10\n  signals: [a, a]\n");
  config_error("schema:\n  message_id: 0x10\n  signals: []\n");
  config_error("schema:\n  message_id: 0x10\n  period_ms: 0\n  signals: [a]\n");
  // generator width must match the schema
  config_error(std::string(kMinimal) + "generator:\n  signals:\n    - {kind: sine}\n");
  config_error(std::string(kMinimal) +
               "generator:\n  signals:\n    - {kind: sine}\n    - {kind: wobble}\n");
  config_error(std::string(kMinimal) +
               "attacks:\n  list:\n    - {kind: Constant, t_start: 1, t_end: 2}\n");
  config_error(std::string(kMinimal) +
               "attacks:\n  list:\n    - {kind: Replay, t_start: 1, t_end: 2, source_start: 0.5}\n");
  config_error(std::string(kMinimal) + "attacks:\n  target_signal: 2\n");
  config_error(std::string(kMinimal) + "predictor:\n  subsequence_length: 0\n");
  config_error(std::string(kMinimal) + "online:\n  substitution: maybe\n");
  config_error(std::string(kMinimal) + "seed: -4\n");
}

TEST_CASE("sections are read") {
  const ExperimentConfig c = parse_config(std::string(kMinimal) + R"(seed: 42
detector:
  variant: max
  gamma: 0.25
online:
  substitution: freeze-last
  resync_after: 16
attacks:
  default_suite: false
  list:
    - {kind: Continuous, signal: 1, t_start: 1, t_end: 2, value: 5, increment: 0.01}
    - {kind: DDoS, t_start: 3, t_end: 4, multiplier: 8, payload: uniform-random}
)");
  CHECK(c.seed == 42);
  CHECK(c.variant == Variant::Max);
  CHECK(c.detector.ocsvm.gamma == 0.25);
  CHECK(c.online.substitution == Substitution::FreezeLast);
  CHECK(c.online.resync_after == 16);
  CHECK(!c.attacks.default_suite);
  REQUIRE(c.attacks.list.size() == 2);
  CHECK(c.attacks.list[0].target_signal == 1);
  CHECK(c.attacks.list[1].multiplier == 8.0);
  CHECK(c.attacks.list[1].payload == FloodPayload::UniformRandom);
  CHECK(c.attack_seed() == 43);
}

TEST_CASE("config hash follows the text") {
  const ExperimentConfig a = parse_config(kMinimal);
  const ExperimentConfig b = parse_config(kMinimal);
  const ExperimentConfig c = parse_config(std::string(kMinimal) + "seed: 2\n");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(c));
  CHECK(config_hash(a).size() == 16);
  CHECK(fnv1a64("") == 14695981039346656037ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("missing config file is an io error") {
  try {
    load_config("/nonexistent/cfg.yaml");
    FAIL("loaded");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::Io);
  }
}

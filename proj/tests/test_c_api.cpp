#include <doctest.h>

#include <canids/canids.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

namespace {

const char *kConfig = R"(seed: 5
schema:
  message_id: 0x0C0
  period_ms: 15
  signals: [a, b]
generator:
  duration_s: 8
  signals:
    - {kind: sine, lo: -2, hi: 2, amplitude: 1, period_s: 0.9}
    - {kind: ramp-reset, lo: 0, hi: 10, period_s: 1.2}
predictor:
  subsequence_length: 6
  embed_dim: 6
  hidden_dim: 6
  batch_size: 32
  learning_rate: 0.01
  max_epochs: 3
  patience: 2
)";

std::string tmp(const char *name) { return std::string(CANIDS_TEST_TMP) + "/capi_" + name; }

struct Artifacts {
  std::string train = tmp("train.csv");
  std::string test = tmp("test.csv");
  std::string model = tmp("model.bin");
  std::string det = tmp("diff.det");
  std::string dets = tmp("dets.csv");
  std::string report = tmp("report.csv");
};

const Artifacts &artifacts() {
  static const Artifacts a = [] {
    Artifacts out;
    canids_config *cfg = nullptr;
    REQUIRE(canids_config_parse(kConfig, "capi.yaml", &cfg) == CANIDS_OK);
    REQUIRE(canids_cmd_gen(cfg, out.train.c_str()) == CANIDS_OK);
    REQUIRE(canids_cmd_inject(out.train.c_str(), cfg, out.test.c_str()) == CANIDS_OK);
    REQUIRE(canids_cmd_train(out.train.c_str(), cfg, out.model.c_str(), nullptr, 0) == CANIDS_OK);
    REQUIRE(canids_cmd_fit_detector(out.train.c_str(), out.model.c_str(), nullptr, cfg,
                                    out.det.c_str()) == CANIDS_OK);
    REQUIRE(canids_cmd_detect(out.test.c_str(), out.model.c_str(), out.det.c_str(), cfg,
                              out.dets.c_str()) == CANIDS_OK);
    canids_config_free(cfg);
    return out;
  }();
  return a;
}

} // namespace

TEST_CASE("version and exit codes") {
  CHECK(std::strcmp(canids_version(), "canids 0.1.0") == 0);
  CHECK(canids_exit_code(CANIDS_OK) == 0);
  CHECK(canids_exit_code(CANIDS_E_CONFIG) == 1);
  CHECK(canids_exit_code(CANIDS_E_INVALID_ARGUMENT) == 1);
  CHECK(canids_exit_code(CANIDS_E_IO) == 1);
  CHECK(canids_exit_code(CANIDS_E_NUMERIC) == 2);
  CHECK(canids_exit_code(CANIDS_E_WRITE) == 2);
  CHECK(canids_exit_code(CANIDS_E_INTERNAL) == 2);
}

TEST_CASE("config errors come back as codes with a message") {
  canids_config *cfg = reinterpret_cast<canids_config *>(0x1);
  CHECK(canids_config_parse("schema:\n  message_id: 1\n  signals: [a]\nnope: 1\n", "x.yaml",
                            &cfg) == CANIDS_E_CONFIG);
  CHECK(cfg == nullptr);
  CHECK(std::string(canids_last_error()).find("x.yaml:4:") != std::string::npos);
  CHECK(canids_config_load("/nonexistent.yaml", &cfg) == CANIDS_E_IO);
  CHECK(canids_config_parse(nullptr, "x", &cfg) == CANIDS_E_INVALID_ARGUMENT);

  REQUIRE(canids_config_parse(kConfig, "capi.yaml", &cfg) == CANIDS_OK);
  CHECK(std::string(canids_last_error()).empty());
  uint64_t seed = 0;
  CHECK(canids_config_seed(cfg, &seed) == CANIDS_OK);
  CHECK(seed == 5);
  CHECK(canids_config_set_seed(cfg, 77) == CANIDS_OK);
  CHECK(canids_config_seed(cfg, &seed) == CANIDS_OK);
  CHECK(seed == 77);
  canids_config_free(cfg);
  canids_config_free(nullptr);
}

TEST_CASE("bundled config loads") {
  canids_config *cfg = nullptr;
  CHECK(canids_config_load(CANIDS_CONFIG_DIR "/toy.yaml", &cfg) == CANIDS_OK);
  canids_config_free(cfg);
}

TEST_CASE("command pipeline through the C surface") {
  const Artifacts &a = artifacts();
  const char *files[] = {a.dets.c_str()};
  char *tables = nullptr;
  REQUIRE(canids_cmd_eval(files, 1, a.test.c_str(), nullptr, a.report.c_str(), nullptr, nullptr,
                          nullptr, &tables) == CANIDS_OK);
  REQUIRE(tables != nullptr);
  CHECK(std::string(tables).find("No attack") != std::string::npos);
  canids_string_free(tables);

  CHECK(canids_cmd_eval(files, 1, tmp("missing.csv").c_str(), nullptr, a.report.c_str(), nullptr,
                        nullptr, nullptr, nullptr) == CANIDS_E_IO);
  CHECK(canids_cmd_eval(nullptr, 0, a.test.c_str(), nullptr, a.report.c_str(), nullptr, nullptr,
                        nullptr, nullptr) == CANIDS_E_INVALID_ARGUMENT);
  CHECK(canids_cmd_fit_detector(a.train.c_str(), a.model.c_str(), "Median", nullptr,
                                tmp("x.det").c_str()) == CANIDS_E_INVALID_ARGUMENT);
}

TEST_CASE("model, detector and frame pipeline handles") {
  const Artifacts &a = artifacts();
  canids_model *m = nullptr;
  REQUIRE(canids_model_load(a.model.c_str(), &m) == CANIDS_OK);
  CHECK(canids_model_signal_count(m) == 2);
  CHECK(canids_model_subsequence_length(m) == 6);
  CHECK(canids_model_parameter_count(m) > 0);

  std::vector<double> window(6 * 2, 0.5);
  double pred[2] = {NAN, NAN};
  CHECK(canids_model_predict_next(m, window.data(), 6, pred) == CANIDS_OK);
  CHECK(std::isfinite(pred[0]));
  CHECK(std::isfinite(pred[1]));
  CHECK(canids_model_predict_next(m, nullptr, 6, pred) == CANIDS_E_INVALID_ARGUMENT);

  canids_detector *d = nullptr;
  REQUIRE(canids_detector_load(a.det.c_str(), &d) == CANIDS_OK);
  double score = 0;
  CHECK(canids_detector_score(d, pred, pred, 2, &score) == CANIDS_OK);
  CHECK(score >= 0);
  const double far[2] = {pred[0] + 5, pred[1] - 5};
  CHECK(canids_detector_score(d, pred, far, 2, &score) == CANIDS_OK);
  CHECK(score < 0);
  CHECK(canids_detector_score(d, pred, far, 3, &score) == CANIDS_E_SHAPE);

  canids_pipeline *p = nullptr;
  REQUIRE(canids_pipeline_create(m, d, nullptr, &p) == CANIDS_OK);
  // handles are independent of the originals once the pipeline exists
  canids_model_free(m);
  canids_detector_free(d);
  int disp = -1, rate = -1;
  std::size_t delivered = 0;
  for (int i = 0; i < 10; ++i) {
    const double t = 0.015 * i;
    const double sig[2] = {std::sin(t), 5.0};
    REQUIRE(canids_pipeline_process(p, t, sig, 2, &disp, &score, &rate) == CANIDS_OK);
    CHECK(rate == CANIDS_RATE_OK);
    delivered += disp == CANIDS_DELIVERED;
  }
  CHECK(delivered >= 6); // warm-up frames are always delivered
  const double sig[2] = {0, 0};
  CHECK(canids_pipeline_process(p, 0.015 * 9 + 0.001, sig, 2, &disp, &score, &rate) == CANIDS_OK);
  CHECK(disp == CANIDS_DROPPED_RATE);
  CHECK(rate == CANIDS_RATE_TOO_FAST);
  CHECK(canids_pipeline_process(p, 0.0, sig, 2, &disp, &score, &rate) ==
        CANIDS_E_INVALID_ARGUMENT);
  canids_pipeline_free(p);
}

TEST_CASE("auc through the C surface") {
  const uint8_t labels[] = {1, 1, 0, 0};
  const double scores[] = {0.1, 0.2, 0.8, 0.9};
  double auc = 0;
  CHECK(canids_auc(labels, scores, 4, &auc) == CANIDS_OK);
  CHECK(auc == 1.0);
  const uint8_t one_class[] = {1, 1};
  CHECK(canids_auc(one_class, scores, 2, &auc) != CANIDS_OK);
}

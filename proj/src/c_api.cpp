#include "canids/canids.h"

#include "config.hpp"
#include "controller.hpp"
#include "detector.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "pipeline.hpp"
#include "predictor.hpp"

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <memory>
#include <new>
#include <string>

struct canids_config {
  canids::ExperimentConfig cfg;
};

struct canids_model {
  canids::PredictorModel model;
};

struct canids_detector {
  canids::Detector detector;
};

struct canids_pipeline {
  canids::PredictorModel model;
  canids::Detector detector;
  std::unique_ptr<canids::OnlinePipeline> pipeline;
};

namespace {

thread_local std::string g_last_error;

template <class F> canids_status guarded(F &&f) {
  g_last_error.clear();
  try {
    f();
    return CANIDS_OK;
  } catch (const canids::Error &e) {
    g_last_error = e.what();
    return static_cast<canids_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc &) {
    g_last_error = "out of memory";
    return CANIDS_E_INTERNAL;
  } catch (const std::exception &e) {
    g_last_error = e.what();
    return CANIDS_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return CANIDS_E_INTERNAL;
  }
}

void need(const void *p, const char *what) {
  canids::require(p != nullptr, canids::ErrorCode::InvalidArgument,
                  std::string(what) + " must not be NULL");
}

std::string str(const char *s) { return s ? s : ""; }

const canids::ExperimentConfig *opt(const canids_config *c) { return c ? &c->cfg : nullptr; }

char *dup_string(const std::string &s) {
  char *out = static_cast<char *>(std::malloc(s.size() + 1));
  if (out == nullptr) {
    throw std::bad_alloc();
  }
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

} // namespace

extern "C" {

const char *canids_version(void) { return canids::kToolVersion; }

const char *canids_last_error(void) { return g_last_error.c_str(); }

int canids_exit_code(canids_status status) {
  switch (status) {
  case CANIDS_OK:
    return 0;
  case CANIDS_E_INVALID_ARGUMENT:
  case CANIDS_E_IO:
  case CANIDS_E_FORMAT:
  case CANIDS_E_SHAPE:
  case CANIDS_E_CONFIG:
    return 1;
  default:
    return 2;
  }
}

void canids_string_free(char *s) { std::free(s); }

canids_status canids_config_load(const char *path, canids_config **out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    auto c = std::make_unique<canids_config>();
    c->cfg = canids::load_config(path);
    *out = c.release();
  });
}

canids_status canids_config_parse(const char *text, const char *origin, canids_config **out) {
  return guarded([&] {
    need(text, "text");
    need(out, "out");
    *out = nullptr;
    auto c = std::make_unique<canids_config>();
    c->cfg = canids::parse_config(text, origin ? origin : "<config>");
    *out = c.release();
  });
}

canids_status canids_config_set_seed(canids_config *cfg, uint64_t seed) {
  return guarded([&] {
    need(cfg, "cfg");
    cfg->cfg.seed = seed;
  });
}

canids_status canids_config_seed(const canids_config *cfg, uint64_t *out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out, "out");
    *out = cfg->cfg.seed;
  });
}

void canids_config_free(canids_config *cfg) { delete cfg; }

canids_status canids_cmd_gen(const canids_config *cfg, const char *out) {
  return guarded([&] {
    need(cfg, "cfg");
    canids::cmd_gen(cfg->cfg, str(out));
  });
}

canids_status canids_cmd_inject(const char *trace, const canids_config *cfg, const char *out) {
  return guarded([&] {
    need(cfg, "cfg");
    canids::cmd_inject(str(trace), cfg->cfg, str(out));
  });
}

canids_status canids_cmd_train(const char *trace, const canids_config *cfg, const char *model_out,
                               const char *history, int verbose) {
  return guarded([&] {
    need(cfg, "cfg");
    canids::LogFn log;
    if (verbose) {
      log = [](const std::string &line) { std::cerr << line << '\n'; };
    }
    canids::cmd_train(str(trace), cfg->cfg, str(model_out), str(history), log);
  });
}

canids_status canids_cmd_fit_detector(const char *trace, const char *model, const char *variant,
                                      const canids_config *cfg, const char *out) {
  return guarded(
      [&] { canids::cmd_fit_detector(str(trace), str(model), str(variant), opt(cfg), str(out)); });
}

canids_status canids_cmd_detect(const char *trace, const char *model, const char *detector,
                                const canids_config *cfg, const char *out) {
  return guarded(
      [&] { canids::cmd_detect(str(trace), str(model), str(detector), opt(cfg), str(out)); });
}

canids_status canids_cmd_eval(const char *const *detections, size_t n_detections,
                              const char *truth, const char *manifest, const char *out,
                              const char *roc_out, const char *table_out,
                              const canids_config *cfg, char **tables) {
  return guarded([&] {
    if (tables) {
      *tables = nullptr;
    }
    canids::EvalRequest req;
    if (n_detections > 0) {
      need(detections, "detections");
    }
    for (size_t i = 0; i < n_detections; ++i) {
      need(detections[i], "detections entry");
      req.detections.emplace_back(detections[i]);
    }
    req.truth = str(truth);
    req.manifest = str(manifest);
    req.out = str(out);
    req.roc_out = str(roc_out);
    req.table_out = str(table_out);
    req.cfg = opt(cfg);
    const std::string text = canids::cmd_eval(req);
    if (tables) {
      *tables = dup_string(text);
    }
  });
}

canids_status canids_cmd_live(const char *model, const char *detector, const canids_config *cfg,
                              size_t *frames) {
  return guarded([&] {
    need(cfg, "cfg");
    const std::size_t n = canids::cmd_live(str(model), str(detector), cfg->cfg, std::cin, std::cout);
    if (frames) {
      *frames = n;
    }
  });
}

canids_status canids_model_load(const char *path, canids_model **out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    auto m = std::make_unique<canids_model>();
    m->model = canids::load_model(path);
    *out = m.release();
  });
}

void canids_model_free(canids_model *m) { delete m; }

size_t canids_model_signal_count(const canids_model *m) { return m ? m->model.k : 0; }

size_t canids_model_subsequence_length(const canids_model *m) {
  return m ? m->model.hyper.subsequence_length : 0;
}

size_t canids_model_parameter_count(const canids_model *m) {
  return m ? m->model.parameter_count() : 0;
}

canids_status canids_model_predict_next(const canids_model *m, const double *window, size_t rows,
                                        double *out) {
  return guarded([&] {
    need(m, "model");
    need(window, "window");
    need(out, "out");
    canids::require(rows >= 1, canids::ErrorCode::Shape, "window needs at least one row");
    const auto k = static_cast<Eigen::Index>(m->model.k);
    Eigen::MatrixXd w(static_cast<Eigen::Index>(rows), k);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < k; ++c) {
        w(r, c) = window[r * k + c];
      }
    }
    const Eigen::VectorXd p = canids::predict_next(m->model, w);
    for (Eigen::Index c = 0; c < k; ++c) {
      out[c] = p(c);
    }
  });
}

canids_status canids_detector_load(const char *path, canids_detector **out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    auto d = std::make_unique<canids_detector>();
    d->detector = canids::load_detector(path);
    *out = d.release();
  });
}

void canids_detector_free(canids_detector *d) { delete d; }

canids_status canids_detector_score(const canids_detector *d, const double *pred,
                                    const double *actual, size_t k, double *score) {
  return guarded([&] {
    need(d, "detector");
    need(pred, "pred");
    need(actual, "actual");
    need(score, "score");
    canids::require(k == d->detector.k, canids::ErrorCode::Shape,
                    "detector expects " + std::to_string(d->detector.k) + " signals, got " +
                        std::to_string(k));
    const auto n = static_cast<Eigen::Index>(k);
    *score = d->detector.score(Eigen::Map<const Eigen::VectorXd>(pred, n),
                               Eigen::Map<const Eigen::VectorXd>(actual, n));
  });
}

canids_status canids_pipeline_create(const canids_model *m, const canids_detector *d,
                                     const canids_config *cfg, canids_pipeline **out) {
  return guarded([&] {
    need(m, "model");
    need(d, "detector");
    need(out, "out");
    *out = nullptr;
    canids::require(m->model.scaling.has_value(), canids::ErrorCode::Format,
                    "model carries no scaling parameters");
    auto p = std::make_unique<canids_pipeline>();
    p->model = m->model;
    p->detector = d->detector;
    const double period_s = cfg ? cfg->cfg.schema.nominal_period_s() : 0.015;
    const canids::OnlineConfig online = cfg ? cfg->cfg.online : canids::OnlineConfig{};
    p->pipeline = std::make_unique<canids::OnlinePipeline>(p->model, p->detector,
                                                           *p->model.scaling, period_s, online);
    *out = p.release();
  });
}

void canids_pipeline_free(canids_pipeline *p) { delete p; }

canids_status canids_pipeline_process(canids_pipeline *p, double timestamp, const double *signals,
                                      size_t k, int *disposition, double *score, int *rate) {
  return guarded([&] {
    need(p, "pipeline");
    need(signals, "signals");
    canids::TraceRecord r;
    r.timestamp = timestamp;
    r.signals.assign(signals, signals + k);
    const canids::Detection det = p->pipeline->process(r);
    if (disposition) {
      *disposition = static_cast<int>(det.disposition);
    }
    if (score) {
      *score = det.score;
    }
    if (rate) {
      *rate = static_cast<int>(det.rate);
    }
  });
}

canids_status canids_auc(const uint8_t *labels, const double *scores, size_t n, double *auc) {
  return guarded([&] {
    need(labels, "labels");
    need(scores, "scores");
    need(auc, "auc");
    *auc = canids::roc_auc({labels, n}, {scores, n}).auc;
  });
}

} // extern "C"

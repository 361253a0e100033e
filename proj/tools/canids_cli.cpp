// canids command-line front end. Talks to the library only through canids.h.

#include "canids/canids.h"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace {

struct ConfigHandle {
  canids_config *p = nullptr;
  ConfigHandle() = default;
  ConfigHandle(const ConfigHandle &) = delete;
  ConfigHandle &operator=(const ConfigHandle &) = delete;
  ~ConfigHandle() { canids_config_free(p); }
};

int report(canids_status st) {
  if (st != CANIDS_OK) {
    std::fprintf(stderr, "canids: error: %s\n", canids_last_error());
  }
  return canids_exit_code(st);
}

// Loads --config (if any) and applies --seed. An empty path leaves the handle NULL.
canids_status load(ConfigHandle &h, const std::string &path, const std::optional<std::uint64_t> &seed) {
  if (path.empty()) {
    return CANIDS_OK;
  }
  canids_status st = canids_config_load(path.c_str(), &h.p);
  if (st == CANIDS_OK && seed) {
    st = canids_config_set_seed(h.p, *seed);
  }
  return st;
}

const char *c_or_null(const std::string &s) { return s.empty() ? nullptr : s.c_str(); }

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"CAN bus anomaly detection toolkit"};
  app.set_version_flag("--version", canids_version());
  app.require_subcommand(1);

  std::string config, trace, out, model, detector, variant, history, truth, manifest, roc_out,
      table_out;
  std::vector<std::string> detections;
  std::optional<std::uint64_t> seed;
  bool verbose = false;

  auto add_seed = [&](CLI::App *c) {
    c->add_option("--seed", seed, "override the config seed");
  };

  auto *gen = app.add_subcommand("gen", "generate a clean synthetic trace");
  gen->add_option("--config", config, "experiment config")->required();
  gen->add_option("--out", out, "trace CSV to write")->required();
  add_seed(gen);

  auto *inject = app.add_subcommand("inject", "inject the configured attacks into a trace");
  inject->add_option("--trace", trace, "clean trace")->required();
  inject->add_option("--config", config, "experiment config")->required();
  inject->add_option("--out", out, "attacked trace; the manifest goes next to it")->required();
  add_seed(inject);

  auto *train = app.add_subcommand("train", "train the predictor on a clean trace");
  train->add_option("--trace", trace, "clean training trace")->required();
  train->add_option("--config", config, "experiment config")->required();
  train->add_option("--model-out", out, "model file to write")->required();
  train->add_option("--history", history, "per-epoch loss CSV");
  train->add_flag("-v,--verbose", verbose, "print losses per epoch");
  add_seed(train);

  auto *fit = app.add_subcommand("fit-detector", "fit a detector variant or baseline");
  fit->add_option("--trace", trace, "clean trace for fitting")->required();
  fit->add_option("--model", model, "trained model")->required();
  fit->add_option("--variant", variant, "ST, Diff, Sum, Avg, Max, SMA-BB, EWMA-BB or LOF");
  fit->add_option("--out", out, "detector file to write")->required();
  fit->add_option("--config", config, "experiment config");
  add_seed(fit);

  auto *detect = app.add_subcommand("detect", "score a trace and write per-frame dispositions");
  detect->add_option("--trace", trace, "trace to score")->required();
  detect->add_option("--model", model, "trained model")->required();
  detect->add_option("--detector", detector, "fitted detector")->required();
  detect->add_option("--out", out, "detections CSV")->required();
  detect->add_option("--config", config, "experiment config");
  add_seed(detect);

  auto *eval = app.add_subcommand("eval", "metrics per attack kind");
  eval->add_option("--detections", detections, "one or more detections CSVs")->required();
  eval->add_option("--truth", truth, "labelled trace")->required();
  eval->add_option("--out", out, "report CSV (a stem when several detections are given)")
      ->required();
  eval->add_option("--manifest", manifest, "attack manifest (default: sidecar of --truth)");
  eval->add_option("--roc-out", roc_out, "ROC points CSV");
  eval->add_option("--table", table_out, "also write the tables here");
  eval->add_option("--config", config, "experiment config");
  add_seed(eval);

  auto *live = app.add_subcommand("live", "read records on stdin, write dispositions to stdout");
  live->add_option("--model", model, "trained model")->required();
  live->add_option("--detector", detector, "fitted detector")->required();
  live->add_option("--config", config, "experiment config (schema, rate tolerance)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (seed && config.empty()) {
    std::fprintf(stderr, "canids: error: --seed needs --config\n");
    return 1;
  }

  ConfigHandle cfg;
  if (canids_status st = load(cfg, config, seed); st != CANIDS_OK) {
    return report(st);
  }

  if (gen->parsed()) {
    return report(canids_cmd_gen(cfg.p, out.c_str()));
  }
  if (inject->parsed()) {
    return report(canids_cmd_inject(trace.c_str(), cfg.p, out.c_str()));
  }
  if (train->parsed()) {
    return report(
        canids_cmd_train(trace.c_str(), cfg.p, out.c_str(), c_or_null(history), verbose ? 1 : 0));
  }
  if (fit->parsed()) {
    return report(canids_cmd_fit_detector(trace.c_str(), model.c_str(), c_or_null(variant), cfg.p,
                                          out.c_str()));
  }
  if (detect->parsed()) {
    return report(
        canids_cmd_detect(trace.c_str(), model.c_str(), detector.c_str(), cfg.p, out.c_str()));
  }
  if (eval->parsed()) {
    std::vector<const char *> paths;
    for (const auto &d : detections) {
      paths.push_back(d.c_str());
    }
    char *tables = nullptr;
    const canids_status st =
        canids_cmd_eval(paths.data(), paths.size(), truth.c_str(), c_or_null(manifest),
                        out.c_str(), c_or_null(roc_out), c_or_null(table_out), cfg.p, &tables);
    if (st == CANIDS_OK && tables) {
      std::fputs(tables, stdout);
    }
    canids_string_free(tables);
    return report(st);
  }
  if (live->parsed()) {
    return report(canids_cmd_live(model.c_str(), detector.c_str(), cfg.p, nullptr));
  }
  return 1;
}

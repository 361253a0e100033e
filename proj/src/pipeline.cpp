#include "pipeline.hpp"

#include "binary_io.hpp"
#include "controller.hpp"
#include "error.hpp"
#include "text_util.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace canids {

namespace {

namespace fs = std::filesystem;

void require_file(const std::string &path, const std::string &what) {
  require(!path.empty(), ErrorCode::InvalidArgument, what + " path is empty");
  require(fs::is_regular_file(path), ErrorCode::Io, what + " not found: " + path);
}

void require_writable(const std::string &path) {
  require(!path.empty(), ErrorCode::InvalidArgument, "output path is empty");
  const fs::path parent = fs::path(path).parent_path();
  require(parent.empty() || fs::is_directory(parent), ErrorCode::Io,
          "output directory does not exist: " + parent.string());
}

void write_text(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::Write, "cannot write " + path);
  out << text;
  require(static_cast<bool>(out), ErrorCode::Write, "write failed for " + path);
}

struct Provenance {
  std::string command;
  std::string config = "none";
  std::string seed = "none";
  std::vector<std::string> extra;

  std::string text() const {
    std::string s = std::string(kToolVersion) + "\ncommand: " + command + "\nconfig: " + config +
                    "\nseed: " + seed + "\n";
    for (const auto &e : extra) {
      s += e + "\n";
    }
    return s;
  }
};

Provenance provenance_for(const std::string &command, const ExperimentConfig *cfg) {
  Provenance p;
  p.command = command;
  if (cfg != nullptr) {
    p.config = config_hash(*cfg);
    p.seed = std::to_string(cfg->seed);
  }
  return p;
}

// Upstream seed / config when this stage has no config of its own.
void inherit(Provenance &p, const std::string &upstream) {
  if (p.config == "none") {
    if (auto v = header_value(upstream, "config")) {
      p.config = *v;
    }
  }
  if (p.seed == "none") {
    if (auto v = header_value(upstream, "seed")) {
      p.seed = *v;
    }
  }
}

MessageSchema resolve_schema(const std::string &trace_path, const ExperimentConfig *cfg) {
  const std::string header = read_header_comments(trace_path);
  const auto from_file = parse_schema_line(header);
  if (cfg != nullptr) {
    if (from_file) {
      require(from_file->message_id == cfg->schema.message_id &&
                  from_file->signal_count() == cfg->schema.signal_count(),
              ErrorCode::Config,
              trace_path + ": schema in the trace header does not match " + cfg->origin);
    }
    return cfg->schema;
  }
  require(from_file.has_value(), ErrorCode::InvalidArgument,
          trace_path + ": no schema header; pass --config");
  return *from_file;
}

std::string stem_of(const std::string &path) {
  const fs::path p(path);
  return (p.parent_path() / p.stem()).string();
}

} // namespace

std::string schema_line(const MessageSchema &s) {
  char period[32];
  std::snprintf(period, sizeof period, "%.17g", s.nominal_period_ms);
  std::string out = "schema: message_id=" + format_message_id(s.message_id) +
                    " period_ms=" + period + " signals=";
  for (std::size_t i = 0; i < s.signal_names.size(); ++i) {
    out += (i ? ";" : "") + s.signal_names[i];
  }
  return out;
}

std::optional<std::string> header_value(const std::string &provenance, const std::string &key) {
  std::istringstream in(provenance);
  std::string line;
  const std::string prefix = key + ": ";
  while (std::getline(in, line)) {
    if (line.rfind(prefix, 0) == 0) {
      return line.substr(prefix.size());
    }
  }
  return std::nullopt;
}

std::optional<MessageSchema> parse_schema_line(const std::string &provenance) {
  const auto value = header_value(provenance, "schema");
  if (!value) {
    return std::nullopt;
  }
  MessageSchema s;
  std::istringstream in(*value);
  std::string field;
  bool id = false, names = false;
  while (in >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) {
      continue;
    }
    const std::string k = field.substr(0, eq);
    const std::string v = field.substr(eq + 1);
    if (k == "message_id") {
      s.message_id = parse_message_id(v);
      id = true;
    } else if (k == "period_ms") {
      s.nominal_period_ms = std::stod(v);
    } else if (k == "signals") {
      std::istringstream parts(v);
      std::string name;
      while (std::getline(parts, name, ';')) {
        s.signal_names.push_back(name);
      }
      names = true;
    }
  }
  require(id && names, ErrorCode::Format, "malformed schema header: " + *value);
  s.validate();
  return s;
}

std::string read_header_comments(const std::string &path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path);
  std::string out;
  std::string line;
  while (std::getline(in, line) && !line.empty() && line[0] == '#') {
    out += line.substr(line.rfind("# ", 0) == 0 ? 2 : 1) + "\n";
  }
  return out;
}

std::string manifest_path_for(const std::string &trace_path) {
  const fs::path p(trace_path);
  if (p.extension() == ".csv") {
    return stem_of(trace_path) + ".manifest.csv";
  }
  return trace_path + ".manifest.csv";
}

void cmd_gen(const ExperimentConfig &cfg, const std::string &out) {
  require(!cfg.generator.signals.empty(), ErrorCode::Config,
          cfg.origin + ": 'generator.signals' is required for gen");
  require_writable(out);
  const Trace t = generate_normal(cfg.schema, cfg.generator.signals, cfg.generator.duration_s,
                                  cfg.generator_seed());
  Provenance p = provenance_for("gen", &cfg);
  p.extra.push_back(schema_line(cfg.schema));
  write_trace(out, t, p.text());
}

void cmd_inject(const std::string &trace_path, const ExperimentConfig &cfg, const std::string &out) {
  require_file(trace_path, "trace");
  require_writable(out);
  require(fs::absolute(trace_path) != fs::absolute(out), ErrorCode::InvalidArgument,
          "inject would overwrite its input trace");
  const MessageSchema schema = resolve_schema(trace_path, &cfg);
  const Trace clean = load_trace(trace_path, schema);
  std::vector<AttackSpec> specs;
  if (cfg.attacks.default_suite) {
    specs = default_attack_suite(clean, cfg.attacks.target_signal);
    for (auto &s : specs) {
      s.payload = cfg.attacks.flood_payload;
    }
  }
  specs.insert(specs.end(), cfg.attacks.list.begin(), cfg.attacks.list.end());
  require(!specs.empty(), ErrorCode::Config,
          cfg.origin + ": no attacks configured (default_suite is off and the list is empty)");
  AttackManifest manifest;
  const Trace attacked = inject_attacks(clean, specs, cfg.attack_seed(), &manifest);

  Provenance p = provenance_for("inject", &cfg);
  p.extra.push_back(schema_line(schema));
  write_trace(out, attacked, p.text());
  write_manifest(manifest_path_for(out), manifest, p.text());
}

void cmd_train(const std::string &trace_path, const ExperimentConfig &cfg,
               const std::string &model_out, const std::string &history_out, const LogFn &log) {
  require_file(trace_path, "trace");
  require_writable(model_out);
  if (!history_out.empty()) {
    require_writable(history_out);
  }
  const MessageSchema schema = resolve_schema(trace_path, &cfg);
  const Trace trace = load_trace(trace_path, schema);
  for (const auto &r : trace.records) {
    require(r.label == 0, ErrorCode::InvalidArgument,
            trace_path + ": training trace contains attack-labelled records");
  }
  auto [train_raw, val_raw] = split_train_val(trace, cfg.train_ratio);
  auto [train_scaled, scaling] = fit_and_scale(train_raw);
  const Trace val_scaled = apply_scaling(val_raw, scaling);

  const PredictorModel init = build_model(schema.signal_count(), cfg.predictor, cfg.model_seed());
  if (log) {
    log("model: " + std::to_string(init.parameter_count()) + " parameters, " +
        std::to_string(window_count(train_scaled.size(), cfg.predictor.subsequence_length)) +
        " training windows");
  }
  TrainResult result = train(init, train_scaled, val_scaled, cfg.predictor, [&](const EpochStats &e) {
    if (log) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "epoch %zu train %.6g val %.6g", e.epoch, e.train_loss,
                    e.val_loss);
      log(buf);
    }
  });
  result.model.scaling = scaling;

  Provenance p = provenance_for("train", &cfg);
  p.extra.push_back(schema_line(schema));
  p.extra.push_back("best_epoch: " + std::to_string(result.history.best_epoch));
  p.extra.push_back("stop_reason: " + to_string(result.history.stop_reason));
  save_model(result.model, model_out, p.text());

  if (!history_out.empty()) {
    std::ostringstream h;
    h << comment_block(p.text()) << "epoch,train_loss,val_loss\n";
    for (const auto &e : result.history.epochs) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g\n", e.epoch, e.train_loss, e.val_loss);
      h << buf;
    }
    write_text(history_out, h.str());
  }
}

void cmd_fit_detector(const std::string &trace_path, const std::string &model_path,
                      const std::string &variant_name, const ExperimentConfig *cfg,
                      const std::string &out) {
  require_file(trace_path, "trace");
  require_file(model_path, "model");
  require_writable(out);
  std::optional<Variant> variant;
  if (!variant_name.empty()) {
    variant = parse_variant(variant_name);
    require(variant.has_value(), ErrorCode::InvalidArgument,
            "unknown variant '" + variant_name +
                "' (expected ST, Diff, Sum, Avg, Max, SMA-BB, EWMA-BB or LOF)");
  } else {
    variant = cfg != nullptr ? cfg->variant : Variant::Diff;
  }
  std::string model_prov;
  const PredictorModel model = load_model(model_path, std::nullopt, &model_prov);
  require(model.scaling.has_value(), ErrorCode::Format,
          model_path + ": model carries no scaling parameters");
  const MessageSchema schema = resolve_schema(trace_path, cfg);
  require(schema.signal_count() == model.k, ErrorCode::Shape,
          trace_path + ": trace has " + std::to_string(schema.signal_count()) +
              " signals, model expects " + std::to_string(model.k));

  const DetectorParams params = cfg != nullptr ? cfg->detector : DetectorParams{};
  Detector det;
  if (is_model_variant(*variant)) {
    const Trace trace = load_trace(trace_path, schema);
    for (const auto &r : trace.records) {
      require(r.label == 0, ErrorCode::InvalidArgument,
              trace_path + ": detector training trace contains attack-labelled records");
    }
    det = fit_detector(model, apply_scaling(trace, *model.scaling), *variant, params);
  } else {
    det = make_baseline_detector(*variant, model.k,
                                 cfg != nullptr ? cfg->baselines : BaselineParams{});
  }

  Provenance p = provenance_for("fit-detector", cfg);
  inherit(p, model_prov);
  p.extra.push_back("variant: " + to_string(det.variant));
  if (det.ocsvm) {
    p.extra.push_back("ocsvm: converged=" + std::string(det.ocsvm->converged ? "yes" : "no") +
                      " iterations=" + std::to_string(det.ocsvm->iterations) +
                      " support=" + std::to_string(det.ocsvm->support_count()));
  }
  save_detector(det, out, p.text());
}

void cmd_detect(const std::string &trace_path, const std::string &model_path,
                const std::string &detector_path, const ExperimentConfig *cfg,
                const std::string &out) {
  require_file(trace_path, "trace");
  require_file(model_path, "model");
  require_file(detector_path, "detector");
  require_writable(out);
  std::string model_prov;
  const PredictorModel model = load_model(model_path, std::nullopt, &model_prov);
  require(model.scaling.has_value(), ErrorCode::Format,
          model_path + ": model carries no scaling parameters");
  const Detector det = load_detector(detector_path);
  require(det.k == model.k, ErrorCode::Shape,
          detector_path + ": detector and model disagree on the signal count");
  const MessageSchema schema = resolve_schema(trace_path, cfg);
  require(schema.signal_count() == model.k, ErrorCode::Shape,
          trace_path + ": trace signal count does not match the model");
  const Trace trace = load_trace(trace_path, schema);

  std::vector<Detection> detections;
  if (is_model_variant(det.variant)) {
    detections = run_online(trace, model, det, *model.scaling,
                            cfg != nullptr ? cfg->online : OnlineConfig{});
  } else {
    detections = run_baseline(apply_scaling(trace, *model.scaling), det);
  }

  Provenance p = provenance_for("detect", cfg);
  inherit(p, model_prov);
  p.extra.push_back("variant: " + to_string(det.variant));
  p.extra.push_back(schema_line(schema));
  write_text(out, format_detections(detections, p.text()));
}

std::string cmd_eval(const EvalRequest &req) {
  require(!req.detections.empty(), ErrorCode::InvalidArgument, "eval needs --detections");
  for (const auto &d : req.detections) {
    require_file(d, "detections");
  }
  require_file(req.truth, "truth trace");
  const std::string manifest_path = req.manifest.empty() ? manifest_path_for(req.truth) : req.manifest;
  require_file(manifest_path, "attack manifest");
  require_writable(req.out);
  if (!req.roc_out.empty()) {
    require_writable(req.roc_out);
    require(req.detections.size() == 1, ErrorCode::InvalidArgument,
            "--roc-out needs exactly one detections file");
  }
  if (!req.table_out.empty()) {
    require_writable(req.table_out);
  }

  const MessageSchema schema = resolve_schema(req.truth, req.cfg);
  const Trace truth = load_trace(req.truth, schema);
  const AttackManifest manifest = load_manifest(manifest_path);
  std::vector<double> ts;
  ts.reserve(truth.size());
  for (const auto &r : truth.records) {
    ts.push_back(r.timestamp);
  }
  const auto labels = truth.labels();
  ReportOptions opts;
  opts.nominal_period_s = schema.nominal_period_s();

  std::vector<std::pair<std::string, AttackReport>> reports;
  std::vector<std::string> provenances;
  for (const auto &path : req.detections) {
    std::string prov;
    const auto dets = load_detections(path, &prov);
    std::string name = header_value(prov, "variant").value_or(fs::path(path).stem().string());
    reports.emplace_back(name, attack_report(ts, labels, dets, manifest, opts));
    provenances.push_back(prov);
  }

  std::string tables;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    Provenance p = provenance_for("eval", req.cfg);
    inherit(p, provenances[i]);
    p.extra.push_back("variant: " + reports[i].first);
    const std::string csv = format_report_csv(reports[i].second, p.text());
    const std::string path =
        reports.size() == 1 ? req.out : stem_of(req.out) + "-" + reports[i].first + ".csv";
    write_text(path, csv);
    if (!req.roc_out.empty() && reports[i].second.overall_roc) {
      write_text(req.roc_out, format_roc_csv(*reports[i].second.overall_roc, p.text()));
    }
    tables += format_report_table(reports[i].second, "variant " + reports[i].first) + "\n";
  }
  if (reports.size() > 1) {
    for (const char *metric : {"accuracy", "f1", "fpr"}) {
      tables += format_comparison(reports, metric) + "\n";
    }
  }
  if (!req.table_out.empty()) {
    write_text(req.table_out, tables);
  }
  return tables;
}

std::size_t cmd_live(const std::string &model_path, const std::string &detector_path,
                     const ExperimentConfig &cfg, std::istream &in, std::ostream &out) {
  require_file(model_path, "model");
  require_file(detector_path, "detector");
  const PredictorModel model = load_model(model_path, cfg.schema.signal_count());
  require(model.scaling.has_value(), ErrorCode::Format,
          model_path + ": model carries no scaling parameters");
  const Detector det = load_detector(detector_path);
  OnlinePipeline pipeline(model, det, *model.scaling, cfg.schema.nominal_period_s(), cfg.online);
  return run_live(in, out, pipeline, cfg.schema);
}

} // namespace canids

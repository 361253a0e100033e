#pragma once

#include "config.hpp"
#include "eval.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace canids {

inline constexpr const char *kToolVersion = "canids 0.1.0";

using LogFn = std::function<void(const std::string &)>;

// Trace files written by the tools carry a `schema:` header line so later
// stages can read them without the config.
std::string schema_line(const MessageSchema &s);
std::optional<MessageSchema> parse_schema_line(const std::string &provenance);
std::string read_header_comments(const std::string &path);
std::optional<std::string> header_value(const std::string &provenance, const std::string &key);

std::string manifest_path_for(const std::string &trace_path);

void cmd_gen(const ExperimentConfig &cfg, const std::string &out);
void cmd_inject(const std::string &trace_path, const ExperimentConfig &cfg, const std::string &out);
void cmd_train(const std::string &trace_path, const ExperimentConfig &cfg,
               const std::string &model_out, const std::string &history_out = {},
               const LogFn &log = {});
void cmd_fit_detector(const std::string &trace_path, const std::string &model_path,
                      const std::string &variant, const ExperimentConfig *cfg,
                      const std::string &out);
void cmd_detect(const std::string &trace_path, const std::string &model_path,
                const std::string &detector_path, const ExperimentConfig *cfg,
                const std::string &out);

struct EvalRequest {
  std::vector<std::string> detections;
  std::string truth;
  std::string manifest; // empty: sidecar next to the truth trace
  std::string out;      // report CSV, or a stem when several detections are given
  std::string roc_out;
  std::string table_out;
  const ExperimentConfig *cfg = nullptr;
};

// Returns the human-readable tables.
std::string cmd_eval(const EvalRequest &req);

std::size_t cmd_live(const std::string &model_path, const std::string &detector_path,
                     const ExperimentConfig &cfg, std::istream &in, std::ostream &out);

} // namespace canids

#include "trace.hpp"

#include "error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace canids {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) {
    ++b;
  }
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) {
    --e;
  }
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv(const std::string &line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

bool parse_double(const std::string &s, double &out) {
  if (s.empty()) {
    return false;
  }
  const char *first = s.data();
  if (*first == '+') {
    ++first;
  }
  const char *last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::Write, "cannot write " + path);
  out << content;
  require(static_cast<bool>(out), ErrorCode::Write, "write failed for " + path);
}

void append_provenance(std::string &out, const std::string &provenance) {
  if (provenance.empty()) {
    return;
  }
  std::istringstream in(provenance);
  std::string line;
  while (std::getline(in, line)) {
    out += "# ";
    out += line;
    out += '\n';
  }
}

} // namespace

void MessageSchema::validate() const {
  require(!signal_names.empty(), ErrorCode::InvalidArgument,
          "schema must declare at least one signal");
  require(nominal_period_ms > 0.0 && std::isfinite(nominal_period_ms),
          ErrorCode::InvalidArgument, "nominal period must be positive");
  std::set<std::string> seen(signal_names.begin(), signal_names.end());
  require(seen.size() == signal_names.size(), ErrorCode::InvalidArgument,
          "signal names must be distinct");
}

double ScalingParams::range(std::size_t i) const { return max.at(i) - min.at(i); }

// A zero-range signal uses unit range so that test-time departures from the
// constant remain visible.
double ScalingParams::scale(std::size_t i, double v) const {
  const double r = range(i);
  return r > 0.0 ? (v - min[i]) / r : v - min[i];
}

double ScalingParams::unscale(std::size_t i, double v) const {
  const double r = range(i);
  return r > 0.0 ? v * r + min[i] : v + min[i];
}

double Trace::duration() const {
  if (records.size() < 2) {
    return 0.0;
  }
  return records.back().timestamp - records.front().timestamp;
}

void Trace::validate() const {
  schema.validate();
  const std::size_t k = schema.signal_count();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto &r = records[i];
    require(r.message_id == schema.message_id, ErrorCode::Format,
            "record " + std::to_string(i) + " has message id " +
                format_message_id(r.message_id) + ", expected " +
                format_message_id(schema.message_id));
    require(r.signals.size() == k, ErrorCode::Shape,
            "record " + std::to_string(i) + " has " +
                std::to_string(r.signals.size()) + " signals, expected " +
                std::to_string(k));
    require(r.label <= 1, ErrorCode::Format,
            "record " + std::to_string(i) + " has label outside {0,1}");
    require(i == 0 || r.timestamp >= records[i - 1].timestamp, ErrorCode::Format,
            "timestamps decrease at record " + std::to_string(i));
  }
  if (scaling) {
    require(scaling->size() == k, ErrorCode::Shape,
            "scaling dimensionality does not match signal count");
  }
}

Eigen::MatrixXd Trace::signal_matrix() const {
  const auto k = static_cast<Eigen::Index>(schema.signal_count());
  Eigen::MatrixXd m(k, static_cast<Eigen::Index>(records.size()));
  for (std::size_t j = 0; j < records.size(); ++j) {
    for (Eigen::Index i = 0; i < k; ++i) {
      m(i, static_cast<Eigen::Index>(j)) = records[j].signals[static_cast<std::size_t>(i)];
    }
  }
  return m;
}

std::vector<std::uint8_t> Trace::labels() const {
  std::vector<std::uint8_t> out;
  out.reserve(records.size());
  for (const auto &r : records) {
    out.push_back(r.label);
  }
  return out;
}

std::string format_message_id(MessageId id) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "0x%X", id);
  return buf;
}

MessageId parse_message_id(const std::string &text) {
  const std::string s = trim(text);
  require(!s.empty(), ErrorCode::Format, "empty message id");
  int base = 10;
  std::size_t offset = 0;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    offset = 2;
  }
  std::uint32_t value = 0;
  auto [ptr, ec] = std::from_chars(s.data() + offset, s.data() + s.size(), value, base);
  require(ec == std::errc() && ptr == s.data() + s.size(), ErrorCode::Format,
          "invalid message id '" + s + "'");
  return value;
}

Trace parse_trace(const std::string &text, const MessageSchema &schema,
                  const std::string &origin) {
  schema.validate();
  const std::size_t k = schema.signal_count();
  const std::size_t columns = k + 4;

  Trace trace;
  trace.schema = schema;

  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  auto where = [&] { return origin + ":" + std::to_string(line_no) + ": "; };

  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') {
      continue;
    }
    auto cells = split_csv(t);
    if (!header_seen) {
      header_seen = true;
      if (cells.front() == "timestamp") {
        require(cells.size() == columns, ErrorCode::Format,
                where() + "header has " + std::to_string(cells.size()) +
                    " columns, expected " + std::to_string(columns));
        continue;
      }
    }
    require(cells.size() == columns, ErrorCode::Format,
            where() + "row has " + std::to_string(cells.size()) +
                " columns, expected " + std::to_string(columns));

    TraceRecord rec;
    require(parse_double(cells[0], rec.timestamp), ErrorCode::Format,
            where() + "non-numeric timestamp '" + cells[0] + "'");
    try {
      rec.message_id = parse_message_id(cells[1]);
    } catch (const Error &e) {
      fail(ErrorCode::Format, where() + e.what());
    }
    require(rec.message_id == schema.message_id, ErrorCode::Format,
            where() + "message id " + format_message_id(rec.message_id) +
                " does not match schema id " + format_message_id(schema.message_id));
    double declared_k = 0.0;
    require(parse_double(cells[2], declared_k) &&
                declared_k == static_cast<double>(k),
            ErrorCode::Format,
            where() + "signal count column '" + cells[2] + "' does not match schema (" +
                std::to_string(k) + ")");
    rec.signals.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      require(parse_double(cells[3 + i], rec.signals[i]), ErrorCode::Format,
              where() + "non-numeric signal value '" + cells[3 + i] + "'");
    }
    const std::string &label = cells[3 + k];
    require(label == "0" || label == "1", ErrorCode::Format,
            where() + "label '" + label + "' outside {0,1}");
    rec.label = label == "1" ? 1 : 0;
    require(trace.records.empty() || rec.timestamp >= trace.records.back().timestamp,
            ErrorCode::Format, where() + "timestamp decreases");
    trace.records.push_back(std::move(rec));
  }
  require(!trace.records.empty(), ErrorCode::Format, origin + ": no records");
  return trace;
}

Trace load_trace(const std::string &path, const MessageSchema &schema) {
  return parse_trace(read_file(path), schema, path);
}

std::string format_trace(const Trace &trace, const std::string &provenance) {
  const std::size_t k = trace.schema.signal_count();
  std::string out;
  append_provenance(out, provenance);
  out += "timestamp,message_id,k";
  for (std::size_t i = 0; i < k; ++i) {
    out += ",sig_" + std::to_string(i + 1);
  }
  out += ",label\n";
  const std::string id = format_message_id(trace.schema.message_id);
  for (const auto &r : trace.records) {
    out += fmt9(r.timestamp);
    out += ',';
    out += id;
    out += ',';
    out += std::to_string(k);
    for (double v : r.signals) {
      out += ',';
      out += fmt9(v);
    }
    out += r.label ? ",1\n" : ",0\n";
  }
  return out;
}

void write_trace(const std::string &path, const Trace &trace,
                 const std::string &provenance) {
  write_file(path, format_trace(trace, provenance));
}

ScalingParams fit_scaling(const Trace &trace) {
  require(!trace.empty(), ErrorCode::InvalidArgument, "cannot fit scaling on an empty trace");
  trace.validate();
  const std::size_t k = trace.schema.signal_count();
  ScalingParams p;
  p.names = trace.schema.signal_names;
  p.min = trace.records.front().signals;
  p.max = trace.records.front().signals;
  for (const auto &r : trace.records) {
    for (std::size_t i = 0; i < k; ++i) {
      p.min[i] = std::min(p.min[i], r.signals[i]);
      p.max[i] = std::max(p.max[i], r.signals[i]);
    }
  }
  return p;
}

Trace apply_scaling(const Trace &trace, const ScalingParams &params) {
  const std::size_t k = trace.schema.signal_count();
  require(params.size() == k && params.max.size() == k, ErrorCode::Shape,
          "scaling has " + std::to_string(params.size()) + " signals, trace has " +
              std::to_string(k));
  Trace out = trace;
  for (auto &r : out.records) {
    for (std::size_t i = 0; i < k; ++i) {
      r.signals[i] = params.scale(i, r.signals[i]);
    }
  }
  out.scaling = params;
  return out;
}

std::pair<Trace, ScalingParams> fit_and_scale(const Trace &trace) {
  ScalingParams p = fit_scaling(trace);
  return {apply_scaling(trace, p), p};
}

Trace unscale(const Trace &trace) {
  require(trace.scaling.has_value(), ErrorCode::InvalidArgument, "trace is not scaled");
  Trace out = trace;
  const ScalingParams &p = *trace.scaling;
  for (auto &r : out.records) {
    for (std::size_t i = 0; i < r.signals.size(); ++i) {
      r.signals[i] = p.unscale(i, r.signals[i]);
    }
  }
  out.scaling.reset();
  return out;
}

void write_scaling(const std::string &path, const ScalingParams &params,
                   const std::string &provenance) {
  std::string out;
  append_provenance(out, provenance);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string name =
        i < params.names.size() ? params.names[i] : "sig_" + std::to_string(i + 1);
    out += name + "," + fmt17(params.min[i]) + "," + fmt17(params.max[i]) + "\n";
  }
  write_file(path, out);
}

ScalingParams load_scaling(const std::string &path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  ScalingParams p;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') {
      continue;
    }
    auto cells = split_csv(t);
    double lo = 0.0;
    double hi = 0.0;
    require(cells.size() == 3 && parse_double(cells[1], lo) && parse_double(cells[2], hi),
            ErrorCode::Format,
            path + ":" + std::to_string(line_no) + ": expected signal_name,min,max");
    require(lo <= hi, ErrorCode::Format,
            path + ":" + std::to_string(line_no) + ": min exceeds max");
    p.names.push_back(cells[0]);
    p.min.push_back(lo);
    p.max.push_back(hi);
  }
  require(p.size() > 0, ErrorCode::Format, path + ": no scaling entries");
  return p;
}

std::pair<Trace, Trace> split_train_val(const Trace &trace, double ratio) {
  require(ratio > 0.0 && ratio < 1.0, ErrorCode::InvalidArgument,
          "split ratio must lie in (0,1)");
  require(trace.size() >= 2, ErrorCode::InvalidArgument,
          "split needs at least two records");
  const auto n_train =
      static_cast<std::size_t>(std::floor(ratio * static_cast<double>(trace.size())));
  require(n_train > 0 && n_train < trace.size(), ErrorCode::InvalidArgument,
          "split leaves an empty partition");
  Trace train;
  Trace val;
  train.schema = val.schema = trace.schema;
  train.scaling = val.scaling = trace.scaling;
  train.records.assign(trace.records.begin(),
                       trace.records.begin() + static_cast<std::ptrdiff_t>(n_train));
  val.records.assign(trace.records.begin() + static_cast<std::ptrdiff_t>(n_train),
                     trace.records.end());
  return {std::move(train), std::move(val)};
}

std::size_t window_count(std::size_t n, std::size_t length) {
  return n > length ? n - length : 0;
}

std::vector<WindowPair> windows(const Trace &trace, std::size_t length) {
  require(length > 0, ErrorCode::InvalidArgument, "subsequence length must be positive");
  const std::size_t count = window_count(trace.size(), length);
  require(count > 0, ErrorCode::InvalidArgument,
          "trace of " + std::to_string(trace.size()) +
              " records is too short for subsequence length " + std::to_string(length));
  const auto k = static_cast<Eigen::Index>(trace.schema.signal_count());
  std::vector<WindowPair> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    WindowPair w;
    w.input.resize(static_cast<Eigen::Index>(length), k);
    for (std::size_t s = 0; s < length; ++s) {
      for (Eigen::Index j = 0; j < k; ++j) {
        w.input(static_cast<Eigen::Index>(s), j) =
            trace.records[i + s].signals[static_cast<std::size_t>(j)];
      }
    }
    w.target = Eigen::Map<const Eigen::VectorXd>(trace.records[i + length].signals.data(), k);
    out.push_back(std::move(w));
  }
  return out;
}

} // namespace canids

#include "poploop/log_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "poploop/errors.hpp"

namespace poploop {

namespace {

using nlohmann::json;

void append_bool_array(std::string& out, const std::vector<bool>& values) {
  out += '[';
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += values[i] ? "true" : "false";
  }
  out += ']';
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

[[noreturn]] void bad_line(const std::string& path, size_t line_no,
                           const std::string& why) {
  throw IoError(path + ": line " + std::to_string(line_no) + ": " + why);
}

void append_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

void write_log_jsonl(const InteractionLog& log, const std::string& path) {
  auto out = open_for_write(path);
  std::string line;
  for (const auto& rec : log.records) {
    line.clear();
    line += "{\"session_id\":";
    line += std::to_string(rec.session_id);
    line += ",\"iteration\":";
    line += std::to_string(rec.iteration);
    line += ",\"segment\":";
    line += std::to_string(rec.segment);
    line += ",\"items\":[";
    const auto& items = log.slate_of(rec);
    for (size_t j = 0; j < items.size(); ++j) {
      if (j) line += ',';
      line += std::to_string(items[j]);
    }
    line += "],\"examined\":";
    append_bool_array(line, rec.examined);
    line += ",\"clicked\":";
    append_bool_array(line, rec.clicked);
    line += "}\n";
    out << line;
  }
  if (!out) throw IoError("failed while writing '" + path + "'");
}

InteractionLog read_log_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");

  static const char* kFields[] = {"session_id", "iteration", "segment",
                                  "items",      "examined",  "clicked"};
  InteractionLog log;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      bad_line(path, line_no, e.what());
    }
    if (!row.is_object()) bad_line(path, line_no, "expected a JSON object");
    for (const char* field : kFields)
      if (!row.contains(field))
        bad_line(path, line_no, std::string("missing field '") + field + "'");
    if (row.size() != 6) bad_line(path, line_no, "unexpected extra fields");

    ImpressionRecord rec;
    RankedSlate slate;
    try {
      rec.session_id = row["session_id"].get<int64_t>();
      rec.iteration = row["iteration"].get<int32_t>();
      rec.segment = row["segment"].get<int32_t>();
      slate.items = row["items"].get<std::vector<int32_t>>();
      rec.examined = row["examined"].get<std::vector<bool>>();
      rec.clicked = row["clicked"].get<std::vector<bool>>();
    } catch (const json::exception& e) {
      bad_line(path, line_no, e.what());
    }
    if (rec.segment < 0) bad_line(path, line_no, "segment must be >= 0");
    if (slate.items.empty()) bad_line(path, line_no, "items must be non-empty");
    for (int32_t item : slate.items)
      if (item < 0) bad_line(path, line_no, "item ids must be >= 0");
    if (rec.examined.size() != slate.items.size() ||
        rec.clicked.size() != slate.items.size())
      bad_line(path, line_no, "examined/clicked length must match items");
    for (size_t j = 0; j < slate.items.size(); ++j)
      if (rec.clicked[j] && !rec.examined[j])
        bad_line(path, line_no, "clicked implies examined");

    rec.slate_index = static_cast<uint32_t>(log.slates.size());
    log.slates.push_back(std::move(slate));
    log.records.push_back(std::move(rec));
  }
  if (!log.records.empty()) log.meta.iteration = log.records.front().iteration;
  return log;
}

void write_propensity_json(const PropensityFit& fit, const std::string& path) {
  json doc;
  doc["schema_version"] = 1;
  doc["curve_table"] = fit.curve_table;
  doc["beta_hat"] = fit.beta_hat;
  doc["em_iterations_used"] = fit.em_iterations_used;
  doc["converged"] = fit.converged;
  doc["log_likelihood_trace"] = fit.log_likelihood_trace;
  write_json_atomic(doc.dump(2) + "\n", path);
}

void write_metrics_csv(const std::vector<MetricRow>& rows, const std::string& path) {
  auto out = open_for_write(path);
  out << "metric,parameter,variant,iteration,value\n";
  std::string line;
  for (const auto& r : rows) {
    line.clear();
    line += r.metric;
    line += ',';
    line += r.parameter;
    line += ',';
    line += r.variant;
    line += ',';
    line += std::to_string(r.iteration);
    line += ',';
    append_double(line, r.value);
    line += '\n';
    out << line;
  }
  if (!out) throw IoError("failed while writing '" + path + "'");
}

void write_report_csv(const std::vector<ReportRow>& rows, const std::string& path) {
  auto out = open_for_write(path);
  out << "metric,parameter,variant,value,delta_vs_baseline\n";
  std::string line;
  for (const auto& r : rows) {
    line.clear();
    line += r.metric;
    line += ',';
    line += r.parameter;
    line += ',';
    line += r.variant;
    line += ',';
    append_double(line, r.value);
    line += ',';
    append_double(line, r.delta_vs_baseline);
    line += '\n';
    out << line;
  }
  if (!out) throw IoError("failed while writing '" + path + "'");
}

void write_json_atomic(const std::string& serialized, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    auto out = open_for_write(tmp);
    out << serialized;
    if (!out) throw IoError("failed while writing '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw IoError("cannot move '" + tmp + "' into place at '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace poploop

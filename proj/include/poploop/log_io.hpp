#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poploop/domain.hpp"
#include "poploop/propensity.hpp"

namespace poploop {

inline constexpr const char* kToolVersion = "0.1.0";

// One line per impression record, fields always emitted in this order:
// session_id, iteration, segment, items, examined, clicked.
void write_log_jsonl(const InteractionLog& log, const std::string& path);

// Parse failures throw IoError naming the path and 1-based line number.
// Each line becomes a record with its own slate; metadata not representable
// in the line format (ranker id, seed, mode) is left defaulted.
InteractionLog read_log_jsonl(const std::string& path);

void write_propensity_json(const PropensityFit& fit, const std::string& path);

struct MetricRow {
  std::string metric;
  std::string parameter;  // k or x rendered as text; empty when not applicable
  std::string variant;
  int32_t iteration = 0;
  double value = 0.0;
};

// Header: metric,parameter,variant,iteration,value. Values print with %.17g
// so equal doubles always produce equal bytes.
void write_metrics_csv(const std::vector<MetricRow>& rows, const std::string& path);

struct ReportRow {
  std::string metric;
  std::string parameter;
  std::string variant;
  double value = 0.0;
  double delta_vs_baseline = 0.0;
};

// Header: metric,parameter,variant,value,delta_vs_baseline.
void write_report_csv(const std::vector<ReportRow>& rows, const std::string& path);

// Serialized with sorted keys and trailing newline, written to a temp file in
// the target directory and renamed into place.
void write_json_atomic(const std::string& serialized, const std::string& path);

std::string read_text_file(const std::string& path);

}  // namespace poploop

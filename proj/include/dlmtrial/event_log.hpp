#pragma once

// Line-oriented event log:
//
//   #dlmtrial-events v1 {"budget":...}          <- trial config, one JSON line
//   #t,arm,u,y,w_A,f_A,Q_A,f_B,Q_B,bf01          <- column header
//   1,A,0.71..,5,0.5,0,2.1,0,2.1000010000000001, <- one record per patient
//
// Numbers carry 17 significant digits; an empty bf01 means "not evaluated".

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dlmtrial/trial.hpp"

namespace dlmtrial {

inline constexpr std::string_view kEventLogMagic = "#dlmtrial-events v1 ";
inline constexpr std::string_view kEventLogColumns = "#t,arm,u,y,w_A,f_A,Q_A,f_B,Q_B,bf01";

struct EventLog {
  TrialConfig config;
  std::vector<PatientRecord> records;
};

std::string format_event_header(const TrialConfig& config);
std::string format_event_record(const PatientRecord& rec);
std::string format_event_log(const EventLog& log);

PatientRecord parse_event_record(std::string_view line);
EventLog parse_event_log(std::string_view text);

struct ReplayReport {
  bool match = true;
  std::string mismatch;  // first discrepancy, empty when match
  TrialResult result;
};

/// Folds the log's records through a fresh TrialCore and checks that every
/// stored weight, forecast, arm and Bayes factor is reproduced bit-exactly.
ReplayReport replay(const EventLog& log);

}  // namespace dlmtrial

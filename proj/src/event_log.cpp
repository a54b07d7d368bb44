#include "dlmtrial/event_log.hpp"

#include <charconv>

#include "dlmtrial/config_json.hpp"
#include "dlmtrial/error.hpp"
#include "dlmtrial/numfmt.hpp"

namespace dlmtrial {
namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::int64_t parse_index(std::string_view text) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw FormatError("bad patient index '" + std::string(text) + "'");
  }
  return value;
}

std::string describe(std::int64_t t, const char* field) {
  return "patient " + std::to_string(t) + ": " + field + " differs";
}

}  // namespace

std::string format_event_header(const TrialConfig& config) {
  std::string out(kEventLogMagic);
  out += trial_config_to_json(config).dump();
  out += '\n';
  out += kEventLogColumns;
  out += '\n';
  return out;
}

std::string format_event_record(const PatientRecord& r) {
  std::string out = std::to_string(r.t);
  out += ',';
  out += arm_letter(r.arm);
  for (double x : {r.u, r.y, r.w_a, r.forecasts.f_a, r.forecasts.q_a, r.forecasts.f_b,
                   r.forecasts.q_b}) {
    out += ',';
    out += format_double(x);
  }
  out += ',';
  if (r.bf01) out += format_double(*r.bf01);
  out += '\n';
  return out;
}

std::string format_event_log(const EventLog& log) {
  std::string out = format_event_header(log.config);
  for (const PatientRecord& r : log.records) out += format_event_record(r);
  return out;
}

PatientRecord parse_event_record(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const std::vector<std::string_view> f = split(line, ',');
  if (f.size() != 10) throw FormatError("event record needs 10 fields: '" + std::string(line) + "'");
  PatientRecord r;
  r.t = parse_index(f[0]);
  if (f[1] == "A") {
    r.arm = Arm::A;
  } else if (f[1] == "B") {
    r.arm = Arm::B;
  } else {
    throw FormatError("bad arm '" + std::string(f[1]) + "'");
  }
  r.u = parse_double(f[2]);
  r.y = parse_double(f[3]);
  r.w_a = parse_double(f[4]);
  r.forecasts = {parse_double(f[5]), parse_double(f[6]), parse_double(f[7]), parse_double(f[8])};
  if (!f[9].empty()) r.bf01 = parse_double(f[9]);
  return r;
}

EventLog parse_event_log(std::string_view text) {
  EventLog log;
  bool have_header = false;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    if (!have_header) {
      if (!line.starts_with(kEventLogMagic)) throw FormatError("not a dlmtrial event log");
      line.remove_prefix(kEventLogMagic.size());
      nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
      if (j.is_discarded()) throw FormatError("event log header is not valid JSON");
      log.config = trial_config_from_json(j);
      have_header = true;
      continue;
    }
    if (line.front() == '#') continue;
    PatientRecord r = parse_event_record(line);
    if (r.t != static_cast<std::int64_t>(log.records.size()) + 1) {
      throw FormatError("event records must be contiguous from t=1");
    }
    log.records.push_back(r);
  }
  if (!have_header) throw FormatError("empty event log");
  return log;
}

ReplayReport replay(const EventLog& log) {
  ReplayReport report;
  TrialCore core(log.config);
  for (const PatientRecord& stored : log.records) {
    const PendingAllocation pending = core.propose();
    const char* diff = nullptr;
    if (pending.prior.t != stored.t) diff = "index";
    else if (pending.weights.w_a != stored.w_a) diff = "w_A";
    else if (pending.forecasts.f_a != stored.forecasts.f_a ||
             pending.forecasts.q_a != stored.forecasts.q_a ||
             pending.forecasts.f_b != stored.forecasts.f_b ||
             pending.forecasts.q_b != stored.forecasts.q_b) {
      diff = "forecasts";
    }
    if (diff == nullptr) {
      const PatientRecord& got = core.absorb(pending, stored.u, stored.y);
      if (got.arm != stored.arm) diff = "arm";
      else if (got.bf01 != stored.bf01) diff = "bf01";
    }
    if (diff != nullptr && report.match) {
      report.match = false;
      report.mismatch = describe(stored.t, diff);
      break;
    }
  }
  report.result = summarize(core);
  return report;
}

}  // namespace dlmtrial

#include "dlmtrial/report.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include <openssl/evp.h>

#include "dlmtrial/error.hpp"
#include "dlmtrial/numfmt.hpp"

namespace dlmtrial {
namespace fs = std::filesystem;
using nlohmann::json;

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

// Data rows of a CSV table after checking its header.
std::vector<std::vector<std::string_view>> csv_rows(std::string_view text, std::string_view header) {
  std::vector<std::vector<std::string_view>> rows;
  const std::size_t columns = split(header, ',').size();
  bool seen_header = false;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!seen_header) {
      if (line != header) throw FormatError("unexpected CSV header: '" + std::string(line) + "'");
      seen_header = true;
      continue;
    }
    auto fields = split(line, ',');
    if (fields.size() != columns) throw FormatError("CSV row has wrong field count");
    rows.push_back(std::move(fields));
  }
  if (!seen_header) throw FormatError("CSV table is empty");
  return rows;
}

std::int64_t parse_int(std::string_view text) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw FormatError("not an integer: '" + std::string(text) + "'");
  }
  return value;
}

template <class... Xs>
void append_row(std::string& out, const Xs&... xs) {
  bool first = true;
  auto put = [&](const auto& x) {
    if (!first) out += ',';
    first = false;
    using T = std::decay_t<decltype(x)>;
    if constexpr (std::is_same_v<T, double>) {
      out += format_double(x);
    } else if constexpr (std::is_integral_v<T>) {
      out += std::to_string(x);
    } else {
      out += x;
    }
  };
  (put(xs), ...);
  out += '\n';
}

constexpr std::string_view kScenarioHeader =
    "scenario,mean_difference,sd,budget,rule,n_sims,mean_n_a,mean_n_b,reported_arm,"
    "reported_mean,mean_total_outcome,mean_w_a";
constexpr std::string_view kSweepHeader =
    "mu_b,omega,c_tb,n_sims,mean_prop_a,mean_prop_b,mean_share_a,mean_switch,switch_q025,"
    "switch_q50,switch_q975,p_no_switch,stop_q025,stop_q50,stop_q975,p_exhaust,"
    "mean_bf_at_budget,median_bf_at_budget";
constexpr std::string_view kStoppingHeader =
    "mu_b,omega,c_tb,stop_q025,stop_q50,stop_q975,p_exhaust,median_bf_at_budget";

void write_all(int fd, std::string_view content, const fs::path& path) {
  const char* p = content.data();
  std::size_t left = content.size();
  while (left > 0) {
    const ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError("write failed for " + path.string() + ": " + std::strerror(errno));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
}

}  // namespace

void atomic_write(const fs::path& path, std::string_view content) {
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::random_device rd;
  const fs::path tmp = dir / ("." + path.filename().string() + ".tmp" + std::to_string(rd()));
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError("cannot create " + tmp.string() + ": " + std::strerror(errno));
  try {
    write_all(fd, content, tmp);
    if (::fsync(fd) != 0) throw IoError("fsync failed for " + tmp.string());
  } catch (...) {
    ::close(fd);
    ::unlink(tmp.c_str());
    throw;
  }
  ::close(fd);
  if (::rename(tmp.c_str(), path.c_str()) != 0) {
    ::unlink(tmp.c_str());
    throw IoError("cannot rename into " + path.string() + ": " + std::strerror(errno));
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path.string());
  return ss.str();
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("sha256 failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  static constexpr char kHex[] = "0123456789abcdef";
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0xf];
  }
  return hex;
}

std::string scenario_csv(std::span<const ScenarioSummary> rows) {
  std::string out(kScenarioHeader);
  out += '\n';
  for (const ScenarioSummary& s : rows) {
    append_row(out, s.spec.label, s.spec.mean_difference, s.spec.sd, s.spec.budget,
               std::string(to_string(s.rule)), s.n_sims, s.mean_n_a, s.mean_n_b,
               std::string(1, arm_letter(s.reported_arm)), s.reported_mean, s.mean_total_outcome,
               s.mean_w_a);
  }
  return out;
}

std::vector<ScenarioSummary> parse_scenario_csv(std::string_view text) {
  std::vector<ScenarioSummary> out;
  for (const auto& f : csv_rows(text, kScenarioHeader)) {
    ScenarioSummary s;
    s.spec.label = std::string(f[0]);
    s.spec.mean_difference = parse_double(f[1]);
    s.spec.sd = parse_double(f[2]);
    s.spec.budget = parse_int(f[3]);
    s.rule = parse_weight_rule(f[4]);
    s.n_sims = parse_int(f[5]);
    s.mean_n_a = parse_double(f[6]);
    s.mean_n_b = parse_double(f[7]);
    if (f[8] != "A" && f[8] != "B") throw FormatError("bad reported arm");
    s.reported_arm = f[8] == "A" ? Arm::A : Arm::B;
    s.reported_mean = parse_double(f[9]);
    s.mean_total_outcome = parse_double(f[10]);
    s.mean_w_a = parse_double(f[11]);
    out.push_back(std::move(s));
  }
  return out;
}

std::string sweep_csv(std::span<const SweepSummary> rows) {
  std::string out(kSweepHeader);
  out += '\n';
  for (const SweepSummary& s : rows) {
    append_row(out, s.cell.mu_b, s.cell.omega, s.cell.c_tb, s.n_sims, s.mean_prop_a,
               s.mean_prop_b, s.mean_share_a, s.mean_switch, s.switch_q.q025, s.switch_q.q50,
               s.switch_q.q975, s.p_no_switch, s.stop_q.q025, s.stop_q.q50, s.stop_q.q975,
               s.p_exhaust, s.mean_bf_at_budget, s.median_bf_at_budget);
  }
  return out;
}

std::vector<SweepSummary> parse_sweep_csv(std::string_view text) {
  std::vector<SweepSummary> out;
  for (const auto& f : csv_rows(text, kSweepHeader)) {
    SweepSummary s;
    s.cell = {parse_double(f[0]), parse_double(f[1]), parse_double(f[2])};
    s.n_sims = parse_int(f[3]);
    s.mean_prop_a = parse_double(f[4]);
    s.mean_prop_b = parse_double(f[5]);
    s.mean_share_a = parse_double(f[6]);
    s.mean_switch = parse_double(f[7]);
    s.switch_q = {parse_double(f[8]), parse_double(f[9]), parse_double(f[10])};
    s.p_no_switch = parse_double(f[11]);
    s.stop_q = {parse_double(f[12]), parse_double(f[13]), parse_double(f[14])};
    s.p_exhaust = parse_double(f[15]);
    s.mean_bf_at_budget = parse_double(f[16]);
    s.median_bf_at_budget = parse_double(f[17]);
    out.push_back(std::move(s));
  }
  return out;
}

std::string stopping_csv(std::span<const StoppingRow> rows) {
  std::string out(kStoppingHeader);
  out += '\n';
  for (const StoppingRow& r : rows) {
    append_row(out, r.cell.mu_b, r.cell.omega, r.cell.c_tb, r.stop_q.q025, r.stop_q.q50,
               r.stop_q.q975, r.p_exhaust, r.median_bf_at_budget);
  }
  return out;
}

std::vector<StoppingRow> parse_stopping_csv(std::string_view text) {
  std::vector<StoppingRow> out;
  for (const auto& f : csv_rows(text, kStoppingHeader)) {
    StoppingRow r;
    r.cell = {parse_double(f[0]), parse_double(f[1]), parse_double(f[2])};
    r.stop_q = {parse_double(f[3]), parse_double(f[4]), parse_double(f[5])};
    r.p_exhaust = parse_double(f[6]);
    r.median_bf_at_budget = parse_double(f[7]);
    out.push_back(r);
  }
  return out;
}

json trajectory_json(std::span<const SweepSummary> rows) {
  json cells = json::array();
  for (const SweepSummary& s : rows) {
    json mean = json::array(), lo = json::array(), hi = json::array();
    for (const BandPoint& p : s.trajectory) {
      mean.push_back(p.mean);
      lo.push_back(p.lo);
      hi.push_back(p.hi);
    }
    cells.push_back({{"mu_b", s.cell.mu_b},
                     {"omega", s.cell.omega},
                     {"c_tb", s.cell.c_tb},
                     {"mean", std::move(mean)},
                     {"q025", std::move(lo)},
                     {"q975", std::move(hi)}});
  }
  return {{"schema", "dlmtrial.trajectory_bands"},
          {"schema_version", kTrajectorySchemaVersion},
          {"series", "w_A at allocation"},
          {"padding", "carry-last"},
          {"quantile_method", "type7-linear"},
          {"cells", std::move(cells)}};
}

std::vector<CellTrajectory> parse_trajectory_json(const json& j) {
  try {
    if (j.at("schema") != "dlmtrial.trajectory_bands" ||
        j.at("schema_version") != kTrajectorySchemaVersion) {
      throw FormatError("unsupported trajectory schema");
    }
    std::vector<CellTrajectory> out;
    for (const json& c : j.at("cells")) {
      CellTrajectory ct;
      ct.cell = {c.at("mu_b").get<double>(), c.at("omega").get<double>(),
                 c.at("c_tb").get<double>()};
      const json& mean = c.at("mean");
      const json& lo = c.at("q025");
      const json& hi = c.at("q975");
      if (lo.size() != mean.size() || hi.size() != mean.size()) {
        throw FormatError("trajectory series lengths differ");
      }
      for (std::size_t t = 0; t < mean.size(); ++t) {
        ct.points.push_back({mean[t].get<double>(), lo[t].get<double>(), hi[t].get<double>()});
      }
      out.push_back(std::move(ct));
    }
    return out;
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid trajectory file: ") + e.what());
  }
}

json RunManifest::to_json() const {
  json outs = json::array();
  for (const auto& [name, digest] : outputs) outs.push_back({{"file", name}, {"sha256", digest}});
  json j = {{"schema", "dlmtrial.manifest"},
            {"schema_version", kManifestSchemaVersion},
            {"command", command},
            {"engine", "dlmtrial"},
            {"engine_version", engine_version},
            {"seed", seed},
            {"config", config},
            {"outputs", std::move(outs)}};
  if (created_utc) j["created_utc"] = *created_utc;
  return j;
}

RunManifest RunManifest::from_json(const json& j) {
  try {
    if (j.at("schema") != "dlmtrial.manifest") throw FormatError("not a dlmtrial manifest");
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.engine_version = j.at("engine_version").get<std::string>();
    if (j.contains("created_utc")) m.created_utc = j["created_utc"].get<std::string>();
    for (const json& o : j.at("outputs")) {
      m.outputs.emplace_back(o.at("file").get<std::string>(), o.at("sha256").get<std::string>());
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid manifest: ") + e.what());
  }
}

void write_output(const fs::path& dir, const std::string& name, std::string_view content,
                  RunManifest& manifest) {
  const fs::path path = dir / name;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  atomic_write(path, content);
  manifest.outputs.emplace_back(name, sha256_hex(content));
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace dlmtrial

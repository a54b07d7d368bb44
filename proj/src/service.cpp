#include "dlmtrial/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <random>

#include <httplib.h>

#include "dlmtrial/config_json.hpp"
#include "dlmtrial/error.hpp"
#include "dlmtrial/event_log.hpp"
#include "dlmtrial/numfmt.hpp"
#include "dlmtrial/report.hpp"

namespace dlmtrial {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kPendingPrefix = "!enroll,";
constexpr const char* kIndexFile = "manifest.json";

std::string new_trial_id() {
  static constexpr char kHex[] = "0123456789abcdef";
  std::random_device rd;
  std::string id = "t";
  for (int i = 0; i < 4; ++i) {
    std::uint32_t v = rd();
    for (int k = 0; k < 4; ++k) {
      id += kHex[v & 0xf];
      v >>= 4;
    }
  }
  return id;
}

void append_durable(const fs::path& path, const std::string& line) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
  if (fd < 0) throw ServiceError(500, "cannot open " + path.string() + ": " + std::strerror(errno));
  const char* p = line.data();
  std::size_t left = line.size();
  while (left > 0) {
    const ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      throw ServiceError(500, "append failed: " + std::string(std::strerror(errno)));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  const int rc = ::fsync(fd);
  ::close(fd);
  if (rc != 0) throw ServiceError(500, "fsync failed for " + path.string());
}

json vec_json(const Vec2& v) { return json::array({v(0), v(1)}); }
json mat_json(const Mat2& m) {
  return json::array({json::array({m(0, 0), m(0, 1)}), json::array({m(1, 0), m(1, 1)})});
}

json forecasts_json(const ArmForecasts& fc) {
  return {{"f_A", fc.f_a}, {"Q_A", fc.q_a}, {"f_B", fc.f_b}, {"Q_B", fc.q_b}};
}

json optional_json(const std::optional<std::int64_t>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

struct TrialStore::Trial {
  std::string id;
  fs::path path;
  mutable std::mutex mu;
  std::optional<LiveSession> session;
  std::int64_t revision = 1;

  void check_revision(std::optional<std::int64_t> if_match) const {
    if (if_match && *if_match != revision) {
      throw ServiceError(409, "revision mismatch: current " + std::to_string(revision) +
                                  ", If-Match " + std::to_string(*if_match));
    }
  }
};

TrialStore::TrialStore(fs::path data_dir) : dir_(std::move(data_dir)) {
  std::error_code ec;
  fs::create_directories(dir_ / "trials", ec);
  if (ec) throw IoError("cannot create data directory " + dir_.string() + ": " + ec.message());

  std::vector<std::string> ids;
  if (fs::exists(dir_ / kIndexFile)) {
    try {
      for (const json& id : json::parse(read_text(dir_ / kIndexFile)).at("trials")) {
        ids.push_back(id.get<std::string>());
      }
    } catch (const json::exception& e) {
      throw FormatError("corrupt " + std::string(kIndexFile) + ": " + e.what());
    }
  }
  // logs written before the index was updated
  std::vector<std::string> extra;
  for (const auto& entry : fs::directory_iterator(dir_ / "trials")) {
    if (entry.path().extension() != ".log") continue;
    const std::string id = entry.path().stem().string();
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) extra.push_back(id);
  }
  std::sort(extra.begin(), extra.end());
  ids.insert(ids.end(), extra.begin(), extra.end());

  for (const std::string& id : ids) load(id);
  if (!extra.empty()) write_index();
}

TrialStore::~TrialStore() = default;

void TrialStore::load(const std::string& id) {
  auto trial = std::make_shared<Trial>();
  trial->id = id;
  trial->path = dir_ / "trials" / (id + ".log");
  const std::string text = read_text(trial->path);

  std::string events;
  std::optional<std::int64_t> pending;
  std::int64_t mutations = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) {
      // torn append from a crash; drop it so later appends start clean
      fs::resize_file(trial->path, start);
      break;
    }
    const std::string_view line(text.data() + start, end - start);
    start = end + 1;
    if (line.starts_with(kPendingPrefix)) {
      const std::string_view num = line.substr(kPendingPrefix.size());
      std::int64_t t = 0;
      auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), t);
      if (ec != std::errc{} || ptr != num.data() + num.size()) {
        throw FormatError("trial " + id + ": bad pending marker");
      }
      pending = t;
      ++mutations;
      continue;
    }
    if (!line.empty() && line.front() != '#') {
      pending.reset();
      ++mutations;
    }
    events.append(line);
    events += '\n';
  }
  const EventLog log = parse_event_log(events);
  trial->session = LiveSession::restore(log, pending);
  trial->revision = 1 + mutations;

  std::lock_guard lock(mu_);
  trials_[id] = trial;
  order_.push_back(id);
}

void TrialStore::write_index() const {
  json ids = json::array();
  {
    std::lock_guard lock(mu_);
    for (const std::string& id : order_) ids.push_back(id);
  }
  atomic_write(dir_ / kIndexFile,
               json{{"schema", "dlmtrial.store"}, {"schema_version", 1}, {"trials", ids}}.dump(2) +
                   "\n");
}

std::shared_ptr<TrialStore::Trial> TrialStore::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = trials_.find(id);
  if (it == trials_.end()) throw ServiceError(404, "no trial '" + id + "'");
  return it->second;
}

Mutated TrialStore::create(const json& body) {
  if (!body.is_object()) throw ServiceError(422, "trial config must be a JSON object");
  if (body.contains("truth") && !body["truth"].is_null()) {
    throw ServiceError(422, "live trials take no simulation truth");
  }
  json cfg_json = body;
  if (!cfg_json.contains("seed")) {
    std::random_device rd;
    cfg_json["seed"] = (static_cast<std::uint64_t>(rd()) << 32) | rd();
  }
  TrialConfig config;
  try {
    config = trial_config_from_json(cfg_json);
    config.truth.reset();
    config.validate(false);
  } catch (const json::exception& e) {
    throw ServiceError(422, std::string("invalid trial config: ") + e.what());
  } catch (const std::exception& e) {
    throw ServiceError(422, e.what());
  }
  if (config.budget < 2) throw ServiceError(422, "budget must be at least 2");

  auto trial = std::make_shared<Trial>();
  trial->session.emplace(config);
  {
    std::lock_guard lock(mu_);
    do {
      trial->id = new_trial_id();
    } while (trials_.contains(trial->id));
  }
  trial->path = dir_ / "trials" / (trial->id + ".log");
  atomic_write(trial->path, format_event_header(trial->session->core().config()));
  {
    std::lock_guard lock(mu_);
    trials_[trial->id] = trial;
    order_.push_back(trial->id);
  }
  write_index();
  return {{{"trial_id", trial->id},
           {"revision", trial->revision},
           {"config", trial_config_to_json(trial->session->core().config())}},
          trial->revision};
}

Mutated TrialStore::enroll(const std::string& id, std::optional<std::int64_t> if_match) {
  auto trial = find(id);
  std::lock_guard lock(trial->mu);
  trial->check_revision(if_match);
  LiveSession& s = *trial->session;
  if (s.phase() != Phase::AwaitingEnroll) {
    throw ServiceError(409, "cannot enroll while " + std::string(to_string(s.phase())));
  }
  // persist first: a crash after the append replays to the same enrollment
  append_durable(trial->path, std::string(kPendingPrefix) +
                                  std::to_string(s.core().records().size() + 1) + "\n");
  const Enrollment e = s.enroll();
  ++trial->revision;
  return {{{"trial_id", id},
           {"patient_index", e.t},
           {"arm", std::string(1, arm_letter(e.arm))},
           {"w_A", e.w_a},
           {"w_B", 1.0 - e.w_a},
           {"u", e.u},
           {"forecasts", forecasts_json(e.forecasts)},
           {"revision", trial->revision}},
          trial->revision};
}

Mutated TrialStore::record_outcome(const std::string& id, const json& body,
                                   std::optional<std::int64_t> if_match) {
  auto trial = find(id);
  std::lock_guard lock(trial->mu);
  trial->check_revision(if_match);
  LiveSession& s = *trial->session;
  if (s.phase() != Phase::AwaitingOutcome) {
    throw ServiceError(409, "no enrollment awaiting an outcome (" +
                                std::string(to_string(s.phase())) + ")");
  }
  if (!body.is_object() || !body.contains("y")) throw ServiceError(422, "body must be {\"y\": number}");
  double y = 0.0;
  const json& jy = body["y"];
  if (jy.is_number()) {
    y = jy.get<double>();
  } else if (jy.is_string()) {
    try {
      y = parse_double(jy.get<std::string>());
    } catch (const std::exception&) {
      throw ServiceError(422, "y is not a number");
    }
  } else {
    throw ServiceError(422, "y is not a number");
  }
  if (!std::isfinite(y)) throw ServiceError(422, "y must be finite");

  // dry run on a copy so a numerical failure leaves nothing persisted
  LiveSession probe = s;
  OutcomeReport report;
  try {
    report = probe.record_outcome(y);
  } catch (const NumericalDomainError& e) {
    throw ServiceError(422, e.what());
  }
  append_durable(trial->path, format_event_record(probe.core().records().back()));
  s = std::move(probe);
  ++trial->revision;

  const PatientRecord& rec = s.core().records().back();
  return {{{"trial_id", id},
           {"patient_index", rec.t},
           {"state", {{"t", report.state.t}, {"m", vec_json(report.state.m)}, {"C", mat_json(report.state.C)}}},
           {"bf01", rec.bf01 ? json(*rec.bf01) : json(nullptr)},
           {"recommendation", to_string(report.recommendation)},
           {"phase", to_string(report.phase)},
           {"revision", trial->revision}},
          trial->revision};
}

json TrialStore::state(const std::string& id) const {
  auto trial = find(id);
  std::lock_guard lock(trial->mu);
  const LiveSession& s = *trial->session;
  const TrialCore& core = s.core();
  const TrialResult summary = summarize(core);

  json weights;
  if (s.pending()) {
    weights = {{"w_A", s.pending()->w_a}, {"w_B", 1.0 - s.pending()->w_a},
               {"forecasts", forecasts_json(s.pending()->forecasts)}};
  } else if (s.phase() == Phase::AwaitingEnroll) {
    const PendingAllocation next = core.propose();
    weights = {{"w_A", next.weights.w_a}, {"w_B", next.weights.w_b},
               {"forecasts", forecasts_json(next.forecasts)}};
  }
  json bf_series = json::array();
  json arms = json::array();
  for (const PatientRecord& r : core.records()) {
    bf_series.push_back(r.bf01 ? json(*r.bf01) : json(nullptr));
    arms.push_back(std::string(1, arm_letter(r.arm)));
  }
  return {{"trial_id", id},
          {"revision", trial->revision},
          {"phase", to_string(s.phase())},
          {"recommendation", to_string(s.recommendation())},
          {"budget", core.config().budget},
          {"t", static_cast<std::int64_t>(core.records().size())},
          {"n_A", core.n_a()},
          {"n_B", core.n_b()},
          {"pending_patient", s.pending() ? json(s.pending()->t) : json(nullptr)},
          {"current_weights", weights},
          {"m", vec_json(core.state().m)},
          {"C", mat_json(core.state().C)},
          {"arms", arms},
          {"bf01", bf_series},
          {"switch_index", optional_json(summary.switch_index)},
          {"first_decisive", summary.stop.stopped ? json(summary.stop.n_stop) : json(nullptr)},
          {"config", trial_config_to_json(core.config())}};
}

std::int64_t TrialStore::revision(const std::string& id) const {
  auto trial = find(id);
  std::lock_guard lock(trial->mu);
  return trial->revision;
}

std::string TrialStore::export_log(const std::string& id) const {
  auto trial = find(id);
  std::lock_guard lock(trial->mu);
  return format_event_log(trial->session->event_log());
}

json TrialStore::list() const {
  std::vector<std::shared_ptr<Trial>> trials;
  {
    std::lock_guard lock(mu_);
    for (const std::string& id : order_) trials.push_back(trials_.at(id));
  }
  json out = json::array();
  for (const auto& t : trials) {
    std::lock_guard lock(t->mu);
    const LiveSession& s = *t->session;
    out.push_back({{"trial_id", t->id},
                   {"revision", t->revision},
                   {"phase", to_string(s.phase())},
                   {"t", static_cast<std::int64_t>(s.core().records().size())},
                   {"budget", s.core().config().budget}});
  }
  return {{"trials", out}};
}

namespace {

std::optional<std::int64_t> if_match_of(const httplib::Request& req) {
  if (!req.has_header("If-Match")) return std::nullopt;
  std::string v = req.get_header_value("If-Match");
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
  std::int64_t rev = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), rev);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ServiceError(422, "If-Match must be a revision number");
  }
  return rev;
}

json body_of(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception&) {
    throw ServiceError(422, "body is not valid JSON");
  }
}

void send_json(httplib::Response& res, int status, const json& body,
               std::optional<std::int64_t> revision) {
  res.status = status;
  if (revision) res.set_header("ETag", "\"" + std::to_string(*revision) + "\"");
  res.set_content(body.dump(), "application/json");
}

template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const ServiceError& e) {
    send_json(res, e.status(), {{"error", e.what()}, {"status", e.status()}}, std::nullopt);
  } catch (const std::exception& e) {
    send_json(res, 500, {{"error", e.what()}, {"status", 500}}, std::nullopt);
  }
}

}  // namespace

void install_routes(httplib::Server& server, TrialStore& store) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type, If-Match"},
                              {"Access-Control-Expose-Headers", "ETag"}});
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.status = 204;
  });

  server.Post("/trials", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const Mutated m = store.create(body_of(req));
      res.set_header("Location", "/trials/" + m.body["trial_id"].get<std::string>());
      send_json(res, 201, m.body, m.revision);
    });
  });
  server.Get("/trials", [&store](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, store.list(), std::nullopt); });
  });
  server.Post(R"(/trials/([^/]+)/enroll)", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const Mutated m = store.enroll(req.matches[1], if_match_of(req));
      send_json(res, 200, m.body, m.revision);
    });
  });
  server.Post(R"(/trials/([^/]+)/outcome)", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto rev = if_match_of(req);
      const Mutated m = store.record_outcome(req.matches[1], body_of(req), rev);
      send_json(res, 200, m.body, m.revision);
    });
  });
  server.Get(R"(/trials/([^/]+)/state)", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json s = store.state(req.matches[1]);
      send_json(res, 200, s, s["revision"].get<std::int64_t>());
    });
  });
  server.Get(R"(/trials/([^/]+)/export)", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      const std::int64_t rev = store.revision(id);
      res.set_header("ETag", "\"" + std::to_string(rev) + "\"");
      res.set_content(store.export_log(id), "text/plain; charset=utf-8");
    });
  });
}

void serve(TrialStore& store, const std::string& host, int port) {
  httplib::Server server;
  install_routes(server, store);
  if (!server.listen(host, port)) {
    throw IoError("cannot listen on " + host + ":" + std::to_string(port));
  }
}

}  // namespace dlmtrial

#pragma once

// Multi-trial store behind the HTTP API. Each trial is an append-only log in
// the data directory, so a restarted server resumes where it stopped.
//
// Log file layout: the event-log header, then one line per mutation:
//   !enroll,<t>        an enrollment awaiting its outcome
//   <event record>     the completed patient (same format as exported logs)
// The revision is 1 at creation and grows by one per mutation line.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dlmtrial/session.hpp"

namespace httplib {
class Server;
}

namespace dlmtrial {

/// Carries the HTTP status it maps to.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& message)
      : std::runtime_error(message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct Mutated {
  nlohmann::json body;
  std::int64_t revision = 0;
};

class TrialStore {
 public:
  /// Creates the directory if needed and reloads every trial found there.
  explicit TrialStore(std::filesystem::path data_dir);
  ~TrialStore();

  TrialStore(const TrialStore&) = delete;
  TrialStore& operator=(const TrialStore&) = delete;

  /// Body is a trial config without simulation truth; budget must be >= 2.
  Mutated create(const nlohmann::json& config);
  Mutated enroll(const std::string& id, std::optional<std::int64_t> if_match = {});
  Mutated record_outcome(const std::string& id, const nlohmann::json& body,
                         std::optional<std::int64_t> if_match = {});

  nlohmann::json state(const std::string& id) const;
  std::int64_t revision(const std::string& id) const;
  std::string export_log(const std::string& id) const;
  nlohmann::json list() const;

  const std::filesystem::path& data_dir() const { return dir_; }

 private:
  struct Trial;

  std::shared_ptr<Trial> find(const std::string& id) const;
  void load(const std::string& id);
  void write_index() const;

  std::filesystem::path dir_;
  mutable std::mutex mu_;  // guards trials_ and order_
  std::map<std::string, std::shared_ptr<Trial>> trials_;
  std::vector<std::string> order_;
};

/// Registers the routes on `server`:
///   POST /trials                 -> 201 {trial_id, revision}
///   POST /trials/{id}/enroll     -> 200 enrollment
///   POST /trials/{id}/outcome    -> 200 outcome report, body {"y": number}
///   GET  /trials/{id}/state      -> 200 state
///   GET  /trials/{id}/export     -> 200 event log text
///   GET  /trials                 -> 200 listing
/// Mutations honour an optional If-Match revision; every response carries ETag.
void install_routes(httplib::Server& server, TrialStore& store);

/// Blocks serving on host:port until the process is stopped.
void serve(TrialStore& store, const std::string& host, int port);

}  // namespace dlmtrial

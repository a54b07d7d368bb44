#include "dlmtrial/session.hpp"

#include <cmath>
#include <utility>

#include "dlmtrial/config_json.hpp"
#include "dlmtrial/error.hpp"

namespace dlmtrial {
namespace {

TrialConfig without_truth(TrialConfig config) {
  config.truth.reset();
  return config;
}

}  // namespace

LiveSession::LiveSession(TrialConfig config) : core_(without_truth(std::move(config))) {
  if (core_.exhausted()) phase_ = Phase::Exhausted;
}

LiveSession LiveSession::restore(const EventLog& log, std::optional<std::int64_t> pending) {
  LiveSession session(log.config);
  for (const PatientRecord& stored : log.records) {
    const Enrollment e = session.enroll();
    if (e.t != stored.t || e.arm != stored.arm || e.u != stored.u || e.w_a != stored.w_a) {
      throw FormatError("event log diverges from the engine at patient " +
                        std::to_string(stored.t));
    }
    session.record_outcome(stored.y);
    if (session.core_.records().back().bf01 != stored.bf01) {
      throw FormatError("event log Bayes factor diverges at patient " + std::to_string(stored.t));
    }
  }
  if (pending) {
    if (session.phase_ != Phase::AwaitingEnroll ||
        *pending != static_cast<std::int64_t>(log.records.size()) + 1) {
      throw FormatError("pending enrollment does not follow the last record");
    }
    session.enroll();
  }
  return session;
}

Recommendation LiveSession::recommendation() const {
  if (core_.last_bf() && core_.last_bf()->decisive) return Recommendation::StopDecisive;
  if (core_.exhausted()) return Recommendation::BudgetExhausted;
  return Recommendation::Continue;
}

Enrollment LiveSession::enroll() {
  if (phase_ != Phase::AwaitingEnroll) {
    throw ProtocolError(std::string("enroll not allowed in phase ") + std::string(to_string(phase_)));
  }
  PendingAllocation pa = core_.propose();
  Enrollment e;
  e.t = pa.prior.t;
  e.u = counter_uniform(core_.config().seed, static_cast<std::uint64_t>(e.t));
  e.arm = draw_arm(pa.weights, e.u);
  e.w_a = pa.weights.w_a;
  e.forecasts = pa.forecasts;
  pending_allocation_ = std::move(pa);
  pending_ = e;
  phase_ = Phase::AwaitingOutcome;
  return e;
}

OutcomeReport LiveSession::record_outcome(double y) {
  if (phase_ != Phase::AwaitingOutcome) {
    throw ProtocolError(std::string("outcome not expected in phase ") +
                        std::string(to_string(phase_)));
  }
  if (!std::isfinite(y)) throw NumericalDomainError("outcome must be finite");
  core_.absorb(*pending_allocation_, pending_->u, y);
  pending_.reset();
  pending_allocation_.reset();

  const bool decisive = core_.last_bf() && core_.last_bf()->decisive;
  if (decisive && core_.config().stop_early) {
    phase_ = Phase::Stopped;
  } else if (core_.exhausted()) {
    phase_ = Phase::Exhausted;
  } else {
    phase_ = Phase::AwaitingEnroll;
  }
  return {core_.state(), core_.last_bf(), recommendation(), phase_};
}

EventLog LiveSession::event_log() const { return {core_.config(), core_.records()}; }

nlohmann::json LiveSession::snapshot() const {
  nlohmann::json j;
  j["config"] = trial_config_to_json(core_.config());
  j["events"] = format_event_log(event_log());
  j["phase"] = std::string(to_string(phase_));
  j["pending"] = pending_ ? nlohmann::json(pending_->t) : nlohmann::json(nullptr);
  return j;
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::AwaitingEnroll:
      return "awaiting_enroll";
    case Phase::AwaitingOutcome:
      return "awaiting_outcome";
    case Phase::Stopped:
      return "stopped";
    case Phase::Exhausted:
      return "exhausted";
  }
  return "?";
}

std::string_view to_string(Recommendation rec) {
  switch (rec) {
    case Recommendation::Continue:
      return "continue";
    case Recommendation::StopDecisive:
      return "stop_decisive";
    case Recommendation::BudgetExhausted:
      return "budget_exhausted";
  }
  return "?";
}

}  // namespace dlmtrial

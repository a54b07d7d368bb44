#pragma once

// A live trial driven by a human coordinator: the engine allocates, the
// coordinator reports each observed outcome.
//
//   AwaitingEnroll --enroll--> AwaitingOutcome --record_outcome--> AwaitingEnroll
//                                                             \--> Stopped | Exhausted

#include <cstdint>
#include <optional>
#include <string_view>

#include <nlohmann/json.hpp>

#include "dlmtrial/event_log.hpp"
#include "dlmtrial/trial.hpp"

namespace dlmtrial {

enum class Phase : std::uint8_t { AwaitingEnroll, AwaitingOutcome, Stopped, Exhausted };

enum class Recommendation : std::uint8_t { Continue, StopDecisive, BudgetExhausted };

struct Enrollment {
  std::int64_t t = 0;
  Arm arm = Arm::A;
  double u = 0.0;
  double w_a = 0.5;
  ArmForecasts forecasts;
};

struct OutcomeReport {
  DlmState state;
  std::optional<BfResult> bf;
  Recommendation recommendation = Recommendation::Continue;
  Phase phase = Phase::AwaitingEnroll;
};

class LiveSession {
 public:
  /// Any simulation truth in `config` is dropped.
  explicit LiveSession(TrialConfig config);

  /// Rebuilds a session by replaying `log`; throws FormatError if the log
  /// does not reproduce itself. `pending` re-parks an enrollment that was
  /// made but not yet answered.
  static LiveSession restore(const EventLog& log, std::optional<std::int64_t> pending = {});

  Phase phase() const { return phase_; }
  Recommendation recommendation() const;
  const TrialCore& core() const { return core_; }
  const std::optional<Enrollment>& pending() const { return pending_; }

  /// Only in AwaitingEnroll; throws ProtocolError otherwise.
  Enrollment enroll();

  /// Only in AwaitingOutcome; throws ProtocolError otherwise and
  /// NumericalDomainError (phase unchanged) for a non-finite y.
  OutcomeReport record_outcome(double y);

  EventLog event_log() const;

  /// Full serializable state: config, records, phase, pending enrollment.
  nlohmann::json snapshot() const;

 private:
  TrialCore core_;
  Phase phase_ = Phase::AwaitingEnroll;
  std::optional<Enrollment> pending_;
  std::optional<PendingAllocation> pending_allocation_;
};

std::string_view to_string(Phase phase);
std::string_view to_string(Recommendation rec);

}  // namespace dlmtrial

#pragma once

// One adaptive two-arm trial: evolve -> forecast both arms -> weights -> draw
// -> observe -> update -> Bayes factor, patient by patient.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "dlmtrial/allocation.hpp"
#include "dlmtrial/dlm.hpp"
#include "dlmtrial/stopping.hpp"

namespace dlmtrial {

/// Simulation-only outcome generator: y ~ Normal(mu_arm, sigma^2).
struct OutcomeTruth {
  double mu_a = 0.0;
  double mu_b = 0.0;
  double sigma = 1.0;

  double mean(Arm arm) const { return arm == Arm::A ? mu_a : mu_b; }
};

/// Which per-patient series the switch index is read from.
enum class SwitchBasis : std::uint8_t {
  AllocationShare,  // running share n_A(t) / t
  Weight,           // w_A at allocation
};

struct TrialConfig {
  std::int64_t budget = 100;
  AllocationPolicy allocation;
  DlmSpec dlm = DlmSpec::static_mean(0.1, 1.0);
  Vec2 init_m = Vec2::Zero();
  Mat2 init_c = Vec2(1.0, 1e-6).asDiagonal();
  std::optional<OutcomeTruth> truth;
  BfPrior bf_prior;
  double bf_threshold = kDecisiveThreshold;
  bool stop_early = true;
  SwitchBasis switch_basis = SwitchBasis::AllocationShare;
  std::uint64_t seed = 0;

  /// Throws NumericalDomainError / FormatError on invalid settings.
  void validate(bool require_truth = false) const;
};

/// Static-mean model with prior covariance diag(c_ta, c_tb) and W = omega I.
TrialConfig make_trial_config(std::int64_t budget, double omega, double V, double c_ta,
                              double c_tb);

struct PatientRecord {
  std::int64_t t = 0;
  Arm arm = Arm::A;
  double u = 0.0;
  double y = 0.0;
  double w_a = 0.5;
  ArmForecasts forecasts;
  std::optional<double> bf01;
};

/// Everything computed before the arm is drawn for the next patient.
struct PendingAllocation {
  StatePrior prior;
  ArmForecasts forecasts;
  AllocationWeights weights;
};

/// The sequential fold shared by batch runs, live sessions and replay.
class TrialCore {
 public:
  explicit TrialCore(TrialConfig config);

  const TrialConfig& config() const { return config_; }
  const DlmState& state() const { return state_; }
  const std::vector<PatientRecord>& records() const { return records_; }
  std::int64_t n_a() const { return n_a_; }
  std::int64_t n_b() const { return static_cast<std::int64_t>(records_.size()) - n_a_; }
  const std::optional<BfResult>& last_bf() const { return last_bf_; }
  const std::optional<StopIndex>& first_decisive() const { return first_decisive_; }
  bool exhausted() const { return static_cast<std::int64_t>(records_.size()) >= config_.budget; }

  PendingAllocation propose() const;

  /// Draws the arm from `u`, absorbs `y`, evaluates the Bayes factor once both
  /// arms hold two observations, and appends the record.
  const PatientRecord& absorb(const PendingAllocation& pending, double u, double y);

 private:
  TrialConfig config_;
  DlmState state_;
  std::vector<PatientRecord> records_;
  RunningArmStats stats_;
  std::int64_t n_a_ = 0;
  std::optional<BfResult> last_bf_;
  std::optional<StopIndex> first_decisive_;
};

struct TrialResult {
  std::vector<PatientRecord> records;
  std::int64_t n_a = 0;
  std::int64_t n_b = 0;
  std::optional<std::int64_t> switch_index;
  std::optional<std::int64_t> first_crossing;
  StopIndex stop;
  DlmState final_state;
  std::optional<BfResult> final_bf;
};

TrialResult summarize(const TrialCore& core);

/// Independent generator for stream `index` under `master_seed`.
std::mt19937_64 make_stream(std::uint64_t master_seed, std::uint64_t index);

/// Counter-based U[0,1) draw: a pure function of (seed, counter).
double counter_uniform(std::uint64_t seed, std::uint64_t counter);

TrialResult run_trial(const TrialConfig& config, std::mt19937_64& rng);
TrialResult run_trial(const TrialConfig& config);

/// First index (1-based) from which every value is > 1/2.
std::optional<std::int64_t> detect_switch(std::span<const double> series);

/// First index (1-based) with value > 1/2.
std::optional<std::int64_t> first_crossing(std::span<const double> series);

std::vector<double> switch_series(std::span<const PatientRecord> records, SwitchBasis basis);

std::string_view to_string(SwitchBasis basis);
SwitchBasis parse_switch_basis(std::string_view text);

}  // namespace dlmtrial

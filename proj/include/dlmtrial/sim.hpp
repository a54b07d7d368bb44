#pragma once

// Monte Carlo harness: the fixed-design scenario table and the
// (mu_B, omega, C_tB) sensitivity grid.
//
// Every trial draws from its own stream make_stream(seed, (group << 32) | trial),
// and results are reduced in trial order, so output does not depend on the
// number of worker threads.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dlmtrial/trial.hpp"

namespace dlmtrial {

struct ScenarioSpec {
  double mean_difference = 0.0;
  double sd = 1.0;
  std::int64_t budget = 2;
  std::string label;
};

/// The seven (difference, sd, budget) rows of the fixed-design scenario table.
std::vector<ScenarioSpec> standard_scenarios();

/// Model settings for scenario runs. V defaults to sd^2 of the scenario.
struct ScenarioModel {
  double omega = 0.001;
  double c_ta = 1.0;
  double c_tb = 1e-6;
  double V = 0.0;  // <= 0 means "use sd^2"
  WeightScale scale = WeightScale::StdDev;
  BfPrior bf_prior;
};

struct ScenarioSummary {
  ScenarioSpec spec;
  WeightRule rule = WeightRule::ZhangRosenberger;
  std::int64_t n_sims = 0;
  double mean_n_a = 0.0;
  double mean_n_b = 0.0;
  Arm reported_arm = Arm::A;   // arm with the smaller mean count
  double reported_mean = 0.0;  // its mean count
  double mean_total_outcome = 0.0;
  double mean_w_a = 0.0;
};

TrialConfig scenario_trial_config(const ScenarioSpec& spec, WeightRule rule,
                                  const ScenarioModel& model, std::uint64_t seed);

/// Stream index of trial `trial` within group `group`.
constexpr std::uint64_t stream_index(std::uint64_t group, std::uint64_t trial) {
  return (group << 32) | trial;
}

/// n_sims independent trials of one config; trial i uses stream (0, i).
std::vector<TrialResult> run_batch(const TrialConfig& config, std::int64_t n_sims,
                                   unsigned threads = 0);

ScenarioSummary run_scenario(const ScenarioSpec& spec, std::size_t scenario_index, WeightRule rule,
                             const ScenarioModel& model, std::int64_t n_sims, std::uint64_t seed,
                             unsigned threads = 0);

std::vector<ScenarioSummary> run_scenarios(std::span<const ScenarioSpec> specs, WeightRule rule,
                                           const ScenarioModel& model, std::int64_t n_sims,
                                           std::uint64_t seed, unsigned threads = 0);

struct SweepCell {
  double mu_b = 0.0;
  double omega = 0.0;
  double c_tb = 0.0;
};

struct SweepGrid {
  std::vector<double> mu_b_values{1, 2, 3, 4, 5};
  std::vector<double> omega_values{0.1, 0.01, 0.001};
  std::vector<double> c_tb_values{0.1, 0.001, 0.000001};
  std::int64_t budget = 100;
  std::int64_t n_sims = 1000;
  double V = 1.0;
  double sigma_true = 1.0;
  double mu_a = 0.0;
  double c_ta = 1.0;
  AllocationPolicy policy{WeightRule::BiswasBhattacharya, WeightScale::StdDev,
                          Preference::LowerIsBetter};
  BfPrior bf_prior;
  double bf_threshold = kDecisiveThreshold;
  SwitchBasis switch_basis = SwitchBasis::AllocationShare;

  /// Cartesian product, c_tb outermost then omega then mu_b.
  std::vector<SweepCell> cells() const;
  TrialConfig trial_config(const SweepCell& cell, std::uint64_t seed) const;
};

struct Quantiles {
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
};

struct BandPoint {
  double mean = 0.0;
  double lo = 0.0;  // 2.5%
  double hi = 0.0;  // 97.5%
};

struct SweepSummary {
  SweepCell cell;
  std::int64_t n_sims = 0;
  double mean_prop_a = 0.0;  // mean allocation weight w_A
  double mean_prop_b = 0.0;
  double mean_share_a = 0.0;  // realized fraction of patients on A
  double mean_switch = 0.0;   // never-switching trials count as budget
  Quantiles switch_q;
  double p_no_switch = 0.0;
  Quantiles stop_q;
  double p_exhaust = 0.0;  // P(N_stop >= budget)
  double mean_bf_at_budget = 0.0;
  double median_bf_at_budget = 0.0;
  std::vector<BandPoint> trajectory;
};

/// Runs n_sims trials of one cell to the full budget while recording where
/// the stop rule would have fired.
SweepSummary run_sweep_cell(const SweepGrid& grid, std::size_t cell_index, std::uint64_t seed,
                            unsigned threads = 0);

std::vector<SweepSummary> run_sweep(const SweepGrid& grid, std::uint64_t seed,
                                    unsigned threads = 0);

struct StoppingRow {
  SweepCell cell;
  Quantiles stop_q;
  double p_exhaust = 0.0;
  double median_bf_at_budget = 0.0;
};

std::vector<StoppingRow> stopping_table(std::span<const SweepSummary> sweep);

/// Linear interpolation between order statistics (Hyndman-Fan type 7).
double quantile_type7(std::span<const double> values, double p);
Quantiles quantiles(std::span<const double> values);

/// Pointwise mean and 2.5/97.5% band. Paths shorter than `length` are padded
/// by repeating their last value.
std::vector<BandPoint> trajectory_bands(std::span<const std::vector<double>> paths,
                                        std::int64_t length);

}  // namespace dlmtrial

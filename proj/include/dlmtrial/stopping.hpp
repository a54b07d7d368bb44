#pragma once

// Two-sample Bayesian t-test Bayes factor and the decisive-evidence stop rule.

#include <cstdint>
#include <optional>
#include <span>

#include "dlmtrial/dlm.hpp"

namespace dlmtrial {

inline constexpr double kDecisiveThreshold = 0.01;

/// Sufficient statistics of the observed outcomes per arm.
struct ArmSamples {
  std::int64_t n_a = 0;
  std::int64_t n_b = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double ss_a = 0.0;  // within-arm sum of squared deviations
  double ss_b = 0.0;
};

struct TStatistic {
  double t = 0.0;
  double dof = 0.0;
  double n_delta = 0.0;  // effective sample size (1/n_A + 1/n_B)^-1
};

enum class TTestStatus : std::uint8_t {
  Ok,
  InsufficientSamples,  // some arm has fewer than two observations
  ZeroVariance,         // pooled variance is zero
};

struct TTestOutcome {
  TTestStatus status = TTestStatus::InsufficientSamples;
  TStatistic stat;

  bool ok() const { return status == TTestStatus::Ok; }
};

/// Pooled-variance two-sample t statistic, mean_A - mean_B in the numerator.
TTestOutcome two_sample_t(const ArmSamples& s);

/// Prior on the standardized effect delta under H1, plus prior odds P(H0)/P(H1).
struct BfPrior {
  double lambda = 0.0;
  double sigma_delta_sq = 2.0;
  double prior_odds = 1.0;
};

struct BfResult {
  double bf01 = 1.0;
  double t_stat = 0.0;
  double dof = 0.0;
  bool decisive = false;
  double posterior_h0 = 0.5;  // P(H0 | D) under the prior odds
};

/// log of the location-scale Student-t density T_nu(x | loc, scale_sq).
double student_t_log_density(double x, double dof, double loc, double scale_sq);

/// BF01 = T_nu(t | 0, 1) / T_nu(t | sqrt(n_delta) lambda, 1 + n_delta sigma_delta^2).
BfResult bayes_factor(const TStatistic& stat, const BfPrior& prior,
                      double threshold = kDecisiveThreshold);

/// True iff bf01 <= threshold.
bool stop_decision(const BfResult& bf, double threshold = kDecisiveThreshold);

struct StopIndex {
  std::int64_t n_stop = 0;
  bool stopped = false;
};

/// `trajectory[i]` is the BF01 after patient i+1 (nullopt where not
/// evaluable). Returns the first patient count with a decisive value, or
/// (budget, false).
StopIndex stop_index(std::span<const std::optional<double>> trajectory, std::int64_t budget,
                     double threshold = kDecisiveThreshold);

/// Welford accumulator for ArmSamples.
class RunningArmStats {
 public:
  void add(Arm arm, double y);
  const ArmSamples& samples() const { return samples_; }

 private:
  ArmSamples samples_;
};

}  // namespace dlmtrial

#pragma once

// Randomization probabilities from the two arms' one-step forecasts.
//
// Both rules treat the LOWER predicted outcome as the favourable one.

#include <cstdint>
#include <string_view>

#include "dlmtrial/dlm.hpp"

namespace dlmtrial {

struct ArmForecasts {
  double f_a = 0.0;
  double q_a = 1.0;
  double f_b = 0.0;
  double q_b = 1.0;

  static ArmForecasts from(const Forecast& a, const Forecast& b) { return {a.f, a.Q, b.f, b.Q}; }
  ArmForecasts swapped() const { return {f_b, q_b, f_a, q_a}; }
};

enum class WeightRule : std::uint8_t {
  ZhangRosenberger,    // square-root-of-mean optimal allocation
  BiswasBhattacharya,  // probit-based optimal allocation
};

/// How the forecast variance Q enters the weight formulas as a scale.
enum class WeightScale : std::uint8_t {
  Variance,  // Q as is
  StdDev,    // sqrt(Q)
  Unit,      // 1 for both arms
};

/// Which direction of the outcome counts as better.
enum class Preference : std::uint8_t { LowerIsBetter, HigherIsBetter };

enum class WeightBranch : std::uint8_t {
  Optimal,              // closed-form optimal allocation applied
  Neutral,              // "otherwise" branch, w_A = 1/2
  NonPositiveForecast,  // square-root rule undefined, w_A = 1/2
};

struct AllocationWeights {
  double w_a = 0.5;
  double w_b = 0.5;
  double gamma_a = 0.0;  // probit rule only
  double gamma_b = 0.0;
  WeightBranch branch = WeightBranch::Neutral;
};

struct AllocationPolicy {
  WeightRule rule = WeightRule::BiswasBhattacharya;
  WeightScale scale = WeightScale::StdDev;
  Preference preference = Preference::LowerIsBetter;
};

AllocationWeights weights_zr(const ArmForecasts& fc);
AllocationWeights weights_bb(const ArmForecasts& fc);

/// Applies the policy's preference and scale to raw DLM forecasts, then the rule.
AllocationWeights compute_weights(const AllocationPolicy& policy, const ArmForecasts& fc);

/// Phi(x), accurate to ~1e-16 absolute.
double std_normal_cdf(double x);

/// A when u < w_A, so P(A) = w_A for u ~ U[0, 1).
Arm draw_arm(const AllocationWeights& w, double u);

std::string_view to_string(WeightRule rule);
std::string_view to_string(WeightScale scale);
std::string_view to_string(Preference preference);
std::string_view to_string(WeightBranch branch);
WeightRule parse_weight_rule(std::string_view text);
WeightScale parse_weight_scale(std::string_view text);
Preference parse_preference(std::string_view text);

}  // namespace dlmtrial

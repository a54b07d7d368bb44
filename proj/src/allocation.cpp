#include "dlmtrial/allocation.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "dlmtrial/error.hpp"

namespace dlmtrial {
namespace {

AllocationWeights neutral(WeightBranch branch) {
  AllocationWeights w;
  w.branch = branch;
  return w;
}

void require_positive_scales(const ArmForecasts& fc) {
  if (!(fc.q_a > 0.0) || !(fc.q_b > 0.0) || !std::isfinite(fc.q_a) || !std::isfinite(fc.q_b) ||
      !std::isfinite(fc.f_a) || !std::isfinite(fc.f_b)) {
    throw NumericalDomainError("forecasts must be finite with positive scales");
  }
}

}  // namespace

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

AllocationWeights weights_zr(const ArmForecasts& fc) {
  require_positive_scales(fc);
  if (fc.f_a <= 0.0 || fc.f_b <= 0.0) return neutral(WeightBranch::NonPositiveForecast);
  if (fc.f_a == fc.f_b) return neutral(WeightBranch::Neutral);

  const double lead_a = fc.q_a * std::sqrt(fc.f_b);
  const double lead_b = fc.q_b * std::sqrt(fc.f_a);
  const double ratio = lead_a / lead_b;
  const bool favours_a = fc.f_a < fc.f_b && ratio > 1.0;
  const bool favours_b = fc.f_a > fc.f_b && ratio < 1.0;
  if (!favours_a && !favours_b) return neutral(WeightBranch::Neutral);

  AllocationWeights w;
  w.w_a = lead_a / (lead_a + lead_b);
  w.w_b = 1.0 - w.w_a;
  w.branch = WeightBranch::Optimal;
  return w;
}

AllocationWeights weights_bb(const ArmForecasts& fc) {
  require_positive_scales(fc);
  const double spread = std::sqrt(fc.q_a * fc.q_a + fc.q_b * fc.q_b);
  const double z = (fc.f_a - fc.f_b) / spread;

  AllocationWeights w;
  w.gamma_a = std_normal_cdf(z);
  w.gamma_b = std_normal_cdf(-z);
  const double lead_a = fc.q_a * std::sqrt(w.gamma_b);
  const double lead_b = fc.q_b * std::sqrt(w.gamma_a);
  // Both gammas underflow only for |z| beyond ~38; the sign of z decides then.
  if (lead_a + lead_b == 0.0) {
    w.w_a = z < 0.0 ? 1.0 : 0.0;
  } else {
    w.w_a = lead_a / (lead_a + lead_b);
  }
  w.w_b = 1.0 - w.w_a;
  w.branch = WeightBranch::Optimal;
  return w;
}

AllocationWeights compute_weights(const AllocationPolicy& policy, const ArmForecasts& raw) {
  ArmForecasts fc = raw;
  if (policy.preference == Preference::HigherIsBetter) {
    fc.f_a = -fc.f_a;
    fc.f_b = -fc.f_b;
  }
  switch (policy.scale) {
    case WeightScale::Variance:
      break;
    case WeightScale::StdDev:
      fc.q_a = std::sqrt(fc.q_a);
      fc.q_b = std::sqrt(fc.q_b);
      break;
    case WeightScale::Unit:
      fc.q_a = 1.0;
      fc.q_b = 1.0;
      break;
  }
  return policy.rule == WeightRule::ZhangRosenberger ? weights_zr(fc) : weights_bb(fc);
}

Arm draw_arm(const AllocationWeights& w, double u) { return u < w.w_a ? Arm::A : Arm::B; }

std::string_view to_string(WeightRule rule) {
  return rule == WeightRule::ZhangRosenberger ? "zr" : "bb";
}

std::string_view to_string(WeightScale scale) {
  switch (scale) {
    case WeightScale::Variance:
      return "variance";
    case WeightScale::StdDev:
      return "stddev";
    case WeightScale::Unit:
      return "unit";
  }
  return "?";
}

std::string_view to_string(Preference preference) {
  return preference == Preference::LowerIsBetter ? "lower" : "higher";
}

std::string_view to_string(WeightBranch branch) {
  switch (branch) {
    case WeightBranch::Optimal:
      return "optimal";
    case WeightBranch::Neutral:
      return "neutral";
    case WeightBranch::NonPositiveForecast:
      return "non-positive-forecast";
  }
  return "?";
}

WeightRule parse_weight_rule(std::string_view text) {
  if (text == "zr") return WeightRule::ZhangRosenberger;
  if (text == "bb") return WeightRule::BiswasBhattacharya;
  throw FormatError("unknown weight rule '" + std::string(text) + "' (expected zr|bb)");
}

WeightScale parse_weight_scale(std::string_view text) {
  if (text == "variance") return WeightScale::Variance;
  if (text == "stddev") return WeightScale::StdDev;
  if (text == "unit") return WeightScale::Unit;
  throw FormatError("unknown weight scale '" + std::string(text) +
                    "' (expected variance|stddev|unit)");
}

Preference parse_preference(std::string_view text) {
  if (text == "lower") return Preference::LowerIsBetter;
  if (text == "higher") return Preference::HigherIsBetter;
  throw FormatError("unknown preference '" + std::string(text) + "' (expected lower|higher)");
}

}  // namespace dlmtrial

#include "dlmtrial/stopping.hpp"

#include <cmath>
#include <numbers>

#include "dlmtrial/error.hpp"

namespace dlmtrial {
namespace {

// Shape of the standardized t density without its normalizing constant.
double t_log_kernel(double z, double dof) { return -0.5 * (dof + 1.0) * std::log1p(z * z / dof); }

}  // namespace

TTestOutcome two_sample_t(const ArmSamples& s) {
  TTestOutcome out;
  if (s.n_a < 2 || s.n_b < 2) return out;

  const double n_a = static_cast<double>(s.n_a);
  const double n_b = static_cast<double>(s.n_b);
  const double dof = n_a + n_b - 2.0;
  const double pooled_var = (s.ss_a + s.ss_b) / dof;
  const double inv_sum = 1.0 / n_a + 1.0 / n_b;
  out.stat.dof = dof;
  out.stat.n_delta = 1.0 / inv_sum;
  if (!(pooled_var > 0.0)) {
    out.status = TTestStatus::ZeroVariance;
    return out;
  }
  out.stat.t = (s.mean_a - s.mean_b) / std::sqrt(pooled_var * inv_sum);
  out.status = TTestStatus::Ok;
  return out;
}

double student_t_log_density(double x, double dof, double loc, double scale_sq) {
  if (!(dof > 0.0) || !(scale_sq > 0.0)) {
    throw NumericalDomainError("t density needs positive dof and scale");
  }
  const double log_norm = std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) -
                          0.5 * std::log(dof * std::numbers::pi) - 0.5 * std::log(scale_sq);
  return log_norm + t_log_kernel((x - loc) / std::sqrt(scale_sq), dof);
}

BfResult bayes_factor(const TStatistic& stat, const BfPrior& prior, double threshold) {
  const double scale_sq = 1.0 + stat.n_delta * prior.sigma_delta_sq;
  if (!(stat.dof > 0.0) || !(scale_sq > 0.0)) {
    throw NumericalDomainError("Bayes factor needs dof > 0 and 1 + n_delta sigma_delta^2 > 0");
  }
  const double loc = std::sqrt(stat.n_delta) * prior.lambda;

  // Same dof in both densities: the normalizing constants differ only by the
  // scale term, so the ratio is formed from kernels.
  const double log_bf = 0.5 * std::log(scale_sq) + t_log_kernel(stat.t, stat.dof) -
                        t_log_kernel((stat.t - loc) / std::sqrt(scale_sq), stat.dof);
  const double bf = std::exp(log_bf);
  if (!std::isfinite(bf) || !(bf > 0.0)) {
    throw NumericalDomainError("Bayes factor is not a positive finite number");
  }

  BfResult out;
  out.bf01 = bf;
  out.t_stat = stat.t;
  out.dof = stat.dof;
  out.decisive = bf <= threshold;
  const double odds = prior.prior_odds * bf;
  out.posterior_h0 = odds / (1.0 + odds);
  return out;
}

bool stop_decision(const BfResult& bf, double threshold) { return bf.bf01 <= threshold; }

StopIndex stop_index(std::span<const std::optional<double>> trajectory, std::int64_t budget,
                     double threshold) {
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    if (trajectory[i] && *trajectory[i] <= threshold) {
      return {static_cast<std::int64_t>(i) + 1, true};
    }
  }
  return {budget, false};
}

void RunningArmStats::add(Arm arm, double y) {
  std::int64_t& n = arm == Arm::A ? samples_.n_a : samples_.n_b;
  double& mean = arm == Arm::A ? samples_.mean_a : samples_.mean_b;
  double& ss = arm == Arm::A ? samples_.ss_a : samples_.ss_b;
  ++n;
  const double delta = y - mean;
  mean += delta / static_cast<double>(n);
  ss += delta * (y - mean);
}

}  // namespace dlmtrial

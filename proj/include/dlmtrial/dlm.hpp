#pragma once

// Two-parameter dynamic linear model (intercept + treatment effect) with the
// conjugate Gaussian forecast/update recursions.
//
//   observation: y_t     = F' theta_t + nu_t,      nu_t ~ N(0, V)
//   evolution:   theta_t = G theta_{t-1} + w_t,    w_t  ~ N(0, W)
//
// Arm A is observed through F = [1, 0], arm B through F = [1, 1], so
// theta = (baseline mean, B-minus-A effect).

#include <cstdint>

#include <Eigen/Core>

namespace dlmtrial {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

enum class Arm : std::uint8_t { A = 0, B = 1 };

constexpr char arm_letter(Arm arm) { return arm == Arm::A ? 'A' : 'B'; }

struct DlmSpec {
  Vec2 design_a{1.0, 0.0};
  Vec2 design_b{1.0, 1.0};
  Mat2 G = Mat2::Identity();
  Mat2 W = Mat2::Zero();
  double V = 1.0;

  /// G = I, W = omega * I, standard arm designs.
  static DlmSpec static_mean(double omega, double V);

  const Vec2& design(Arm arm) const { return arm == Arm::A ? design_a : design_b; }

  /// Throws NumericalDomainError unless every entry is finite, V > 0 and W is
  /// symmetric positive semidefinite.
  void validate() const;
};

/// Filtered belief (theta_t | D_t) ~ N(m, C) after t observations.
struct DlmState {
  Vec2 m = Vec2::Zero();
  Mat2 C = Mat2::Zero();
  std::int64_t t = 0;
};

/// Prior for the next state, (theta_t | D_{t-1}) ~ N(a, R); `t` is the index
/// of the observation it will absorb.
struct StatePrior {
  Vec2 a = Vec2::Zero();
  Mat2 R = Mat2::Zero();
  std::int64_t t = 1;
};

/// One-step-ahead predictive distribution (Y_t | D_{t-1}) ~ N(f, Q).
struct Forecast {
  double f = 0.0;
  double Q = 1.0;
};

/// Transient quantities of an update, kept for diagnostics.
struct UpdateDiagnostics {
  Vec2 gain = Vec2::Zero();  // adaptive coefficient A_t
  double error = 0.0;        // e_t = y_t - f_t
};

/// Entries of a covariance that fall in [-kPsdTolerance, 0) after
/// symmetrization are clamped to zero; anything more negative is an error.
inline constexpr double kPsdTolerance = 1e-10;

/// (M + M')/2 followed by the eigenvalue clamp described above.
Mat2 symmetrize_psd(const Mat2& M);

StatePrior evolve(const DlmState& state, const DlmSpec& spec);

Forecast forecast_arm(const StatePrior& prior, const Vec2& design, double V);

DlmState update(const StatePrior& prior, const Vec2& design, const Forecast& fc, double y,
                UpdateDiagnostics* diagnostics = nullptr);

}  // namespace dlmtrial

#include "dlmtrial/dlm.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "dlmtrial/error.hpp"

namespace dlmtrial {
namespace {

bool all_finite(const Mat2& M) { return M.allFinite(); }

double min_eigenvalue(const Mat2& S) {
  const double half_trace = 0.5 * (S(0, 0) + S(1, 1));
  const double half_diff = 0.5 * (S(0, 0) - S(1, 1));
  return half_trace - std::hypot(half_diff, S(0, 1));
}

}  // namespace

DlmSpec DlmSpec::static_mean(double omega, double V) {
  DlmSpec spec;
  spec.W = omega * Mat2::Identity();
  spec.V = V;
  return spec;
}

void DlmSpec::validate() const {
  if (!design_a.allFinite() || !design_b.allFinite() || !all_finite(G) || !all_finite(W) ||
      !std::isfinite(V)) {
    throw NumericalDomainError("dlm spec contains non-finite entries");
  }
  if (!(V > 0.0)) throw NumericalDomainError("observational variance V must be positive");
  if (W(0, 1) != W(1, 0)) throw NumericalDomainError("evolution variance W must be symmetric");
  if (min_eigenvalue(W) < -kPsdTolerance) {
    throw NumericalDomainError("evolution variance W must be positive semidefinite");
  }
}

Mat2 symmetrize_psd(const Mat2& M) {
  if (!all_finite(M)) throw NumericalDomainError("covariance has non-finite entries");
  Mat2 S = 0.5 * (M + M.transpose());
  const double lo = min_eigenvalue(S);
  if (lo >= 0.0) return S;
  if (lo < -kPsdTolerance) {
    throw NumericalDomainError("covariance lost positive semidefiniteness (eigenvalue " +
                               std::to_string(lo) + ")");
  }
  Eigen::SelfAdjointEigenSolver<Mat2> eig(S);
  Vec2 values = eig.eigenvalues().cwiseMax(0.0);
  S = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (S + S.transpose());
}

StatePrior evolve(const DlmState& state, const DlmSpec& spec) {
  if (!state.m.allFinite() || !all_finite(state.C)) {
    throw NumericalDomainError("state contains non-finite entries");
  }
  StatePrior prior;
  prior.a = spec.G * state.m;
  prior.R = symmetrize_psd(spec.G * state.C * spec.G.transpose() + spec.W);
  prior.t = state.t + 1;
  return prior;
}

Forecast forecast_arm(const StatePrior& prior, const Vec2& design, double V) {
  if (!(V > 0.0) || !std::isfinite(V)) throw NumericalDomainError("V must be positive and finite");
  Forecast fc;
  fc.f = design.dot(prior.a);
  fc.Q = design.dot(prior.R * design) + V;
  if (!std::isfinite(fc.f) || !(fc.Q > 0.0) || !std::isfinite(fc.Q)) {
    throw NumericalDomainError("forecast variance is not positive; prior covariance corrupted");
  }
  return fc;
}

DlmState update(const StatePrior& prior, const Vec2& design, const Forecast& fc, double y,
                UpdateDiagnostics* diagnostics) {
  if (!std::isfinite(y)) throw NumericalDomainError("observation must be finite");
  const Vec2 gain = prior.R * design / fc.Q;
  const double error = y - fc.f;

  DlmState post;
  post.m = prior.a + gain * error;
  post.C = symmetrize_psd(prior.R - fc.Q * gain * gain.transpose());
  post.t = prior.t;
  if (diagnostics != nullptr) {
    diagnostics->gain = gain;
    diagnostics->error = error;
  }
  return post;
}

}  // namespace dlmtrial

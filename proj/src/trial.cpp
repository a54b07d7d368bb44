#include "dlmtrial/trial.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "dlmtrial/error.hpp"

namespace dlmtrial {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

void TrialConfig::validate(bool require_truth) const {
  if (budget < 1) throw FormatError("budget must be at least 1");
  dlm.validate();
  if (!init_m.allFinite() || !init_c.allFinite()) {
    throw NumericalDomainError("initial state contains non-finite entries");
  }
  if (init_c(0, 1) != init_c(1, 0)) throw NumericalDomainError("initial covariance not symmetric");
  symmetrize_psd(init_c);
  if (!(bf_prior.sigma_delta_sq >= 0.0) || !std::isfinite(bf_prior.lambda) ||
      !(bf_prior.prior_odds > 0.0)) {
    throw NumericalDomainError("invalid Bayes factor prior");
  }
  if (!(bf_threshold > 0.0)) throw NumericalDomainError("Bayes factor threshold must be positive");
  if (require_truth) {
    if (!truth) throw FormatError("simulation requires true arm means and outcome SD");
    if (!(truth->sigma > 0.0) || !std::isfinite(truth->mu_a) || !std::isfinite(truth->mu_b)) {
      throw NumericalDomainError("outcome SD must be positive and arm means finite");
    }
  }
}

TrialConfig make_trial_config(std::int64_t budget, double omega, double V, double c_ta,
                              double c_tb) {
  TrialConfig config;
  config.budget = budget;
  config.dlm = DlmSpec::static_mean(omega, V);
  config.init_c = Vec2(c_ta, c_tb).asDiagonal();
  return config;
}

TrialCore::TrialCore(TrialConfig config) : config_(std::move(config)) {
  config_.validate();
  state_.m = config_.init_m;
  state_.C = config_.init_c;
  records_.reserve(static_cast<std::size_t>(config_.budget));
}

PendingAllocation TrialCore::propose() const {
  PendingAllocation pending;
  pending.prior = evolve(state_, config_.dlm);
  const Forecast fa = forecast_arm(pending.prior, config_.dlm.design_a, config_.dlm.V);
  const Forecast fb = forecast_arm(pending.prior, config_.dlm.design_b, config_.dlm.V);
  pending.forecasts = ArmForecasts::from(fa, fb);
  pending.weights = compute_weights(config_.allocation, pending.forecasts);
  return pending;
}

const PatientRecord& TrialCore::absorb(const PendingAllocation& pending, double u, double y) {
  if (exhausted()) throw ProtocolError("patient budget exhausted");
  if (!(u >= 0.0 && u < 1.0)) throw NumericalDomainError("uniform draw outside [0, 1)");
  if (!std::isfinite(y)) throw NumericalDomainError("outcome must be finite");

  PatientRecord rec;
  rec.t = pending.prior.t;
  rec.arm = draw_arm(pending.weights, u);
  rec.u = u;
  rec.y = y;
  rec.w_a = pending.weights.w_a;
  rec.forecasts = pending.forecasts;

  const Vec2& design = config_.dlm.design(rec.arm);
  const Forecast fc{rec.arm == Arm::A ? pending.forecasts.f_a : pending.forecasts.f_b,
                    rec.arm == Arm::A ? pending.forecasts.q_a : pending.forecasts.q_b};
  state_ = update(pending.prior, design, fc, y);

  stats_.add(rec.arm, y);
  if (rec.arm == Arm::A) ++n_a_;
  const TTestOutcome tt = two_sample_t(stats_.samples());
  if (tt.ok()) {
    last_bf_ = bayes_factor(tt.stat, config_.bf_prior, config_.bf_threshold);
    rec.bf01 = last_bf_->bf01;
    if (last_bf_->decisive && !first_decisive_) first_decisive_ = StopIndex{rec.t, true};
  }
  records_.push_back(rec);
  return records_.back();
}

TrialResult summarize(const TrialCore& core) {
  TrialResult result;
  result.records = core.records();
  result.n_a = core.n_a();
  result.n_b = core.n_b();
  const std::vector<double> series = switch_series(result.records, core.config().switch_basis);
  result.switch_index = detect_switch(series);
  result.first_crossing = first_crossing(series);
  result.stop = core.first_decisive().value_or(StopIndex{core.config().budget, false});
  result.final_state = core.state();
  result.final_bf = core.last_bf();
  return result;
}

std::mt19937_64 make_stream(std::uint64_t master_seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
  const std::uint64_t bits = splitmix64(seed ^ splitmix64(counter));
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

TrialResult run_trial(const TrialConfig& config, std::mt19937_64& rng) {
  config.validate(/*require_truth=*/true);
  const OutcomeTruth truth = *config.truth;
  TrialCore core(config);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  while (!core.exhausted()) {
    const PendingAllocation pending = core.propose();
    const double u = uniform(rng);
    const Arm arm = draw_arm(pending.weights, u);
    const double y = truth.mean(arm) + truth.sigma * noise(rng);
    try {
      core.absorb(pending, u, y);
    } catch (const NumericalDomainError& e) {
      throw NumericalDomainError("patient " + std::to_string(pending.prior.t) + ": " + e.what());
    }
    if (config.stop_early && core.first_decisive()) break;
  }
  return summarize(core);
}

TrialResult run_trial(const TrialConfig& config) {
  std::mt19937_64 rng = make_stream(config.seed, 0);
  return run_trial(config, rng);
}

std::optional<std::int64_t> detect_switch(std::span<const double> series) {
  std::optional<std::int64_t> index;
  for (std::size_t i = series.size(); i-- > 0;) {
    if (!(series[i] > 0.5)) break;
    index = static_cast<std::int64_t>(i) + 1;
  }
  return index;
}

std::optional<std::int64_t> first_crossing(std::span<const double> series) {
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series[i] > 0.5) return static_cast<std::int64_t>(i) + 1;
  }
  return std::nullopt;
}

std::vector<double> switch_series(std::span<const PatientRecord> records, SwitchBasis basis) {
  std::vector<double> series;
  series.reserve(records.size());
  std::int64_t n_a = 0;
  for (const PatientRecord& rec : records) {
    if (basis == SwitchBasis::Weight) {
      series.push_back(rec.w_a);
    } else {
      if (rec.arm == Arm::A) ++n_a;
      series.push_back(static_cast<double>(n_a) / static_cast<double>(rec.t));
    }
  }
  return series;
}

std::string_view to_string(SwitchBasis basis) {
  return basis == SwitchBasis::AllocationShare ? "share" : "weight";
}

SwitchBasis parse_switch_basis(std::string_view text) {
  if (text == "share") return SwitchBasis::AllocationShare;
  if (text == "weight") return SwitchBasis::Weight;
  throw FormatError("unknown switch basis '" + std::string(text) + "' (expected share|weight)");
}

}  // namespace dlmtrial

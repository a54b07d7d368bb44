#include "dlmtrial/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "dlmtrial/error.hpp"

namespace dlmtrial {
namespace {

// Per-trial reduction kept for aggregation.
struct TrialDigest {
  std::int64_t n_a = 0;
  std::int64_t n_b = 0;
  double total_outcome = 0.0;
  double mean_w_a = 0.0;
  std::int64_t switch_index = 0;
  bool switched = false;
  StopIndex stop;
  double bf_at_end = 1.0;
  std::vector<double> w_path;
};

TrialDigest digest(const TrialResult& r, bool keep_path) {
  TrialDigest d;
  d.n_a = r.n_a;
  d.n_b = r.n_b;
  double w_sum = 0.0;
  for (const PatientRecord& rec : r.records) {
    d.total_outcome += rec.y;
    w_sum += rec.w_a;
  }
  d.mean_w_a = r.records.empty() ? 0.5 : w_sum / static_cast<double>(r.records.size());
  d.switched = r.switch_index.has_value();
  d.switch_index = r.switch_index.value_or(0);
  d.stop = r.stop;
  d.bf_at_end = r.final_bf ? r.final_bf->bf01 : 1.0;
  if (keep_path) {
    d.w_path.reserve(r.records.size());
    for (const PatientRecord& rec : r.records) d.w_path.push_back(rec.w_a);
  }
  return d;
}

unsigned resolve_threads(unsigned threads) {
  if (threads != 0) return threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs `fn(i)` for i in [0, n) on up to `threads` workers; output slot i
// belongs to trial i, so the result order is fixed.
template <class Fn>
auto parallel_map(std::int64_t n, unsigned threads, Fn fn) {
  using Out = decltype(fn(std::int64_t{0}));
  std::vector<Out> out(static_cast<std::size_t>(n));
  const unsigned workers =
      static_cast<unsigned>(std::min<std::int64_t>(resolve_threads(threads), std::max<std::int64_t>(n, 1)));
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::int64_t i = next++; i < n; i = next++) {
      try {
        out[static_cast<std::size_t>(i)] = fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

double mean_of(std::span<const double> xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

std::vector<ScenarioSpec> standard_scenarios() {
  return {
      {0, 20, 128, "1"}, {10, 15, 74, "2"}, {10, 20, 128, "3"}, {10, 25, 200, "4"},
      {20, 20, 34, "5"}, {20, 25, 52, "6"}, {20, 30, 74, "7"},
  };
}

TrialConfig scenario_trial_config(const ScenarioSpec& spec, WeightRule rule,
                                  const ScenarioModel& model, std::uint64_t seed) {
  const double V = model.V > 0.0 ? model.V : spec.sd * spec.sd;
  TrialConfig config = make_trial_config(spec.budget, model.omega, V, model.c_ta, model.c_tb);
  config.allocation.rule = rule;
  config.allocation.scale = model.scale;
  config.truth = OutcomeTruth{0.0, spec.mean_difference, spec.sd};
  config.bf_prior = model.bf_prior;
  config.stop_early = false;
  config.seed = seed;
  return config;
}

std::vector<TrialResult> run_batch(const TrialConfig& config, std::int64_t n_sims,
                                   unsigned threads) {
  if (n_sims < 1) throw FormatError("n_sims must be at least 1");
  config.validate(true);
  return parallel_map(n_sims, threads, [&](std::int64_t i) {
    std::mt19937_64 rng = make_stream(config.seed, stream_index(0, static_cast<std::uint64_t>(i)));
    return run_trial(config, rng);
  });
}

ScenarioSummary run_scenario(const ScenarioSpec& spec, std::size_t scenario_index, WeightRule rule,
                             const ScenarioModel& model, std::int64_t n_sims, std::uint64_t seed,
                             unsigned threads) {
  if (n_sims < 1) throw FormatError("n_sims must be at least 1");
  const TrialConfig config = scenario_trial_config(spec, rule, model, seed);
  config.validate(true);
  const std::vector<TrialDigest> digests = parallel_map(n_sims, threads, [&](std::int64_t i) {
    std::mt19937_64 rng = make_stream(seed, stream_index(scenario_index, static_cast<std::uint64_t>(i)));
    return digest(run_trial(config, rng), false);
  });

  ScenarioSummary s;
  s.spec = spec;
  s.rule = rule;
  s.n_sims = n_sims;
  for (const TrialDigest& d : digests) {
    s.mean_n_a += static_cast<double>(d.n_a);
    s.mean_n_b += static_cast<double>(d.n_b);
    s.mean_total_outcome += d.total_outcome;
    s.mean_w_a += d.mean_w_a;
  }
  const double n = static_cast<double>(n_sims);
  s.mean_n_a /= n;
  s.mean_n_b /= n;
  s.mean_total_outcome /= n;
  s.mean_w_a /= n;
  s.reported_arm = s.mean_n_b < s.mean_n_a ? Arm::B : Arm::A;
  s.reported_mean = std::min(s.mean_n_a, s.mean_n_b);
  return s;
}

std::vector<ScenarioSummary> run_scenarios(std::span<const ScenarioSpec> specs, WeightRule rule,
                                           const ScenarioModel& model, std::int64_t n_sims,
                                           std::uint64_t seed, unsigned threads) {
  std::vector<ScenarioSummary> out;
  out.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    out.push_back(run_scenario(specs[i], i, rule, model, n_sims, seed, threads));
  }
  return out;
}

std::vector<SweepCell> SweepGrid::cells() const {
  std::vector<SweepCell> out;
  out.reserve(mu_b_values.size() * omega_values.size() * c_tb_values.size());
  for (double c_tb : c_tb_values) {
    for (double omega : omega_values) {
      for (double mu_b : mu_b_values) out.push_back({mu_b, omega, c_tb});
    }
  }
  return out;
}

TrialConfig SweepGrid::trial_config(const SweepCell& cell, std::uint64_t seed) const {
  TrialConfig config = make_trial_config(budget, cell.omega, V, c_ta, cell.c_tb);
  config.allocation = policy;
  config.truth = OutcomeTruth{mu_a, cell.mu_b, sigma_true};
  config.bf_prior = bf_prior;
  config.bf_threshold = bf_threshold;
  config.stop_early = false;
  config.switch_basis = switch_basis;
  config.seed = seed;
  return config;
}

SweepSummary run_sweep_cell(const SweepGrid& grid, std::size_t cell_index, std::uint64_t seed,
                            unsigned threads) {
  if (grid.n_sims < 1) throw FormatError("n_sims must be at least 1");
  const std::vector<SweepCell> cells = grid.cells();
  if (cell_index >= cells.size()) throw FormatError("sweep cell index out of range");
  const SweepCell cell = cells[cell_index];
  const TrialConfig config = grid.trial_config(cell, seed);
  config.validate(true);

  const std::vector<TrialDigest> digests = parallel_map(grid.n_sims, threads, [&](std::int64_t i) {
    std::mt19937_64 rng = make_stream(seed, stream_index(cell_index, static_cast<std::uint64_t>(i)));
    return digest(run_trial(config, rng), true);
  });

  const auto n = static_cast<std::size_t>(grid.n_sims);
  std::vector<double> prop(n), share(n), sw(n), stop(n), bf(n);
  std::vector<std::vector<double>> paths;
  paths.reserve(n);
  std::int64_t no_switch = 0;
  std::int64_t exhaust = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const TrialDigest& d = digests[i];
    prop[i] = d.mean_w_a;
    share[i] = static_cast<double>(d.n_a) / static_cast<double>(d.n_a + d.n_b);
    sw[i] = d.switched ? static_cast<double>(d.switch_index) : static_cast<double>(grid.budget);
    stop[i] = static_cast<double>(d.stop.n_stop);
    bf[i] = d.bf_at_end;
    if (!d.switched) ++no_switch;
    if (d.stop.n_stop >= grid.budget) ++exhaust;
    paths.push_back(d.w_path);
  }

  SweepSummary s;
  s.cell = cell;
  s.n_sims = grid.n_sims;
  s.mean_prop_a = mean_of(prop);
  s.mean_prop_b = 1.0 - s.mean_prop_a;
  s.mean_share_a = mean_of(share);
  s.mean_switch = mean_of(sw);
  s.switch_q = quantiles(sw);
  s.p_no_switch = static_cast<double>(no_switch) / static_cast<double>(n);
  s.stop_q = quantiles(stop);
  s.p_exhaust = static_cast<double>(exhaust) / static_cast<double>(n);
  s.mean_bf_at_budget = mean_of(bf);
  s.median_bf_at_budget = quantile_type7(bf, 0.5);
  s.trajectory = trajectory_bands(paths, grid.budget);
  return s;
}

std::vector<SweepSummary> run_sweep(const SweepGrid& grid, std::uint64_t seed, unsigned threads) {
  const std::size_t n_cells = grid.cells().size();
  std::vector<SweepSummary> out;
  out.reserve(n_cells);
  for (std::size_t c = 0; c < n_cells; ++c) out.push_back(run_sweep_cell(grid, c, seed, threads));
  return out;
}

std::vector<StoppingRow> stopping_table(std::span<const SweepSummary> sweep) {
  std::vector<StoppingRow> rows;
  rows.reserve(sweep.size());
  for (const SweepSummary& s : sweep) {
    rows.push_back({s.cell, s.stop_q, s.p_exhaust, s.median_bf_at_budget});
  }
  return rows;
}

double quantile_type7(std::span<const double> values, double p) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Quantiles quantiles(std::span<const double> values) {
  return {quantile_type7(values, 0.025), quantile_type7(values, 0.5),
          quantile_type7(values, 0.975)};
}

std::vector<BandPoint> trajectory_bands(std::span<const std::vector<double>> paths,
                                        std::int64_t length) {
  std::vector<BandPoint> bands(static_cast<std::size_t>(std::max<std::int64_t>(length, 0)));
  std::vector<double> column;
  column.reserve(paths.size());
  for (std::size_t t = 0; t < bands.size(); ++t) {
    column.clear();
    for (const std::vector<double>& path : paths) {
      if (path.empty()) continue;
      column.push_back(t < path.size() ? path[t] : path.back());
    }
    if (column.empty()) continue;
    bands[t].mean = mean_of(column);
    bands[t].lo = quantile_type7(column, 0.025);
    bands[t].hi = quantile_type7(column, 0.975);
  }
  return bands;
}

}  // namespace dlmtrial

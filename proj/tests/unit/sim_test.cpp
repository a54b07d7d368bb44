#include "dlmtrial/sim.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace dlmtrial;

TEST(Quantile, Type7) {
  const std::vector<double> v{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(quantile_type7(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile_type7(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile_type7(v, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile_type7(v, 0.025), 1.075);
  const std::vector<double> same(7, 100.0);
  const Quantiles q = quantiles(same);
  EXPECT_EQ(q.q025, 100.0);
  EXPECT_EQ(q.q50, 100.0);
  EXPECT_EQ(q.q975, 100.0);
  const std::vector<double> unsorted{9, 1, 5};
  EXPECT_DOUBLE_EQ(quantile_type7(unsorted, 0.5), 5.0);
}

TEST(TrajectoryBands, PadsByCarryingLast) {
  const std::vector<std::vector<double>> paths{{0.5, 0.6, 0.7}, {0.5, 0.4}};
  const auto b = trajectory_bands(paths, 3);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_DOUBLE_EQ(b[2].mean, (0.7 + 0.4) / 2);
  EXPECT_LE(b[2].lo, b[2].mean);
  EXPECT_GE(b[2].hi, b[2].mean);
}

TEST(Scenarios, TableShape) {
  const auto s = standard_scenarios();
  ASSERT_EQ(s.size(), 7u);
  EXPECT_EQ(s[0].budget, 128);
  EXPECT_EQ(s[3].budget, 200);
  EXPECT_EQ(s[6].sd, 30.0);
}

TEST(Scenarios, SingleSimMatchesDirectTrial) {
  const ScenarioSpec spec = standard_scenarios()[1];
  ScenarioModel model;
  const ScenarioSummary s = run_scenario(spec, 1, WeightRule::ZhangRosenberger, model, 1, 77, 1);
  const TrialConfig c = scenario_trial_config(spec, WeightRule::ZhangRosenberger, model, 77);
  auto rng = make_stream(77, stream_index(1, 0));
  const TrialResult r = run_trial(c, rng);
  EXPECT_EQ(s.mean_n_a, double(r.n_a));
  EXPECT_EQ(s.mean_n_b, double(r.n_b));
  EXPECT_EQ(s.mean_n_a + s.mean_n_b, double(spec.budget));
}

TEST(Scenarios, ThreadCountDoesNotMatter) {
  const auto specs = standard_scenarios();
  ScenarioModel model;
  const auto one = run_scenarios(specs, WeightRule::BiswasBhattacharya, model, 40, 5, 1);
  const auto four = run_scenarios(specs, WeightRule::BiswasBhattacharya, model, 40, 5, 4);
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].mean_n_a, four[i].mean_n_a);
    EXPECT_EQ(one[i].mean_total_outcome, four[i].mean_total_outcome);
    EXPECT_EQ(one[i].mean_w_a, four[i].mean_w_a);
  }
}

TEST(Sweep, CellOrderAndClosure) {
  SweepGrid grid;
  const auto cells = grid.cells();
  ASSERT_EQ(cells.size(), 45u);
  EXPECT_EQ(cells[0].c_tb, 0.1);
  EXPECT_EQ(cells[0].omega, 0.1);
  EXPECT_EQ(cells[1].mu_b, 2.0);
  EXPECT_EQ(cells[5].omega, 0.01);
  EXPECT_EQ(cells[15].c_tb, 0.001);

  grid.n_sims = 30;
  const SweepSummary s = run_sweep_cell(grid, 44, 3, 2);
  EXPECT_NEAR(s.mean_prop_a + s.mean_prop_b, 1.0, 1e-12);
  EXPECT_LE(s.switch_q.q025, s.switch_q.q50);
  EXPECT_LE(s.switch_q.q50, s.switch_q.q975);
  EXPECT_LE(s.stop_q.q025, s.stop_q.q50);
  EXPECT_LE(s.stop_q.q50, s.stop_q.q975);
  EXPECT_GE(s.p_exhaust, 0.0);
  EXPECT_LE(s.p_exhaust, 1.0);
  EXPECT_EQ(s.trajectory.size(), 100u);
  EXPECT_NEAR(s.trajectory[0].mean, s.trajectory[0].lo, 1e-12);
}

TEST(Sweep, ThreadCountDoesNotMatter) {
  SweepGrid grid;
  grid.n_sims = 25;
  grid.mu_b_values = {1, 4};
  grid.omega_values = {0.01};
  const auto a = run_sweep(grid, 9, 1);
  const auto b = run_sweep(grid, 9, 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].mean_prop_a, b[i].mean_prop_a);
    EXPECT_EQ(a[i].mean_switch, b[i].mean_switch);
    EXPECT_EQ(a[i].stop_q.q50, b[i].stop_q.q50);
    EXPECT_EQ(a[i].trajectory.back().hi, b[i].trajectory.back().hi);
  }
}

TEST(Sweep, StoppingTableFollowsSweep) {
  SweepGrid grid;
  grid.n_sims = 10;
  grid.mu_b_values = {3};
  grid.omega_values = {0.1};
  grid.c_tb_values = {1e-6};
  const auto sweep = run_sweep(grid, 1, 1);
  const auto table = stopping_table(sweep);
  ASSERT_EQ(table.size(), 1u);
  EXPECT_EQ(table[0].stop_q.q50, sweep[0].stop_q.q50);
  EXPECT_EQ(table[0].p_exhaust, sweep[0].p_exhaust);
}

TEST(Batch, StreamsPerTrial) {
  TrialConfig c = make_trial_config(20, 0.1, 1.0, 1.0, 1e-6);
  c.truth = OutcomeTruth{0, 1, 1};
  c.seed = 12;
  const auto runs = run_batch(c, 3, 2);
  auto rng = make_stream(12, stream_index(0, 2));
  const TrialResult direct = run_trial(c, rng);
  EXPECT_EQ(runs[2].final_state.m, direct.final_state.m);
}

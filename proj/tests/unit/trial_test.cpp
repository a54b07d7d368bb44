#include "dlmtrial/trial.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "dlmtrial/error.hpp"

using namespace dlmtrial;

namespace {

TrialConfig sim_config(std::int64_t budget, double mu_b, bool stop) {
  TrialConfig c = make_trial_config(budget, 0.01, 1.0, 1.0, 1e-6);
  c.truth = OutcomeTruth{0.0, mu_b, 1.0};
  c.stop_early = stop;
  c.seed = 99;
  return c;
}

bool same(const TrialResult& a, const TrialResult& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const PatientRecord &x = a.records[i], &y = b.records[i];
    if (x.arm != y.arm || x.u != y.u || x.y != y.y || x.w_a != y.w_a || x.bf01 != y.bf01) return false;
  }
  return a.final_state.m == b.final_state.m && a.final_state.C == b.final_state.C;
}

}  // namespace

TEST(RunTrial, BudgetOne) {
  const TrialResult r = run_trial(sim_config(1, 1.0, true));
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_FALSE(r.records[0].bf01.has_value());
  EXPECT_FALSE(r.stop.stopped);
  EXPECT_EQ(r.stop.n_stop, 1);
  EXPECT_EQ(r.records[0].forecasts.f_a, r.records[0].forecasts.f_b);
}

TEST(RunTrial, Deterministic) {
  const TrialConfig c = sim_config(100, 2.0, false);
  EXPECT_TRUE(same(run_trial(c), run_trial(c)));
  TrialConfig d = c;
  d.seed = 100;
  EXPECT_FALSE(same(run_trial(c), run_trial(d)));
}

TEST(RunTrial, RequiresTruth) {
  TrialConfig c = sim_config(10, 1.0, false);
  c.truth.reset();
  EXPECT_THROW(run_trial(c), FormatError);
}

TEST(RunTrial, CountingAndBudgetLaws) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    for (bool stop : {false, true}) {
      TrialConfig c = sim_config(60, 2.0, stop);
      c.seed = seed;
      const TrialResult r = run_trial(c);
      ASSERT_LE(r.records.size(), 60u);
      EXPECT_EQ(r.n_a + r.n_b, std::int64_t(r.records.size()));
      if (!r.stop.stopped) EXPECT_EQ(r.records.size(), 60u);
      if (stop && r.stop.stopped) EXPECT_EQ(std::int64_t(r.records.size()), r.stop.n_stop);
      std::int64_t n_a = 0;
      for (std::size_t i = 0; i < r.records.size(); ++i) {
        const PatientRecord& p = r.records[i];
        EXPECT_EQ(p.t, std::int64_t(i) + 1);
        EXPECT_EQ(p.arm, p.u < p.w_a ? Arm::A : Arm::B);
        n_a += p.arm == Arm::A;
      }
      EXPECT_EQ(n_a, r.n_a);
      if (r.switch_index) {
        EXPECT_GE(*r.switch_index, 1);
        EXPECT_LE(*r.switch_index, 60);
      }
      EXPECT_GE(r.stop.n_stop, 1);
      EXPECT_LE(r.stop.n_stop, 60);
    }
  }
}

TEST(RunTrial, FullRunStillReportsStopPoint) {
  TrialConfig c = sim_config(100, 3.0, false);
  const TrialResult full = run_trial(c);
  c.stop_early = true;
  const TrialResult cut = run_trial(c);
  EXPECT_EQ(full.stop.n_stop, cut.stop.n_stop);
  EXPECT_EQ(full.stop.stopped, cut.stop.stopped);
  ASSERT_TRUE(cut.stop.stopped);
  for (std::size_t i = 0; i < cut.records.size(); ++i) EXPECT_EQ(full.records[i].y, cut.records[i].y);
}

TEST(RunTrial, BfAppearsOnceBothArmsHaveTwo) {
  const TrialResult r = run_trial(sim_config(40, 0.5, false));
  std::int64_t a = 0, b = 0;
  for (const PatientRecord& p : r.records) {
    (p.arm == Arm::A ? a : b)++;
    EXPECT_EQ(p.bf01.has_value(), a >= 2 && b >= 2) << "patient " << p.t;
  }
}

TEST(DetectSwitch, Definition) {
  const std::vector<double> flat(10, 0.5);
  EXPECT_FALSE(detect_switch(flat));
  EXPECT_FALSE(first_crossing(flat));
  const std::vector<double> w{0.4, 0.6, 0.4, 0.7, 0.8, 0.9};
  EXPECT_EQ(detect_switch(w), 4);
  EXPECT_EQ(first_crossing(w), 2);
  const std::vector<double> late{0.6, 0.7, 0.4};
  EXPECT_FALSE(detect_switch(late));
  EXPECT_FALSE(detect_switch(std::vector<double>{}));
}

TEST(SwitchSeries, Bases) {
  std::vector<PatientRecord> recs(4);
  const Arm arms[] = {Arm::B, Arm::A, Arm::A, Arm::B};
  for (int i = 0; i < 4; ++i) {
    recs[i].t = i + 1;
    recs[i].arm = arms[i];
    recs[i].w_a = 0.1 * (i + 1);
  }
  const auto share = switch_series(recs, SwitchBasis::AllocationShare);
  EXPECT_EQ(share, (std::vector<double>{0.0, 0.5, 2.0 / 3.0, 0.5}));
  const auto w = switch_series(recs, SwitchBasis::Weight);
  EXPECT_EQ(w[2], 0.1 * 3);
}

TEST(Streams, IndependentAndReproducible) {
  auto a = make_stream(5, 0), b = make_stream(5, 0), c = make_stream(5, 1), d = make_stream(6, 0);
  const auto x = a();
  EXPECT_EQ(x, b());
  EXPECT_NE(x, c());
  EXPECT_NE(x, d());
}

TEST(CounterUniform, PureAndInRange) {
  std::set<double> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const double u = counter_uniform(42, i);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_EQ(u, counter_uniform(42, i));
    seen.insert(u);
  }
  EXPECT_EQ(seen.size(), 10000u);
  double mean = 0;
  for (double u : seen) mean += u;
  EXPECT_NEAR(mean / 10000, 0.5, 0.01);
}

TEST(TrialConfig, Validation) {
  TrialConfig c = sim_config(10, 1.0, false);
  EXPECT_NO_THROW(c.validate(true));
  c.budget = 0;
  EXPECT_ANY_THROW(c.validate(true));
  c = sim_config(10, 1.0, false);
  c.init_c(1, 1) = -1.0;
  EXPECT_ANY_THROW(c.validate(true));
  c = sim_config(10, 1.0, false);
  c.truth->sigma = 0.0;
  EXPECT_ANY_THROW(c.validate(true));
  c = sim_config(10, 1.0, false);
  c.bf_threshold = 0.0;
  EXPECT_ANY_THROW(c.validate(true));
}

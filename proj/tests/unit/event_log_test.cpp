#include "dlmtrial/event_log.hpp"

#include <gtest/gtest.h>

#include "dlmtrial/config_json.hpp"
#include "dlmtrial/error.hpp"

using namespace dlmtrial;

namespace {

TrialConfig sample_config() {
  TrialConfig c = make_trial_config(30, 0.1, 1.0, 1.0, 1e-6);
  c.truth = OutcomeTruth{0.0, 1.5, 1.0};
  c.stop_early = false;
  c.seed = 4;
  return c;
}

}  // namespace

TEST(EventLog, RoundTripIsExact) {
  const TrialConfig c = sample_config();
  const TrialResult r = run_trial(c);
  const std::string text = format_event_log({c, r.records});
  const EventLog back = parse_event_log(text);
  ASSERT_EQ(back.records.size(), r.records.size());
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const PatientRecord &a = r.records[i], &b = back.records[i];
    EXPECT_EQ(a.t, b.t);
    EXPECT_EQ(a.arm, b.arm);
    EXPECT_EQ(a.u, b.u);
    EXPECT_EQ(a.y, b.y);
    EXPECT_EQ(a.w_a, b.w_a);
    EXPECT_EQ(a.forecasts.q_b, b.forecasts.q_b);
    EXPECT_EQ(a.bf01, b.bf01);
  }
  EXPECT_EQ(format_event_log(back), text);
  EXPECT_EQ(trial_config_to_json(back.config), trial_config_to_json(c));
}

TEST(EventLog, Layout) {
  const TrialConfig c = sample_config();
  const std::string text = format_event_log({c, run_trial(c).records});
  EXPECT_EQ(text.rfind(kEventLogMagic, 0), 0u);
  const auto second = text.find('\n') + 1;
  EXPECT_EQ(text.substr(second, kEventLogColumns.size()), kEventLogColumns);
  EXPECT_EQ(text.back(), '\n');
}

TEST(EventLog, RecordFormat) {
  PatientRecord p;
  p.t = 3;
  p.arm = Arm::B;
  p.u = 0.25;
  p.y = -1.5;
  p.w_a = 0.5;
  p.forecasts = {0.0, 2.0, 0.1, 3.0};
  EXPECT_EQ(format_event_record(p), "3,B,0.25,-1.5,0.5,0,2,0.10000000000000001,3,\n");
  p.bf01 = 0.125;
  EXPECT_EQ(format_event_record(p), "3,B,0.25,-1.5,0.5,0,2,0.10000000000000001,3,0.125\n");
  EXPECT_EQ(parse_event_record("3,B,0.25,-1.5,0.5,0,2,0.10000000000000001,3,0.125").bf01, 0.125);
}

TEST(EventLog, RejectsMalformed) {
  EXPECT_THROW(parse_event_record("1,C,0.5,1,0.5,0,1,0,1,"), FormatError);
  EXPECT_THROW(parse_event_record("1,A,0.5,1,0.5,0,1,0,1"), FormatError);
  EXPECT_THROW(parse_event_record("1,A,abc,1,0.5,0,1,0,1,"), FormatError);
  EXPECT_THROW(parse_event_log("no header\n"), FormatError);
  const TrialConfig c = sample_config();
  std::string text = format_event_log({c, run_trial(c).records});
  const auto first_record = text.find('\n', text.find('\n') + 1) + 1;
  const auto second_record = text.find('\n', first_record) + 1;
  text.erase(first_record, second_record - first_record);
  EXPECT_THROW(parse_event_log(text), FormatError);  // t no longer starts at 1
}

TEST(Replay, ReproducesTrial) {
  const TrialConfig c = sample_config();
  const TrialResult r = run_trial(c);
  const ReplayReport rep = replay(parse_event_log(format_event_log({c, r.records})));
  EXPECT_TRUE(rep.match) << rep.mismatch;
  EXPECT_EQ(rep.result.final_state.m, r.final_state.m);
  EXPECT_EQ(rep.result.final_state.C, r.final_state.C);
  EXPECT_EQ(rep.result.final_state.t, r.final_state.t);
  ASSERT_TRUE(rep.result.final_bf && r.final_bf);
  EXPECT_EQ(rep.result.final_bf->bf01, r.final_bf->bf01);
}

TEST(Replay, DetectsTampering) {
  const TrialConfig c = sample_config();
  EventLog log{c, run_trial(c).records};
  log.records[5].y += 1e-9;
  const ReplayReport rep = replay(log);
  EXPECT_FALSE(rep.match);
  EXPECT_NE(rep.mismatch.find("patient 7"), std::string::npos) << rep.mismatch;
}

TEST(ConfigJson, RoundTripAndShorthand) {
  TrialConfig c = sample_config();
  c.allocation.rule = WeightRule::ZhangRosenberger;
  c.allocation.preference = Preference::HigherIsBetter;
  c.bf_prior = {0.3, 5.0, 2.0};
  c.switch_basis = SwitchBasis::Weight;
  const nlohmann::json j = trial_config_to_json(c);
  EXPECT_EQ(trial_config_to_json(trial_config_from_json(j)), j);

  const TrialConfig s = trial_config_from_json({{"budget", 12}, {"omega", 0.01}, {"c_ta", 2.0}, {"c_tb", 0.5}});
  EXPECT_EQ(s.budget, 12);
  EXPECT_EQ(s.dlm.W(0, 0), 0.01);
  EXPECT_EQ(s.dlm.W(0, 1), 0.0);
  EXPECT_EQ(s.init_c(0, 0), 2.0);
  EXPECT_EQ(s.init_c(1, 1), 0.5);
  EXPECT_FALSE(s.truth);
}

TEST(ConfigJson, RejectsBadFields) {
  EXPECT_THROW(trial_config_from_json({{"budget", "ten"}}), FormatError);
  EXPECT_THROW(trial_config_from_json({{"rule", "eq9"}}), FormatError);
  EXPECT_THROW(trial_config_from_json({{"V", {1, 2}}}), FormatError);
  EXPECT_THROW(trial_config_from_json(nlohmann::json::array()), FormatError);
}

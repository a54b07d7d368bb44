// Python bindings. Configs and results cross the boundary as JSON text; the
// package wrapper turns them into dicts.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dlmtrial/allocation.hpp"
#include "dlmtrial/config_json.hpp"
#include "dlmtrial/dlm.hpp"
#include "dlmtrial/error.hpp"
#include "dlmtrial/event_log.hpp"
#include "dlmtrial/session.hpp"
#include "dlmtrial/sim.hpp"
#include "dlmtrial/stopping.hpp"

namespace py = pybind11;
using namespace dlmtrial;
using nlohmann::json;

namespace {

json weights_json(const AllocationWeights& w) {
  return {{"w_a", w.w_a}, {"w_b", w.w_b}, {"gamma_a", w.gamma_a}, {"gamma_b", w.gamma_b},
          {"branch", to_string(w.branch)}};
}

json forecasts_json(const ArmForecasts& f) {
  return {{"f_a", f.f_a}, {"q_a", f.q_a}, {"f_b", f.f_b}, {"q_b", f.q_b}};
}

json state_json(const DlmState& s) {
  return {{"t", s.t}, {"m", {s.m(0), s.m(1)}}, {"C", {{s.C(0, 0), s.C(0, 1)}, {s.C(1, 0), s.C(1, 1)}}}};
}

json opt(const std::optional<std::int64_t>& v) { return v ? json(*v) : json(nullptr); }

json record_json(const PatientRecord& r) {
  return {{"t", r.t},
          {"arm", std::string(1, arm_letter(r.arm))},
          {"u", r.u},
          {"y", r.y},
          {"w_a", r.w_a},
          {"forecasts", forecasts_json(r.forecasts)},
          {"bf01", r.bf01 ? json(*r.bf01) : json(nullptr)}};
}

json result_json(const TrialResult& r) {
  json recs = json::array();
  for (const auto& p : r.records) recs.push_back(record_json(p));
  return {{"records", recs},
          {"n_a", r.n_a},
          {"n_b", r.n_b},
          {"switch_index", opt(r.switch_index)},
          {"first_crossing", opt(r.first_crossing)},
          {"n_stop", r.stop.n_stop},
          {"stopped", r.stop.stopped},
          {"final_state", state_json(r.final_state)},
          {"final_bf01", r.final_bf ? json(r.final_bf->bf01) : json(nullptr)}};
}

json quant_json(const Quantiles& q) { return {q.q025, q.q50, q.q975}; }

std::vector<double> doubles(const json& j, const char* key, std::vector<double> fallback) {
  return j.contains(key) ? j[key].get<std::vector<double>>() : fallback;
}

SweepGrid grid_from(const json& j) {
  SweepGrid g;
  g.mu_b_values = doubles(j, "mu_b", g.mu_b_values);
  g.omega_values = doubles(j, "omega", g.omega_values);
  g.c_tb_values = doubles(j, "c_tb", g.c_tb_values);
  g.budget = j.value("budget", g.budget);
  g.n_sims = j.value("n_sims", g.n_sims);
  g.V = j.value("V", g.V);
  g.sigma_true = j.value("sd", g.sigma_true);
  g.c_ta = j.value("c_ta", g.c_ta);
  g.policy.rule = parse_weight_rule(j.value("rule", std::string("bb")));
  g.policy.scale = parse_weight_scale(j.value("scale", std::string("stddev")));
  g.bf_prior.lambda = j.value("lambda", g.bf_prior.lambda);
  g.bf_prior.sigma_delta_sq = j.value("sigma_delta_sq", g.bf_prior.sigma_delta_sq);
  g.bf_threshold = j.value("bf_threshold", g.bf_threshold);
  g.switch_basis = parse_switch_basis(j.value("switch_basis", std::string("share")));
  return g;
}

class PySession {
 public:
  explicit PySession(const std::string& config) : s_(trial_config_from_json(json::parse(config))) {}
  explicit PySession(LiveSession s) : s_(std::move(s)) {}

  std::string enroll() {
    const Enrollment e = s_.enroll();
    return json{{"t", e.t}, {"arm", std::string(1, arm_letter(e.arm))}, {"u", e.u}, {"w_a", e.w_a},
                {"forecasts", forecasts_json(e.forecasts)}}
        .dump();
  }
  std::string record_outcome(double y) {
    const OutcomeReport r = s_.record_outcome(y);
    return json{{"state", state_json(r.state)},
                {"bf01", r.bf ? json(r.bf->bf01) : json(nullptr)},
                {"recommendation", to_string(r.recommendation)},
                {"phase", to_string(r.phase)}}
        .dump();
  }
  std::string phase() const { return std::string(to_string(s_.phase())); }
  std::string event_log() const { return format_event_log(s_.event_log()); }
  std::string snapshot() const { return s_.snapshot().dump(); }

 private:
  LiveSession s_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "dlmtrial engine bindings";
  m.attr("__version__") = DLMTRIAL_VERSION;

  py::register_exception<NumericalDomainError>(m, "NumericalDomainError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_RuntimeError);

  m.def("evolve", [](const Vec2& mm, const Mat2& C, const Mat2& G, const Mat2& W) {
    DlmSpec spec;
    spec.G = G;
    spec.W = W;
    const StatePrior p = evolve(DlmState{mm, C, 0}, spec);
    return py::make_tuple(p.a, p.R);
  }, py::arg("m"), py::arg("C"), py::arg("G"), py::arg("W"));

  m.def("forecast", [](const Vec2& a, const Mat2& R, const Vec2& design, double V) {
    const Forecast f = forecast_arm(StatePrior{a, R, 1}, design, V);
    return py::make_tuple(f.f, f.Q);
  }, py::arg("a"), py::arg("R"), py::arg("design"), py::arg("V"));

  m.def("update", [](const Vec2& a, const Mat2& R, const Vec2& design, double V, double y) {
    const StatePrior p{a, R, 1};
    const DlmState s = update(p, design, forecast_arm(p, design, V), y);
    return py::make_tuple(s.m, s.C);
  }, py::arg("a"), py::arg("R"), py::arg("design"), py::arg("V"), py::arg("y"));

  m.def("weights_json", [](const std::string& rule, const std::string& scale, const std::string& preference,
                           double f_a, double q_a, double f_b, double q_b) {
    const AllocationPolicy p{parse_weight_rule(rule), parse_weight_scale(scale), parse_preference(preference)};
    return weights_json(compute_weights(p, {f_a, q_a, f_b, q_b})).dump();
  });

  m.def("std_normal_cdf", &std_normal_cdf, py::arg("x"));

  m.def("two_sample_t", [](std::int64_t n_a, std::int64_t n_b, double mean_a, double mean_b, double ss_a,
                           double ss_b) -> py::object {
    const TTestOutcome o = two_sample_t({n_a, n_b, mean_a, mean_b, ss_a, ss_b});
    if (!o.ok()) return py::none();
    return py::make_tuple(o.stat.t, o.stat.dof, o.stat.n_delta);
  });

  m.def("bayes_factor", [](double t, double dof, double n_delta, double lambda, double sigma_delta_sq,
                           double threshold) {
    const BfResult r = bayes_factor({t, dof, n_delta}, {lambda, sigma_delta_sq, 1.0}, threshold);
    return py::make_tuple(r.bf01, r.decisive, r.posterior_h0);
  }, py::arg("t"), py::arg("dof"), py::arg("n_delta"), py::arg("lambda_") = 0.0,
     py::arg("sigma_delta_sq") = 2.0, py::arg("threshold") = kDecisiveThreshold);

  m.def("default_config_json", [] { return trial_config_to_json(TrialConfig{}).dump(); });

  m.def("run_trial_json", [](const std::string& config) {
    const TrialConfig c = trial_config_from_json(json::parse(config));
    TrialResult r;
    {
      py::gil_scoped_release release;
      r = run_trial(c);
    }
    return result_json(r).dump();
  });

  m.def("run_scenarios_json", [](const std::string& rule, std::int64_t n_sims, std::uint64_t seed,
                                 unsigned threads, const std::string& model_json) {
    const json mj = json::parse(model_json);
    ScenarioModel model;
    model.omega = mj.value("omega", model.omega);
    model.c_ta = mj.value("c_ta", model.c_ta);
    model.c_tb = mj.value("c_tb", model.c_tb);
    model.V = mj.value("V", model.V);
    model.scale = parse_weight_scale(mj.value("scale", std::string("stddev")));
    const WeightRule r = parse_weight_rule(rule);
    std::vector<ScenarioSummary> rows;
    {
      py::gil_scoped_release release;
      const auto specs = standard_scenarios();
      rows = run_scenarios(specs, r, model, n_sims, seed, threads);
    }
    json out = json::array();
    for (const auto& s : rows) {
      out.push_back({{"scenario", s.spec.label}, {"mean_difference", s.spec.mean_difference}, {"sd", s.spec.sd},
                     {"budget", s.spec.budget}, {"mean_n_a", s.mean_n_a}, {"mean_n_b", s.mean_n_b},
                     {"reported_arm", std::string(1, arm_letter(s.reported_arm))},
                     {"reported_mean", s.reported_mean}, {"mean_w_a", s.mean_w_a}});
    }
    return out.dump();
  });

  m.def("run_sweep_json", [](const std::string& grid_json, std::uint64_t seed, unsigned threads) {
    const SweepGrid g = grid_from(json::parse(grid_json));
    std::vector<SweepSummary> rows;
    {
      py::gil_scoped_release release;
      rows = run_sweep(g, seed, threads);
    }
    json out = json::array();
    for (const auto& s : rows) {
      out.push_back({{"mu_b", s.cell.mu_b}, {"omega", s.cell.omega}, {"c_tb", s.cell.c_tb},
                     {"mean_prop_a", s.mean_prop_a}, {"mean_prop_b", s.mean_prop_b},
                     {"mean_share_a", s.mean_share_a}, {"mean_switch", s.mean_switch},
                     {"switch_q", quant_json(s.switch_q)}, {"p_no_switch", s.p_no_switch},
                     {"stop_q", quant_json(s.stop_q)}, {"p_exhaust", s.p_exhaust},
                     {"median_bf_at_budget", s.median_bf_at_budget}});
    }
    return out.dump();
  });

  m.def("replay_json", [](const std::string& log_text) {
    const ReplayReport r = replay(parse_event_log(log_text));
    json j = result_json(r.result);
    j["match"] = r.match;
    j["mismatch"] = r.mismatch;
    return j.dump();
  });

  m.def("detect_switch", [](const std::vector<double>& s) { return detect_switch(s); });

  py::class_<PySession>(m, "LiveSession")
      .def(py::init<const std::string&>(), py::arg("config_json"))
      .def_static("restore", [](const std::string& log, std::optional<std::int64_t> pending) {
        return PySession(LiveSession::restore(parse_event_log(log), pending));
      }, py::arg("log"), py::arg("pending") = std::nullopt)
      .def("enroll_json", &PySession::enroll)
      .def("record_outcome_json", &PySession::record_outcome, py::arg("y"))
      .def_property_readonly("phase", &PySession::phase)
      .def("event_log", &PySession::event_log)
      .def("snapshot_json", &PySession::snapshot);
}

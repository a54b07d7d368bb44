#include "dlmtrial/config_json.hpp"

#include <string>

#include "dlmtrial/error.hpp"

namespace dlmtrial {
namespace {

using nlohmann::json;

json vec_json(const Vec2& v) { return json::array({v(0), v(1)}); }

json mat_json(const Mat2& M) {
  return json::array({json::array({M(0, 0), M(0, 1)}), json::array({M(1, 0), M(1, 1)})});
}

double number(const json& j, const char* what) {
  if (!j.is_number()) throw FormatError(std::string("field '") + what + "' must be a number");
  return j.get<double>();
}

Vec2 vec_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) {
    throw FormatError(std::string("field '") + what + "' must be a 2-vector");
  }
  return Vec2(number(j[0], what), number(j[1], what));
}

Mat2 mat_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) {
    throw FormatError(std::string("field '") + what + "' must be a 2x2 matrix");
  }
  Mat2 M;
  for (int r = 0; r < 2; ++r) {
    const Vec2 row = vec_from(j[r], what);
    M(r, 0) = row(0);
    M(r, 1) = row(1);
  }
  return M;
}

}  // namespace

json trial_config_to_json(const TrialConfig& c) {
  json j;
  j["budget"] = c.budget;
  j["rule"] = std::string(to_string(c.allocation.rule));
  j["scale"] = std::string(to_string(c.allocation.scale));
  j["preference"] = std::string(to_string(c.allocation.preference));
  j["design_a"] = vec_json(c.dlm.design_a);
  j["design_b"] = vec_json(c.dlm.design_b);
  j["G"] = mat_json(c.dlm.G);
  j["W"] = mat_json(c.dlm.W);
  j["V"] = c.dlm.V;
  j["init_m"] = vec_json(c.init_m);
  j["init_C"] = mat_json(c.init_c);
  if (c.truth) {
    j["truth"] = {{"mu_a", c.truth->mu_a}, {"mu_b", c.truth->mu_b}, {"sigma", c.truth->sigma}};
  } else {
    j["truth"] = nullptr;
  }
  j["bf_prior"] = {{"lambda", c.bf_prior.lambda},
                   {"sigma_delta_sq", c.bf_prior.sigma_delta_sq},
                   {"prior_odds", c.bf_prior.prior_odds}};
  j["bf_threshold"] = c.bf_threshold;
  j["stop_early"] = c.stop_early;
  j["switch_basis"] = std::string(to_string(c.switch_basis));
  j["seed"] = c.seed;
  return j;
}

TrialConfig trial_config_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("trial config must be a JSON object");
  TrialConfig c;
  try {
    if (j.contains("budget")) {
      if (!j["budget"].is_number_integer()) throw FormatError("field 'budget' must be an integer");
      c.budget = j["budget"].get<std::int64_t>();
    }
    if (j.contains("rule")) c.allocation.rule = parse_weight_rule(j["rule"].get<std::string>());
    if (j.contains("scale")) c.allocation.scale = parse_weight_scale(j["scale"].get<std::string>());
    if (j.contains("preference")) {
      c.allocation.preference = parse_preference(j["preference"].get<std::string>());
    }
    if (j.contains("design_a")) c.dlm.design_a = vec_from(j["design_a"], "design_a");
    if (j.contains("design_b")) c.dlm.design_b = vec_from(j["design_b"], "design_b");
    if (j.contains("G")) c.dlm.G = mat_from(j["G"], "G");
    if (j.contains("W")) {
      c.dlm.W = mat_from(j["W"], "W");
    } else if (j.contains("omega")) {
      c.dlm.W = number(j["omega"], "omega") * Mat2::Identity();
    }
    if (j.contains("V")) c.dlm.V = number(j["V"], "V");
    if (j.contains("init_m")) c.init_m = vec_from(j["init_m"], "init_m");
    if (j.contains("init_C")) {
      c.init_c = mat_from(j["init_C"], "init_C");
    } else if (j.contains("c_ta") || j.contains("c_tb")) {
      const double c_ta = j.contains("c_ta") ? number(j["c_ta"], "c_ta") : c.init_c(0, 0);
      const double c_tb = j.contains("c_tb") ? number(j["c_tb"], "c_tb") : c.init_c(1, 1);
      c.init_c = Vec2(c_ta, c_tb).asDiagonal();
    }
    if (j.contains("truth") && !j["truth"].is_null()) {
      const json& t = j["truth"];
      OutcomeTruth truth;
      truth.mu_a = number(t.value("mu_a", json(0.0)), "truth.mu_a");
      truth.mu_b = number(t.at("mu_b"), "truth.mu_b");
      truth.sigma = number(t.at("sigma"), "truth.sigma");
      c.truth = truth;
    }
    if (j.contains("bf_prior")) {
      const json& p = j["bf_prior"];
      if (p.contains("lambda")) c.bf_prior.lambda = number(p["lambda"], "bf_prior.lambda");
      if (p.contains("sigma_delta_sq")) {
        c.bf_prior.sigma_delta_sq = number(p["sigma_delta_sq"], "bf_prior.sigma_delta_sq");
      }
      if (p.contains("prior_odds")) {
        c.bf_prior.prior_odds = number(p["prior_odds"], "bf_prior.prior_odds");
      }
    }
    if (j.contains("bf_threshold")) c.bf_threshold = number(j["bf_threshold"], "bf_threshold");
    if (j.contains("stop_early")) c.stop_early = j["stop_early"].get<bool>();
    if (j.contains("switch_basis")) {
      c.switch_basis = parse_switch_basis(j["switch_basis"].get<std::string>());
    }
    if (j.contains("seed")) {
      if (!j["seed"].is_number_integer()) throw FormatError("field 'seed' must be an integer");
      c.seed = j["seed"].get<std::uint64_t>();
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid trial config: ") + e.what());
  }
  return c;
}

}  // namespace dlmtrial

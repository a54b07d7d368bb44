#pragma once

#include <nlohmann/json.hpp>

#include "dlmtrial/trial.hpp"

namespace dlmtrial {

/// Full echo of every field, including defaults.
nlohmann::json trial_config_to_json(const TrialConfig& config);

/// Inverse of trial_config_to_json. Missing fields take TrialConfig defaults;
/// "omega" may stand in for "W" (omega * I) and "c_ta"/"c_tb" for "init_C".
TrialConfig trial_config_from_json(const nlohmann::json& j);

}  // namespace dlmtrial

#include "dlmtrial/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dlmtrial/config_json.hpp"
#include "dlmtrial/error.hpp"
#include "dlmtrial/event_log.hpp"
#include "dlmtrial/numfmt.hpp"
#include "dlmtrial/report.hpp"
#include "dlmtrial/service.hpp"
#include "dlmtrial/sim.hpp"

namespace dlmtrial {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Thrown for bad flag combinations found after CLI11 parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::vector<std::string> kRules{"zr", "bb"};
const std::vector<std::string> kScales{"variance", "stddev", "unit"};
const std::vector<std::string> kPreferences{"lower", "higher"};
const std::vector<std::string> kBases{"share", "weight"};

// Flags shared by the batch commands.
struct Common {
  std::uint64_t seed = 0;
  fs::path out_dir;
  unsigned threads = 0;
  bool timestamp = false;
  std::string scale = "stddev";
  double lambda = 0.0;
  double sigma_delta_sq = 2.0;
  double threshold = kDecisiveThreshold;
  fs::path config_file;

  void add(CLI::App* app) {
    app->add_option("--seed", seed, "master seed")->required();
    app->add_option("--out", out_dir, "output directory")->required();
    app->add_option("--threads", threads, "worker threads, 0 = all cores")->capture_default_str();
    app->add_flag("--timestamp", timestamp, "record creation time in the manifest");
    app->add_option("--scale", scale, "forecast spread fed to the weight rule")
        ->check(CLI::IsMember(kScales))
        ->capture_default_str();
    app->add_option("--lambda", lambda, "prior mean of the standardized effect")->capture_default_str();
    app->add_option("--sigma-delta-sq", sigma_delta_sq, "prior variance of the standardized effect")
        ->capture_default_str();
    app->add_option("--threshold", threshold, "BF01 stop threshold")->capture_default_str();
    app->add_option("--config", config_file, "TOML file of flag values; flags on the command line win");
  }

  BfPrior bf_prior() const { return {lambda, sigma_delta_sq, 1.0}; }
};

struct SimulateArgs {
  Common common;
  std::string rule = "bb";
  std::string preference = "lower";
  std::string basis = "share";
  std::int64_t budget = 100;
  double mu_a = 0.0;
  double mu_b = 1.0;
  double sd = 1.0;
  double omega = 0.1;
  double c_ta = 1.0;
  double c_tb = 1e-6;
  double V = 1.0;
  std::int64_t sims = 1000;
  bool stop = true;
  std::int64_t events = 1;
};

struct ScenarioArgs {
  Common common;
  std::int64_t sims = 1000;
  double omega = 0.001;
  double c_ta = 1.0;
  double c_tb = 1e-6;
  double V = 0.0;
};

struct SweepArgs {
  Common common;
  std::string rule = "bb";
  std::string basis = "share";
  std::int64_t budget = 100;
  std::int64_t sims = 1000;
  std::vector<double> mu_b{1, 2, 3, 4, 5};
  std::vector<double> omega{0.1, 0.01, 0.001};
  std::vector<double> c_tb{0.1, 0.001, 0.000001};
  double c_ta = 1.0;
  double V = 1.0;
  double sd = 1.0;
};

void finish_manifest(const Common& c, RunManifest& manifest) {
  manifest.seed = c.seed;
  if (c.timestamp) manifest.created_utc = utc_timestamp();
  atomic_write(c.out_dir / "manifest.json", manifest.to_json().dump(2) + "\n");
}

void prepare_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

int run_simulate(const SimulateArgs& a, std::ostream& out) {
  if (a.sims < 1) throw UsageError("--sims must be at least 1");
  if (a.events < 0) throw UsageError("--events must be non-negative");
  TrialConfig config = make_trial_config(a.budget, a.omega, a.V, a.c_ta, a.c_tb);
  config.allocation = {parse_weight_rule(a.rule), parse_weight_scale(a.common.scale),
                       parse_preference(a.preference)};
  config.truth = OutcomeTruth{a.mu_a, a.mu_b, a.sd};
  config.bf_prior = a.common.bf_prior();
  config.bf_threshold = a.common.threshold;
  config.stop_early = a.stop;
  config.switch_basis = parse_switch_basis(a.basis);
  config.seed = a.common.seed;
  try {
    config.validate(true);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }

  const std::vector<TrialResult> results = run_batch(config, a.sims, a.common.threads);

  prepare_out(a.common.out_dir);
  RunManifest manifest;
  manifest.command = "simulate";
  manifest.config = {{"trial", trial_config_to_json(config)}, {"sims", a.sims}, {"events", a.events}};

  std::string csv =
      "trial,n_a,n_b,share_a,mean_w_a,switch_index,first_crossing,n_stop,stopped,final_bf01,"
      "total_outcome\n";
  double sum_n_a = 0, sum_n_b = 0, sum_w = 0;
  std::int64_t n_stopped = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const TrialResult& r = results[i];
    double w = 0, total = 0;
    for (const PatientRecord& p : r.records) {
      w += p.w_a;
      total += p.y;
    }
    const double n = static_cast<double>(r.records.size());
    auto opt = [](const std::optional<std::int64_t>& v) { return v ? std::to_string(*v) : std::string(); };
    csv += std::to_string(i) + ',' + std::to_string(r.n_a) + ',' + std::to_string(r.n_b) + ',' +
           format_double(static_cast<double>(r.n_a) / n) + ',' + format_double(w / n) + ',' +
           opt(r.switch_index) + ',' + opt(r.first_crossing) + ',' + std::to_string(r.stop.n_stop) +
           ',' + (r.stop.stopped ? "1" : "0") + ',' +
           (r.final_bf ? format_double(r.final_bf->bf01) : std::string()) + ',' +
           format_double(total) + '\n';
    sum_n_a += static_cast<double>(r.n_a);
    sum_n_b += static_cast<double>(r.n_b);
    sum_w += w / n;
    n_stopped += r.stop.stopped ? 1 : 0;
  }
  write_output(a.common.out_dir, "trials.csv", csv, manifest);

  const std::int64_t n_logs = std::min<std::int64_t>(a.events, a.sims);
  for (std::int64_t i = 0; i < n_logs; ++i) {
    std::ostringstream name;
    name << "events/trial_" << std::setw(6) << std::setfill('0') << i << ".log";
    EventLog log{config, results[static_cast<std::size_t>(i)].records};
    write_output(a.common.out_dir, name.str(), format_event_log(log), manifest);
  }

  const double n = static_cast<double>(a.sims);
  const json summary = {{"sims", a.sims},
                        {"mean_n_a", sum_n_a / n},
                        {"mean_n_b", sum_n_b / n},
                        {"mean_w_a", sum_w / n},
                        {"p_stopped", static_cast<double>(n_stopped) / n}};
  write_output(a.common.out_dir, "summary.json", summary.dump(2) + "\n", manifest);
  finish_manifest(a.common, manifest);
  out << summary.dump() << '\n';
  return kExitOk;
}

int run_scenarios_cmd(const ScenarioArgs& a, std::ostream& out) {
  if (a.sims < 1) throw UsageError("--sims must be at least 1");
  ScenarioModel model;
  model.omega = a.omega;
  model.c_ta = a.c_ta;
  model.c_tb = a.c_tb;
  model.V = a.V;
  model.scale = parse_weight_scale(a.common.scale);
  model.bf_prior = a.common.bf_prior();
  const std::vector<ScenarioSpec> specs = standard_scenarios();

  try {
    for (const ScenarioSpec& spec : specs) {
      scenario_trial_config(spec, WeightRule::ZhangRosenberger, model, a.common.seed).validate(true);
    }
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }

  std::vector<ScenarioSummary> rows;
  for (WeightRule rule : {WeightRule::ZhangRosenberger, WeightRule::BiswasBhattacharya}) {
    auto part = run_scenarios(specs, rule, model, a.sims, a.common.seed, a.common.threads);
    rows.insert(rows.end(), part.begin(), part.end());
  }

  prepare_out(a.common.out_dir);
  RunManifest manifest;
  manifest.command = "scenarios";
  manifest.config = {{"sims", a.sims},
                     {"omega", a.omega},
                     {"c_ta", a.c_ta},
                     {"c_tb", a.c_tb},
                     {"V", a.V > 0 ? json(a.V) : json("sd^2")},
                     {"scale", a.common.scale},
                     {"bf_prior", {{"lambda", a.common.lambda}, {"sigma_delta_sq", a.common.sigma_delta_sq}}}};
  const std::string csv = scenario_csv(rows);
  write_output(a.common.out_dir, "scenarios.csv", csv, manifest);
  finish_manifest(a.common, manifest);
  out << csv;
  return kExitOk;
}

int run_sweep_cmd(const SweepArgs& a, std::ostream& out) {
  if (a.sims < 1) throw UsageError("--sims must be at least 1");
  if (a.budget < 2) throw UsageError("--budget must be at least 2");
  SweepGrid grid;
  grid.mu_b_values = a.mu_b;
  grid.omega_values = a.omega;
  grid.c_tb_values = a.c_tb;
  grid.budget = a.budget;
  grid.n_sims = a.sims;
  grid.V = a.V;
  grid.sigma_true = a.sd;
  grid.c_ta = a.c_ta;
  grid.policy = {parse_weight_rule(a.rule), parse_weight_scale(a.common.scale), Preference::LowerIsBetter};
  grid.bf_prior = a.common.bf_prior();
  grid.bf_threshold = a.common.threshold;
  grid.switch_basis = parse_switch_basis(a.basis);

  try {
    for (const SweepCell& cell : grid.cells()) grid.trial_config(cell, a.common.seed).validate(true);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  if (grid.cells().empty()) throw UsageError("empty sweep grid");

  const std::vector<SweepSummary> rows = run_sweep(grid, a.common.seed, a.common.threads);
  const std::vector<StoppingRow> stops = stopping_table(rows);

  prepare_out(a.common.out_dir);
  RunManifest manifest;
  manifest.command = "sweep";
  manifest.config = {{"mu_b", a.mu_b},     {"omega", a.omega},         {"c_tb", a.c_tb},
                     {"budget", a.budget}, {"sims", a.sims},           {"V", a.V},
                     {"sd", a.sd},         {"c_ta", a.c_ta},           {"rule", a.rule},
                     {"scale", a.common.scale},
                     {"switch_basis", a.basis},
                     {"bf_threshold", a.common.threshold},
                     {"bf_prior", {{"lambda", a.common.lambda}, {"sigma_delta_sq", a.common.sigma_delta_sq}}}};
  const std::string csv = sweep_csv(rows);
  write_output(a.common.out_dir, "sweep_summary.csv", csv, manifest);
  write_output(a.common.out_dir, "stopping_table.csv", stopping_csv(stops), manifest);
  write_output(a.common.out_dir, "trajectory_bands.json", trajectory_json(rows).dump() + "\n", manifest);
  finish_manifest(a.common, manifest);
  out << csv;
  return kExitOk;
}

int run_replay(const fs::path& path, std::ostream& out) {
  const EventLog log = parse_event_log(read_text(path));
  const ReplayReport report = replay(log);
  const TrialResult& r = report.result;
  const DlmState& s = r.final_state;
  json j = {{"match", report.match},
            {"t", s.t},
            {"n_a", r.n_a},
            {"n_b", r.n_b},
            {"m", {s.m(0), s.m(1)}},
            {"C", {{s.C(0, 0), s.C(0, 1)}, {s.C(1, 0), s.C(1, 1)}}},
            {"bf01", r.final_bf ? json(r.final_bf->bf01) : json(nullptr)}};
  if (!report.match) j["mismatch"] = report.mismatch;
  out << j.dump() << '\n';
  return report.match ? kExitOk : kExitMismatch;
}

int run_serve(const std::string& addr, const fs::path& data_dir, std::ostream& out) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw UsageError("--addr must be host:port");
  int port = 0;
  try {
    port = std::stoi(addr.substr(colon + 1));
  } catch (const std::exception&) {
    throw UsageError("--addr must be host:port");
  }
  if (port <= 0 || port > 65535) throw UsageError("port out of range");
  TrialStore store(data_dir);
  out << json{{"listening", addr}, {"data_dir", data_dir.string()}}.dump() << std::endl;
  serve(store, addr.substr(0, colon), port);
  return kExitOk;
}

bool given_on_command_line(const std::vector<std::string>& args, const CLI::Option* opt) {
  for (const std::string& a : args) {
    for (const std::string& name : opt->get_lnames()) {
      const std::string flag = "--" + name;
      if (a == flag || a.starts_with(flag + "=")) return true;
    }
  }
  return false;
}

// Turns `--config FILE` of the chosen subcommand into ordinary flags placed
// ahead of the command-line ones. Keys are flag names without dashes.
std::vector<std::string> expand_config(CLI::App& app, std::vector<std::string> args) {
  auto sub_it = std::find_if(args.begin() + 1, args.end(), [&](const std::string& a) {
    return app.get_subcommand_no_throw(a) != nullptr;
  });
  if (sub_it == args.end()) return args;
  CLI::App* sub = app.get_subcommand(*sub_it);
  auto cfg = std::find_if(sub_it, args.end(), [](const std::string& a) {
    return a == "--config" || a.starts_with("--config=");
  });
  if (cfg == args.end()) return args;
  std::string path;
  if (*cfg == "--config") {
    if (cfg + 1 == args.end()) return args;  // let CLI11 report it
    path = *(cfg + 1);
  } else {
    path = cfg->substr(std::string("--config=").size());
  }

  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_file(path);
  } catch (const CLI::FileError& e) {
    throw IoError(e.what());
  } catch (const CLI::ParseError& e) {
    throw UsageError(std::string("config file: ") + e.what());
  }
  std::vector<std::string> injected;
  for (const CLI::ConfigItem& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == sub->get_name())) {
      continue;
    }
    if (item.name == "config") throw UsageError("config files cannot nest");
    const CLI::Option* opt = sub->get_option_no_throw("--" + item.name);
    if (opt == nullptr) throw UsageError("config file: unknown key '" + item.name + "'");
    if (given_on_command_line(args, opt)) continue;
    if (item.inputs.size() == 1) {
      injected.push_back("--" + item.name + "=" + item.inputs.front());
    } else {
      injected.push_back("--" + item.name);
      injected.insert(injected.end(), item.inputs.begin(), item.inputs.end());
    }
  }
  args.insert(sub_it + 1, injected.begin(), injected.end());
  return args;
}

int fail(std::ostream& err, int code, std::string_view kind, std::string_view message) {
  err << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << '\n';
  return code;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive two-arm trial engine: simulation, replay and live allocation service",
               "dlmtrial"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(DLMTRIAL_VERSION));

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo runs of one trial design");
  sim.common.add(simulate);
  simulate->add_option("--rule", sim.rule, "weight rule")->check(CLI::IsMember(kRules))->capture_default_str();
  simulate->add_option("--preference", sim.preference, "which outcome direction is favourable")
      ->check(CLI::IsMember(kPreferences))
      ->capture_default_str();
  simulate->add_option("--switch-basis", sim.basis, "series read for the switch index")
      ->check(CLI::IsMember(kBases))
      ->capture_default_str();
  simulate->add_option("--budget", sim.budget, "patients per trial")->capture_default_str();
  simulate->add_option("--mu-a", sim.mu_a, "true mean of arm A")->capture_default_str();
  simulate->add_option("--mu-b", sim.mu_b, "true mean of arm B")->capture_default_str();
  simulate->add_option("--sd", sim.sd, "true outcome standard deviation")->capture_default_str();
  simulate->add_option("--omega", sim.omega, "state evolution variance")->capture_default_str();
  simulate->add_option("--cta", sim.c_ta, "prior variance of the intercept")->capture_default_str();
  simulate->add_option("--ctb", sim.c_tb, "prior variance of the B-A effect")->capture_default_str();
  simulate->add_option("--v", sim.V, "observation variance of the model")->capture_default_str();
  simulate->add_option("--sims", sim.sims, "number of trials")->capture_default_str();
  simulate->add_flag("--stop,!--no-stop", sim.stop, "stop a trial once BF01 is decisive");
  simulate->add_option("--events", sim.events, "write event logs for the first N trials")
      ->capture_default_str();

  ScenarioArgs sc;
  CLI::App* scenarios = app.add_subcommand("scenarios", "fixed-design scenario table, both rules");
  sc.common.add(scenarios);
  scenarios->add_option("--sims", sc.sims)->capture_default_str();
  scenarios->add_option("--omega", sc.omega)->capture_default_str();
  scenarios->add_option("--cta", sc.c_ta)->capture_default_str();
  scenarios->add_option("--ctb", sc.c_tb)->capture_default_str();
  scenarios->add_option("--v", sc.V, "model V; 0 uses each scenario's sd^2")->capture_default_str();

  SweepArgs sw;
  CLI::App* sweep = app.add_subcommand("sweep", "sensitivity grid over (mu_B, omega, C_tB)");
  sw.common.add(sweep);
  sweep->add_option("--rule", sw.rule)->check(CLI::IsMember(kRules))->capture_default_str();
  sweep->add_option("--switch-basis", sw.basis)->check(CLI::IsMember(kBases))->capture_default_str();
  sweep->add_option("--budget", sw.budget)->capture_default_str();
  sweep->add_option("--sims", sw.sims)->capture_default_str();
  sweep->add_option("--mu-b", sw.mu_b, "grid of true arm-B means")->capture_default_str();
  sweep->add_option("--omega", sw.omega)->capture_default_str();
  sweep->add_option("--ctb", sw.c_tb)->capture_default_str();
  sweep->add_option("--cta", sw.c_ta)->capture_default_str();
  sweep->add_option("--v", sw.V)->capture_default_str();
  sweep->add_option("--sd", sw.sd)->capture_default_str();

  fs::path replay_path;
  CLI::App* replay_cmd = app.add_subcommand("replay", "re-run an event log and check it bit for bit");
  replay_cmd->add_option("log", replay_path, "event log file")->required();

  std::string addr = "127.0.0.1:8080";
  fs::path data_dir;
  CLI::App* serve_cmd = app.add_subcommand("serve", "HTTP service for live trials");
  serve_cmd->add_option("--addr", addr, "host:port")->capture_default_str();
  serve_cmd->add_option("--data-dir", data_dir, "directory for trial logs")->required();

  std::vector<std::string> args(argv, argv + argc);
  try {
    args = expand_config(app, std::move(args));
  } catch (const UsageError& e) {
    return fail(err, kExitUsage, "usage", e.what());
  } catch (const IoError& e) {
    return fail(err, kExitIo, "io", e.what());
  }
  // CLI11 consumes arguments back to front
  std::reverse(args.begin(), args.end());
  args.pop_back();

  try {
    app.parse(args);
  } catch (const CLI::CallForVersion&) {
    out << DLMTRIAL_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::Success&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return fail(err, kExitUsage, "usage", e.what());
  }

  try {
    if (simulate->parsed()) return run_simulate(sim, out);
    if (scenarios->parsed()) return run_scenarios_cmd(sc, out);
    if (sweep->parsed()) return run_sweep_cmd(sw, out);
    if (replay_cmd->parsed()) return run_replay(replay_path, out);
    if (serve_cmd->parsed()) return run_serve(addr, data_dir, out);
  } catch (const UsageError& e) {
    return fail(err, kExitUsage, "usage", e.what());
  } catch (const IoError& e) {
    return fail(err, kExitIo, "io", e.what());
  } catch (const FormatError& e) {
    return fail(err, kExitIo, "format", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(err, kExitIo, "io", e.what());
  } catch (const NumericalDomainError& e) {
    return fail(err, kExitNumeric, "numeric", e.what());
  } catch (const std::exception& e) {
    return fail(err, kExitNumeric, "internal", e.what());
  }
  return fail(err, kExitUsage, "usage", "no subcommand");
}

}  // namespace dlmtrial

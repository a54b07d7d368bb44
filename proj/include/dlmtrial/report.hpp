#pragma once

// Output artifacts: comma-separated tables with a fixed header, JSON for
// trajectory bands and run manifests, and atomic file replacement.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dlmtrial/sim.hpp"

namespace dlmtrial {

/// Writes to a temporary sibling, fsyncs it, then renames over `path`, so
/// readers see either the old or the new file, never a partial one.
void atomic_write(const std::filesystem::path& path, std::string_view content);

std::string read_text(const std::filesystem::path& path);

std::string sha256_hex(std::string_view data);

std::string scenario_csv(std::span<const ScenarioSummary> rows);
std::vector<ScenarioSummary> parse_scenario_csv(std::string_view text);

/// Per-cell sweep aggregates; trajectories go to trajectory_json instead.
std::string sweep_csv(std::span<const SweepSummary> rows);
std::vector<SweepSummary> parse_sweep_csv(std::string_view text);

std::string stopping_csv(std::span<const StoppingRow> rows);
std::vector<StoppingRow> parse_stopping_csv(std::string_view text);

inline constexpr int kTrajectorySchemaVersion = 1;

nlohmann::json trajectory_json(std::span<const SweepSummary> rows);

struct CellTrajectory {
  SweepCell cell;
  std::vector<BandPoint> points;
};
std::vector<CellTrajectory> parse_trajectory_json(const nlohmann::json& j);

inline constexpr int kManifestSchemaVersion = 1;

struct RunManifest {
  std::string command;
  nlohmann::json config;  // every parameter, defaults included
  std::uint64_t seed = 0;
  std::string engine_version = DLMTRIAL_VERSION;
  std::optional<std::string> created_utc;
  std::vector<std::pair<std::string, std::string>> outputs;  // file name, sha256

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

/// Hashes `content`, writes it atomically into `dir`, and records it.
void write_output(const std::filesystem::path& dir, const std::string& name,
                  std::string_view content, RunManifest& manifest);

std::string utc_timestamp();

}  // namespace dlmtrial

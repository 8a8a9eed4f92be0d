#pragma once

#include <string>

#include "rhg/certificates.hpp"
#include "rhg/simulator.hpp"

namespace rhg {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Demand model for scheduled scenarios: a flat base level per agent, an
/// optional smooth daily double-peak overlay, and a multiplicative shock
/// window (unforeseen: previews always use the unshocked profile).
struct DemandModel {
  Vector base;              // per-agent base level
  double amplitude = 0.0;   // double-peak amplitude (0 = flat)
  double shock_factor = 1.0;
  std::size_t shock_start = 0;  // inclusive hour
  std::size_t shock_end = 0;    // exclusive hour
  std::vector<Vector> profile;  // optional explicit per-hour demands (e.g. CSV); overrides base/amplitude

  /// base profile value (no shock) for agent v at hour t
  double base_at(std::size_t t, std::size_t v) const;
  /// realized value including the shock
  double actual_at(std::size_t t, std::size_t v) const;
};

/// Battery-style scheduled scenario: per-agent scalar SoC dynamics, aggregative
/// energy prices, demand-coupled bounds and aggregate-load rows.
struct ScheduledScenario {
  GameSpec nominal;         // frozen nominal game (mean demand), certificates run on this
  DemandModel demand;
  Vector gamma1, gamma2, gamma3, x_ref;
  double u_min = 0.0, u_max = 0.0, l_max = 0.0, L_max = 0.0;
  std::size_t steps = 48;
  Vector x0;

  GameSpec game_at(std::size_t t) const;  // stage 0 actual, stages >= 1 base preview
};

struct Scenario {
  std::string name;
  GameSpec spec;
  Vector x0;
  std::size_t steps = 100;
  std::uint64_t seed = 0;
  double certificate_delta = 1e-6;
  int certificate_budget = 50000;
  std::optional<ScheduledScenario> schedule;  // present for battery-style scenarios
};

/// Builtins: illustrative_unstable, illustrative_stable, battery_charging.
bool is_builtin(const std::string& name);
std::vector<std::string> builtin_names();
Scenario load_builtin(const std::string& name, std::uint64_t seed_override = 0);

/// Scenario JSON round trip. Schema errors carry the offending field path.
Scenario load_scenario_file(const std::string& path);
Scenario parse_scenario_json(const std::string& text);
std::string scenario_to_json(const Scenario& sc);

/// Loads a path or a builtin name.
Scenario load_scenario(const std::string& path_or_builtin, std::uint64_t seed_override = 0);

/// Trajectory CSV: header t,x0..,u0..,residual,min_slack,V
void write_trajectory_csv(const std::string& path, const Trajectory& traj);
/// Region CSV: header A,W,feasible
void write_region_csv(const std::string& path, const RegionGrid& grid);

std::string certificate_to_json(const std::vector<CertificateResult>& results);

struct SimulationSummary {
  bool diverged = false;
  double final_norm = 0.0;
  double max_constraint_violation = 0.0;
  double distance_to_xs = -1.0;  // -1 when no steady state available
};
std::string summary_to_json(const SimulationSummary& s);

}  // namespace rhg

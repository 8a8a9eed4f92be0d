// rhg: receding-horizon game simulation, stability certification, and
// feasibility-region export.
//
// Subcommands: simulate, certify, region, steady-state.
// Exit codes: 0 success (a diverged simulation is a result, not an error),
//             1 usage or hard error, 2 certificate infeasible / budget hit.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "rhg/scenario.hpp"

namespace {

using namespace rhg;

SimulationSummary summarize(const Trajectory& traj, const SteadyState* steady) {
  SimulationSummary s;
  s.diverged = traj.diverged;
  s.final_norm = traj.states.empty() ? 0.0 : norm2(traj.states.back());
  for (double sl : traj.min_slacks)
    s.max_constraint_violation = std::max(s.max_constraint_violation, std::max(0.0, -sl));
  if (steady && !traj.states.empty()) {
    s.distance_to_xs = norm2(traj.states.back() - steady->x_s);
  }
  return s;
}

int cmd_simulate(const std::string& scenario, const std::string& out, std::uint64_t seed,
                 double tol) {
  Scenario sc = load_scenario(scenario, seed);
  SimulateOptions opts;
  opts.steps = sc.steps;
  opts.solver.tolerance = tol;

  Trajectory traj;
  std::unique_ptr<SteadyState> steady;
  if (sc.schedule) {
    const ScheduledScenario& sch = *sc.schedule;
    ParameterSchedule ps;
    ps.game_at = [&sch](std::size_t t) { return sch.game_at(t); };
    traj = simulate(sch.nominal, ps, sc.x0, opts);
    try {
      steady = std::make_unique<SteadyState>(solve_steady_state(sch.nominal, opts.solver));
    } catch (const std::exception& e) {
      std::cerr << "steady-state unavailable: " << e.what() << "\n";
    }
  } else {
    CondensedGame game = condense(sc.spec);
    traj = simulate(game, sc.x0, opts);
    try {
      steady = std::make_unique<SteadyState>(solve_steady_state(sc.spec, opts.solver));
    } catch (const std::exception& e) {
      std::cerr << "steady-state unavailable: " << e.what() << "\n";
    }
  }
  write_trajectory_csv(out, traj);
  SimulationSummary sum = summarize(traj, steady.get());
  std::ofstream js(out + ".summary.json");
  js << summary_to_json(sum) << "\n";
  std::cout << summary_to_json(sum) << "\n";
  if (!traj.abort_reason.empty()) {
    std::cerr << "aborted: " << traj.abort_reason << "\n";
    return 1;
  }
  return 0;
}

int cmd_certify(const std::string& scenario, const std::string& mode, const std::string& out,
                std::uint64_t seed, int budget, double delta) {
  Scenario sc = load_scenario(scenario, seed);
  CertificateConfig cfg;
  cfg.budget = budget > 0 ? budget : sc.certificate_budget;
  cfg.delta = delta > 0 ? delta : sc.certificate_delta;
  const GameSpec& spec = sc.schedule ? sc.schedule->nominal : sc.spec;

  std::vector<CertificateResult> results;
  if (mode == "global") {
    CondensedGame game = condense(spec);
    results.push_back(search_certificate(global_lmi_data(game), cfg));
  } else if (mode == "local") {
    if (spec.mode != GameMode::decoupled) {
      std::cerr << "certify --mode local requires a decoupled scenario\n";
      return 1;
    }
    CondensedGame game = condense(spec);
    results = search_local_certificates(game, cfg);
  } else if (mode == "scalar") {
    for (std::size_t v = 0; v < spec.n_agents(); ++v) {
      if (spec.dynamics[v].A.rows() != 1 || spec.dynamics[v].B.cols() != 1) {
        std::cerr << "certify --mode scalar requires 1-D agents (agent " << v << " is not)\n";
        return 1;
      }
    }
    if (spec.mode != GameMode::decoupled) {
      std::cerr << "certify --mode scalar requires a decoupled scenario\n";
      return 1;
    }
    CondensedGame game = condense(spec);
    for (std::size_t v = 0; v < spec.n_agents(); ++v) {
      ScalarCertificateInput in;
      in.A = spec.dynamics[v].A(0, 0);
      in.B = spec.dynamics[v].B(0, 0);
      in.W = spec.costs[v].W(0, 0);
      in.mu = game.mu;
      in.K = spec.horizon;
      ScalarCertificateResult r = scalar_certificate(in);
      CertificateResult cr;
      cr.feasible = r.feasible;
      cr.P = Matrix::identity(1);
      if (r.via_condition_i) cr.lambda1 = r.lambda;
      else cr.lambda2 = r.lambda;
      cr.diagnostic = "scalar condition " + std::string(r.via_condition_i ? "(i)" : "(ii)") +
                      ", minimized lhs = " + std::to_string(r.lhs);
      results.push_back(cr);
    }
  } else {
    std::cerr << "unknown certify mode '" << mode << "' (global|local|scalar)\n";
    return 1;
  }

  const std::string text = certificate_to_json(results);
  if (!out.empty()) {
    std::ofstream f(out);
    f << text << "\n";
  }
  std::cout << text << "\n";
  bool all_feasible = true;
  for (const auto& r : results) all_feasible = all_feasible && r.feasible;
  if (!all_feasible) {
    std::cerr << "certificate infeasible or budget-limited; sufficiency only - this does not "
                 "prove instability\n";
    return 2;
  }
  return 0;
}

int cmd_region(const std::string& preset, const std::string& out, double a_min, double a_max,
               double w_min, double w_max, double mu, double lambda1, double B, std::size_t K,
               std::size_t resolution) {
  RegionSpec spec;
  if (preset == "fig3b") {
    spec = fig3b_preset();
  } else if (!preset.empty()) {
    std::cerr << "unknown preset '" << preset << "' (available: fig3b)\n";
    return 1;
  } else {
    spec.A_min = a_min;
    spec.A_max = a_max;
    spec.W_min = w_min;
    spec.W_max = w_max;
    spec.mu = mu;
    spec.lambda1 = lambda1;
    spec.B = B;
    spec.K = K;
  }
  if (resolution > 0) spec.resolution = resolution;
  if (spec.resolution < 2) {
    std::cerr << "region: resolution must be at least 2\n";
    return 1;
  }
  RegionGrid grid = feasibility_region(spec);
  write_region_csv(out, grid);
  std::cout << "feasible fraction: " << grid.feasible_fraction() << "\n";
  return 0;
}

int cmd_steady_state(const std::string& scenario, const std::string& out, std::uint64_t seed,
                     double tol) {
  Scenario sc = load_scenario(scenario, seed);
  const GameSpec& spec = sc.schedule ? sc.schedule->nominal : sc.spec;
  SolverConfig cfg;
  cfg.tolerance = tol;
  SteadyState ss = solve_steady_state(spec, cfg);
  std::string text;
  {
    std::ostringstream os;
    os.precision(17);
    os << "{\n  \"u_s\": [";
    for (std::size_t i = 0; i < ss.u_s.size(); ++i) os << (i ? ", " : "") << ss.u_s[i];
    os << "],\n  \"x_s\": [";
    for (std::size_t i = 0; i < ss.x_s.size(); ++i) os << (i ? ", " : "") << ss.x_s[i];
    os << "],\n  \"residual\": " << ss.residual << ",\n  \"status\": \""
       << to_string(ss.status) << "\"\n}";
    text = os.str();
  }
  if (!out.empty()) {
    std::ofstream f(out);
    f << text << "\n";
  }
  std::cout << text << "\n";
  return ss.status == SolveStatus::converged ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"receding-horizon games: v-GNE simulation and LMI stability certificates"};
  app.require_subcommand(1);

  std::string scenario, out = "out.csv", mode = "global", preset;
  std::uint64_t seed = 0;
  double tol = 1e-8, delta = 0.0;
  int budget = 0;
  double a_min = 0.0, a_max = 0.99, w_min = 0.0, w_max = 1.0, mu = 1.0, lambda1 = 1.80, Bv = 1.0;
  std::size_t K = 10, resolution = 0;

  auto* sim = app.add_subcommand("simulate", "roll out the closed loop and export CSV");
  sim->add_option("--scenario", scenario, "scenario path or builtin name")->required();
  sim->add_option("--out", out, "trajectory CSV path");
  sim->add_option("--seed", seed, "re-draw seed for ranged builtins (0 = frozen default)");
  sim->add_option("--tol", tol, "solver tolerance");

  auto* cert = app.add_subcommand("certify", "search the LMI stability certificates");
  cert->add_option("--scenario", scenario, "scenario path or builtin name")->required();
  cert->add_option("--mode", mode, "global | local | scalar");
  cert->add_option("--out", out, "certificate JSON path");
  cert->add_option("--seed", seed, "re-draw seed for ranged builtins");
  cert->add_option("--budget", budget, "subgradient iteration budget");
  cert->add_option("--tol", delta, "delta for P >= delta I");

  auto* reg = app.add_subcommand("region", "export a scalar-condition feasibility grid");
  reg->add_option("--preset", preset, "named preset (fig3b)");
  reg->add_option("--out", out, "grid CSV path");
  reg->add_option("--a-min", a_min);
  reg->add_option("--a-max", a_max);
  reg->add_option("--w-min", w_min);
  reg->add_option("--w-max", w_max);
  reg->add_option("--mu", mu);
  reg->add_option("--lambda1", lambda1);
  reg->add_option("--B", Bv);
  reg->add_option("--K", K);
  reg->add_option("--resolution", resolution, "grid resolution per axis (>= 2)");

  auto* ss = app.add_subcommand("steady-state", "solve the steady-state game");
  ss->add_option("--scenario", scenario, "scenario path or builtin name")->required();
  ss->add_option("--out", out, "steady-state JSON path");
  ss->add_option("--seed", seed, "re-draw seed for ranged builtins");
  ss->add_option("--tol", tol, "solver tolerance");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(scenario, out, seed, tol);
    if (cert->parsed()) return cmd_certify(scenario, mode, out, seed, budget, delta);
    if (reg->parsed())
      return cmd_region(preset, out, a_min, a_max, w_min, w_max, mu, lambda1, Bv, K, resolution);
    if (ss->parsed()) return cmd_steady_state(scenario, out, seed, tol);
  } catch (const rhg::ScenarioError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

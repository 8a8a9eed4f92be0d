#pragma once

#include <functional>
#include <optional>

#include "rhg/solver.hpp"

namespace rhg {

/// Time-indexed closed-loop log.
struct Trajectory {
  std::vector<Vector> states;       // x_0 .. x_T
  std::vector<Vector> inputs;       // applied stage-0 inputs, one per step
  std::vector<double> residuals;    // solver residual per step
  std::vector<int> iterations;      // solver iterations per step
  std::vector<double> min_slacks;   // min box/coupling slack of the applied input
  std::vector<double> lyapunov;     // optional V(x_t); empty unless requested
  bool diverged = false;
  std::string abort_reason;         // set when a step error cut the run short
};

/// Per-step overrides applied before each solve. `demand_actual` is what the
/// plant realizes at stage 0; previews for stages >= 1 always use the base
/// profile (the shock is unforeseen).
struct ParameterSchedule {
  // returns the game to use at time t (stage-0 data reflecting measured
  // disturbances, later stages the nominal preview)
  std::function<GameSpec(std::size_t t)> game_at;
  // realized stage-0 coupling check data (C u <= c with actual parameters)
  std::function<void(std::size_t t, const Vector& u0, double& min_slack)> realized_slack;
};

struct SimulateOptions {
  std::size_t steps = 100;
  double divergence_threshold = 1e6;
  SolverConfig solver;
  std::optional<Matrix> lyapunov_P;  // record V(x) along the run when set
  std::optional<Vector> lyapunov_xbar;
  bool warm_start = true;
};

struct SteadyState {
  Vector u_s;
  Vector x_s;
  double residual = 0.0;
  SolveStatus status = SolveStatus::max_iter;
};

class StepError : public std::runtime_error {
 public:
  StepError(const std::string& what, VgneSolution best) : std::runtime_error(what), best_iterate(std::move(best)) {}
  VgneSolution best_iterate;
};

/// One RHG step: u_applied = Xi u*, x_next = A x + B u_applied.
struct StepResult {
  Vector u_applied;
  Vector x_next;
  VgneSolution solution;
};
StepResult rhg_step(const CondensedGame& game, const Vector& x, const SolverConfig& cfg = {},
                    const VgneSolution* warm = nullptr);

/// Rolls the closed loop for a fixed game.
Trajectory simulate(const CondensedGame& game, const Vector& x0, const SimulateOptions& opts);

/// Rolls the closed loop with per-step re-condensation from a schedule.
Trajectory simulate(const GameSpec& nominal, const ParameterSchedule& schedule, const Vector& x0,
                    const SimulateOptions& opts, const CondenseConfig& ccfg = {});

/// Warm start for the next step: inputs shifted by one stage (last stage
/// repeated), duals carried over unshifted.
VgneSolution shift_warm_start(const VgneSolution& sol, const CondensedGame& game);

/// Steady-state game: eliminates x = (I - A)^{-1} B u and solves the
/// single-stage VI; requires rho(A) < 1.
SteadyState solve_steady_state(const GameSpec& spec, const SolverConfig& cfg = {},
                               const CondenseConfig& ccfg = {});

struct ConvergenceMetrics {
  std::vector<double> distances;            // ||x_t - x_s|| per step
  double max_constraint_violation = 0.0;    // over box and coupling rows, all steps
};
ConvergenceMetrics convergence_metrics(const Trajectory& traj, const SteadyState& steady);

}  // namespace rhg

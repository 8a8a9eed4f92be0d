#include "rhg/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rhg {

namespace {

double applied_min_slack(const CondensedGame& game, const Vector& u_stacked, const Vector& u0) {
  double s = std::numeric_limits<double>::infinity();
  // stage-0 box slacks
  std::size_t r = 0;
  for (std::size_t v = 0; v < game.n_u.size(); ++v) {
    for (std::size_t i = 0; i < game.n_u[v]; ++i, ++r) {
      const std::size_t idx = game.offsets[v] + i;  // stage 0 of agent v
      if (game.Z.upper[idx] < std::numeric_limits<double>::infinity())
        s = std::min(s, game.Z.upper[idx] - u0[r]);
      if (game.Z.lower[idx] > -std::numeric_limits<double>::infinity())
        s = std::min(s, u0[r] - game.Z.lower[idx]);
    }
  }
  // coupling rows evaluated on the whole stacked solution
  for (std::size_t k = 0; k < game.Z.coupling_rows(); ++k) {
    double row = game.Z.c[k];
    for (std::size_t j = 0; j < game.Z.C.cols(); ++j) row -= game.Z.C(k, j) * u_stacked[j];
    s = std::min(s, row);
  }
  return s;
}

double lyap_value(const Matrix& P, const Vector& x, const Vector& xbar) {
  Vector d = x - xbar;
  return dot(d, P * d);
}

}  // namespace

StepResult rhg_step(const CondensedGame& game, const Vector& x, const SolverConfig& cfg,
                    const VgneSolution* warm) {
  StepResult out;
  out.solution = solve_vgne(game, x, cfg, warm);
  if (out.solution.status != SolveStatus::converged) {
    throw StepError("rhg_step: solver did not converge (residual " +
                        std::to_string(out.solution.residual) + ")",
                    out.solution);
  }
  out.u_applied = game.Xi * out.solution.u_star;
  out.x_next = game.A * x + game.B * out.u_applied;
  return out;
}

VgneSolution shift_warm_start(const VgneSolution& sol, const CondensedGame& game) {
  VgneSolution w = sol;
  for (std::size_t v = 0; v < game.n_u.size(); ++v) {
    const std::size_t nu = game.n_u[v];
    const std::size_t off = game.offsets[v];
    for (std::size_t k = 0; k + 1 < game.K; ++k)
      for (std::size_t i = 0; i < nu; ++i)
        w.u_star[off + k * nu + i] = sol.u_star[off + (k + 1) * nu + i];
    // repeat the last stage
    for (std::size_t i = 0; i < nu; ++i)
      w.u_star[off + (game.K - 1) * nu + i] = sol.u_star[off + (game.K - 1) * nu + i];
  }
  return w;
}

Trajectory simulate(const CondensedGame& game, const Vector& x0, const SimulateOptions& opts) {
  Trajectory traj;
  if (opts.steps < 1) throw DimensionError("simulate: steps must be >= 1");
  Vector x = x0;
  traj.states.push_back(x);
  const bool lyap = opts.lyapunov_P.has_value() && opts.lyapunov_xbar.has_value();
  if (lyap) traj.lyapunov.push_back(lyap_value(*opts.lyapunov_P, x, *opts.lyapunov_xbar));
  VgneSolution warm;
  bool have_warm = false;
  for (std::size_t t = 0; t < opts.steps; ++t) {
    StepResult step;
    try {
      step = rhg_step(game, x, opts.solver, (opts.warm_start && have_warm) ? &warm : nullptr);
    } catch (const StepError& e) {
      traj.abort_reason = e.what();
      break;
    }
    x = step.x_next;
    traj.states.push_back(x);
    traj.inputs.push_back(step.u_applied);
    traj.residuals.push_back(step.solution.residual);
    traj.iterations.push_back(step.solution.iterations);
    traj.min_slacks.push_back(applied_min_slack(game, step.solution.u_star, step.u_applied));
    if (lyap) traj.lyapunov.push_back(lyap_value(*opts.lyapunov_P, x, *opts.lyapunov_xbar));
    warm = shift_warm_start(step.solution, game);
    have_warm = true;
    if (norm2(x) > opts.divergence_threshold) {
      traj.diverged = true;
      break;
    }
  }
  return traj;
}

Trajectory simulate(const GameSpec& nominal, const ParameterSchedule& schedule, const Vector& x0,
                    const SimulateOptions& opts, const CondenseConfig& ccfg) {
  Trajectory traj;
  if (opts.steps < 1) throw DimensionError("simulate: steps must be >= 1");
  Vector x = x0;
  traj.states.push_back(x);
  const bool lyap = opts.lyapunov_P.has_value() && opts.lyapunov_xbar.has_value();
  if (lyap) traj.lyapunov.push_back(lyap_value(*opts.lyapunov_P, x, *opts.lyapunov_xbar));
  VgneSolution warm;
  bool have_warm = false;
  for (std::size_t t = 0; t < opts.steps; ++t) {
    CondensedGame game;
    StepResult step;
    try {
      GameSpec spec = schedule.game_at ? schedule.game_at(t) : nominal;
      game = condense(spec, ccfg);
      step = rhg_step(game, x, opts.solver, (opts.warm_start && have_warm) ? &warm : nullptr);
    } catch (const std::exception& e) {
      traj.abort_reason = e.what();
      break;
    }
    x = step.x_next;
    traj.states.push_back(x);
    traj.inputs.push_back(step.u_applied);
    traj.residuals.push_back(step.solution.residual);
    traj.iterations.push_back(step.solution.iterations);
    double slack = applied_min_slack(game, step.solution.u_star, step.u_applied);
    if (schedule.realized_slack) schedule.realized_slack(t, step.u_applied, slack);
    traj.min_slacks.push_back(slack);
    if (lyap) traj.lyapunov.push_back(lyap_value(*opts.lyapunov_P, x, *opts.lyapunov_xbar));
    warm = shift_warm_start(step.solution, game);
    have_warm = true;
    if (norm2(x) > opts.divergence_threshold) {
      traj.diverged = true;
      break;
    }
  }
  return traj;
}

SteadyState solve_steady_state(const GameSpec& spec, const SolverConfig& cfg,
                               const CondenseConfig& ccfg) {
  GlobalView gv = global_view(spec);
  const std::size_t M = spec.n_agents();
  const double rho = spectral_radius(gv.A, ccfg.numerics);
  if (rho >= 1.0) {
    throw SingularityError("solve_steady_state: rho(A) >= 1, I - A not safely invertible", rho);
  }
  const std::size_t nx = gv.n_x;
  Matrix ImA = Matrix::identity(nx) - gv.A;
  LuFactorization lu(ImA);
  if (lu.singular()) {
    throw SingularityError("solve_steady_state: I - A singular", std::numeric_limits<double>::infinity());
  }
  // T_v = (I - A)^{-1} B_v, columnwise
  std::vector<Matrix> T(M);
  std::size_t nu_total = 0;
  for (std::size_t v = 0; v < M; ++v) {
    const Matrix& Bv = gv.B[v];
    Matrix Tv(nx, Bv.cols());
    for (std::size_t j = 0; j < Bv.cols(); ++j) {
      Vector col(nx);
      for (std::size_t i = 0; i < nx; ++i) col[i] = Bv(i, j);
      Vector sol = lu.solve(col);
      for (std::size_t i = 0; i < nx; ++i) Tv(i, j) = sol[i];
    }
    T[v] = Tv;
    nu_total += Bv.cols();
  }

  Matrix Gs(nu_total, nu_total);
  Vector gs(nu_total, 0.0);
  std::vector<std::size_t> off(M + 1, 0);
  for (std::size_t v = 0; v < M; ++v) off[v + 1] = off[v] + gv.B[v].cols();
  for (std::size_t v = 0; v < M; ++v) {
    const Matrix TvT_W = T[v].transposed() * gv.W[v];
    for (std::size_t j = 0; j < M; ++j) {
      Matrix blk = 2.0 * (TvT_W * T[j]);
      const auto& cost = spec.costs[v];
      Matrix Q;
      if (v == j) {
        Q = cost.Q_self;
      } else {
        auto it = cost.Q_cross.find(j);
        Q = (it != cost.Q_cross.end()) ? it->second : Matrix(gv.B[v].cols(), gv.B[j].cols());
      }
      blk = blk + Q;
      Gs.set_block(off[v], off[j], blk);
    }
    Vector lin = T[v].transposed() * gv.w[v];
    const Vector& q = spec.costs[v].q;
    const std::size_t nuv = gv.B[v].cols();
    // per-stage q uses the stage-0 block as the nominal single-stage value
    for (std::size_t i = 0; i < nuv && i < q.size(); ++i) lin[i] += q[i];
    for (std::size_t i = 0; i < nuv; ++i) gs[off[v] + i] = lin[i];
  }

  // The steady-state pseudo-gradient is a different map from the horizon one;
  // it can lose strong monotonicity even when condense() succeeds. Uniqueness
  // is then not guaranteed, but any KKT point returned below is still verified
  // through its residual, so solve rather than reject.

  // single-stage constraint set
  StackedPolyhedron Zs;
  const double inf = std::numeric_limits<double>::infinity();
  Zs.lower.assign(nu_total, -inf);
  Zs.upper.assign(nu_total, inf);
  for (std::size_t v = 0; v < M && v < spec.constraints.boxes.size(); ++v) {
    if (spec.constraints.boxes[v].empty()) continue;
    const auto& b = spec.constraints.boxes[v][0];
    for (std::size_t i = 0; i < gv.B[v].cols(); ++i) {
      Zs.lower[off[v] + i] = b.lower[i];
      Zs.upper[off[v] + i] = b.upper[i];
    }
  }
  if (!spec.constraints.coupling.empty()) {
    Zs.C = spec.constraints.coupling[0].C;
    Zs.c = spec.constraints.coupling[0].c;
  } else {
    Zs.C = Matrix(0, nu_total);
  }

  VgneSolution sol = solve_affine_vi(Gs, gs, Zs, cfg);
  SteadyState out;
  out.u_s = sol.u_star;
  out.residual = sol.residual;
  out.status = sol.status;
  Vector Bu(nx, 0.0);
  for (std::size_t v = 0; v < M; ++v) {
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < gv.B[v].cols(); ++j) Bu[i] += gv.B[v](i, j) * sol.u_star[off[v] + j];
  }
  out.x_s = lu.solve(Bu);
  return out;
}

ConvergenceMetrics convergence_metrics(const Trajectory& traj, const SteadyState& steady) {
  ConvergenceMetrics m;
  for (const auto& x : traj.states) m.distances.push_back(norm2(x - steady.x_s));
  for (double s : traj.min_slacks) {
    m.max_constraint_violation = std::max(m.max_constraint_violation, std::max(0.0, -s));
  }
  return m;
}

}  // namespace rhg

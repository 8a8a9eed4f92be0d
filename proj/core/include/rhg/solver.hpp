#pragma once

#include <optional>

#include "rhg/game.hpp"

namespace rhg {

enum class SolveStatus { converged, max_iter, singular };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::singular: return "singular";
  }
  return "unknown";
}

struct VgneSolution {
  Vector u_star;
  Vector duals;      // one per box face and coupling row, >= 0
  double residual = 0.0;  // natural-map norm plus complementarity violation
  int iterations = 0;
  SolveStatus status = SolveStatus::max_iter;
};

struct SolverConfig {
  double tolerance = 1e-8;
  int max_iterations = 200;        // Newton
  int pg_max_iterations = 100000;  // projected gradient
  double smoothing_init = 1e-2;
  double smoothing_shrink = 0.2;
  double pg_step_scale = 0.9;      // step = scale * mu / ||G||_2^2
  double armijo_factor = 0.5;
  double armijo_slope = 1e-4;
  int armijo_max_backtracks = 30;
  double regularization = 1e-8;    // Newton fallback on singular systems
};

/// Unique v-GNE of  G u + g + F_x x + N_Z(u) ∋ 0  by semismooth Newton on the
/// smoothed Fischer-Burmeister KKT residual. Two-sided boxes are split into two
/// one-sided rows; each row carries one multiplier.
VgneSolution solve_vgne(const CondensedGame& game, const Vector& x, const SolverConfig& cfg = {},
                        const VgneSolution* warm = nullptr);

/// General affine VI over boxes + coupling rows:  F(u) = G u + q,  u in Z.
VgneSolution solve_affine_vi(const Matrix& G, const Vector& q, const StackedPolyhedron& Z,
                             const SolverConfig& cfg = {}, const VgneSolution* warm = nullptr);

/// phi(z) = (F_u + N_Z)^{-1}(z): the unique u with G u + g - z + N_Z(u) ∋ 0.
Vector eval_phi(const CondensedGame& game, const Vector& z, const SolverConfig& cfg = {});

/// Fixed-point iteration u <- Pi_Z(u - gamma F(u, x)); independent slow oracle.
/// Coupling rows are handled by a dual-ascent outer loop.
VgneSolution solve_projected_gradient(const CondensedGame& game, const Vector& x,
                                      const SolverConfig& cfg = {});
VgneSolution solve_projected_gradient_vi(const Matrix& G, const Vector& q,
                                         const StackedPolyhedron& Z, double mu,
                                         const SolverConfig& cfg = {});

}  // namespace rhg

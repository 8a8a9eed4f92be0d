#include "rhg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rhg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One-sided row view of the constraint set: box faces first, coupling rows after.
struct RowSet {
  // face rows are (sign, index, bound): sign * u_i <= bound
  struct Face {
    double sign;
    std::size_t index;
    double bound;
  };
  std::vector<Face> faces;
  const Matrix* C = nullptr;  // coupling rows
  const Vector* c = nullptr;

  std::size_t n_faces() const { return faces.size(); }
  std::size_t n_coupling() const { return c ? c->size() : 0; }
  std::size_t rows() const { return n_faces() + n_coupling(); }

  double slack(std::size_t r, const Vector& u) const {
    if (r < faces.size()) {
      const auto& f = faces[r];
      return f.bound - f.sign * u[f.index];
    }
    const std::size_t k = r - faces.size();
    double s = (*c)[k];
    for (std::size_t j = 0; j < C->cols(); ++j) s -= (*C)(k, j) * u[j];
    return s;
  }
  // y += coeff * a_r  where a_r is the r-th constraint row
  void add_row_to(std::size_t r, double coeff, Vector& y) const {
    if (r < faces.size()) {
      y[faces[r].index] += coeff * faces[r].sign;
      return;
    }
    const std::size_t k = r - faces.size();
    for (std::size_t j = 0; j < C->cols(); ++j) y[j] += coeff * (*C)(k, j);
  }
};

RowSet make_rows(const StackedPolyhedron& Z) {
  RowSet rs;
  for (std::size_t i = 0; i < Z.upper.size(); ++i) {
    if (Z.upper[i] < kInf) rs.faces.push_back({1.0, i, Z.upper[i]});
    if (Z.lower[i] > -kInf) rs.faces.push_back({-1.0, i, -Z.lower[i]});
  }
  if (Z.coupling_rows() > 0) {
    rs.C = &Z.C;
    rs.c = &Z.c;
  }
  return rs;
}

double fb(double a, double b, double sigma) {
  return a + b - std::sqrt(a * a + b * b + 2.0 * sigma * sigma);
}

Vector clamp_box(const Vector& v, const Vector& lo, const Vector& hi) {
  Vector out = v;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::min(std::max(out[i], lo[i]), hi[i]);
  return out;
}

/// Contract-bearing residual: natural map over the box (with coupling rows
/// dualized) plus complementarity violation on the coupling rows.
double true_residual(const Matrix& G, const Vector& q, const StackedPolyhedron& Z, const Vector& u,
                     const Vector& coupling_duals) {
  Vector F = G * u + q;
  if (Z.coupling_rows() > 0) {
    for (std::size_t k = 0; k < Z.coupling_rows(); ++k) {
      for (std::size_t j = 0; j < Z.C.cols(); ++j) F[j] += Z.C(k, j) * coupling_duals[k];
    }
  }
  Vector step(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) step[i] = u[i] - F[i];
  const Vector proj = clamp_box(step, Z.lower, Z.upper);
  double r = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - proj[i];
    r += d * d;
  }
  r = std::sqrt(r);
  if (Z.coupling_rows() > 0) {
    double comp = 0.0;
    for (std::size_t k = 0; k < Z.coupling_rows(); ++k) {
      double s = Z.c[k];
      for (std::size_t j = 0; j < Z.C.cols(); ++j) s -= Z.C(k, j) * u[j];
      const double m = std::min(coupling_duals[k], s);
      comp += m * m;
    }
    r += std::sqrt(comp);
  }
  return r;
}

}  // namespace

VgneSolution solve_affine_vi(const Matrix& G, const Vector& q, const StackedPolyhedron& Z,
                             const SolverConfig& cfg, const VgneSolution* warm) {
  const std::size_t n = q.size();
  RowSet rows = make_rows(Z);
  const std::size_t m = rows.rows();
  const std::size_t mc = rows.n_coupling();

  Vector u(n, 0.0);
  Vector lam(m, 0.0);
  if (warm && warm->u_star.size() == n) u = warm->u_star;
  if (warm && warm->duals.size() == m) lam = warm->duals;
  // start strictly inside the box where possible
  for (std::size_t i = 0; i < n; ++i) u[i] = std::min(std::max(u[i], Z.lower[i]), Z.upper[i]);

  auto residual_vec = [&](const Vector& uu, const Vector& ll, double sigma, Vector& R) {
    R.assign(n + m, 0.0);
    Vector F = G * uu + q;
    for (std::size_t r = 0; r < m; ++r) rows.add_row_to(r, ll[r], F);
    for (std::size_t i = 0; i < n; ++i) R[i] = F[i];
    for (std::size_t r = 0; r < m; ++r) R[n + r] = fb(ll[r], rows.slack(r, uu), sigma);
  };

  auto coupling_duals = [&](const Vector& ll) {
    Vector cd(mc);
    for (std::size_t k = 0; k < mc; ++k) cd[k] = ll[rows.n_faces() + k];
    return cd;
  };

  // stopping is scale-aware: on badly scaled instances (e.g. far-out states of
  // a diverging closed loop) an absolute residual below double precision is
  // unattainable
  const double tol = cfg.tolerance * std::max(1.0, norm_inf(q));
  double sigma = cfg.smoothing_init;
  Vector R;
  VgneSolution out;
  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    const double res_true = true_residual(G, q, Z, u, coupling_duals(lam));
    if (res_true <= tol) {
      out.status = SolveStatus::converged;
      out.residual = res_true;
      break;
    }
    residual_vec(u, lam, sigma, R);
    double rn = norm2(R);
    if (rn < sigma) {
      sigma = std::max(sigma * cfg.smoothing_shrink, 1e-14);
      residual_vec(u, lam, sigma, R);
      rn = norm2(R);
    }

    // Newton system on [u; lam]
    Matrix J(n + m, n + m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) J(i, j) = G(i, j);
    for (std::size_t r = 0; r < m; ++r) {
      Vector col(n, 0.0);
      rows.add_row_to(r, 1.0, col);
      for (std::size_t i = 0; i < n; ++i) J(i, n + r) = col[i];
      const double s = rows.slack(r, u);
      const double rt = std::sqrt(lam[r] * lam[r] + s * s + 2.0 * sigma * sigma);
      const double da = 1.0 - lam[r] / rt;
      const double db = 1.0 - s / rt;
      for (std::size_t i = 0; i < n; ++i) J(n + r, i) = -db * col[i];
      J(n + r, n + r) = da;
    }
    Vector rhs(n + m);
    for (std::size_t i = 0; i < n + m; ++i) rhs[i] = -R[i];

    Vector d;
    {
      LuFactorization lu(J);
      if (!lu.singular()) {
        d = lu.solve(rhs);
      } else {
        for (std::size_t i = 0; i < n + m; ++i) J(i, i) += cfg.regularization;
        LuFactorization lu2(J);
        if (lu2.singular()) {
          out.status = SolveStatus::singular;
          out.residual = res_true;
          break;
        }
        d = lu2.solve(rhs);
      }
    }

    // Armijo backtracking on the merit 0.5 ||R||^2
    const double m0 = 0.5 * rn * rn;
    double t = 1.0;
    Vector un(n), ln(m), Rn;
    for (int bt = 0; bt <= cfg.armijo_max_backtracks; ++bt) {
      for (std::size_t i = 0; i < n; ++i) un[i] = u[i] + t * d[i];
      for (std::size_t r = 0; r < m; ++r) ln[r] = lam[r] + t * d[n + r];
      residual_vec(un, ln, sigma, Rn);
      if (0.5 * dot(Rn, Rn) <= m0 * (1.0 - 2.0 * cfg.armijo_slope * t) + 1e-16) break;
      t *= cfg.armijo_factor;
    }
    u = un;
    lam = ln;
  }
  if (out.status == SolveStatus::max_iter) {
    out.residual = true_residual(G, q, Z, u, coupling_duals(lam));
    if (out.residual <= tol) out.status = SolveStatus::converged;
  }
  for (double& l : lam) l = std::max(l, 0.0);
  out.u_star = u;
  out.duals = lam;
  out.iterations = it;
  return out;
}

VgneSolution solve_vgne(const CondensedGame& game, const Vector& x, const SolverConfig& cfg,
                        const VgneSolution* warm) {
  if (x.size() != game.n_x) throw DimensionError("solve_vgne: state size mismatch");
  Vector q = game.g + game.Fx * x;
  return solve_affine_vi(game.G, q, game.Z, cfg, warm);
}

Vector eval_phi(const CondensedGame& game, const Vector& z, const SolverConfig& cfg) {
  if (z.size() != game.stacked_dim()) throw DimensionError("eval_phi: z size mismatch");
  Vector q = game.g - z;
  return solve_affine_vi(game.G, q, game.Z, cfg, nullptr).u_star;
}

VgneSolution solve_projected_gradient_vi(const Matrix& G, const Vector& q,
                                         const StackedPolyhedron& Z, double mu,
                                         const SolverConfig& cfg) {
  const std::size_t n = q.size();
  const double L = operator_norm2(G);
  const double gamma = cfg.pg_step_scale * mu / std::max(L * L, 1e-300);
  VgneSolution out;

  const std::size_t mc = Z.coupling_rows();
  Vector lam(mc, 0.0);
  Vector u = clamp_box(Vector(n, 0.0), Z.lower, Z.upper);

  // dual ascent outer loop over coupling rows (single pass when there are none)
  const double beta = (mc > 0) ? 0.5 * mu / std::max(1e-300, operator_norm2(Z.C) * operator_norm2(Z.C)) : 0.0;
  const int outer_max = (mc > 0) ? 2000 : 1;
  int total_it = 0;
  for (int outer = 0; outer < outer_max; ++outer) {
    Vector q_shift = q;
    for (std::size_t k = 0; k < mc; ++k)
      for (std::size_t j = 0; j < n; ++j) q_shift[j] += Z.C(k, j) * lam[k];
    for (int it = 0; it < cfg.pg_max_iterations; ++it) {
      ++total_it;
      Vector F = G * u + q_shift;
      Vector step(n);
      for (std::size_t i = 0; i < n; ++i) step[i] = u[i] - gamma * F[i];
      Vector un = clamp_box(step, Z.lower, Z.upper);
      double diff = 0.0;
      for (std::size_t i = 0; i < n; ++i) diff = std::max(diff, std::abs(un[i] - u[i]));
      u = un;
      if (diff <= 0.1 * gamma * cfg.tolerance) break;
      if (total_it >= cfg.pg_max_iterations) break;
      if (!std::isfinite(diff)) break;  // divergence guard: report, not silent garbage
    }
    if (mc == 0) break;
    double dual_move = 0.0;
    for (std::size_t k = 0; k < mc; ++k) {
      double s = Z.c[k];
      for (std::size_t j = 0; j < n; ++j) s -= Z.C(k, j) * u[j];
      const double ln = std::max(0.0, lam[k] - beta * s);
      dual_move = std::max(dual_move, std::abs(ln - lam[k]));
      lam[k] = ln;
    }
    if (dual_move <= 0.05 * beta * cfg.tolerance && total_it < cfg.pg_max_iterations) break;
    if (total_it >= cfg.pg_max_iterations) break;
  }
  out.u_star = u;
  out.duals = lam;  // coupling multipliers only; box faces are implicit in the projection
  out.iterations = total_it;
  out.residual = true_residual(G, q, Z, u, lam);
  const double tol = cfg.tolerance * std::max(1.0, norm_inf(q));
  out.status = (std::isfinite(out.residual) && out.residual <= 10.0 * tol)
                   ? SolveStatus::converged
                   : SolveStatus::max_iter;
  return out;
}

VgneSolution solve_projected_gradient(const CondensedGame& game, const Vector& x,
                                      const SolverConfig& cfg) {
  if (x.size() != game.n_x) throw DimensionError("solve_projected_gradient: state size mismatch");
  Vector q = game.g + game.Fx * x;
  return solve_projected_gradient_vi(game.G, q, game.Z, game.mu, cfg);
}

}  // namespace rhg

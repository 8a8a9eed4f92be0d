#include "rhg/game.hpp"

#include <cmath>
#include <iostream>
#include <limits>

namespace rhg {

namespace {

Matrix kron_identity(std::size_t K, const Matrix& q) {
  Matrix out(K * q.rows(), K * q.cols());
  for (std::size_t k = 0; k < K; ++k) out.set_block(k * q.rows(), k * q.cols(), q);
  return out;
}

}  // namespace

StageCost aggregative_cost(const Matrix& R, std::size_t agent, std::size_t n_agents) {
  if (R.rows() != R.cols()) throw DimensionError("aggregative_cost: R not square");
  StageCost c;
  c.Q_self = R + R.transposed();
  auto eig = sym_eigen(c.Q_self);
  if (eig.eigenvalues.front() <= 0.0) {
    throw MonotonicityError("aggregative_cost: R + R' not positive definite",
                            eig.eigenvalues.front());
  }
  for (std::size_t j = 0; j < n_agents; ++j) {
    if (j != agent) c.Q_cross[j] = R;
  }
  c.q = Vector(R.rows(), 0.0);
  return c;
}

GlobalView global_view(const GameSpec& spec, double w_symmetry_tol) {
  GlobalView gv;
  const std::size_t M = spec.n_agents();
  if (M == 0) throw DimensionError("global_view: no agents");
  if (spec.mode == GameMode::coupled) {
    gv.n_x = spec.dynamics[0].A.rows();
    gv.A = spec.dynamics[0].A;
    for (std::size_t v = 0; v < M; ++v) {
      if (spec.dynamics[v].A.rows() != gv.n_x || spec.dynamics[v].B.rows() != gv.n_x) {
        throw DimensionError("global_view: coupled mode requires shared state dimension");
      }
      gv.B.push_back(spec.dynamics[v].B);
      gv.state_offset.push_back(0);
    }
  } else {
    std::size_t off = 0;
    for (std::size_t v = 0; v < M; ++v) {
      const auto& d = spec.dynamics[v];
      if (d.A.rows() != d.A.cols() || d.B.rows() != d.A.rows()) {
        throw DimensionError("global_view: local dynamics dimensions inconsistent");
      }
      gv.state_offset.push_back(off);
      off += d.A.rows();
    }
    gv.n_x = off;
    gv.A = Matrix(gv.n_x, gv.n_x);
    for (std::size_t v = 0; v < M; ++v)
      gv.A.set_block(gv.state_offset[v], gv.state_offset[v], spec.dynamics[v].A);
    for (std::size_t v = 0; v < M; ++v) {
      Matrix Bg(gv.n_x, spec.dynamics[v].B.cols());
      Bg.set_block(gv.state_offset[v], 0, spec.dynamics[v].B);
      gv.B.push_back(Bg);
    }
  }
  for (std::size_t v = 0; v < M; ++v) {
    const auto& cost = spec.costs[v];
    Matrix Wg(gv.n_x, gv.n_x);
    Vector wg(gv.n_x, 0.0);
    const std::size_t nxv = cost.W.rows();
    if (spec.mode == GameMode::coupled) {
      if (nxv != gv.n_x) throw DimensionError("global_view: W size mismatch");
      Wg = cost.W;
      wg = cost.w;
    } else {
      if (nxv != spec.dynamics[v].A.rows()) throw DimensionError("global_view: W size mismatch");
      Wg.set_block(gv.state_offset[v], gv.state_offset[v], cost.W);
      for (std::size_t i = 0; i < nxv; ++i) wg[gv.state_offset[v] + i] = cost.w[i];
    }
    double asym = 0.0;
    for (std::size_t i = 0; i < Wg.rows(); ++i)
      for (std::size_t j = 0; j < Wg.cols(); ++j) asym = std::max(asym, std::abs(Wg(i, j) - Wg(j, i)));
    if (asym > w_symmetry_tol * std::max(1.0, frobenius_norm(Wg))) {
      // the analytic gradient assumes W = W'; symmetrizing changes no cost value
      std::cerr << "rhg: warning: W for agent " << v << " asymmetric by " << asym
                << "; using (W + W')/2\n";
    }
    gv.W.push_back(symmetric_part(Wg));
    gv.w.push_back(wg);
  }
  return gv;
}

std::pair<Matrix, std::vector<Matrix>> build_prediction_matrices(const Matrix& A,
                                                                 const std::vector<Matrix>& B,
                                                                 std::size_t K) {
  const std::size_t nx = A.rows();
  if (A.cols() != nx) throw DimensionError("build_prediction_matrices: A not square");
  if (K < 1) throw DimensionError("build_prediction_matrices: K must be >= 1");
  std::vector<Matrix> powers(K + 1);
  powers[0] = Matrix::identity(nx);
  for (std::size_t k = 1; k <= K; ++k) powers[k] = powers[k - 1] * A;

  Matrix At((K + 1) * nx, nx);
  for (std::size_t k = 0; k <= K; ++k) At.set_block(k * nx, 0, powers[k]);

  std::vector<Matrix> Bts;
  Bts.reserve(B.size());
  for (const auto& Bv : B) {
    if (Bv.rows() != nx) throw DimensionError("build_prediction_matrices: B row count mismatch");
    const std::size_t nu = Bv.cols();
    Matrix Bt((K + 1) * nx, K * nu);
    for (std::size_t i = 1; i <= K; ++i)
      for (std::size_t j = 0; j < i; ++j) Bt.set_block(i * nx, j * nu, powers[i - 1 - j] * Bv);
    Bts.push_back(std::move(Bt));
  }
  return {At, Bts};
}

StackedPolyhedron assemble_stacked_constraints(const GameSpec& spec) {
  const std::size_t M = spec.n_agents();
  const std::size_t K = spec.horizon;
  std::vector<std::size_t> nus(M);
  std::size_t nu_total = 0;
  for (std::size_t v = 0; v < M; ++v) {
    nus[v] = spec.dynamics[v].B.cols();
    nu_total += nus[v];
  }
  StackedPolyhedron Z;
  const double inf = std::numeric_limits<double>::infinity();
  Z.lower.assign(K * nu_total, -inf);
  Z.upper.assign(K * nu_total, inf);

  std::size_t off = 0;
  for (std::size_t v = 0; v < M; ++v) {
    if (v < spec.constraints.boxes.size() && !spec.constraints.boxes[v].empty()) {
      const auto& stages = spec.constraints.boxes[v];
      if (stages.size() != 1 && stages.size() != K) {
        throw DimensionError("constraints: box stage count must be 1 or K");
      }
      for (std::size_t k = 0; k < K; ++k) {
        const auto& b = stages[stages.size() == 1 ? 0 : k];
        if (b.lower.size() != nus[v] || b.upper.size() != nus[v]) {
          throw DimensionError("constraints: box size does not match agent input size");
        }
        for (std::size_t i = 0; i < nus[v]; ++i) {
          if (b.lower[i] > b.upper[i]) {
            throw InfeasibilityError("constraints: empty box (lower > upper)");
          }
          Z.lower[off + k * nus[v] + i] = b.lower[i];
          Z.upper[off + k * nus[v] + i] = b.upper[i];
        }
      }
    }
    off += K * nus[v];
  }

  // coupling rows act on the stage input col_v(u^v_k); lift into the stacked layout
  const auto& cpl = spec.constraints.coupling;
  if (!cpl.empty()) {
    if (cpl.size() != 1 && cpl.size() != K) {
      throw DimensionError("constraints: coupling stage count must be 1 or K");
    }
    std::size_t total_rows = 0;
    for (std::size_t k = 0; k < K; ++k) total_rows += cpl[cpl.size() == 1 ? 0 : k].c.size();
    Z.C = Matrix(total_rows, K * nu_total);
    Z.c.resize(total_rows);
    std::size_t r0 = 0;
    for (std::size_t k = 0; k < K; ++k) {
      const auto& stage = cpl[cpl.size() == 1 ? 0 : k];
      if (stage.C.rows() != stage.c.size() || stage.C.cols() != nu_total) {
        throw DimensionError("constraints: coupling row shape mismatch");
      }
      for (std::size_t r = 0; r < stage.C.rows(); ++r) {
        std::size_t col = 0, aoff = 0;
        for (std::size_t v = 0; v < M; ++v) {
          for (std::size_t i = 0; i < nus[v]; ++i, ++col)
            Z.C(r0 + r, aoff + k * nus[v] + i) = stage.C(r, col);
          aoff += K * nus[v];
        }
        Z.c[r0 + r] = stage.c[r];
      }
      r0 += stage.C.rows();
    }
  } else {
    Z.C = Matrix(0, K * nu_total);
  }

  // feasibility probe: each coupling row must be satisfiable over the box
  for (std::size_t k = 0; k < Z.coupling_rows(); ++k) {
    double row_min = 0.0;
    for (std::size_t j = 0; j < Z.C.cols(); ++j) {
      const double cj = Z.C(k, j);
      if (cj > 0.0) {
        row_min += cj * Z.lower[j];
      } else if (cj < 0.0) {
        row_min += cj * Z.upper[j];
      }
      if (!std::isfinite(row_min)) break;  // unbounded below: satisfiable
    }
    if (std::isfinite(row_min) && row_min > Z.c[k] + 1e-12) {
      throw InfeasibilityError("constraints: coupling row " + std::to_string(k) +
                               " cannot be met over the box bounds");
    }
  }
  return Z;
}

CondensedGame condense(const GameSpec& spec, const CondenseConfig& cfg) {
  const std::size_t M = spec.n_agents();
  if (M == 0) throw DimensionError("condense: no agents");
  if (spec.costs.size() != M) throw DimensionError("condense: costs/dynamics count mismatch");
  const std::size_t K = spec.horizon;
  if (K < 2) throw DimensionError("condense: horizon K must exceed 1");

  GlobalView gv = global_view(spec, cfg.w_symmetry_tol);
  for (std::size_t v = 0; v < M; ++v) {
    if (!gv.B[v].all_finite() || !gv.W[v].all_finite()) {
      throw DimensionError("condense: non-finite entries in game data");
    }
  }

  CondensedGame cg;
  cg.mode = spec.mode;
  cg.K = K;
  cg.n_x = gv.n_x;
  cg.A = gv.A;
  for (std::size_t v = 0; v < M; ++v) cg.n_u.push_back(gv.B[v].cols());
  cg.offsets.resize(M + 1, 0);
  for (std::size_t v = 0; v < M; ++v) cg.offsets[v + 1] = cg.offsets[v] + K * cg.n_u[v];
  const std::size_t N = cg.offsets[M];

  auto [At, Bts] = build_prediction_matrices(gv.A, gv.B, K);
  cg.A_tilde = At;
  cg.B_tilde = Bts;

  cg.G = Matrix(N, N);
  cg.g = Vector(N, 0.0);
  cg.Fx = Matrix(N, gv.n_x);

  for (std::size_t v = 0; v < M; ++v) {
    // W replicated over all K+1 predicted states; see module tests for the
    // rollout cost this gradient matches exactly.
    Matrix Wt = kron_identity(K + 1, gv.W[v]);
    Vector wt((K + 1) * gv.n_x);
    for (std::size_t k = 0; k <= K; ++k)
      for (std::size_t i = 0; i < gv.n_x; ++i) wt[k * gv.n_x + i] = gv.w[v][i];

    const Matrix BvT_W = Bts[v].transposed() * Wt;
    for (std::size_t j = 0; j < M; ++j) {
      Matrix blk = 2.0 * (BvT_W * Bts[j]);
      const auto& cost = spec.costs[v];
      Matrix Q;
      if (v == j) {
        Q = cost.Q_self;
      } else {
        auto it = cost.Q_cross.find(j);
        Q = (it != cost.Q_cross.end()) ? it->second : Matrix(cg.n_u[v], cg.n_u[j]);
      }
      if (Q.rows() != cg.n_u[v] || Q.cols() != cg.n_u[j]) {
        throw DimensionError("condense: input-cost block size mismatch");
      }
      blk = blk + kron_identity(K, Q);
      cg.G.set_block(cg.offsets[v], cg.offsets[j], blk);
    }
    Vector gv_lin = Bts[v].transposed() * wt;
    const Vector& q = spec.costs[v].q;
    if (q.size() == cg.n_u[v]) {
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t i = 0; i < cg.n_u[v]; ++i) gv_lin[k * cg.n_u[v] + i] += q[i];
    } else if (q.size() == K * cg.n_u[v]) {
      for (std::size_t i = 0; i < q.size(); ++i) gv_lin[i] += q[i];
    } else if (!q.empty()) {
      throw DimensionError("condense: q size must be n_u or K*n_u");
    }
    for (std::size_t i = 0; i < gv_lin.size(); ++i) cg.g[cg.offsets[v] + i] = gv_lin[i];
    cg.Fx.set_block(cg.offsets[v], 0, 2.0 * (BvT_W * At));
  }

  auto eig = sym_eigen(symmetric_part(cg.G), cfg.numerics);
  cg.mu = eig.eigenvalues.front();
  if (cfg.require_monotone && cg.mu <= cfg.mu_threshold) {
    throw MonotonicityError("condense: pseudo-gradient not strongly monotone (lambda_min = " +
                                std::to_string(cg.mu) + ")",
                            cg.mu);
  }

  cg.Z = assemble_stacked_constraints(spec);

  const std::size_t nu_total = cg.n_u_total();
  cg.Xi = Matrix(nu_total, N);
  std::size_t r = 0;
  for (std::size_t v = 0; v < M; ++v) {
    for (std::size_t i = 0; i < cg.n_u[v]; ++i) cg.Xi(r + i, cg.offsets[v] + i) = 1.0;
    r += cg.n_u[v];
  }
  cg.B = Matrix(gv.n_x, nu_total);
  std::size_t coff = 0;
  for (std::size_t v = 0; v < M; ++v) {
    cg.B.set_block(0, coff, gv.B[v]);
    coff += cg.n_u[v];
  }
  cg.Bhat = cg.B * cg.Xi;

  if (spec.mode == GameMode::decoupled) {
    for (std::size_t v = 0; v < M; ++v) {
      const auto& d = spec.dynamics[v];
      cg.A_local.push_back(d.A);
      auto [At_v, Bts_v] = build_prediction_matrices(d.A, {d.B}, K);
      Matrix Wl = kron_identity(K + 1, symmetric_part(spec.costs[v].W));
      cg.Fx_local.push_back(2.0 * (Bts_v[0].transposed() * (Wl * At_v)));
      Matrix Xi_v(d.B.cols(), K * d.B.cols());
      for (std::size_t i = 0; i < d.B.cols(); ++i) Xi_v(i, i) = 1.0;
      cg.Bhat_local.push_back(d.B * Xi_v);
    }
  }
  return cg;
}

}  // namespace rhg

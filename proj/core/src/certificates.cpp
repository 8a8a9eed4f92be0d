#include "rhg/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rhg {

namespace {

/// Cholesky attempt; true when m is positive definite.
bool cholesky_pd(Matrix m) {
  const std::size_t n = m.rows();
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= m(j, k) * m(j, k);
    if (d <= 0.0 || !std::isfinite(d)) return false;
    const double s = std::sqrt(d);
    m(j, j) = s;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = m(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= m(i, k) * m(j, k);
      m(i, j) = v / s;
    }
  }
  return true;
}

double horizon_sum(double A, std::size_t K) {
  double s = 0.0;
  double Ak = 1.0;
  for (std::size_t k = 0; k + 2 <= K; ++k) {  // k = 0 .. K-2
    const double term = (static_cast<double>(k) + 1.0) * Ak;
    s += term * term;
    Ak *= A;
  }
  return s;
}

/// Golden-section minimization of f over [lo, hi].
template <typename F>
double golden_min(F f, double lo, double hi, int iters = 80) {
  const double phi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

LmiData global_lmi_data(const CondensedGame& game) {
  return {game.A, game.Bhat, game.Fx, game.mu};
}

LmiData local_lmi_data(const CondensedGame& game, std::size_t agent) {
  if (game.mode != GameMode::decoupled) {
    throw DimensionError("local_lmi_data: game must be in decoupled mode");
  }
  return {game.A_local.at(agent), game.Bhat_local.at(agent), game.Fx_local.at(agent), game.mu};
}

Matrix assemble_lmi(const LmiData& d, const Matrix& P, double lambda1, double lambda2) {
  const std::size_t nx = d.A.rows();
  const std::size_t nu = d.Bhat.cols();
  if (P.rows() != nx || P.cols() != nx) throw DimensionError("assemble_lmi: P size mismatch");
  if (d.Fx.rows() != nu || d.Fx.cols() != nx) throw DimensionError("assemble_lmi: Fx size mismatch");
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda1 + lambda2 <= 0.0) {
    throw DimensionError("assemble_lmi: lambda1, lambda2 >= 0 with lambda1 + lambda2 > 0 required");
  }
  const Matrix Ps = symmetric_part(P);
  const Matrix AtP = d.A.transposed() * Ps;
  Matrix top = AtP * d.A - Ps + (lambda2 / (d.mu * d.mu)) * (d.Fx.transposed() * d.Fx);
  Matrix off = AtP * d.Bhat - (lambda1 / 2.0) * d.Fx.transposed();
  Matrix bot = d.Bhat.transposed() * Ps * d.Bhat;
  for (std::size_t i = 0; i < nu; ++i) bot(i, i) -= lambda1 * d.mu + lambda2;

  Matrix Q(nx + nu, nx + nu);
  Q.set_block(0, 0, top);
  Q.set_block(0, nx, off);
  Q.set_block(nx, 0, off.transposed());
  Q.set_block(nx, nx, bot);
  return Q;
}

CheckResult check_certificate(const LmiData& d, const Matrix& P, double lambda1, double lambda2,
                              double epsilon, const CertificateConfig& cfg) {
  CheckResult out;
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda1 + lambda2 <= 0.0) return out;
  const Matrix Q = assemble_lmi(d, P, lambda1, lambda2);
  auto eigQ = sym_eigen(Q, cfg.numerics);
  out.achieved_max_eig = eigQ.eigenvalues.back();
  auto eigP = sym_eigen(symmetric_part(P), cfg.numerics);
  if (eigP.eigenvalues.front() < cfg.delta * (1.0 - 1e-9)) return out;
  if (!(out.achieved_max_eig <= -epsilon)) return out;
  // independent sign confirmation: -(Q + eps I) must be positive definite
  Matrix neg = -1.0 * Q;
  for (std::size_t i = 0; i < neg.rows(); ++i) neg(i, i) -= epsilon * (1.0 - 1e-12);
  out.verified = cholesky_pd(neg);
  return out;
}

CertificateResult search_certificate(const LmiData& d, const CertificateConfig& cfg) {
  CertificateResult out;
  const std::size_t nx = d.A.rows();
  const std::size_t nu = d.Bhat.cols();

  const double rhoA = spectral_radius(d.A, cfg.numerics);
  if (rhoA >= 1.0) {
    out.diagnostic = "Assumption 1(i) violated: rho(A) = " + std::to_string(rhoA) + " >= 1";
    out.achieved_max_eig = std::numeric_limits<double>::infinity();
    return out;
  }
  if (d.mu <= 0.0) {
    out.diagnostic = "mu must be positive";
    out.achieved_max_eig = std::numeric_limits<double>::infinity();
    return out;
  }

  Matrix P = Matrix::identity(nx);
  double l1 = 1.0, l2 = 1.0;
  const double nFx = operator_norm2(d.Fx);
  const double c = (nFx > 1e-12) ? 1.0 / nFx : 1.0;

  double best_f = std::numeric_limits<double>::infinity();
  Matrix best_P = P;
  double best_l1 = l1, best_l2 = l2, best_gn = 0.0;

  int t = 0;
  for (t = 1; t <= cfg.budget; ++t) {
    const Matrix Q = assemble_lmi(d, P, l1, l2);
    auto eig = sym_eigen(Q, cfg.numerics);
    const double f = eig.eigenvalues.back();

    // subgradient of lambda_max at the leading eigenvector z = (zx; zu)
    Vector z(nx + nu);
    for (std::size_t i = 0; i < nx + nu; ++i) z[i] = eig.eigenvectors(i, nx + nu - 1);
    Vector zx(z.begin(), z.begin() + nx);
    Vector zu(z.begin() + nx, z.end());
    Vector y = d.A * zx;
    {
      Vector bu = d.Bhat * zu;
      for (std::size_t i = 0; i < nx; ++i) y[i] += bu[i];
    }
    Matrix gP(nx, nx);
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < nx; ++j) gP(i, j) = y[i] * y[j] - zx[i] * zx[j];
    const Vector Fxt_zu = d.Fx.transposed() * zu;
    const Vector Fx_zx = d.Fx * zx;
    const double zu2 = dot(zu, zu);
    const double gl1 = -dot(zx, Fxt_zu) - d.mu * zu2;
    const double gl2 = dot(Fx_zx, Fx_zx) / (d.mu * d.mu) - zu2;

    if (f < best_f) {
      best_f = f;
      best_P = P;
      best_l1 = l1;
      best_l2 = l2;
      best_gn = std::sqrt(frobenius_norm(gP) * frobenius_norm(gP) + gl1 * gl1 + gl2 * gl2);
    }
    if (best_f <= -cfg.stop_margin) break;

    const double step = c / std::sqrt(static_cast<double>(t));
    P = P - step * gP;
    l1 = std::max(0.0, l1 - step * gl1);
    l2 = std::max(0.0, l2 - step * gl2);

    // project P back to {symmetric, eigenvalues >= delta}
    auto eigP = sym_eigen(symmetric_part(P), cfg.numerics);
    Matrix V = eigP.eigenvectors;
    Matrix D(nx, nx);
    for (std::size_t i = 0; i < nx; ++i) D(i, i) = std::max(eigP.eigenvalues[i], cfg.delta);
    P = V * D * V.transposed();
    if (l1 + l2 <= 0.0) l2 = cfg.delta;
  }

  out.P = best_P;
  out.lambda1 = best_l1;
  out.lambda2 = best_l2;
  out.achieved_max_eig = best_f;
  out.subgradient_norm = best_gn;
  out.iterations = std::min(t, cfg.budget);
  if (best_f < 0.0) {
    const double eps = -best_f;
    auto chk = check_certificate(d, best_P, best_l1, best_l2, eps * (1.0 - 1e-9), cfg);
    if (chk.verified) {
      out.feasible = true;
      out.epsilon = eps;
      out.achieved_max_eig = chk.achieved_max_eig;
      return out;
    }
    out.diagnostic = "witness failed independent re-verification";
    return out;
  }
  out.diagnostic = (t >= cfg.budget) ? "budget exhausted" : "no strictly negative point found";
  return out;
}

std::vector<CertificateResult> search_local_certificates(const CondensedGame& game,
                                                         const CertificateConfig& cfg) {
  if (game.mode != GameMode::decoupled) {
    throw DimensionError("search_local_certificates: game must be in decoupled mode");
  }
  std::vector<CertificateResult> out;
  for (std::size_t v = 0; v < game.A_local.size(); ++v) {
    out.push_back(search_certificate(local_lmi_data(game, v), cfg));
  }
  return out;
}

ScalarCertificateResult scalar_certificate(const ScalarCertificateInput& in, int refine_grid) {
  if (in.mu <= 0.0) throw MonotonicityError("scalar_certificate: mu must be positive", in.mu);
  if (in.K < 2) throw DimensionError("scalar_certificate: K must be >= 2");
  ScalarCertificateResult out;
  const double A = in.A, B = in.B, W = in.W, mu = in.mu;
  const double S = horizon_sum(A, in.K);
  const double B2 = B * B;

  // condition (i): l1 in (B^2/mu, inf)
  {
    const double lo = B2 / mu;
    auto lhs = [&](double l1) {
      if (l1 * mu <= B2) return std::numeric_limits<double>::infinity();
      return mu * l1 * A * A / (mu * l1 - B2) + l1 * B2 * W * W / mu * S;
    };
    double best = std::numeric_limits<double>::infinity(), bestl = 0.0;
    // geometric bracket sweep, refined by golden section near the minimum
    for (int i = 0; i < refine_grid; ++i) {
      const double l1 = (lo + 1e-12) * std::pow(1e6, static_cast<double>(i) / (refine_grid - 1)) + lo * 1e-9;
      const double v = lhs(l1);
      if (v < best) {
        best = v;
        bestl = l1;
      }
    }
    const double gl = golden_min(lhs, std::max(lo * (1.0 + 1e-12), bestl / 8.0), bestl * 8.0 + 1.0);
    if (lhs(gl) < best) {
      best = lhs(gl);
      bestl = gl;
    }
    if (best < 1.0) {
      out.feasible = true;
      out.via_condition_i = true;
      out.lambda = bestl;
      out.lhs = best;
      return out;
    }
    out.lhs = best;
    out.lambda = bestl;
  }
  // condition (ii): l2 in (B^2, inf)
  if (B2 > 0.0) {
    auto lhs = [&](double l2) {
      if (l2 <= B2) return std::numeric_limits<double>::infinity();
      return A * A * l2 / (l2 - B2) + 4.0 * l2 * B2 * W * W / (mu * mu) * S;
    };
    double best = std::numeric_limits<double>::infinity(), bestl = 0.0;
    for (int i = 0; i < refine_grid; ++i) {
      const double l2 = (B2 + 1e-12) * std::pow(1e6, static_cast<double>(i) / (refine_grid - 1)) + B2 * 1e-9;
      const double v = lhs(l2);
      if (v < best) {
        best = v;
        bestl = l2;
      }
    }
    const double gl = golden_min(lhs, std::max(B2 * (1.0 + 1e-12), bestl / 8.0), bestl * 8.0 + 1.0);
    if (lhs(gl) < best) {
      best = lhs(gl);
      bestl = gl;
    }
    if (best < 1.0) {
      out.feasible = true;
      out.via_condition_i = false;
      out.lambda = bestl;
      out.lhs = best;
      return out;
    }
    if (best < out.lhs) {
      out.lhs = best;
      out.lambda = bestl;
    }
  }
  return out;
}

RegionSpec fig3b_preset() { return RegionSpec{}; }

RegionGrid feasibility_region(const RegionSpec& spec) {
  if (spec.resolution < 2) throw DimensionError("feasibility_region: resolution must be >= 2");
  RegionGrid grid;
  const std::size_t n = spec.resolution;
  grid.A_values.resize(n);
  grid.W_values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    grid.A_values[i] = spec.A_min + (spec.A_max - spec.A_min) * static_cast<double>(i) / (n - 1);
    grid.W_values[i] = spec.W_min + (spec.W_max - spec.W_min) * static_cast<double>(i) / (n - 1);
  }
  grid.feasible.assign(n, std::vector<int>(n, 0));
  const double B2 = spec.B * spec.B;
  for (std::size_t ia = 0; ia < n; ++ia) {
    const double A = grid.A_values[ia];
    const double S = horizon_sum(A, spec.K);
    for (std::size_t iw = 0; iw < n; ++iw) {
      const double W = grid.W_values[iw];
      double lhs = std::numeric_limits<double>::infinity();
      if (spec.mu * spec.lambda1 > B2) {
        lhs = spec.mu * spec.lambda1 * A * A / (spec.mu * spec.lambda1 - B2) +
              spec.lambda1 * B2 * W * W / spec.mu * S;
      }
      grid.feasible[ia][iw] = (lhs < 1.0) ? 1 : 0;
    }
  }
  return grid;
}

double RegionGrid::feasible_fraction() const {
  std::size_t total = 0, feas = 0;
  for (const auto& row : feasible) {
    total += row.size();
    for (int f : row) feas += static_cast<std::size_t>(f);
  }
  return total ? static_cast<double>(feas) / static_cast<double>(total) : 0.0;
}

std::vector<double> lyapunov_decrease(const std::vector<Vector>& states, const Matrix& P,
                                      const Vector& x_bar) {
  std::vector<double> dv;
  if (states.size() < 2) return dv;
  auto V = [&](const Vector& x) {
    Vector d = x - x_bar;
    return dot(d, P * d);
  };
  dv.reserve(states.size() - 1);
  double prev = V(states[0]);
  for (std::size_t t = 1; t < states.size(); ++t) {
    const double cur = V(states[t]);
    dv.push_back(cur - prev);
    prev = cur;
  }
  return dv;
}

}  // namespace rhg

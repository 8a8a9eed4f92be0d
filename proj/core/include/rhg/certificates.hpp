#pragma once

#include <optional>
#include <string>

#include "rhg/game.hpp"

namespace rhg {

struct CertificateResult {
  bool feasible = false;
  Matrix P;               // symmetric, lambda_min(P) >= delta when feasible
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double epsilon = 0.0;   // -achieved_max_eig when feasible
  double achieved_max_eig = 0.0;
  double subgradient_norm = 0.0;  // at the best point; separates "clearly infeasible" from "budget-limited"
  int iterations = 0;
  std::string diagnostic;
};

struct CertificateConfig {
  double delta = 1e-6;     // P >= delta I
  int budget = 50000;
  double stop_margin = 1e-6;  // stop once lambda_max <= -stop_margin
  NumericsConfig numerics;
};

/// Pieces of one stability LMI: global (A, B Xi, F_x, mu) or one agent's local data.
struct LmiData {
  Matrix A;
  Matrix Bhat;  // n_x x (K n_u)
  Matrix Fx;    // (K n_u) x n_x
  double mu = 0.0;
};

LmiData global_lmi_data(const CondensedGame& game);
LmiData local_lmi_data(const CondensedGame& game, std::size_t agent);

/// The 2x2-block symmetric certificate matrix
///   [ A'PA - P + (l2/mu^2) Fx'Fx ,  A'P Bhat - (l1/2) Fx' ]
///   [            *               ,  Bhat'P Bhat - (l1 mu + l2) I ]
/// Requires l1, l2 >= 0 and l1 + l2 > 0.
Matrix assemble_lmi(const LmiData& d, const Matrix& P, double lambda1, double lambda2);

/// Pure re-verification: lambda_max(assemble_lmi) <= -epsilon and lambda_min(P) >= delta.
/// The sign of lambda_max is confirmed through a Cholesky attempt on -(Q + eps I),
/// a separate code path from the Jacobi eigensolver used by the search.
struct CheckResult {
  bool verified = false;
  double achieved_max_eig = 0.0;
};
CheckResult check_certificate(const LmiData& d, const Matrix& P, double lambda1, double lambda2,
                              double epsilon, const CertificateConfig& cfg = {});

/// Convex spectral minimization of lambda_max(assemble_lmi) by projected
/// subgradient descent over (P, lambda1, lambda2). Every feasible answer is
/// re-verified with check_certificate before being returned.
CertificateResult search_certificate(const LmiData& d, const CertificateConfig& cfg = {});

/// Cor.-style per-agent searches on a decoupled game (shared mu).
std::vector<CertificateResult> search_local_certificates(const CondensedGame& game,
                                                         const CertificateConfig& cfg = {});

struct ScalarCertificateInput {
  double A = 0.0, B = 0.0, W = 0.0, mu = 0.0;
  std::size_t K = 2;
};

struct ScalarCertificateResult {
  bool feasible = false;
  bool via_condition_i = false;   // which closed-form condition fired
  double lambda = 0.0;            // the witness multiplier
  double lhs = 0.0;               // minimized left-hand side
};

/// Closed-form 1-D conditions: feasible when either
///  (i)  mu l1 A^2/(mu l1 - B^2) + l1 B^2 W^2/mu * S < 1  for some l1 > B^2/mu, or
///  (ii) A^2 l2/(l2 - B^2)      + 4 l2 B^2 W^2/mu^2 * S < 1 for some l2 > B^2,
/// with S = sum_{k=0}^{K-2} ((k+1) A^k)^2, each minimized by golden section.
ScalarCertificateResult scalar_certificate(const ScalarCertificateInput& in, int refine_grid = 64);

/// Grid of condition-(i) feasibility flags over (A, W) at fixed (mu, lambda1, B, K).
struct RegionSpec {
  double A_min = 0.0, A_max = 0.99;
  double W_min = 0.0, W_max = 1.0;
  double mu = 1.0;
  double lambda1 = 1.80;
  double B = 1.0;
  std::size_t K = 10;
  std::size_t resolution = 40;  // per axis, >= 2
};
RegionSpec fig3b_preset();

struct RegionGrid {
  std::vector<double> A_values, W_values;
  std::vector<std::vector<int>> feasible;  // [A index][W index]
  double feasible_fraction() const;
};
RegionGrid feasibility_region(const RegionSpec& spec);

/// Per-step V(x_{t+1}) - V(x_t) with V(x) = (x - x_bar)' P (x - x_bar).
std::vector<double> lyapunov_decrease(const std::vector<Vector>& states, const Matrix& P,
                                      const Vector& x_bar);

}  // namespace rhg

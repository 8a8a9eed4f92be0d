#pragma once

#include <cstdint>
#include <stdexcept>

#include "rhg/matrix.hpp"

namespace rhg {

class SingularityError : public std::runtime_error {
 public:
  SingularityError(const std::string& what, double cond) : std::runtime_error(what), condition(cond) {}
  double condition;
};

struct EigenDecomposition {
  Vector eigenvalues;   // ascending
  Matrix eigenvectors;  // orthonormal, columns paired with eigenvalues
};

struct NumericsConfig {
  double symmetry_rtol = 1e-12;       // input symmetry gate for sym_eigen
  double jacobi_rtol = 1e-12;         // off-diagonal Frobenius threshold, relative to ||S||_F
  int jacobi_max_sweeps = 64;
  double power_tol = 1e-9;            // spectral radius convergence
  int power_max_iter = 10000;
  int power_restarts = 10;
  double condition_limit = 1e12;      // solve_linear gate
};

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Deterministic up to the sign of eigenvectors.
EigenDecomposition sym_eigen(const Matrix& s, const NumericsConfig& cfg = {});

/// Largest |eigenvalue| of a general square matrix via restarted power iteration.
/// Two-step Rayleigh ratios keep complex-pair dominant modes convergent.
double spectral_radius(const Matrix& a, const NumericsConfig& cfg = {});

/// LU factorization with partial pivoting, reusable for multiple right-hand sides.
class LuFactorization {
 public:
  explicit LuFactorization(const Matrix& a);
  Vector solve(const Vector& b) const;
  Vector solve_transposed(const Vector& b) const;
  double condition_estimate_1norm() const;  // ||A||_1 * est ||A^-1||_1
  bool singular() const { return singular_; }

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
  double norm1_ = 0.0;
  bool singular_ = false;
};

/// x with ||A x - b|| <= 1e-10 (||A|| ||x|| + ||b||); throws SingularityError when the
/// condition estimate exceeds cfg.condition_limit.
Vector solve_linear(const Matrix& a, const Vector& b, const NumericsConfig& cfg = {});

/// Largest singular value via power iteration on A'A.
double operator_norm2(const Matrix& a);

/// Deterministic 64-bit mixer; the project's only randomness source.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  /// uniform in [0, 1)
  double next_double() { return static_cast<double>(next_u64()) * 0x1.0p-64; }
  /// uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }
  /// standard normal (Box-Muller, one value per call pair kept simple)
  double normal() {
    double u1 = next_double(), u2 = next_double();
    while (u1 <= 1e-300) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace rhg

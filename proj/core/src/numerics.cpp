#include "rhg/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rhg {

namespace {

double offdiag_frobenius(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace

EigenDecomposition sym_eigen(const Matrix& s_in, const NumericsConfig& cfg) {
  const std::size_t n = s_in.rows();
  if (n != s_in.cols()) throw DimensionError("sym_eigen: matrix not square");
  const double scale = frobenius_norm(s_in);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(s_in(i, j) - s_in(j, i)) > cfg.symmetry_rtol * std::max(1.0, scale)) {
        throw DimensionError("sym_eigen: matrix not symmetric within tolerance");
      }

  Matrix a = symmetric_part(s_in);
  Matrix v = Matrix::identity(n);
  const double thresh = cfg.jacobi_rtol * std::max(scale, 1e-300);

  for (int sweep = 0; sweep < cfg.jacobi_max_sweeps; ++sweep) {
    if (offdiag_frobenius(a) <= thresh) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double app = a(p, p), aqq = a(q, q);
        const double theta = 0.5 * (aqq - app) / apq;
        double t = 1.0 / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const double tau = s / (1.0 + c);
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          if (k != p && k != q) {
            const double akp = a(k, p), akq = a(k, q);
            a(k, p) = akp - s * (akq + tau * akp);
            a(p, k) = a(k, p);
            a(k, q) = akq + s * (akp - tau * akq);
            a(q, k) = a(k, q);
          }
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = vkp - s * (vkq + tau * vkp);
          v(k, q) = vkq + s * (vkp - tau * vkq);
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
  EigenDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.eigenvalues[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, j) = v(i, order[j]);
  }
  return out;
}

double spectral_radius(const Matrix& a, const NumericsConfig& cfg) {
  const std::size_t n = a.rows();
  if (n != a.cols()) throw DimensionError("spectral_radius: matrix not square");
  if (n == 0) return 0.0;

  double best = 0.0;
  SplitMix64 rng(0x5eed5eed5eedull);
  for (int restart = 0; restart < cfg.power_restarts; ++restart) {
    Vector x(n);
    for (double& xi : x) xi = rng.uniform(-1.0, 1.0);
    double nx = norm2(x);
    if (nx == 0.0) continue;
    for (double& xi : x) xi /= nx;

    double prev_ratio = 0.0, prev_est = 0.0;
    double est = 0.0;
    for (int it = 0; it < cfg.power_max_iter; ++it) {
      Vector y = a * x;
      const double ny = norm2(y);
      if (ny <= 1e-300) {  // hit the kernel; restart handles it
        est = 0.0;
        break;
      }
      // geometric mean of consecutive growth factors handles complex pairs
      const double ratio = ny;
      est = (it == 0) ? ratio : std::sqrt(ratio * prev_ratio);
      for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / ny;
      if (it > 2 && std::abs(est - prev_est) <= cfg.power_tol * std::max(1.0, est)) break;
      prev_ratio = ratio;
      prev_est = est;
    }
    best = std::max(best, est);
  }
  return best;
}

LuFactorization::LuFactorization(const Matrix& a) : lu_(a), perm_(a.rows()) {
  const std::size_t n = a.rows();
  if (n != a.cols()) throw DimensionError("lu: matrix not square");
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::abs(a(i, j));
    norm1_ = std::max(norm1_, s);
  }
  std::iota(perm_.begin(), perm_.end(), std::size_t{0});
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double pmax = std::abs(lu_(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(lu_(i, k)) > pmax) {
        pmax = std::abs(lu_(i, k));
        piv = i;
      }
    }
    if (pmax <= 1e-300) {
      singular_ = true;
      return;
    }
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(piv, j));
      std::swap(perm_[k], perm_[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      lu_(i, k) /= lu_(k, k);
      const double lik = lu_(i, k);
      if (lik == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= lik * lu_(k, j);
    }
  }
}

Vector LuFactorization::solve(const Vector& b) const {
  const std::size_t n = lu_.rows();
  if (b.size() != n) throw DimensionError("lu solve: rhs size mismatch");
  if (singular_) throw SingularityError("lu solve: singular matrix", std::numeric_limits<double>::infinity());
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
  for (std::size_t i = 1; i < n; ++i) {
    double s = x[i];
    for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * x[j];
    x[i] = s;
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= lu_(ii, j) * x[j];
    x[ii] = s / lu_(ii, ii);
  }
  return x;
}

Vector LuFactorization::solve_transposed(const Vector& b) const {
  const std::size_t n = lu_.rows();
  if (b.size() != n) throw DimensionError("lu solve_transposed: rhs size mismatch");
  if (singular_) throw SingularityError("lu solve: singular matrix", std::numeric_limits<double>::infinity());
  // A^T = (P^T L U)^T = U^T L^T P
  Vector x = b;
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    for (std::size_t j = 0; j < i; ++j) s -= lu_(j, i) * x[j];
    x[i] = s / lu_(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= lu_(j, ii) * x[j];
    x[ii] = s;
  }
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) y[perm_[i]] = x[i];
  return y;
}

double LuFactorization::condition_estimate_1norm() const {
  if (singular_) return std::numeric_limits<double>::infinity();
  const std::size_t n = lu_.rows();
  // 1-norm power method on A^{-1}: Hager-style forward/transpose sweeps
  Vector x(n, 1.0 / static_cast<double>(n));
  double est = 0.0;
  for (int it = 0; it < 5; ++it) {
    Vector y = solve(x);
    double ny = 0.0;
    for (double v : y) ny += std::abs(v);
    est = std::max(est, ny);
    Vector z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = (y[i] >= 0.0) ? 1.0 : -1.0;
    Vector w = solve_transposed(z);
    std::size_t jmax = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(w[i]) > std::abs(w[jmax])) jmax = i;
    if (std::abs(w[jmax]) <= dot(w, x) + 1e-300) break;
    std::fill(x.begin(), x.end(), 0.0);
    x[jmax] = 1.0;
  }
  return norm1_ * est;
}

double operator_norm2(const Matrix& a) {
  const std::size_t n = a.cols();
  if (n == 0 || a.rows() == 0) return 0.0;
  SplitMix64 rng(0x9072ull);
  Vector x(n);
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  const double nx = norm2(x);
  if (nx == 0.0) return 0.0;
  for (double& v : x) v /= nx;
  const Matrix at = a.transposed();
  double est = 0.0;
  for (int it = 0; it < 300; ++it) {
    Vector y = at * (a * x);
    const double ny = norm2(y);
    if (ny <= 1e-300) return 0.0;
    const double next = std::sqrt(ny);
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / ny;
    if (it > 2 && std::abs(next - est) <= 1e-10 * std::max(1.0, next)) return next;
    est = next;
  }
  return est;
}

Vector solve_linear(const Matrix& a, const Vector& b, const NumericsConfig& cfg) {
  LuFactorization lu(a);
  if (lu.singular()) throw SingularityError("solve_linear: singular matrix", std::numeric_limits<double>::infinity());
  const double cond = lu.condition_estimate_1norm();
  if (cond > cfg.condition_limit) {
    throw SingularityError("solve_linear: condition estimate " + std::to_string(cond) +
                               " exceeds limit",
                           cond);
  }
  return lu.solve(b);
}

}  // namespace rhg

#include "eos/linalg.hpp"

#include <algorithm>
#include <numeric>

#include "eos/errors.hpp"

namespace eos {

namespace {
double off_diagonal_mass(const Matrix& A) {
  double s = 0.0;
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < A.cols(); ++c)
      if (r != c) s += A(r, c) * A(r, c);
  return std::sqrt(s);
}
}  // namespace

SymmetricEigen symmetric_eigen(const Matrix& P, double rel_tol, int max_sweeps) {
  const std::size_t n = P.rows();
  if (n == 0 || n != P.cols()) throw ContractViolation("symmetric_eigen: matrix must be square");
  if (P.max_asymmetry() > 1e-12 * (1.0 + P.frobenius()))
    throw ContractViolation("symmetric_eigen: matrix is not symmetric");

  Matrix A = P;
  Matrix V = Matrix::identity(n);
  const double target = rel_tol * P.frobenius();

  for (int sweep = 0; sweep < max_sweeps && off_diagonal_mass(A) > target; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = A(p, q);
        if (apq == 0.0) continue;
        // Rotation angle zeroing A(p, q), chosen with |t| <= 1 for stability.
        const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return A(a, a) > A(b, b); });
  SymmetricEigen out{Vector(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = A(order[k], order[k]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = V(r, order[k]);
  }
  return out;
}

}  // namespace eos

#include "eos/theory.hpp"

#include <cmath>

#include "eos/errors.hpp"

namespace eos {

double QuadraticSpectrum::reconstruction_error(const Matrix& P) const {
  const std::size_t n = eigenvalues.size();
  Matrix R(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        s += eigenvectors(r, k) * eigenvalues[k] * eigenvectors(c, k);
      R(r, c) = s - P(r, c);
    }
  return R.frobenius();
}

double QuadraticSpectrum::orthonormality_error() const {
  Matrix G = eigenvectors.transposed() * eigenvectors;
  for (std::size_t i = 0; i < G.rows(); ++i) G(i, i) -= 1.0;
  return G.frobenius();
}

QuadraticSpectrum quadratic_spectrum(const Matrix& P) {
  if (P.rows() != P.cols() || P.rows() == 0) throw ContractViolation("P must be square");
  if (P.max_asymmetry() > 1e-12) throw ContractViolation("P is not symmetric");
  SymmetricEigen e = symmetric_eigen(P);
  return {std::move(e.values), std::move(e.vectors)};
}

bool quadratic_divergence_oracle(const Matrix& P, double eta) {
  if (!(eta > 0.0)) throw ContractViolation("eta must be positive");
  const QuadraticSpectrum s = quadratic_spectrum(P);
  for (double lambda : s.eigenvalues)
    if (std::fabs(1.0 - eta * lambda) > 1.0 + 1e-12) return true;
  return false;
}

Vector EigenmodeTrace::iterate() const {
  const std::size_t n = eigenvalues.size();
  Vector theta(n, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t r = 0; r < n; ++r) theta[r] += coefficients[k] * eigenvectors(r, k);
  return theta;
}

EigenmodeTrace eigenmode_trace(const Matrix& P, std::span<const double> theta0, double eta,
                               long t) {
  if (theta0.size() != P.rows()) throw ContractViolation("theta0 has wrong dimension");
  if (t < 0) throw ContractViolation("t must be >= 0");
  QuadraticSpectrum s = quadratic_spectrum(P);
  EigenmodeTrace out{s.eigenvalues, s.eigenvectors, Vector(s.eigenvalues.size())};
  for (std::size_t k = 0; k < out.eigenvalues.size(); ++k) {
    double proj = 0.0;
    for (std::size_t r = 0; r < theta0.size(); ++r) proj += s.eigenvectors(r, k) * theta0[r];
    out.coefficients[k] = std::pow(1.0 - eta * out.eigenvalues[k], static_cast<double>(t)) * proj;
  }
  return out;
}

double block_norm(std::span<const double> theta, std::span<const std::size_t> zeta) {
  double s = 0.0;
  for (std::size_t i : zeta) s += theta[i] * theta[i];
  return std::sqrt(s);
}

namespace {
void check_block(const CostFunction& cost, std::span<const double> theta,
                 std::span<const std::size_t> zeta) {
  if (theta.size() != cost.dimension()) throw ContractViolation("theta has wrong dimension");
  if (zeta.empty()) throw ContractViolation("homogeneous block is empty");
  for (std::size_t i : zeta)
    if (i >= theta.size()) throw ContractViolation("homogeneous index out of range");
  if (!(block_norm(theta, zeta) > 0.0)) throw ContractViolation("zeta block is zero");
}
}  // namespace

double homogeneity_orthogonality(const CostFunction& cost, std::span<const double> theta,
                                 std::span<const std::size_t> zeta) {
  check_block(cost, theta, zeta);
  const Vector g = data_fit_part(cost).gradient(theta);
  double s = 0.0;
  for (std::size_t i : zeta) s += g[i] * theta[i];
  return s;
}

double homogeneity_orthogonality(const CostFunction& cost, std::span<const double> theta) {
  const std::vector<std::size_t> zeta = cost.homogeneous_indices();
  return homogeneity_orthogonality(cost, theta, zeta);
}

double block_gradient_norm(const CostFunction& cost, std::span<const double> theta,
                           std::span<const std::size_t> zeta) {
  check_block(cost, theta, zeta);
  const Vector g = cost.gradient(theta);
  return block_norm(g, zeta);
}

RpDir rp_dir_closed_forms(const Matrix& P, std::span<const double> theta, double eta,
                          std::span<const double> q) {
  if (P.max_asymmetry() > 1e-12) throw ContractViolation("P is not symmetric");
  if (theta.size() != P.rows() || (!q.empty() && q.size() != P.rows()))
    throw ContractViolation("dimension mismatch");
  Vector g = P.apply(theta);
  for (std::size_t i = 0; i < q.size(); ++i) g[i] += q[i];
  const double gg = dot(g, g);
  if (!(gg > 0.0)) throw UndefinedMetric("closed forms undefined at a stationary point");
  RpDir out;
  out.dir = dot(g, P.apply(g)) / gg;
  out.rp = -1.0 + 0.5 * eta * out.dir;
  return out;
}

}  // namespace eos

#pragma once

#include <span>
#include <vector>

#include "eos/cost.hpp"
#include "eos/linalg.hpp"

namespace eos {

/// Eigenpairs (q_i, lambda_i) of a symmetric P, descending.
struct QuadraticSpectrum {
  Vector eigenvalues;
  Matrix eigenvectors;  // column i pairs with eigenvalues[i]

  /// |Q diag(lambda) Q' - P|_F
  double reconstruction_error(const Matrix& P) const;
  /// |Q'Q - I|_F
  double orthonormality_error() const;
};

QuadraticSpectrum quadratic_spectrum(const Matrix& P);

/// True iff some eigenvalue has |1 - eta lambda| > 1, i.e. GD on
/// 1/2 theta' P theta + q' theta + r diverges from a generic start. The
/// boundary |1 - eta lambda| = 1 (up to 1e-12) counts as non-divergent.
bool quadratic_divergence_oracle(const Matrix& P, double eta);

struct EigenmodeTrace {
  Vector eigenvalues;
  Matrix eigenvectors;
  /// (1 - eta lambda_i)^t <q_i, theta_0>
  Vector coefficients;

  /// sum_i coefficients[i] q_i, the closed-form theta_t.
  Vector iterate() const;
};

/// Closed-form GD iterate of f = 1/2 theta' P theta after t steps, per eigenmode.
EigenmodeTrace eigenmode_trace(const Matrix& P, std::span<const double> theta0, double eta, long t);

/// <grad_zeta f(theta), zeta> of the data-fit part of `cost` (weight decay
/// stripped). Zero for a positively homogeneous block.
double homogeneity_orthogonality(const CostFunction& cost, std::span<const double> theta,
                                 std::span<const std::size_t> zeta);
double homogeneity_orthogonality(const CostFunction& cost, std::span<const double> theta);

/// |grad_zeta l(theta)| of the full (decayed) cost restricted to the block.
double block_gradient_norm(const CostFunction& cost, std::span<const double> theta,
                           std::span<const std::size_t> zeta);
double block_norm(std::span<const double> theta, std::span<const std::size_t> zeta);

struct RpDir {
  double rp = 0.0;
  double dir = 0.0;
};

/// RP and Dir_{eta g} on a quadratic with g = P theta + q:
/// dir = g'Pg / |g|^2, rp = -1 + (eta/2) dir.
RpDir rp_dir_closed_forms(const Matrix& P, std::span<const double> theta, double eta,
                          std::span<const double> q = {});

}  // namespace eos

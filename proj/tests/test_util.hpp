#pragma once

#include <complex>
#include <random>

#include <Eigen/Dense>

#include "fourphoton/polstate.hpp"

namespace testutil {

using fourphoton::Complex;
using fourphoton::Matrix2c;
using fourphoton::Matrix4c;

inline Complex gaussian_complex(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return {n(rng), n(rng)};
}

/// Haar-distributed 2x2 unitary via QR of a Ginibre matrix.
inline Matrix2c random_unitary(std::mt19937_64& rng) {
  Matrix2c g;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) g(i, j) = gaussian_complex(rng);
  Eigen::HouseholderQR<Matrix2c> qr(g);
  Matrix2c q = qr.householderQ();
  Matrix2c r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < 2; ++i) q.col(i) *= r(i, i) / std::abs(r(i, i));
  return q;
}

/// Random full-rank density matrix (Ginibre ensemble).
inline fourphoton::PolarizationState random_state(std::mt19937_64& rng, int rank = 4) {
  Eigen::Matrix<Complex, 4, Eigen::Dynamic> g(4, rank);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < rank; ++j) g(i, j) = gaussian_complex(rng);
  Matrix4c rho = g * g.adjoint();
  rho /= rho.trace();
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return fourphoton::PolarizationState::from_matrix(rho);
}

/// Eigenvalues via the general (non-Hermitian) complex solver: an independent
/// route from the library's self-adjoint decomposition.
inline Eigen::Vector4d general_eigenvalues(const Matrix4c& m) {
  Eigen::ComplexEigenSolver<Matrix4c> solver(m, false);
  Eigen::Vector4d out;
  for (int i = 0; i < 4; ++i) out(i) = solver.eigenvalues()(i).real();
  return out;
}

/// Partial transpose over photon 2 written from the definition
/// <a b|rho^T2|a' b'> = <a b'|rho|a' b>.
inline Matrix4c pt_oracle(const Matrix4c& rho) {
  Matrix4c out;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const int a = i / 2, b = i % 2, ap = j / 2, bp = j % 2;
      out(i, j) = rho(a * 2 + bp, ap * 2 + b);
    }
  return out;
}

inline double negativity_oracle(const Matrix4c& rho) {
  const Eigen::Vector4d ev = general_eigenvalues(pt_oracle(rho));
  double n = 0.0;
  for (int i = 0; i < 4; ++i) n += (std::abs(ev(i)) - ev(i)) / 2.0;
  return n;
}

/// Equality of kets up to a global phase.
inline bool same_ray(const Eigen::Vector2cd& a, const Eigen::Vector2cd& b, double tol) {
  return std::abs(std::abs(a.dot(b)) - a.norm() * b.norm()) < tol;
}

}  // namespace testutil

#pragma once

// Helpers shared by the unit tests and the acceptance runner. The oracles
// here are deliberately naive: explicit loops instead of the library's
// Eigen-mapped kernels.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>

#include "ssnt/tensor.hpp"

namespace ssnt::testing {

inline Tensor3 random_tensor(Dims d, std::mt19937_64& gen, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor3 t(d);
  for (auto& v : t.data()) v = u(gen);
  return t;
}

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = u(gen);
  }
  return m;
}

inline Tensor3 random_mask(Dims d, double p, std::mt19937_64& gen) {
  std::bernoulli_distribution b(p);
  Tensor3 t(d);
  for (auto& v : t.data()) v = b(gen) ? 1.0 : 0.0;
  return t;
}

/// Random orthogonal matrix from the QR factorization of a Gaussian matrix.
inline Matrix random_orthogonal(Index n, std::mt19937_64& gen) {
  std::normal_distribution<double> g;
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = g(gen);
  }
  Eigen::HouseholderQR<Matrix> qr(m);
  return qr.householderQ();
}

/// X(i,j,k) -> sum_l X(i,j,l) exp(-2 pi i k l / n3), one tube at a time.
inline ComplexTensor3 naive_dft(const Tensor3& t) {
  const Index n3 = t.n3();
  ComplexTensor3 out(t.dims());
  for (Index i = 0; i < t.n1(); ++i) {
    for (Index j = 0; j < t.n2(); ++j) {
      for (Index k = 0; k < n3; ++k) {
        std::complex<double> acc = 0.0;
        for (Index l = 0; l < n3; ++l) {
          const double angle = -2.0 * std::numbers::pi * static_cast<double>(k * l % n3) / static_cast<double>(n3);
          acc += t(i, j, l) * std::polar(1.0, angle);
        }
        out(i, j, k) = acc;
      }
    }
  }
  return out;
}

/// Frontal slice k as a column-major complex matrix, copied by index.
inline ComplexMatrix complex_slice(const ComplexTensor3& t, Index k) {
  ComplexMatrix m(static_cast<Eigen::Index>(t.n1()), static_cast<Eigen::Index>(t.n2()));
  for (Index i = 0; i < t.n1(); ++i) {
    for (Index j = 0; j < t.n2(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t(i, j, k);
  }
  return m;
}

inline Matrix real_slice(const Tensor3& t, Index k) {
  Matrix m(static_cast<Eigen::Index>(t.n1()), static_cast<Eigen::Index>(t.n2()));
  for (Index i = 0; i < t.n1(); ++i) {
    for (Index j = 0; j < t.n2(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t(i, j, k);
  }
  return m;
}

/// Nuclear norm via the eigenvalues of the smaller Gram matrix.
inline double gram_nuclear(const ComplexMatrix& m) {
  const ComplexMatrix gram = m.rows() < m.cols() ? ComplexMatrix(m * m.adjoint()) : ComplexMatrix(m.adjoint() * m);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(gram);
  double s = 0.0;
  for (Eigen::Index n = 0; n < es.eigenvalues().size(); ++n) s += std::sqrt(std::max(0.0, es.eigenvalues()(n)));
  return s;
}

inline double max_abs_diff(const Tensor3& a, const Tensor3& b) {
  double m = 0.0;
  for (Index n = 0; n < a.size(); ++n) m = std::max(m, std::abs(a[n] - b[n]));
  return m;
}

inline double rel_diff(const Tensor3& a, const Tensor3& b) {
  double num = 0.0, den = 0.0;
  for (Index n = 0; n < a.size(); ++n) {
    num += (a[n] - b[n]) * (a[n] - b[n]);
    den += b[n] * b[n];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

}  // namespace ssnt::testing

#pragma once

#include "ssnt/tensor.hpp"

namespace ssnt {

/// Relative threshold below which a singular value counts as zero:
/// sigma_i <= kRankTolerance * sigma_max.
inline constexpr double kRankTolerance = 1e-8;

/// Mode-3 unfolding: an n3 x (n1*n2) matrix with M(k, i + j*n1) = t(i, j, k).
Matrix unfold3(const Tensor3& t);
Tensor3 fold3(const Matrix& m, Dims dims);

/// t x_3 a, i.e. fold3(a * unfold3(t)). Requires a.cols() == n3.
Tensor3 mode3_product(const Tensor3& t, const Matrix& a);
ComplexTensor3 mode3_product(const ComplexTensor3& t, const ComplexMatrix& a);

/// Singular values in descending order. Throws NumericalError if the SVD
/// fails or the input is not finite.
Eigen::VectorXd singular_values(const Eigen::Ref<const Matrix>& m);
Eigen::VectorXd singular_values(const Eigen::Ref<const ComplexMatrix>& m);

double nuclear_norm(const Eigen::Ref<const Matrix>& m);
double nuclear_norm(const Eigen::Ref<const ComplexMatrix>& m);
double fro_norm(const Tensor3& t);
double l1_norm(const Tensor3& t);
double inner(const Tensor3& a, const Tensor3& b);

/// Elementwise sign(x) * max(|x| - v, 0).
Tensor3 soft_threshold(const Tensor3& t, double v);
double soft_threshold(double x, double v);

/// Forward difference along spatial dimension p (1: rows i, 2: columns j)
/// with a zero last difference.
Tensor3 diff(const Tensor3& t, int p);
/// Exact adjoint of diff(., p).
Tensor3 diff_adjoint(const Tensor3& t, int p);

}  // namespace ssnt

#pragma once

#include <vector>

#include "ssnt/tensor.hpp"

namespace ssnt {

// t-SVD framework. The mode-3 DFT is unnormalized in the forward direction
// and scaled by 1/n3 in the inverse, so the TNN of a tensor whose frontal
// slices all equal A is n3 * ||A||_*.

ComplexTensor3 dft_mode3(const Tensor3& t);
ComplexTensor3 dft_mode3(const ComplexTensor3& t);
ComplexTensor3 idft_mode3(const ComplexTensor3& t);
/// Inverse transform keeping the real part; the discarded imaginary residual
/// is checked against 1e-10 * ||t||_F.
Tensor3 idft_mode3_real(const ComplexTensor3& t);

/// Sum of nuclear norms of the DFT-transformed frontal slices.
double tnn(const Tensor3& t);

/// C(i,j,:) = sum_l A(i,l,:) (circular conv) B(l,j,:). Requires a.n2 == b.n1, a.n3 == b.n3.
Tensor3 t_product(const Tensor3& a, const Tensor3& b);
Tensor3 conj_transpose(const Tensor3& a);
Tensor3 identity_tensor(Index n, Index n3);

struct TSvd {
  Tensor3 u;  // n1 x n1 x n3, orthogonal
  Tensor3 s;  // n1 x n2 x n3, f-diagonal in the DFT domain
  Tensor3 v;  // n2 x n2 x n3, orthogonal
};

TSvd t_svd(const Tensor3& a);

/// Frobenius norms of the singular tubes S(l,l,:), l = 0..min(n1,n2)-1.
std::vector<double> singular_tube_norms(const TSvd& svd);

/// Number of singular tubes whose norm exceeds rel_tol * (largest tube norm).
Index tubal_rank(const Tensor3& a, double rel_tol = 1e-8);

}  // namespace ssnt

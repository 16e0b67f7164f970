#include "ssnt/tsvd.hpp"

#include <algorithm>
#include <cmath>

#include <unsupported/Eigen/FFT>

#include "ssnt/tensor_ops.hpp"

namespace ssnt {

namespace {

using Complex = std::complex<double>;

template <typename Fn>
ComplexTensor3 transform_tubes(const ComplexTensor3& t, Fn&& fn) {
  const Index n3 = t.n3(), plane = t.dims().slice_size();
  // A length-1 transform is the identity (and kissfft does not handle it).
  if (n3 == 1) return t;
  ComplexTensor3 out(t.dims());
  std::vector<Complex> tube(n3), spec(n3);
  for (Index p = 0; p < plane; ++p) {
    for (Index k = 0; k < n3; ++k) tube[k] = t[k * plane + p];
    fn(spec, tube);
    for (Index k = 0; k < n3; ++k) out[k * plane + p] = spec[k];
  }
  return out;
}

ComplexTensor3 to_complex(const Tensor3& t) {
  ComplexTensor3 c(t.dims());
  for (Index n = 0; n < t.size(); ++n) c[n] = Complex(t[n], 0.0);
  return c;
}

ComplexMatrix complex_slice(const ComplexTensor3& t, Index k) { return t.slice(k); }

}  // namespace

ComplexTensor3 dft_mode3(const ComplexTensor3& t) {
  Eigen::FFT<double> fft;
  return transform_tubes(t, [&](std::vector<Complex>& dst, const std::vector<Complex>& src) {
    fft.fwd(dst, src);
  });
}

ComplexTensor3 dft_mode3(const Tensor3& t) { return dft_mode3(to_complex(t)); }

ComplexTensor3 idft_mode3(const ComplexTensor3& t) {
  Eigen::FFT<double> fft;
  return transform_tubes(t, [&](std::vector<Complex>& dst, const std::vector<Complex>& src) {
    fft.inv(dst, src);
  });
}

Tensor3 idft_mode3_real(const ComplexTensor3& t) {
  const ComplexTensor3 c = idft_mode3(t);
  Tensor3 out(c.dims());
  double imag_sq = 0.0, total_sq = 0.0;
  for (Index n = 0; n < c.size(); ++n) {
    out[n] = c[n].real();
    imag_sq += c[n].imag() * c[n].imag();
    total_sq += std::norm(c[n]);
  }
  if (std::sqrt(imag_sq) > 1e-10 * std::sqrt(total_sq) && imag_sq > 1e-300) {
    throw NumericalError("idft_mode3_real: spectrum is not conjugate-symmetric");
  }
  return out;
}

double tnn(const Tensor3& t) {
  const ComplexTensor3 spec = dft_mode3(t);
  double total = 0.0;
  for (Index k = 0; k < spec.n3(); ++k) total += nuclear_norm(complex_slice(spec, k));
  return total;
}

Tensor3 t_product(const Tensor3& a, const Tensor3& b) {
  if (a.n2() != b.n1() || a.n3() != b.n3()) {
    throw ShapeError("t_product: incompatible dims " + to_string(a.dims()) + " * " +
                     to_string(b.dims()));
  }
  const ComplexTensor3 fa = dft_mode3(a), fb = dft_mode3(b);
  ComplexTensor3 fc(Dims{a.n1(), b.n2(), a.n3()});
  for (Index k = 0; k < a.n3(); ++k) fc.slice(k) = fa.slice(k) * fb.slice(k);
  return idft_mode3_real(fc);
}

Tensor3 conj_transpose(const Tensor3& a) {
  const Index n3 = a.n3();
  Tensor3 out(Dims{a.n2(), a.n1(), n3});
  for (Index k = 0; k < n3; ++k) {
    const Index src = (k == 0) ? 0 : n3 - k;
    out.slice(k) = a.slice(src).transpose();
  }
  return out;
}

Tensor3 identity_tensor(Index n, Index n3) {
  Tensor3 id(Dims{n, n, n3});
  for (Index i = 0; i < n; ++i) id(i, i, 0) = 1.0;
  return id;
}

TSvd t_svd(const Tensor3& a) {
  const Index n1 = a.n1(), n2 = a.n2(), n3 = a.n3();
  if (!all_finite(a)) throw NumericalError("t_svd: non-finite input");
  const ComplexTensor3 fa = dft_mode3(a);
  ComplexTensor3 fu(Dims{n1, n1, n3}), fs(Dims{n1, n2, n3}), fv(Dims{n2, n2, n3});
  const Index half = n3 / 2;
  for (Index k = 0; k <= half; ++k) {
    Eigen::BDCSVD<ComplexMatrix> svd(complex_slice(fa, k), Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.info() != Eigen::Success) throw NumericalError("t_svd: SVD did not converge");
    ComplexMatrix s = ComplexMatrix::Zero(static_cast<Eigen::Index>(n1), static_cast<Eigen::Index>(n2));
    for (Eigen::Index l = 0; l < svd.singularValues().size(); ++l) s(l, l) = svd.singularValues()(l);
    fu.slice(k) = svd.matrixU();
    fs.slice(k) = s;
    fv.slice(k) = svd.matrixV();
    // Conjugate-symmetric completion keeps the spatial-domain factors real.
    if (k > 0 && n3 - k != k) {
      fu.slice(n3 - k) = svd.matrixU().conjugate();
      fs.slice(n3 - k) = s;
      fv.slice(n3 - k) = svd.matrixV().conjugate();
    }
  }
  return TSvd{idft_mode3_real(fu), idft_mode3_real(fs), idft_mode3_real(fv)};
}

std::vector<double> singular_tube_norms(const TSvd& svd) {
  const Index r = std::min(svd.s.n1(), svd.s.n2());
  std::vector<double> norms(r, 0.0);
  for (Index l = 0; l < r; ++l) {
    double sq = 0.0;
    for (Index k = 0; k < svd.s.n3(); ++k) sq += svd.s(l, l, k) * svd.s(l, l, k);
    norms[l] = std::sqrt(sq);
  }
  return norms;
}

Index tubal_rank(const Tensor3& a, double rel_tol) {
  const auto norms = singular_tube_norms(t_svd(a));
  if (norms.empty()) return 0;
  const double top = *std::max_element(norms.begin(), norms.end());
  if (top <= 0.0) return 0;
  return static_cast<Index>(
      std::count_if(norms.begin(), norms.end(), [&](double v) { return v > rel_tol * top; }));
}

}  // namespace ssnt

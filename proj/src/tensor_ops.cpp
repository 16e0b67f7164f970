#include "ssnt/tensor_ops.hpp"

#include <cmath>

namespace ssnt {

Matrix unfold3(const Tensor3& t) {
  const Index n1 = t.n1(), n2 = t.n2(), n3 = t.n3();
  Matrix m(static_cast<Eigen::Index>(n3), static_cast<Eigen::Index>(n1 * n2));
  for (Index k = 0; k < n3; ++k) {
    for (Index i = 0; i < n1; ++i) {
      for (Index j = 0; j < n2; ++j) {
        m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i + j * n1)) = t(i, j, k);
      }
    }
  }
  return m;
}

Tensor3 fold3(const Matrix& m, Dims dims) {
  if (static_cast<Index>(m.rows()) != dims.n3 ||
      static_cast<Index>(m.cols()) != dims.slice_size()) {
    throw ShapeError("fold3: matrix " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + " does not fold into " + to_string(dims));
  }
  Tensor3 t(dims);
  for (Index k = 0; k < dims.n3; ++k) {
    for (Index i = 0; i < dims.n1; ++i) {
      for (Index j = 0; j < dims.n2; ++j) {
        t(i, j, k) = m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i + j * dims.n1));
      }
    }
  }
  return t;
}

namespace {

template <typename TensorT, typename MatrixT>
TensorT mode3_product_impl(const TensorT& t, const MatrixT& a) {
  if (static_cast<Index>(a.cols()) != t.n3()) {
    throw ShapeError("mode3_product: matrix has " + std::to_string(a.cols()) +
                     " columns, tensor has n3 = " + std::to_string(t.n3()));
  }
  TensorT out(Dims{t.n1(), t.n2(), static_cast<Index>(a.rows())});
  // Column ordering of the unfolding does not affect a product applied from
  // the left, so the slice-major buffer is used directly.
  out.slices_as_rows().noalias() = a * t.slices_as_rows();
  return out;
}

template <typename MatrixT>
Eigen::VectorXd singular_values_impl(const MatrixT& m) {
  if (m.size() == 0) return Eigen::VectorXd();
  if (!m.allFinite()) throw NumericalError("singular_values: non-finite input");
  Eigen::BDCSVD<typename MatrixT::PlainObject> svd(m);
  if (svd.info() != Eigen::Success) throw NumericalError("singular_values: SVD did not converge");
  return svd.singularValues();
}

}  // namespace

Tensor3 mode3_product(const Tensor3& t, const Matrix& a) { return mode3_product_impl(t, a); }

ComplexTensor3 mode3_product(const ComplexTensor3& t, const ComplexMatrix& a) {
  return mode3_product_impl(t, a);
}

Eigen::VectorXd singular_values(const Eigen::Ref<const Matrix>& m) {
  return singular_values_impl(m);
}

Eigen::VectorXd singular_values(const Eigen::Ref<const ComplexMatrix>& m) {
  return singular_values_impl(m);
}

double nuclear_norm(const Eigen::Ref<const Matrix>& m) { return singular_values(m).sum(); }

double nuclear_norm(const Eigen::Ref<const ComplexMatrix>& m) { return singular_values(m).sum(); }

double fro_norm(const Tensor3& t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return std::sqrt(s);
}

double l1_norm(const Tensor3& t) {
  double s = 0.0;
  for (double v : t.data()) s += std::abs(v);
  return s;
}

double inner(const Tensor3& a, const Tensor3& b) {
  if (!(a.dims() == b.dims())) throw ShapeError("inner: dims differ");
  double s = 0.0;
  for (Index n = 0; n < a.size(); ++n) s += a[n] * b[n];
  return s;
}

double soft_threshold(double x, double v) {
  const double mag = std::abs(x) - v;
  if (mag <= 0.0) return 0.0;
  return x > 0.0 ? mag : -mag;
}

Tensor3 soft_threshold(const Tensor3& t, double v) {
  if (v < 0.0) throw std::invalid_argument("soft_threshold: negative threshold");
  Tensor3 out(t.dims());
  for (Index n = 0; n < t.size(); ++n) out[n] = soft_threshold(t[n], v);
  return out;
}

Tensor3 diff(const Tensor3& t, int p) {
  if (p != 1 && p != 2) throw std::invalid_argument("diff: p must be 1 or 2");
  const Index n1 = t.n1(), n2 = t.n2(), n3 = t.n3();
  Tensor3 out(t.dims());
  for (Index k = 0; k < n3; ++k) {
    for (Index i = 0; i < n1; ++i) {
      for (Index j = 0; j < n2; ++j) {
        if (p == 1) {
          out(i, j, k) = (i + 1 < n1) ? t(i + 1, j, k) - t(i, j, k) : 0.0;
        } else {
          out(i, j, k) = (j + 1 < n2) ? t(i, j + 1, k) - t(i, j, k) : 0.0;
        }
      }
    }
  }
  return out;
}

Tensor3 diff_adjoint(const Tensor3& t, int p) {
  if (p != 1 && p != 2) throw std::invalid_argument("diff_adjoint: p must be 1 or 2");
  const Index n1 = t.n1(), n2 = t.n2(), n3 = t.n3();
  Tensor3 out(t.dims());
  for (Index k = 0; k < n3; ++k) {
    for (Index i = 0; i < n1; ++i) {
      for (Index j = 0; j < n2; ++j) {
        const Index pos = (p == 1) ? i : j;
        const Index len = (p == 1) ? n1 : n2;
        if (len == 1) {
          out(i, j, k) = 0.0;
          continue;
        }
        // Rows/columns 0..len-2 carry differences; the last one is fixed at zero.
        const double here = (pos + 1 < len) ? t(i, j, k) : 0.0;
        double prev = 0.0;
        if (pos > 0) prev = (p == 1) ? t(i - 1, j, k) : t(i, j - 1, k);
        out(i, j, k) = prev - here;
      }
    }
  }
  return out;
}

}  // namespace ssnt

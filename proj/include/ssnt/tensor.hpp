#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ssnt {

using Index = std::size_t;
using Matrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ComplexRowMatrix =
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dims {
  Index n1 = 0;
  Index n2 = 0;
  Index n3 = 0;

  Index slice_size() const { return n1 * n2; }
  Index numel() const { return n1 * n2 * n3; }
  bool operator==(const Dims&) const = default;
};

std::string to_string(const Dims& d);

/// Dense real third-order array.
///
/// Storage is slice-major: the third index k is slowest, then i, then j, so
/// frontal slice k occupies the contiguous range [k*n1*n2, (k+1)*n1*n2) as a
/// row-major n1 x n2 block. The same buffer read as a row-major n3 x (n1*n2)
/// matrix has one frontal slice per row, which is how mode-3 products are
/// evaluated.
template <typename Scalar>
class BasicTensor3 {
 public:
  using SliceMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstSliceMap =
      Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  BasicTensor3() = default;

  explicit BasicTensor3(Dims dims, Scalar fill = Scalar(0)) : dims_(dims) {
    if (dims.n1 == 0 || dims.n2 == 0 || dims.n3 == 0) {
      throw ShapeError("tensor dims must be positive, got " + to_string(dims));
    }
    data_.assign(dims.numel(), fill);
  }

  BasicTensor3(Index n1, Index n2, Index n3, Scalar fill = Scalar(0))
      : BasicTensor3(Dims{n1, n2, n3}, fill) {}

  BasicTensor3(Dims dims, std::vector<Scalar> data) : dims_(dims), data_(std::move(data)) {
    if (dims.n1 == 0 || dims.n2 == 0 || dims.n3 == 0) {
      throw ShapeError("tensor dims must be positive, got " + to_string(dims));
    }
    if (data_.size() != dims.numel()) {
      throw ShapeError("buffer length " + std::to_string(data_.size()) +
                       " does not match dims " + to_string(dims));
    }
  }

  const Dims& dims() const { return dims_; }
  Index n1() const { return dims_.n1; }
  Index n2() const { return dims_.n2; }
  Index n3() const { return dims_.n3; }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Index offset(Index i, Index j, Index k) const { return (k * dims_.n1 + i) * dims_.n2 + j; }

  Scalar& operator()(Index i, Index j, Index k) { return data_[offset(i, j, k)]; }
  const Scalar& operator()(Index i, Index j, Index k) const { return data_[offset(i, j, k)]; }

  Scalar& operator[](Index linear) { return data_[linear]; }
  const Scalar& operator[](Index linear) const { return data_[linear]; }

  std::span<Scalar> data() { return data_; }
  std::span<const Scalar> data() const { return data_; }
  const std::vector<Scalar>& buffer() const { return data_; }

  SliceMap slice(Index k) {
    return SliceMap(data_.data() + k * dims_.slice_size(), static_cast<Eigen::Index>(dims_.n1),
                    static_cast<Eigen::Index>(dims_.n2));
  }
  ConstSliceMap slice(Index k) const {
    return ConstSliceMap(data_.data() + k * dims_.slice_size(),
                         static_cast<Eigen::Index>(dims_.n1), static_cast<Eigen::Index>(dims_.n2));
  }

  /// Row-major n3 x (n1*n2) view; row k is frontal slice k flattened with j fastest.
  SliceMap slices_as_rows() {
    return SliceMap(data_.data(), static_cast<Eigen::Index>(dims_.n3),
                    static_cast<Eigen::Index>(dims_.slice_size()));
  }
  ConstSliceMap slices_as_rows() const {
    return ConstSliceMap(data_.data(), static_cast<Eigen::Index>(dims_.n3),
                         static_cast<Eigen::Index>(dims_.slice_size()));
  }

  void set_slice(Index k, const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m) {
    if (static_cast<Index>(m.rows()) != dims_.n1 || static_cast<Index>(m.cols()) != dims_.n2) {
      throw ShapeError("slice shape mismatch");
    }
    slice(k) = m;
  }

  BasicTensor3& operator+=(const BasicTensor3& o) {
    require_same(o);
    for (Index n = 0; n < data_.size(); ++n) data_[n] += o.data_[n];
    return *this;
  }
  BasicTensor3& operator-=(const BasicTensor3& o) {
    require_same(o);
    for (Index n = 0; n < data_.size(); ++n) data_[n] -= o.data_[n];
    return *this;
  }
  BasicTensor3& operator*=(Scalar s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend BasicTensor3 operator+(BasicTensor3 a, const BasicTensor3& b) { return a += b; }
  friend BasicTensor3 operator-(BasicTensor3 a, const BasicTensor3& b) { return a -= b; }
  friend BasicTensor3 operator*(BasicTensor3 a, Scalar s) { return a *= s; }
  friend BasicTensor3 operator*(Scalar s, BasicTensor3 a) { return a *= s; }

  bool operator==(const BasicTensor3&) const = default;

 private:
  void require_same(const BasicTensor3& o) const {
    if (!(o.dims_ == dims_)) {
      throw ShapeError("tensor dims differ: " + to_string(dims_) + " vs " + to_string(o.dims_));
    }
  }

  Dims dims_{};
  std::vector<Scalar> data_;
};

using Tensor3 = BasicTensor3<double>;
using ComplexTensor3 = BasicTensor3<std::complex<double>>;

/// Elementwise product; used for masks.
Tensor3 hadamard(const Tensor3& a, const Tensor3& b);

bool all_finite(const Tensor3& t);
void require_finite(const Tensor3& t, const char* what);

}  // namespace ssnt

#include "ssnt/tensor.hpp"

#include <cmath>

namespace ssnt {

std::string to_string(const Dims& d) {
  return std::to_string(d.n1) + "x" + std::to_string(d.n2) + "x" + std::to_string(d.n3);
}

Tensor3 hadamard(const Tensor3& a, const Tensor3& b) {
  if (!(a.dims() == b.dims())) {
    throw ShapeError("hadamard: dims differ " + to_string(a.dims()) + " vs " + to_string(b.dims()));
  }
  Tensor3 out(a.dims());
  for (Index n = 0; n < a.size(); ++n) out[n] = a[n] * b[n];
  return out;
}

bool all_finite(const Tensor3& t) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_finite(const Tensor3& t, const char* what) {
  if (!all_finite(t)) throw NumericalError(std::string(what) + ": non-finite entries");
}

}  // namespace ssnt

#include "ssnt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ssnt/random.hpp"
#include "ssnt/tensor_ops.hpp"
#include "ssnt/tsvd.hpp"

namespace ssnt {

namespace {

Tensor3 uniform_tensor(Dims dims, Rng& rng) {
  Tensor3 t(dims);
  for (auto& v : t.data()) v = rng.uniform();
  return t;
}

}  // namespace

Tensor3 synth_low_tubal_rank(Dims dims, Index rank, std::uint64_t seed) {
  if (rank == 0) throw std::invalid_argument("tubal rank must be >= 1");
  Rng rng(seed, 0x51);
  const Tensor3 a = uniform_tensor(Dims{dims.n1, rank, dims.n3}, rng);
  const Tensor3 b = uniform_tensor(Dims{rank, dims.n2, dims.n3}, rng);
  Tensor3 x = t_product(a, b);
  double top = 0.0;
  for (double v : x.data()) top = std::max(top, std::abs(v));
  if (top > 0.0) x *= 1.0 / top;
  return x;
}

Tensor3 synth_nonlinear(Dims dims, Index rank, std::uint64_t seed) {
  Tensor3 core = synth_low_tubal_rank(dims, rank, seed);
  Rng rng(seed, 0x52);
  Matrix mix(static_cast<Eigen::Index>(dims.n3), static_cast<Eigen::Index>(dims.n3));
  for (Eigen::Index r = 0; r < mix.rows(); ++r) {
    for (Eigen::Index c = 0; c < mix.cols(); ++c) mix(r, c) = rng.normal() * 2.0 / std::sqrt(static_cast<double>(dims.n3));
  }
  Tensor3 x = mode3_product(core, mix);
  for (auto& v : x.data()) v = std::tanh(v);
  return rescale_unit(x);
}

Tensor3 rescale_unit(const Tensor3& t) {
  const auto [lo, hi] = std::minmax_element(t.data().begin(), t.data().end());
  Tensor3 out(t.dims());
  const double span = *hi - *lo;
  if (span <= 0.0) return out;
  for (Index n = 0; n < t.size(); ++n) out[n] = (t[n] - *lo) / span;
  return out;
}

}  // namespace ssnt

#pragma once

#include <cstdint>

#include "ssnt/tensor.hpp"

namespace ssnt {

/// A * B (t-product) with A: n1 x r x n3 and B: r x n2 x n3 drawn uniformly
/// from [0, 1), scaled so the largest entry is 1. Tubal rank is at most r.
Tensor3 synth_low_tubal_rank(Dims dims, Index rank, std::uint64_t seed);

/// Low-tubal-rank core pushed through a fixed nonlinear mode-3 map,
/// tanh(core x_3 M) with a random M, then min-max scaled to [0, 1].
Tensor3 synth_nonlinear(Dims dims, Index rank, std::uint64_t seed);

/// Min-max scale to [0, 1]; a constant tensor maps to all zeros.
Tensor3 rescale_unit(const Tensor3& t);

}  // namespace ssnt

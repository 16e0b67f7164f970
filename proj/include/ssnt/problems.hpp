#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "ssnt/tensor.hpp"

namespace ssnt {

/// The four inverse problems: tensor completion, background subtraction,
/// robust tensor completion, and snapshot compressive imaging.
enum class ProblemKind { TC, BS, RTC, SCI };

std::string to_string(ProblemKind kind);
/// Accepts "tc", "bs", "rtc", "sci" (case-insensitive).
ProblemKind parse_problem_kind(const std::string& s);

struct ObservationModel {
  ProblemKind kind = ProblemKind::TC;
  /// Observed set for TC/RTC, sensing mask for SCI, absent for BS.
  std::optional<Tensor3> mask;
  /// The observed tensor; for SCI an n1 x n2 x 1 snapshot.
  Tensor3 measurement;

  /// Dims of the tensor being recovered.
  Dims target_dims() const;
  /// Throws ShapeError / std::invalid_argument on an inconsistent model.
  void validate() const;
};

struct SamplingSpec {
  double sr = 1.0;
  /// Fraction of observed entries hit by salt-and-pepper noise (RTC only).
  double noise_sr = 0.0;
  /// Standard deviation of additive Gaussian noise on the SCI snapshot.
  double gauss_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Number of entries selected at rate `rate` out of `total`.
Index sample_count(double rate, Index total);

/// Exactly sample_count(sr, N) ones, placed uniformly without replacement.
Tensor3 sample_mask(Dims dims, double sr, std::uint64_t seed);

ObservationModel degrade(const Tensor3& truth, ProblemKind kind, const SamplingSpec& spec);

/// Sum over k of mask_k .* x_k, returned as n1 x n2 x 1.
Tensor3 sci_measure(const Tensor3& x, const Tensor3& mask);

struct FidelityResult {
  double value = 0.0;
  Tensor3 grad;
};

/// L(x, O) for the model's kind and its gradient with respect to x.
FidelityResult fidelity(const Tensor3& x, const ObservationModel& model);

struct Recovery {
  Tensor3 estimate;
  /// Sparse component for BS and RTC.
  std::optional<Tensor3> sparse;
};

/// Turns the raw network output into the problem's final result.
Recovery assemble(const Tensor3& raw, const ObservationModel& model);

/// Per-tube piecewise-linear interpolation of missing mode-3 entries.
Tensor3 interpolate_tubes(const Tensor3& observed, const Tensor3& mask);

struct BackprojectionOptions {
  int steps = 50;
  /// Soft threshold applied to spatial differences in the denoise step.
  double tv_threshold = 0.02;
  double tv_step = 0.125;
};

/// Data-consistent SCI initializer: regularized back-projection steps, each
/// followed by a TV shrinkage step restricted to the null space of the
/// sensing operator.
Tensor3 tv_backprojection_init(const ObservationModel& model,
                               const BackprojectionOptions& opts = {});

/// Init(.) feeding the transform network.
Tensor3 init_observation(const ObservationModel& model, const BackprojectionOptions& sci_opts = {});

}  // namespace ssnt

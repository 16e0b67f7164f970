#pragma once

#include <optional>
#include <vector>

#include "ssnt/problems.hpp"
#include "ssnt/tensor.hpp"

namespace ssnt {

/// 10 log10(peak^2 N / ||x - ref||_F^2); +inf when x == ref.
double psnr(const Tensor3& x, const Tensor3& ref, double peak = 1.0);

/// Mean over frontal slices of windowed SSIM: Gaussian window of side 11
/// (shrunk to the slice size when smaller), sigma 1.5, K1 = 0.01, K2 = 0.03,
/// dynamic range `peak`, evaluated on fully covered window positions.
double ssim(const Tensor3& x, const Tensor3& ref, double peak = 1.0);

/// Mean over positions (i, j) of the angle between mode-3 tubes; tubes with
/// zero norm contribute 0.
double sam(const Tensor3& x, const Tensor3& ref);

struct MetricReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double sam = 0.0;
  double peak = 1.0;
  std::optional<std::vector<double>> per_slice_psnr;
};

MetricReport evaluate_metrics(const Tensor3& x, const Tensor3& ref, double peak = 1.0,
                              bool per_slice = false);

struct AccEgyCurve {
  std::vector<double> fractions;     // k / K
  std::vector<double> energy_ratio;  // sum_{i<=k} s_i^2 / sum_j s_j^2
  bool degenerate = false;           // all-zero input

  /// Energy ratio at the smallest k with k / K >= fraction.
  double at(double fraction) const;
};

/// Pools the singular values of every frontal slice, sorted descending.
AccEgyCurve acc_egy(const Tensor3& transformed);
AccEgyCurve acc_egy(const ComplexTensor3& transformed);

struct BaselineOptions {
  double rho = 1e-2;
  int iters = 200;
  /// Penalty growth per iteration, capped at rho_max.
  double growth = 1.1;
  double rho_max = 1e10;
};

/// ADMM for min ||X||_TNN s.t. X = O on the observed set: slice-wise
/// singular value thresholding in the DFT domain with threshold 1/rho.
Tensor3 tnn_baseline_complete(const ObservationModel& model, const BaselineOptions& opts = {});

}  // namespace ssnt

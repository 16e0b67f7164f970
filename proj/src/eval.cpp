#include "ssnt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "ssnt/tensor_ops.hpp"
#include "ssnt/tsvd.hpp"

namespace ssnt {

namespace {

void require_same_dims(const Tensor3& x, const Tensor3& ref, const char* what) {
  if (!(x.dims() == ref.dims())) {
    throw ShapeError(std::string(what) + ": dims differ " + to_string(x.dims()) + " vs " + to_string(ref.dims()));
  }
}

double psnr_from_sse(double sse, double peak, double count) {
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak * count / sse);
}

std::vector<double> gaussian_window(Index size, double sigma) {
  std::vector<double> w(size);
  const double center = (static_cast<double>(size) - 1.0) / 2.0;
  double sum = 0.0;
  for (Index n = 0; n < size; ++n) {
    const double d = static_cast<double>(n) - center;
    w[n] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w[n];
  }
  for (auto& v : w) v /= sum;
  return w;
}

double ssim_slice(const Tensor3::ConstSliceMap& a, const Tensor3::ConstSliceMap& b, double peak) {
  const Index rows = static_cast<Index>(a.rows()), cols = static_cast<Index>(a.cols());
  const Index win = std::min<Index>({11, rows, cols});
  const std::vector<double> g = gaussian_window(win, 1.5);
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  double total = 0.0;
  Index count = 0;
  for (Index r0 = 0; r0 + win <= rows; ++r0) {
    for (Index c0 = 0; c0 + win <= cols; ++c0) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (Index u = 0; u < win; ++u) {
        for (Index v = 0; v < win; ++v) {
          const double w = g[u] * g[v];
          const double xa = a(static_cast<Eigen::Index>(r0 + u), static_cast<Eigen::Index>(c0 + v));
          const double yb = b(static_cast<Eigen::Index>(r0 + u), static_cast<Eigen::Index>(c0 + v));
          mx += w * xa;
          my += w * yb;
          sxx += w * xa * xa;
          syy += w * yb * yb;
          sxy += w * xa * yb;
        }
      }
      const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

AccEgyCurve curve_from(std::vector<double> sv) {
  std::sort(sv.begin(), sv.end(), std::greater<>());
  AccEgyCurve curve;
  const Index count = sv.size();
  double energy = 0.0;
  for (double s : sv) energy += s * s;
  curve.fractions.resize(count);
  curve.energy_ratio.resize(count);
  curve.degenerate = !(energy > 0.0);
  double acc = 0.0;
  for (Index k = 0; k < count; ++k) {
    acc += sv[k] * sv[k];
    curve.fractions[k] = static_cast<double>(k + 1) / static_cast<double>(count);
    curve.energy_ratio[k] = curve.degenerate ? 1.0 : std::min(1.0, acc / energy);
  }
  if (count > 0) curve.energy_ratio.back() = 1.0;
  return curve;
}

/// Singular value thresholding of every DFT-domain slice, conjugate pairs
/// handled once.
Tensor3 tnn_shrink(const Tensor3& t, double threshold) {
  const ComplexTensor3 spec = dft_mode3(t);
  ComplexTensor3 out(spec.dims());
  const Index n3 = spec.n3();
  for (Index k = 0; k <= n3 / 2; ++k) {
    const ComplexMatrix slice = spec.slice(k);
    Eigen::BDCSVD<ComplexMatrix> svd(slice, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw NumericalError("tnn_shrink: SVD did not converge");
    Eigen::VectorXd s = (svd.singularValues().array() - threshold).max(0.0).matrix();
    const ComplexMatrix shrunk = svd.matrixU() * s.cast<std::complex<double>>().asDiagonal() * svd.matrixV().adjoint();
    out.slice(k) = shrunk;
    if (k > 0 && n3 - k != k) out.slice(n3 - k) = shrunk.conjugate();
  }
  return idft_mode3_real(out);
}

}  // namespace

double psnr(const Tensor3& x, const Tensor3& ref, double peak) {
  require_same_dims(x, ref, "psnr");
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be > 0");
  double sse = 0.0;
  for (Index n = 0; n < x.size(); ++n) sse += (x[n] - ref[n]) * (x[n] - ref[n]);
  return psnr_from_sse(sse, peak, static_cast<double>(x.size()));
}

double ssim(const Tensor3& x, const Tensor3& ref, double peak) {
  require_same_dims(x, ref, "ssim");
  if (!(peak > 0.0)) throw std::invalid_argument("ssim: peak must be > 0");
  double total = 0.0;
  for (Index k = 0; k < x.n3(); ++k) total += ssim_slice(x.slice(k), ref.slice(k), peak);
  return total / static_cast<double>(x.n3());
}

double sam(const Tensor3& x, const Tensor3& ref) {
  require_same_dims(x, ref, "sam");
  const Index plane = x.dims().slice_size();
  double total = 0.0;
  for (Index p = 0; p < plane; ++p) {
    double nx = 0.0, nr = 0.0;
    for (Index k = 0; k < x.n3(); ++k) {
      nx += x[k * plane + p] * x[k * plane + p];
      nr += ref[k * plane + p] * ref[k * plane + p];
    }
    if (nx == 0.0 || nr == 0.0) continue;
    nx = std::sqrt(nx);
    nr = std::sqrt(nr);
    // 2 atan2(|a - b|, |a + b|) on the unit tubes stays accurate near 0 and pi.
    double diff = 0.0, sum = 0.0;
    for (Index k = 0; k < x.n3(); ++k) {
      const double a = x[k * plane + p] / nx, b = ref[k * plane + p] / nr;
      diff += (a - b) * (a - b);
      sum += (a + b) * (a + b);
    }
    total += 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
  }
  return total / static_cast<double>(plane);
}

MetricReport evaluate_metrics(const Tensor3& x, const Tensor3& ref, double peak, bool per_slice) {
  MetricReport r;
  r.peak = peak;
  r.psnr = psnr(x, ref, peak);
  r.ssim = ssim(x, ref, peak);
  r.sam = sam(x, ref);
  if (per_slice) {
    std::vector<double> values;
    const Index plane = x.dims().slice_size();
    for (Index k = 0; k < x.n3(); ++k) {
      double sse = 0.0;
      for (Index p = 0; p < plane; ++p) {
        const double d = x[k * plane + p] - ref[k * plane + p];
        sse += d * d;
      }
      values.push_back(psnr_from_sse(sse, peak, static_cast<double>(plane)));
    }
    r.per_slice_psnr = std::move(values);
  }
  return r;
}

double AccEgyCurve::at(double fraction) const {
  if (energy_ratio.empty()) throw std::invalid_argument("AccEgyCurve::at on an empty curve");
  for (Index k = 0; k < fractions.size(); ++k) {
    if (fractions[k] >= fraction - 1e-12) return energy_ratio[k];
  }
  return energy_ratio.back();
}

AccEgyCurve acc_egy(const Tensor3& transformed) {
  std::vector<double> sv;
  for (Index k = 0; k < transformed.n3(); ++k) {
    const Eigen::VectorXd s = singular_values(Matrix(transformed.slice(k)));
    sv.insert(sv.end(), s.data(), s.data() + s.size());
  }
  return curve_from(std::move(sv));
}

AccEgyCurve acc_egy(const ComplexTensor3& transformed) {
  std::vector<double> sv;
  for (Index k = 0; k < transformed.n3(); ++k) {
    const Eigen::VectorXd s = singular_values(ComplexMatrix(transformed.slice(k)));
    sv.insert(sv.end(), s.data(), s.data() + s.size());
  }
  return curve_from(std::move(sv));
}

Tensor3 tnn_baseline_complete(const ObservationModel& model, const BaselineOptions& opts) {
  if (model.kind != ProblemKind::TC) throw std::invalid_argument("tnn baseline needs a tc model");
  model.validate();
  if (!(opts.rho > 0.0) || opts.iters < 0 || !(opts.growth >= 1.0)) {
    throw std::invalid_argument("tnn baseline: invalid options");
  }
  const Tensor3& mask = *model.mask;
  const Tensor3 observed = hadamard(mask, model.measurement);
  Tensor3 z = observed;
  Tensor3 y(observed.dims());
  double rho = opts.rho;
  for (int it = 0; it < opts.iters; ++it) {
    Tensor3 target = z;
    for (Index n = 0; n < target.size(); ++n) target[n] -= y[n] / rho;
    const Tensor3 x = tnn_shrink(target, 1.0 / rho);
    for (Index n = 0; n < z.size(); ++n) {
      z[n] = mask[n] == 1.0 ? observed[n] : x[n] + y[n] / rho;
      y[n] += rho * (x[n] - z[n]);
    }
    rho = std::min(rho * opts.growth, opts.rho_max);
  }
  return z;
}

}  // namespace ssnt

#include "ssnt/problems.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "ssnt/random.hpp"
#include "ssnt/tensor_ops.hpp"

namespace ssnt {

namespace {

// Independent random streams per use so changing one never shifts another.
constexpr std::uint64_t kMaskStream = 1;
constexpr std::uint64_t kCorruptPickStream = 2;
constexpr std::uint64_t kCorruptValueStream = 3;
constexpr std::uint64_t kGaussStream = 4;

double sign(double x) { return (x > 0.0) - (x < 0.0); }

/// Indices of the `count` smallest random keys: a uniform subset without
/// replacement, independent of evaluation order.
std::vector<Index> pick_uniform(const std::vector<Index>& pool, Index count, std::uint64_t seed,
                                std::uint64_t stream) {
  std::vector<std::pair<std::uint64_t, Index>> keyed(pool.size());
  for (Index n = 0; n < pool.size(); ++n) keyed[n] = {hash_key(seed, stream, pool[n]), pool[n]};
  count = std::min(count, static_cast<Index>(pool.size()));
  std::nth_element(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(count), keyed.end());
  std::vector<Index> out(count);
  for (Index n = 0; n < count; ++n) out[n] = keyed[n].second;
  std::sort(out.begin(), out.end());
  return out;
}

void require_mask(const ObservationModel& m) {
  if (!m.mask) throw std::invalid_argument(to_string(m.kind) + " model requires a mask");
}

}  // namespace

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::TC: return "tc";
    case ProblemKind::BS: return "bs";
    case ProblemKind::RTC: return "rtc";
    case ProblemKind::SCI: return "sci";
  }
  return "?";
}

ProblemKind parse_problem_kind(const std::string& s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "tc") return ProblemKind::TC;
  if (lower == "bs") return ProblemKind::BS;
  if (lower == "rtc") return ProblemKind::RTC;
  if (lower == "sci") return ProblemKind::SCI;
  throw std::invalid_argument("unknown problem kind '" + s + "'");
}

Dims ObservationModel::target_dims() const {
  if (kind == ProblemKind::SCI) {
    require_mask(*this);
    return mask->dims();
  }
  return measurement.dims();
}

void ObservationModel::validate() const {
  if (measurement.empty()) throw std::invalid_argument("observation model has no measurement");
  if (kind == ProblemKind::BS) {
    if (mask) throw std::invalid_argument("bs model must not carry a mask");
    return;
  }
  require_mask(*this);
  for (double v : mask->data()) {
    if (v != 0.0 && v != 1.0) throw std::invalid_argument("mask entries must be 0 or 1");
  }
  if (kind == ProblemKind::SCI) {
    const Dims md = mask->dims();
    if (measurement.n1() != md.n1 || measurement.n2() != md.n2 || measurement.n3() != 1) {
      throw ShapeError("sci measurement must be " + std::to_string(md.n1) + "x" +
                       std::to_string(md.n2) + "x1, got " + to_string(measurement.dims()));
    }
  } else if (!(mask->dims() == measurement.dims())) {
    throw ShapeError("mask dims " + to_string(mask->dims()) + " differ from observation " +
                     to_string(measurement.dims()));
  }
}

void SamplingSpec::validate() const {
  if (!(sr > 0.0 && sr <= 1.0)) throw std::invalid_argument("sampling rate must be in (0, 1]");
  if (!(noise_sr >= 0.0 && noise_sr < 1.0)) {
    throw std::invalid_argument("noise rate must be in [0, 1)");
  }
  if (!(gauss_sigma >= 0.0) || !std::isfinite(gauss_sigma)) {
    throw std::invalid_argument("gaussian sigma must be finite and >= 0");
  }
}

Index sample_count(double rate, Index total) {
  // The small offset absorbs products such as 0.29 * 100 = 28.999999999999996.
  const double raw = std::floor(rate * static_cast<double>(total) + 1e-9);
  return std::min(total, static_cast<Index>(std::max(0.0, raw)));
}

Tensor3 sample_mask(Dims dims, double sr, std::uint64_t seed) {
  if (!(sr > 0.0 && sr <= 1.0)) throw std::invalid_argument("sampling rate must be in (0, 1]");
  Tensor3 mask(dims);
  const Index total = dims.numel();
  const Index count = sample_count(sr, total);
  if (count == total) return Tensor3(dims, 1.0);
  std::vector<Index> all(total);
  std::iota(all.begin(), all.end(), Index{0});
  for (Index idx : pick_uniform(all, count, seed, kMaskStream)) mask[idx] = 1.0;
  return mask;
}

Tensor3 sci_measure(const Tensor3& x, const Tensor3& mask) {
  if (!(x.dims() == mask.dims())) throw ShapeError("sci_measure: mask dims differ from tensor");
  Tensor3 out(Dims{x.n1(), x.n2(), 1});
  const Index plane = x.dims().slice_size();
  for (Index k = 0; k < x.n3(); ++k) {
    for (Index p = 0; p < plane; ++p) out[p] += mask[k * plane + p] * x[k * plane + p];
  }
  return out;
}

ObservationModel degrade(const Tensor3& truth, ProblemKind kind, const SamplingSpec& spec) {
  spec.validate();
  ObservationModel model;
  model.kind = kind;
  switch (kind) {
    case ProblemKind::BS:
      model.measurement = truth;
      break;
    case ProblemKind::TC:
      model.mask = sample_mask(truth.dims(), spec.sr, spec.seed);
      model.measurement = hadamard(*model.mask, truth);
      break;
    case ProblemKind::RTC: {
      model.mask = sample_mask(truth.dims(), spec.sr, spec.seed);
      model.measurement = hadamard(*model.mask, truth);
      std::vector<Index> observed;
      for (Index n = 0; n < truth.size(); ++n) {
        if ((*model.mask)[n] == 1.0) observed.push_back(n);
      }
      const Index budget = sample_count(spec.noise_sr, observed.size());
      for (Index idx : pick_uniform(observed, budget, spec.seed, kCorruptPickStream)) {
        const double u = uniform01(hash_key(spec.seed, kCorruptValueStream, idx));
        model.measurement[idx] = (u < 0.5) ? 0.0 : 1.0;
      }
      break;
    }
    case ProblemKind::SCI: {
      model.mask = sample_mask(truth.dims(), spec.sr, spec.seed);
      model.measurement = sci_measure(truth, *model.mask);
      if (spec.gauss_sigma > 0.0) {
        Rng rng(spec.seed, kGaussStream);
        for (auto& v : model.measurement.data()) v += spec.gauss_sigma * rng.normal();
      }
      break;
    }
  }
  return model;
}

FidelityResult fidelity(const Tensor3& x, const ObservationModel& model) {
  FidelityResult out{0.0, Tensor3(x.dims())};
  const Tensor3& obs = model.measurement;
  switch (model.kind) {
    case ProblemKind::TC: {
      require_mask(model);
      if (!(x.dims() == obs.dims())) throw ShapeError("fidelity: tensor dims differ from observation");
      const Tensor3& m = *model.mask;
      for (Index n = 0; n < x.size(); ++n) {
        const double r = m[n] * (x[n] - obs[n]);
        out.value += r * r;
        out.grad[n] = 2.0 * r;
      }
      break;
    }
    case ProblemKind::BS: {
      if (!(x.dims() == obs.dims())) throw ShapeError("fidelity: tensor dims differ from observation");
      for (Index n = 0; n < x.size(); ++n) {
        const double r = x[n] - obs[n];
        out.value += std::abs(r);
        out.grad[n] = sign(r);
      }
      break;
    }
    case ProblemKind::RTC: {
      require_mask(model);
      if (!(x.dims() == obs.dims())) throw ShapeError("fidelity: tensor dims differ from observation");
      const Tensor3& m = *model.mask;
      for (Index n = 0; n < x.size(); ++n) {
        const double r = x[n] - obs[n];
        out.value += m[n] * std::abs(r);
        out.grad[n] = m[n] * sign(r);
      }
      break;
    }
    case ProblemKind::SCI: {
      require_mask(model);
      const Tensor3& m = *model.mask;
      if (!(x.dims() == m.dims())) throw ShapeError("fidelity: tensor dims differ from sensing mask");
      Tensor3 residual = sci_measure(x, m);
      residual -= obs;
      for (double r : residual.data()) out.value += r * r;
      const Index plane = x.dims().slice_size();
      for (Index k = 0; k < x.n3(); ++k) {
        for (Index p = 0; p < plane; ++p) out.grad[k * plane + p] = 2.0 * m[k * plane + p] * residual[p];
      }
      break;
    }
  }
  return out;
}

Recovery assemble(const Tensor3& raw, const ObservationModel& model) {
  Recovery out;
  switch (model.kind) {
    case ProblemKind::TC: {
      require_mask(model);
      const Tensor3& m = *model.mask;
      if (!(raw.dims() == m.dims())) throw ShapeError("assemble: dims differ from mask");
      out.estimate = raw;
      for (Index n = 0; n < raw.size(); ++n) {
        if (m[n] == 1.0) out.estimate[n] = model.measurement[n];
      }
      break;
    }
    case ProblemKind::RTC: {
      require_mask(model);
      if (!(raw.dims() == model.measurement.dims())) throw ShapeError("assemble: dims differ");
      out.estimate = raw;
      out.sparse = hadamard(*model.mask, model.measurement - raw);
      break;
    }
    case ProblemKind::BS:
      if (!(raw.dims() == model.measurement.dims())) throw ShapeError("assemble: dims differ");
      out.estimate = raw;
      out.sparse = model.measurement - raw;
      break;
    case ProblemKind::SCI:
      out.estimate = raw;
      break;
  }
  return out;
}

Tensor3 interpolate_tubes(const Tensor3& observed, const Tensor3& mask) {
  if (!(observed.dims() == mask.dims())) throw ShapeError("interpolate_tubes: dims differ");
  const Index plane = observed.dims().slice_size(), n3 = observed.n3();
  double sum = 0.0;
  Index count = 0;
  for (Index n = 0; n < observed.size(); ++n) {
    if (mask[n] == 1.0) {
      sum += observed[n];
      ++count;
    }
  }
  const double fallback = count > 0 ? sum / static_cast<double>(count) : 0.0;

  Tensor3 out(observed.dims());
  std::vector<Index> known;
  known.reserve(n3);
  for (Index p = 0; p < plane; ++p) {
    known.clear();
    for (Index k = 0; k < n3; ++k) {
      if (mask[k * plane + p] == 1.0) known.push_back(k);
    }
    auto at = [&](Index k) { return observed[k * plane + p]; };
    if (known.empty()) {
      for (Index k = 0; k < n3; ++k) out[k * plane + p] = fallback;
      continue;
    }
    for (Index k = 0; k <= known.front(); ++k) out[k * plane + p] = at(known.front());
    for (Index s = 0; s + 1 < known.size(); ++s) {
      const Index a = known[s], b = known[s + 1];
      out[a * plane + p] = at(a);
      for (Index k = a + 1; k < b; ++k) {
        const double w = static_cast<double>(k - a) / static_cast<double>(b - a);
        out[k * plane + p] = (1.0 - w) * at(a) + w * at(b);
      }
    }
    for (Index k = known.back(); k < n3; ++k) out[k * plane + p] = at(known.back());
  }
  return out;
}

Tensor3 tv_backprojection_init(const ObservationModel& model, const BackprojectionOptions& opts) {
  if (model.kind != ProblemKind::SCI) throw std::invalid_argument("tv_backprojection_init needs an sci model");
  model.validate();
  const Tensor3& mask = *model.mask;
  const Dims dims = mask.dims();
  const Index plane = dims.slice_size();

  Tensor3 coverage(Dims{dims.n1, dims.n2, 1});
  for (Index k = 0; k < dims.n3; ++k) {
    for (Index p = 0; p < plane; ++p) coverage[p] += mask[k * plane + p];
  }

  // Removes the component of d that the sensing operator can see.
  auto project_null = [&](Tensor3& d) {
    const Tensor3 seen = sci_measure(d, mask);
    for (Index k = 0; k < dims.n3; ++k) {
      for (Index p = 0; p < plane; ++p) {
        if (coverage[p] > 0.0) d[k * plane + p] -= mask[k * plane + p] * seen[p] / coverage[p];
      }
    }
  };

  Tensor3 x(dims);
  for (int step = 0; step < opts.steps; ++step) {
    Tensor3 residual = model.measurement - sci_measure(x, mask);
    for (Index k = 0; k < dims.n3; ++k) {
      for (Index p = 0; p < plane; ++p) {
        x[k * plane + p] += mask[k * plane + p] * residual[p] / (coverage[p] + 1.0);
      }
    }
    if (opts.tv_threshold > 0.0 && opts.tv_step > 0.0) {
      Tensor3 descent(dims);
      for (int p = 1; p <= 2; ++p) {
        const Tensor3 g = diff(x, p);
        descent -= diff_adjoint(g - soft_threshold(g, opts.tv_threshold), p);
      }
      project_null(descent);
      descent *= opts.tv_step;
      x += descent;
    }
  }
  return x;
}

Tensor3 init_observation(const ObservationModel& model, const BackprojectionOptions& sci_opts) {
  model.validate();
  switch (model.kind) {
    case ProblemKind::TC:
    case ProblemKind::RTC:
      return interpolate_tubes(model.measurement, *model.mask);
    case ProblemKind::BS:
      return model.measurement;
    case ProblemKind::SCI:
      return tv_backprojection_init(model, sci_opts);
  }
  throw std::logic_error("unreachable");
}

}  // namespace ssnt

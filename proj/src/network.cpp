#include "ssnt/network.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ssnt/random.hpp"
#include "ssnt/tensor_ops.hpp"

namespace ssnt {

ActivationKind ActivationKind::leaky_relu(double slope) {
  if (!(slope > 0.0 && slope < 1.0)) throw std::invalid_argument("leaky relu slope must be in (0, 1)");
  return {Kind::LeakyReLU, slope};
}

std::string to_string(const ActivationKind& a) {
  switch (a.kind) {
    case ActivationKind::Kind::Identity: return "identity";
    case ActivationKind::Kind::ReLU: return "relu";
    case ActivationKind::Kind::LeakyReLU: {
      std::ostringstream os;
      os.precision(17);
      os << "leaky_relu:" << a.slope;
      return os.str();
    }
  }
  return "?";
}

ActivationKind parse_activation(const std::string& s) {
  if (s == "identity" || s == "linear") return ActivationKind::identity();
  if (s == "relu") return ActivationKind::relu();
  if (s == "leaky_relu" || s == "leakyrelu") return ActivationKind::leaky_relu();
  const std::string prefix = "leaky_relu:";
  if (s.rfind(prefix, 0) == 0) return ActivationKind::leaky_relu(std::stod(s.substr(prefix.size())));
  throw std::invalid_argument("unknown activation '" + s + "'");
}

std::string to_string(Regularizer r) {
  switch (r) {
    case Regularizer::LowRank: return "lowrank";
    case Regularizer::Sparse: return "sparse";
    case Regularizer::None: return "none";
  }
  return "?";
}

Regularizer parse_regularizer(const std::string& s) {
  if (s == "lowrank") return Regularizer::LowRank;
  if (s == "sparse") return Regularizer::Sparse;
  if (s == "none") return Regularizer::None;
  throw std::invalid_argument("unknown regularizer '" + s + "'");
}

Index NetworkParams::input_dim() const {
  if (f_layers.empty()) throw ShapeError("network has no f layers");
  return f_layers.front().spec.in_dim;
}

Index NetworkParams::transformed_dim() const {
  if (f_layers.empty()) throw ShapeError("network has no f layers");
  return f_layers.back().spec.out_dim;
}

Matrix& NetworkParams::weight(Index m) {
  return m < f_layers.size() ? f_layers[m].weight : g_layers.at(m - f_layers.size()).weight;
}

const Matrix& NetworkParams::weight(Index m) const {
  return m < f_layers.size() ? f_layers[m].weight : g_layers.at(m - f_layers.size()).weight;
}

namespace {

void check_chain(const std::vector<LayerSpec>& f, const std::vector<LayerSpec>& g) {
  if (f.empty() || g.empty()) throw ShapeError("f and g need at least one layer each");
  auto walk = [](const std::vector<LayerSpec>& layers, const char* name) {
    for (Index l = 0; l < layers.size(); ++l) {
      if (layers[l].in_dim == 0 || layers[l].out_dim == 0) {
        throw ShapeError(std::string(name) + " layer " + std::to_string(l) + " has a zero dimension");
      }
      if (l > 0 && layers[l].in_dim != layers[l - 1].out_dim) {
        throw ShapeError(std::string(name) + " layer " + std::to_string(l) + " expects " +
                         std::to_string(layers[l].in_dim) + " inputs, previous layer gives " +
                         std::to_string(layers[l - 1].out_dim));
      }
    }
  };
  walk(f, "f");
  walk(g, "g");
  if (g.front().in_dim != f.back().out_dim) throw ShapeError("g input width differs from f output width");
  if (g.back().out_dim != f.front().in_dim) throw ShapeError("g output width differs from f input width");
}

std::vector<LayerSpec> specs_of(const std::vector<Layer>& layers) {
  std::vector<LayerSpec> out;
  for (const auto& l : layers) out.push_back(l.spec);
  return out;
}

ForwardResult forward_layers(const Tensor3& t, const std::vector<Layer>& layers) {
  ForwardResult res;
  res.tape.reserve(layers.size());
  Tensor3 current = t;
  for (const auto& layer : layers) {
    if (current.n3() != layer.spec.in_dim) {
      throw ShapeError("layer expects third-mode width " + std::to_string(layer.spec.in_dim) +
                       ", got " + std::to_string(current.n3()));
    }
    LayerTape entry;
    entry.pre_activation = mode3_product(current, layer.weight);
    Tensor3 next = entry.pre_activation;
    if (layer.spec.activation.kind != ActivationKind::Kind::Identity) {
      for (auto& v : next.data()) v = layer.spec.activation.apply(v);
    }
    entry.input = std::move(current);
    res.tape.push_back(std::move(entry));
    current = std::move(next);
  }
  res.output = std::move(current);
  return res;
}

Tensor3 apply_layers(const Tensor3& t, const std::vector<Layer>& layers) {
  Tensor3 current = t;
  for (const auto& layer : layers) current = nofc3_forward(current, layer.weight, layer.spec.activation);
  return current;
}

/// Pulls a cotangent back through `layers`, writing weight gradients into
/// grads[offset + l]. Returns the cotangent with respect to the layers' input
/// unless `need_input_cotangent` is false.
Tensor3 backward_layers(const std::vector<Layer>& layers, const Tape& tape, Tensor3 cotangent,
                        std::vector<Matrix>& grads, Index offset, bool need_input_cotangent) {
  for (Index l = layers.size(); l-- > 0;) {
    const Layer& layer = layers[l];
    const LayerTape& entry = tape[l];
    if (layer.spec.activation.kind != ActivationKind::Kind::Identity) {
      for (Index n = 0; n < cotangent.size(); ++n) {
        cotangent[n] *= layer.spec.activation.derivative(entry.pre_activation[n]);
      }
    }
    grads[offset + l].noalias() = cotangent.slices_as_rows() * entry.input.slices_as_rows().transpose();
    if (l > 0 || need_input_cotangent) {
      Tensor3 upstream(entry.input.dims());
      upstream.slices_as_rows().noalias() = layer.weight.transpose() * cotangent.slices_as_rows();
      cotangent = std::move(upstream);
    }
  }
  return cotangent;
}

double regularizer_value(const Tensor3& transformed, const LossWeights& w) {
  if (w.regularizer == Regularizer::None || w.lambda == 0.0) return 0.0;
  double total = 0.0;
  if (w.regularizer == Regularizer::Sparse) return w.lambda * l1_norm(transformed);
  for (Index k = 0; k < transformed.n3(); ++k) total += nuclear_norm(Matrix(transformed.slice(k)));
  return w.lambda * total;
}

void check_tv(const TvCoupling& tv, const Dims& dims) {
  if (!tv.v1 || !tv.v2 || !tv.mult1 || !tv.mult2) throw std::invalid_argument("tv coupling is incomplete");
  for (const Tensor3* t : {tv.v1, tv.v2, tv.mult1, tv.mult2}) {
    if (!(t->dims() == dims)) throw ShapeError("tv coupling dims differ from reconstruction");
  }
  if (!(tv.beta > 0.0)) throw std::invalid_argument("beta must be positive");
}

/// D_p X - V_p + L_p / beta.
Tensor3 tv_residual(const Tensor3& x, int p, const TvCoupling& tv) {
  Tensor3 r = diff(x, p);
  const Tensor3& v = p == 1 ? *tv.v1 : *tv.v2;
  const Tensor3& mult = p == 1 ? *tv.mult1 : *tv.mult2;
  for (Index n = 0; n < r.size(); ++n) r[n] = r[n] - v[n] + mult[n] / tv.beta;
  return r;
}

void finish(LossBreakdown& loss) {
  loss.total = loss.l1_lowrank + loss.l2_fidelity + loss.tv_penalty;
  if (!std::isfinite(loss.total)) {
    std::ostringstream os;
    os << "non-finite loss: l1=" << loss.l1_lowrank << " l2=" << loss.l2_fidelity
       << " tv=" << loss.tv_penalty;
    throw NumericalError(os.str());
  }
}

}  // namespace

void NetworkParams::validate() const {
  check_chain(specs_of(f_layers), specs_of(g_layers));
  for (Index m = 0; m < layer_count(); ++m) {
    const Layer& layer = m < p() ? f_layers[m] : g_layers[m - p()];
    if (static_cast<Index>(layer.weight.rows()) != layer.spec.out_dim ||
        static_cast<Index>(layer.weight.cols()) != layer.spec.in_dim) {
      throw ShapeError("weight " + std::to_string(m + 1) + " shape does not match its layer spec");
    }
    if (!layer.weight.allFinite()) throw NumericalError("weight " + std::to_string(m + 1) + " is not finite");
  }
}

std::pair<std::vector<LayerSpec>, std::vector<LayerSpec>> layer_specs(const Architecture& arch) {
  if (arch.p == 0 || arch.q == 0) throw ShapeError("p and q must be at least 1");
  std::vector<LayerSpec> f, g;
  for (Index l = 0; l < arch.p; ++l) {
    f.push_back({l == 0 ? arch.n3 : arch.transformed_dim, arch.transformed_dim, arch.activation});
  }
  for (Index l = 0; l < arch.q; ++l) {
    g.push_back({arch.transformed_dim, l + 1 == arch.q ? arch.n3 : arch.transformed_dim, arch.activation});
  }
  return {f, g};
}

NetworkParams init_weights(const std::vector<LayerSpec>& f_specs, const std::vector<LayerSpec>& g_specs,
                           std::uint64_t seed) {
  check_chain(f_specs, g_specs);
  NetworkParams params;
  Rng rng(seed, 0x5757);
  auto make = [&](const LayerSpec& spec) {
    const double bound = std::sqrt(6.0 / static_cast<double>(spec.in_dim + spec.out_dim));
    Matrix w(static_cast<Eigen::Index>(spec.out_dim), static_cast<Eigen::Index>(spec.in_dim));
    // Row-major fill order keeps draws independent of Eigen's storage order.
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
    }
    return Layer{spec, std::move(w)};
  };
  for (const auto& s : f_specs) params.f_layers.push_back(make(s));
  for (const auto& s : g_specs) params.g_layers.push_back(make(s));
  return params;
}

NetworkParams init_weights(const Architecture& arch, std::uint64_t seed) {
  const auto [f, g] = layer_specs(arch);
  return init_weights(f, g, seed);
}

Tensor3 nofc3_forward(const Tensor3& t, const Matrix& w, const ActivationKind& act) {
  Tensor3 out = mode3_product(t, w);
  if (act.kind != ActivationKind::Kind::Identity) {
    for (auto& v : out.data()) v = act.apply(v);
  }
  return out;
}

ForwardResult forward_f(const Tensor3& t, const NetworkParams& params) {
  return forward_layers(t, params.f_layers);
}

ForwardResult forward_g(const Tensor3& t, const NetworkParams& params) {
  return forward_layers(t, params.g_layers);
}

Tensor3 transform(const Tensor3& t, const NetworkParams& params) {
  return apply_layers(t, params.f_layers);
}

Tensor3 reconstruct(const Tensor3& t, const NetworkParams& params) {
  return apply_layers(apply_layers(t, params.f_layers), params.g_layers);
}

NuclearTerm nuclear_value_and_subgrad(const Eigen::Ref<const Matrix>& m) {
  if (!m.allFinite()) throw NumericalError("nuclear_subgrad: non-finite input");
  NuclearTerm out{0.0, Matrix::Zero(m.rows(), m.cols())};
  if (m.size() == 0) return out;
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("nuclear_subgrad: SVD did not converge");
  const Eigen::VectorXd& s = svd.singularValues();
  out.value = s.sum();
  if (s.size() == 0 || s(0) <= 0.0) return out;
  Eigen::Index keep = 0;
  while (keep < s.size() && s(keep) > kRankTolerance * s(0)) ++keep;
  out.subgrad.noalias() = svd.matrixU().leftCols(keep) * svd.matrixV().leftCols(keep).transpose();
  return out;
}

Matrix nuclear_subgrad(const Eigen::Ref<const Matrix>& m) { return nuclear_value_and_subgrad(m).subgrad; }

LossAndGrad loss_and_grad(const Tensor3& input, const NetworkParams& params, const ObservationModel& model,
                          const LossWeights& weights, const TvCoupling* tv) {
  params.validate();
  LossAndGrad out;
  out.grads.resize(params.layer_count());

  ForwardResult f_pass = forward_f(input, params);
  ForwardResult g_pass = forward_g(f_pass.output, params);
  const Tensor3& transformed = f_pass.output;
  const Tensor3& x = g_pass.output;

  // Cotangent on X = g(f(input)).
  FidelityResult fid = fidelity(x, model);
  out.loss.l2_fidelity = fid.value;
  Tensor3 x_cot = std::move(fid.grad);
  if (tv) {
    check_tv(*tv, x.dims());
    for (int p = 1; p <= 2; ++p) {
      Tensor3 r = tv_residual(x, p, *tv);
      double sq = 0.0;
      for (double v : r.data()) sq += v * v;
      out.loss.tv_penalty += 0.5 * tv->beta * sq;
      r *= tv->beta;
      x_cot += diff_adjoint(r, p);
    }
  }

  Tensor3 f_cot = backward_layers(params.g_layers, g_pass.tape, std::move(x_cot), out.grads, params.p(), true);

  // Cotangent on f(input) from the regularizer.
  if (weights.lambda != 0.0 && weights.regularizer != Regularizer::None) {
    if (weights.regularizer == Regularizer::LowRank) {
      double nuclear = 0.0;
      for (Index k = 0; k < transformed.n3(); ++k) {
        NuclearTerm term = nuclear_value_and_subgrad(Matrix(transformed.slice(k)));
        nuclear += term.value;
        f_cot.slice(k) += weights.lambda * term.subgrad;
      }
      out.loss.l1_lowrank = weights.lambda * nuclear;
    } else {
      for (Index n = 0; n < transformed.size(); ++n) {
        const double v = transformed[n];
        f_cot[n] += weights.lambda * static_cast<double>((v > 0.0) - (v < 0.0));
      }
      out.loss.l1_lowrank = weights.lambda * l1_norm(transformed);
    }
  }

  backward_layers(params.f_layers, f_pass.tape, std::move(f_cot), out.grads, 0, false);
  finish(out.loss);
  for (const auto& g : out.grads) {
    if (!g.allFinite()) throw NumericalError("non-finite weight gradient");
  }
  out.output = std::move(g_pass.output);
  return out;
}

LossBreakdown evaluate_loss(const Tensor3& input, const NetworkParams& params, const ObservationModel& model,
                            const LossWeights& weights, const TvCoupling* tv) {
  const Tensor3 transformed = transform(input, params);
  const Tensor3 x = apply_layers(transformed, params.g_layers);
  LossBreakdown loss;
  loss.l1_lowrank = regularizer_value(transformed, weights);
  loss.l2_fidelity = fidelity(x, model).value;
  if (tv) {
    check_tv(*tv, x.dims());
    for (int p = 1; p <= 2; ++p) {
      const Tensor3 r = tv_residual(x, p, *tv);
      double sq = 0.0;
      for (double v : r.data()) sq += v * v;
      loss.tv_penalty += 0.5 * tv->beta * sq;
    }
  }
  finish(loss);
  return loss;
}

}  // namespace ssnt

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssnt/problems.hpp"
#include "ssnt/tensor.hpp"

namespace ssnt {

struct ActivationKind {
  enum class Kind { Identity, ReLU, LeakyReLU };

  Kind kind = Kind::LeakyReLU;
  double slope = 0.01;

  static ActivationKind identity() { return {Kind::Identity, 0.0}; }
  static ActivationKind relu() { return {Kind::ReLU, 0.0}; }
  static ActivationKind leaky_relu(double slope = 0.01);

  double apply(double z) const {
    switch (kind) {
      case Kind::Identity: return z;
      case Kind::ReLU: return z > 0.0 ? z : 0.0;
      case Kind::LeakyReLU: return z > 0.0 ? z : slope * z;
    }
    return z;
  }
  /// Derivative, taking the left branch at z = 0.
  double derivative(double z) const {
    switch (kind) {
      case Kind::Identity: return 1.0;
      case Kind::ReLU: return z > 0.0 ? 1.0 : 0.0;
      case Kind::LeakyReLU: return z > 0.0 ? 1.0 : slope;
    }
    return 1.0;
  }
  bool has_kink() const { return kind != Kind::Identity; }

  bool operator==(const ActivationKind&) const = default;
};

std::string to_string(const ActivationKind& a);
ActivationKind parse_activation(const std::string& s);

struct LayerSpec {
  Index in_dim = 1;
  Index out_dim = 1;
  ActivationKind activation;

  bool operator==(const LayerSpec&) const = default;
};

/// One NoFC3 layer: x -> act(x x_3 W), with W of shape out_dim x in_dim.
struct Layer {
  LayerSpec spec;
  Matrix weight;
};

/// Forward transform f (n3 -> n3_tilde) followed by the inverse-role
/// transform g (n3_tilde -> n3).
struct NetworkParams {
  std::vector<Layer> f_layers;
  std::vector<Layer> g_layers;

  Index p() const { return f_layers.size(); }
  Index q() const { return g_layers.size(); }
  Index layer_count() const { return f_layers.size() + g_layers.size(); }
  Index input_dim() const;
  Index transformed_dim() const;

  /// W_1 ... W_{p+q} in order.
  Matrix& weight(Index m);
  const Matrix& weight(Index m) const;

  /// Throws ShapeError unless f maps n3 -> n3_tilde and g maps back.
  void validate() const;
};

struct Architecture {
  Index n3 = 1;
  Index transformed_dim = 2;
  Index p = 2;
  Index q = 2;
  ActivationKind activation;
};

/// First f layer n3 -> n3_tilde, then n3_tilde -> n3_tilde; g mirrors it.
std::pair<std::vector<LayerSpec>, std::vector<LayerSpec>> layer_specs(const Architecture& arch);

/// Glorot-uniform weights in +-sqrt(6 / (in + out)), deterministic per seed.
NetworkParams init_weights(const std::vector<LayerSpec>& f_specs,
                           const std::vector<LayerSpec>& g_specs, std::uint64_t seed);
NetworkParams init_weights(const Architecture& arch, std::uint64_t seed);

Tensor3 nofc3_forward(const Tensor3& t, const Matrix& w, const ActivationKind& act);

/// Values cached by the forward pass for reverse mode.
struct LayerTape {
  Tensor3 input;
  Tensor3 pre_activation;
};
using Tape = std::vector<LayerTape>;

struct ForwardResult {
  Tensor3 output;
  Tape tape;
};

ForwardResult forward_f(const Tensor3& t, const NetworkParams& params);
ForwardResult forward_g(const Tensor3& t, const NetworkParams& params);
/// g(f(t)) without a tape.
Tensor3 reconstruct(const Tensor3& t, const NetworkParams& params);
/// f(t) without a tape.
Tensor3 transform(const Tensor3& t, const NetworkParams& params);

/// U~ V~^T over singular values above kRankTolerance * sigma_max.
Matrix nuclear_subgrad(const Eigen::Ref<const Matrix>& m);

struct NuclearTerm {
  double value = 0.0;
  Matrix subgrad;
};
NuclearTerm nuclear_value_and_subgrad(const Eigen::Ref<const Matrix>& m);

/// What L1 penalizes on the transformed slices.
enum class Regularizer { LowRank, Sparse, None };
std::string to_string(Regularizer r);
Regularizer parse_regularizer(const std::string& s);

struct LossBreakdown {
  double l1_lowrank = 0.0;
  double l2_fidelity = 0.0;
  double tv_penalty = 0.0;
  double total = 0.0;
};

struct LossWeights {
  double lambda = 0.0;
  Regularizer regularizer = Regularizer::LowRank;
};

/// Quadratic coupling of the f,g sub-problem:
/// beta/2 * sum_p || D_p X - V_p + L_p / beta ||_F^2.
struct TvCoupling {
  const Tensor3* v1 = nullptr;
  const Tensor3* v2 = nullptr;
  const Tensor3* mult1 = nullptr;
  const Tensor3* mult2 = nullptr;
  double beta = 1.0;
};

struct LossAndGrad {
  LossBreakdown loss;
  /// dL/dW_m for m = 1..p+q.
  std::vector<Matrix> grads;
  /// g(f(input)).
  Tensor3 output;
};

/// Loss and exact reverse-mode weight gradients. `input` is Init(O), the
/// tensor the network is applied to; the nuclear term is back-propagated
/// through its subgradient.
LossAndGrad loss_and_grad(const Tensor3& input, const NetworkParams& params,
                          const ObservationModel& model, const LossWeights& weights,
                          const TvCoupling* tv = nullptr);

/// Loss only (forward pass), used for finite differences and monitoring.
LossBreakdown evaluate_loss(const Tensor3& input, const NetworkParams& params,
                            const ObservationModel& model, const LossWeights& weights,
                            const TvCoupling* tv = nullptr);

}  // namespace ssnt

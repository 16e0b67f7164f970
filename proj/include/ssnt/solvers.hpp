#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ssnt/network.hpp"
#include "ssnt/problems.hpp"

namespace ssnt {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct SolverConfig {
  double lambda = 0.0;  // low-rank weight
  double tau = 0.0;     // TV weight
  double beta = 1.0;    // penalty parameter
  int t_max = 7000;
  int inner_steps = 1;  // Adam steps per outer TV iteration
  AdamConfig adam;
  std::uint64_t seed = 0;
  Index transformed_dim = 2;
  Index p = 2;
  Index q = 2;
  ActivationKind activation;
  Regularizer regularizer = Regularizer::LowRank;
  /// Opt-in stop when the relative loss change over `plateau_window`
  /// iterations falls below this value; 0 disables it.
  double plateau_tol = 0.0;
  int plateau_window = 100;
  BackprojectionOptions sci_init;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
  Architecture architecture(Index n3) const;
  LossWeights loss_weights() const { return {lambda, regularizer}; }
};

/// Per-kind defaults with N = n1*n2*n3: lambda = 1e-7 N (TC, RTC), 1e-3 N (BS),
/// 1e-5 N (SCI); tau = 0.01 N; beta = 1; p = q = 2; n3_tilde = 2 n3; t_max = 7000.
SolverConfig default_config(ProblemKind kind, Dims dims);

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long step = 0;

  static AdamState zeros_like(const NetworkParams& params);
};

/// One bias-corrected Adam update applied in place. Throws NumericalError on
/// a non-finite gradient and ShapeError when shapes disagree.
void adam_step(NetworkParams& params, const std::vector<Matrix>& grads, AdamState& state,
               const AdamConfig& cfg);

struct Diagnostics {
  int iteration = 0;
  double rel_err_weights = 0.0;
  double rel_err_v = 0.0;
  LossBreakdown loss;
};

struct AdmmState {
  Tensor3 v1, v2;
  Tensor3 mult1, mult2;
  int iter = 0;
  std::vector<Diagnostics> history;

  TvCoupling coupling(double beta) const { return {&v1, &v2, &mult1, &mult2, beta}; }
};

/// Soft_{tau/beta}(D_p x + L_p / beta) for p = 1, 2.
std::pair<Tensor3, Tensor3> v_update(const Tensor3& x, const AdmmState& admm, const SolverConfig& cfg);
/// L_p + beta (D_p x - V_p) for p = 1, 2, using the V_p held in `admm`.
std::pair<Tensor3, Tensor3> multiplier_update(const AdmmState& admm, const Tensor3& x, const SolverConfig& cfg);

/// Sum over weights of ||W_new - W_old||_F / ||W_old||_F, denominators floored at 1e-12.
double relative_change(const NetworkParams& before, const NetworkParams& after);
double relative_change(const Tensor3& before, const Tensor3& after);

struct SolveResult {
  Recovery recovery;
  /// g(f(Init(O))) before assembly.
  Tensor3 raw;
  /// Init(O), the tensor the network acts on.
  Tensor3 input;
  NetworkParams params;
  std::vector<Diagnostics> history;
  std::vector<std::string> warnings;
};

struct SolveHooks {
  std::function<void(const Diagnostics&)> on_iteration;
  /// Replaces the seeded Glorot initialization.
  const NetworkParams* initial_params = nullptr;
};

/// Adam on lambda * sum_k ||f(X0)^(k)||_* + L(g(f(X0)), O) for t_max steps.
SolveResult solve_ssnt(const ObservationModel& model, const SolverConfig& cfg, const SolveHooks& hooks = {});

/// The TV-regularized solver: alternating f,g / V / multiplier updates.
SolveResult solve_ssnt_tv(const ObservationModel& model, const SolverConfig& cfg,
                          const SolveHooks& hooks = {});

}  // namespace ssnt

#include "ssnt/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ssnt/tensor_ops.hpp"

namespace ssnt {

namespace {

constexpr double kDenominatorFloor = 1e-12;

bool finite(double v) { return std::isfinite(v); }

bool plateaued(const std::vector<Diagnostics>& history, const SolverConfig& cfg) {
  if (cfg.plateau_tol <= 0.0) return false;
  const auto window = static_cast<std::size_t>(cfg.plateau_window);
  if (history.size() <= window) return false;
  const double then = history[history.size() - 1 - window].loss.total;
  const double now = history.back().loss.total;
  return std::abs(then - now) / std::max(std::abs(then), kDenominatorFloor) < cfg.plateau_tol;
}

NetworkParams initial_network(const SolverConfig& cfg, Index n3, const SolveHooks& hooks) {
  NetworkParams params = hooks.initial_params ? *hooks.initial_params
                                              : init_weights(cfg.architecture(n3), cfg.seed);
  params.validate();
  if (params.input_dim() != n3) throw ShapeError("initial network input width differs from n3");
  return params;
}

void finalize(SolveResult& res, const ObservationModel& model, const SolverConfig& cfg,
              const LossBreakdown* initial_loss, const TvCoupling* tv) {
  res.raw = reconstruct(res.input, res.params);
  require_finite(res.raw, "reconstruction");
  if (initial_loss) {
    const LossBreakdown final_loss = evaluate_loss(res.input, res.params, model, cfg.loss_weights(), tv);
    if (final_loss.total > initial_loss->total) {
      std::ostringstream os;
      os.precision(17);
      os << "final loss " << final_loss.total << " exceeds initial loss " << initial_loss->total;
      res.warnings.push_back(os.str());
    }
  }
  res.recovery = assemble(res.raw, model);
}

}  // namespace

void SolverConfig::validate() const {
  for (double v : {lambda, tau, beta, adam.lr, adam.beta1, adam.beta2, adam.eps, plateau_tol}) {
    if (!finite(v)) throw std::invalid_argument("solver config contains a non-finite value");
  }
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  if (tau < 0.0) throw std::invalid_argument("tau must be >= 0");
  if (beta <= 0.0) throw std::invalid_argument("beta must be > 0");
  if (t_max < 0) throw std::invalid_argument("t_max must be >= 0");
  if (inner_steps < 1) throw std::invalid_argument("inner_steps must be >= 1");
  if (adam.lr <= 0.0) throw std::invalid_argument("learning rate must be > 0");
  if (adam.beta1 < 0.0 || adam.beta1 >= 1.0 || adam.beta2 < 0.0 || adam.beta2 >= 1.0) {
    throw std::invalid_argument("adam betas must be in [0, 1)");
  }
  if (adam.eps <= 0.0) throw std::invalid_argument("adam eps must be > 0");
  if (transformed_dim == 0 || p == 0 || q == 0) throw std::invalid_argument("architecture sizes must be >= 1");
  if (plateau_window < 1) throw std::invalid_argument("plateau window must be >= 1");
}

Architecture SolverConfig::architecture(Index n3) const {
  return Architecture{n3, transformed_dim, p, q, activation};
}

SolverConfig default_config(ProblemKind kind, Dims dims) {
  if (dims.numel() == 0) throw std::invalid_argument("dims must be positive");
  const double n = static_cast<double>(dims.numel());
  SolverConfig cfg;
  switch (kind) {
    case ProblemKind::TC:
    case ProblemKind::RTC: cfg.lambda = n * 1e-7; break;
    case ProblemKind::BS: cfg.lambda = n * 1e-3; break;
    case ProblemKind::SCI: cfg.lambda = n * 1e-5; break;
  }
  cfg.tau = 0.01 * n;
  cfg.beta = 1.0;
  cfg.p = 2;
  cfg.q = 2;
  cfg.transformed_dim = 2 * dims.n3;
  cfg.t_max = 7000;
  return cfg;
}

AdamState AdamState::zeros_like(const NetworkParams& params) {
  AdamState s;
  for (Index m = 0; m < params.layer_count(); ++m) {
    const Matrix& w = params.weight(m);
    s.m.push_back(Matrix::Zero(w.rows(), w.cols()));
    s.v.push_back(Matrix::Zero(w.rows(), w.cols()));
  }
  return s;
}

void adam_step(NetworkParams& params, const std::vector<Matrix>& grads, AdamState& state, const AdamConfig& cfg) {
  const Index count = params.layer_count();
  if (grads.size() != count || state.m.size() != count || state.v.size() != count) {
    throw ShapeError("adam_step: parameter, gradient and state counts differ");
  }
  for (Index i = 0; i < count; ++i) {
    const Matrix& w = params.weight(i);
    if (grads[i].rows() != w.rows() || grads[i].cols() != w.cols() || state.m[i].rows() != w.rows() ||
        state.m[i].cols() != w.cols()) {
      throw ShapeError("adam_step: shape mismatch for weight " + std::to_string(i + 1));
    }
    if (!grads[i].allFinite()) throw NumericalError("adam_step: non-finite gradient for weight " + std::to_string(i + 1));
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (Index i = 0; i < count; ++i) {
    Matrix& w = params.weight(i);
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i].cwiseAbs2();
    const Matrix m_hat = state.m[i] / c1;
    const Matrix v_hat = state.v[i] / c2;
    w.array() -= cfg.lr * m_hat.array() / (v_hat.array().sqrt() + cfg.eps);
  }
}

std::pair<Tensor3, Tensor3> v_update(const Tensor3& x, const AdmmState& admm, const SolverConfig& cfg) {
  if (!(cfg.beta > 0.0)) throw std::invalid_argument("beta must be > 0");
  const double threshold = cfg.tau / cfg.beta;
  auto one = [&](int p, const Tensor3& mult) {
    Tensor3 target = diff(x, p);
    if (!(mult.dims() == target.dims())) throw ShapeError("v_update: multiplier dims differ");
    for (Index n = 0; n < target.size(); ++n) target[n] += mult[n] / cfg.beta;
    return soft_threshold(target, threshold);
  };
  return {one(1, admm.mult1), one(2, admm.mult2)};
}

std::pair<Tensor3, Tensor3> multiplier_update(const AdmmState& admm, const Tensor3& x, const SolverConfig& cfg) {
  auto one = [&](int p, const Tensor3& v, const Tensor3& mult) {
    const Tensor3 d = diff(x, p);
    if (!(v.dims() == d.dims()) || !(mult.dims() == d.dims())) throw ShapeError("multiplier_update: dims differ");
    Tensor3 out(mult.dims());
    for (Index n = 0; n < out.size(); ++n) out[n] = mult[n] + cfg.beta * (d[n] - v[n]);
    return out;
  };
  return {one(1, admm.v1, admm.mult1), one(2, admm.v2, admm.mult2)};
}

double relative_change(const NetworkParams& before, const NetworkParams& after) {
  if (before.layer_count() != after.layer_count()) throw ShapeError("relative_change: layer counts differ");
  double total = 0.0;
  for (Index m = 0; m < before.layer_count(); ++m) {
    total += (after.weight(m) - before.weight(m)).norm() / std::max(before.weight(m).norm(), kDenominatorFloor);
  }
  return total;
}

double relative_change(const Tensor3& before, const Tensor3& after) {
  return fro_norm(after - before) / std::max(fro_norm(before), kDenominatorFloor);
}

SolveResult solve_ssnt(const ObservationModel& model, const SolverConfig& cfg, const SolveHooks& hooks) {
  cfg.validate();
  model.validate();
  SolveResult res;
  res.input = init_observation(model, cfg.sci_init);
  res.params = initial_network(cfg, res.input.n3(), hooks);
  AdamState adam = AdamState::zeros_like(res.params);
  const LossWeights weights = cfg.loss_weights();

  LossBreakdown initial{};
  for (int t = 1; t <= cfg.t_max; ++t) {
    LossAndGrad lg = loss_and_grad(res.input, res.params, model, weights);
    if (t == 1) initial = lg.loss;
    const NetworkParams before = res.params;
    adam_step(res.params, lg.grads, adam, cfg.adam);
    Diagnostics d{t, relative_change(before, res.params), 0.0, lg.loss};
    res.history.push_back(d);
    if (hooks.on_iteration) hooks.on_iteration(d);
    if (plateaued(res.history, cfg)) break;
  }
  finalize(res, model, cfg, cfg.t_max > 0 ? &initial : nullptr, nullptr);
  return res;
}

SolveResult solve_ssnt_tv(const ObservationModel& model, const SolverConfig& cfg, const SolveHooks& hooks) {
  cfg.validate();
  model.validate();
  SolveResult res;
  res.input = init_observation(model, cfg.sci_init);
  res.params = initial_network(cfg, res.input.n3(), hooks);
  AdamState adam = AdamState::zeros_like(res.params);
  const LossWeights weights = cfg.loss_weights();

  AdmmState admm;
  admm.v1 = diff(res.input, 1);
  admm.v2 = diff(res.input, 2);
  admm.mult1 = Tensor3(res.input.dims());
  admm.mult2 = Tensor3(res.input.dims());

  LossBreakdown initial{};
  for (int t = 1; t <= cfg.t_max; ++t) {
    const NetworkParams before = res.params;
    const TvCoupling coupling = admm.coupling(cfg.beta);
    LossBreakdown last{};
    for (int s = 0; s < cfg.inner_steps; ++s) {
      LossAndGrad lg = loss_and_grad(res.input, res.params, model, weights, &coupling);
      if (t == 1 && s == 0) initial = lg.loss;
      last = lg.loss;
      adam_step(res.params, lg.grads, adam, cfg.adam);
    }
    const Tensor3 x = reconstruct(res.input, res.params);
    auto [v1, v2] = v_update(x, admm, cfg);
    const double rel_v = relative_change(admm.v1, v1) + relative_change(admm.v2, v2);
    admm.v1 = std::move(v1);
    admm.v2 = std::move(v2);
    auto [m1, m2] = multiplier_update(admm, x, cfg);
    admm.mult1 = std::move(m1);
    admm.mult2 = std::move(m2);
    admm.iter = t;

    Diagnostics d{t, relative_change(before, res.params), rel_v, last};
    admm.history.push_back(d);
    res.history.push_back(d);
    if (hooks.on_iteration) hooks.on_iteration(d);
    if (plateaued(res.history, cfg)) break;
  }
  // The final loss comparison uses the last coupling state.
  const TvCoupling coupling = admm.coupling(cfg.beta);
  finalize(res, model, cfg, cfg.t_max > 0 ? &initial : nullptr, &coupling);
  return res;
}

}  // namespace ssnt

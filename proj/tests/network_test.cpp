#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ssnt/network.hpp"
#include "ssnt/problems.hpp"
#include "ssnt/tensor_ops.hpp"
#include "support.hpp"

using namespace ssnt;
using namespace ssnt::testing;

namespace {

NetworkParams identity_net(Index n3, Index p, Index q, ActivationKind act) {
  std::vector<LayerSpec> f(p, LayerSpec{n3, n3, act}), g(q, LayerSpec{n3, n3, act});
  NetworkParams params = init_weights(f, g, 0);
  for (Index m = 0; m < params.layer_count(); ++m) params.weight(m).setIdentity();
  return params;
}

ObservationModel full_tc(const Tensor3& o) {
  ObservationModel m;
  m.kind = ProblemKind::TC;
  m.mask = Tensor3(o.dims(), 1.0);
  m.measurement = o;
  return m;
}

// ------------------------------------------------------------ activations

TEST(Activation, ClosedForms) {
  const auto leaky = ActivationKind::leaky_relu(0.01);
  EXPECT_DOUBLE_EQ(leaky.apply(-1.0), -0.01);
  EXPECT_DOUBLE_EQ(leaky.apply(2.0), 2.0);
  EXPECT_EQ(ActivationKind::relu().apply(-3.0), 0.0);
  EXPECT_EQ(ActivationKind::identity().apply(-3.0), -3.0);
  EXPECT_DOUBLE_EQ(leaky.derivative(-1.0), 0.01);
  EXPECT_EQ(ActivationKind::relu().derivative(0.5), 1.0);
}

TEST(Activation, ParseAndPrint) {
  EXPECT_EQ(parse_activation("identity"), ActivationKind::identity());
  EXPECT_EQ(parse_activation("linear"), ActivationKind::identity());
  EXPECT_EQ(parse_activation("relu"), ActivationKind::relu());
  EXPECT_EQ(parse_activation("leaky_relu"), ActivationKind::leaky_relu(0.01));
  EXPECT_EQ(parse_activation("leaky_relu:0.2"), ActivationKind::leaky_relu(0.2));
  EXPECT_EQ(parse_activation(to_string(ActivationKind::leaky_relu(0.3))), ActivationKind::leaky_relu(0.3));
  EXPECT_THROW(parse_activation("tanh"), std::invalid_argument);
  EXPECT_THROW(ActivationKind::leaky_relu(1.5), std::invalid_argument);
  EXPECT_THROW(ActivationKind::leaky_relu(0.0), std::invalid_argument);
}

// ------------------------------------------------------------ init_weights

TEST(InitWeights, Deterministic) {
  const Architecture arch{6, 12, 2, 2, ActivationKind::leaky_relu()};
  const NetworkParams a = init_weights(arch, 42), b = init_weights(arch, 42), c = init_weights(arch, 43);
  for (Index m = 0; m < a.layer_count(); ++m) EXPECT_EQ(a.weight(m), b.weight(m));
  EXPECT_NE(a.weight(0), c.weight(0));
}

TEST(InitWeights, GlorotBound) {
  const NetworkParams p = init_weights({LayerSpec{3, 6, {}}}, {LayerSpec{6, 3, {}}}, 5);
  const double bound = std::sqrt(6.0 / 9.0);
  for (Index m = 0; m < 2; ++m) EXPECT_LE(p.weight(m).cwiseAbs().maxCoeff(), bound);
  EXPECT_EQ(p.weight(0).rows(), 6);
  EXPECT_EQ(p.weight(0).cols(), 3);
}

TEST(InitWeights, MonteCarloMeanIsZero) {
  const NetworkParams p = init_weights({LayerSpec{100, 100, {}}}, {LayerSpec{100, 100, {}}}, 9);
  const Matrix& w = p.weight(0);
  const double bound = std::sqrt(6.0 / 200.0);
  const double n = static_cast<double>(w.size());
  const double se = bound / std::sqrt(3.0) / std::sqrt(n);
  EXPECT_LT(std::abs(w.mean()), 3.0 * se);
  // Variance of U(-b, b) is b^2 / 3.
  const double var = (w.array() - w.mean()).square().mean();
  EXPECT_NEAR(var, bound * bound / 3.0, 0.05 * bound * bound / 3.0);
}

TEST(InitWeights, RejectsBrokenChain) {
  EXPECT_THROW(init_weights({LayerSpec{3, 6, {}}}, {LayerSpec{5, 3, {}}}, 0), ShapeError);
  EXPECT_THROW(init_weights({LayerSpec{3, 6, {}}}, {LayerSpec{6, 4, {}}}, 0), ShapeError);
  EXPECT_THROW(init_weights({}, {LayerSpec{6, 4, {}}}, 0), ShapeError);
}

TEST(Architecture, LayerSpecsChain) {
  const auto [f, g] = layer_specs(Architecture{5, 10, 3, 2, ActivationKind::relu()});
  ASSERT_EQ(f.size(), 3u);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(f[0].in_dim, 5u);
  EXPECT_EQ(f[0].out_dim, 10u);
  EXPECT_EQ(f[2].out_dim, 10u);
  EXPECT_EQ(g[0].in_dim, 10u);
  EXPECT_EQ(g[1].out_dim, 5u);
}

// ------------------------------------------------------------ forward

TEST(Forward, Nofc3IdentityAndLeaky) {
  std::mt19937_64 gen(1);
  const Tensor3 t = random_tensor(Dims{3, 2, 4}, gen);
  EXPECT_EQ(nofc3_forward(t, Matrix::Identity(4, 4), ActivationKind::identity()), t);
  const Tensor3 neg(Dims{1, 1, 2}, -1.0);
  const Tensor3 out = nofc3_forward(neg, Matrix::Identity(2, 2), ActivationKind::leaky_relu(0.01));
  EXPECT_DOUBLE_EQ(out[0], -0.01);
  EXPECT_DOUBLE_EQ(out[1], -0.01);
  EXPECT_THROW(nofc3_forward(t, Matrix::Identity(3, 3), ActivationKind::identity()), ShapeError);
}

TEST(Forward, Nofc3MatchesLoopOracle) {
  std::mt19937_64 gen(2);
  const Tensor3 t = random_tensor(Dims{3, 4, 5}, gen);
  const Matrix w = random_matrix(7, 5, gen);
  const auto act = ActivationKind::leaky_relu(0.1);
  const Tensor3 out = nofc3_forward(t, w, act);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 4; ++j)
      for (Index r = 0; r < 7; ++r) {
        double z = 0.0;
        for (Index k = 0; k < 5; ++k) z += w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) * t(i, j, k);
        EXPECT_NEAR(out(i, j, r), z > 0 ? z : 0.1 * z, 1e-14);
      }
}

TEST(Forward, SingleIdentityLayerIsIdentity) {
  std::mt19937_64 gen(3);
  const Tensor3 t = random_tensor(Dims{3, 3, 4}, gen);
  const NetworkParams p = identity_net(4, 1, 1, ActivationKind::identity());
  EXPECT_EQ(forward_f(t, p).output, t);
  EXPECT_EQ(reconstruct(t, p), t);
}

TEST(Forward, LinearCollapse) {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor3 t = random_tensor(Dims{4, 3, 5}, gen);
    const NetworkParams p = init_weights(Architecture{5, 8, 3, 2, ActivationKind::identity()}, gen());
    const Matrix wf = p.weight(2) * p.weight(1) * p.weight(0);
    EXPECT_LT(rel_diff(transform(t, p), mode3_product(t, wf)), 1e-10);
    const Matrix wall = p.weight(4) * p.weight(3) * wf;
    EXPECT_LT(rel_diff(reconstruct(t, p), mode3_product(t, wall)), 1e-10);
  }
}

TEST(Forward, MatchesSequentialOracleAndTape) {
  std::mt19937_64 gen(5);
  const Tensor3 t = random_tensor(Dims{3, 4, 5}, gen);
  const NetworkParams p = init_weights(Architecture{5, 6, 3, 3, ActivationKind::leaky_relu(0.05)}, 11);
  Tensor3 x = t;
  const ForwardResult f = forward_f(t, p);
  ASSERT_EQ(f.tape.size(), 3u);
  for (Index m = 0; m < 3; ++m) {
    EXPECT_EQ(f.tape[m].input, x);
    EXPECT_EQ(f.tape[m].pre_activation, mode3_product(x, p.weight(m)));
    x = nofc3_forward(x, p.weight(m), p.f_layers[m].spec.activation);
  }
  EXPECT_EQ(f.output, x);
  const ForwardResult g = forward_g(x, p);
  for (Index m = 3; m < 6; ++m) x = nofc3_forward(x, p.weight(m), p.g_layers[m - 3].spec.activation);
  EXPECT_EQ(g.output, x);
  EXPECT_THROW(forward_f(random_tensor(Dims{3, 4, 4}, gen), p), ShapeError);
}

TEST(Forward, PositiveHomogeneity) {
  std::mt19937_64 gen(6);
  const Tensor3 t = random_tensor(Dims{3, 3, 4}, gen);
  for (const auto act : {ActivationKind::relu(), ActivationKind::leaky_relu(0.2), ActivationKind::identity()}) {
    const NetworkParams p = init_weights(Architecture{4, 8, 2, 2, act}, 3);
    for (double c : {0.5, 2.0, 7.0}) EXPECT_LT(rel_diff(reconstruct(t * c, p), reconstruct(t, p) * c), 1e-14);
  }
}

// ------------------------------------------------------------ nuclear subgradient

TEST(NuclearSubgrad, Identity) {
  EXPECT_LT((nuclear_subgrad(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)).norm(), 1e-14);
}

TEST(NuclearSubgrad, ZeroMatrix) { EXPECT_EQ(nuclear_subgrad(Matrix::Zero(3, 4)), Matrix::Zero(3, 4)); }

TEST(NuclearSubgrad, TruncatesNumericalZeros) {
  std::mt19937_64 gen(7);
  const Matrix u = random_orthogonal(5, gen), v = random_orthogonal(4, gen);
  Eigen::VectorXd s(4);
  s << 3.0, 1.0, 1e-12, 0.0;
  const Matrix m = u.leftCols(4) * s.asDiagonal() * v.transpose();
  const Matrix expected = u.leftCols(2) * v.leftCols(2).transpose();
  EXPECT_LT((nuclear_subgrad(m) - expected).norm(), 1e-8);
}

TEST(NuclearSubgrad, DirectionalDerivative) {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix m = random_matrix(5, 4, gen), h = random_matrix(5, 4, gen);
    const double step = 1e-6;
    const double fd = (nuclear_norm(Matrix(m + step * h)) - nuclear_norm(Matrix(m - step * h))) / (2 * step);
    const double analytic = (nuclear_subgrad(m).array() * h.array()).sum();
    EXPECT_NEAR(fd, analytic, 1e-5 * std::abs(analytic));
  }
}

TEST(NuclearSubgrad, ValueMatchesNorm) {
  std::mt19937_64 gen(9);
  const Matrix m = random_matrix(4, 6, gen);
  EXPECT_NEAR(nuclear_value_and_subgrad(m).value, nuclear_norm(m), 1e-12);
}

// ------------------------------------------------------------ loss and gradients

TEST(Loss, QuadraticGradientThroughIdentityNet) {
  std::mt19937_64 gen(10);
  const Tensor3 o = random_tensor(Dims{3, 4, 5}, gen);
  const Tensor3 x0 = random_tensor(Dims{3, 4, 5}, gen);
  const NetworkParams p = identity_net(5, 1, 1, ActivationKind::identity());
  const LossAndGrad lg = loss_and_grad(x0, p, full_tc(o), LossWeights{0.0, Regularizer::LowRank});
  EXPECT_EQ(lg.output, x0);
  // X = W2 W1 X0 along mode 3, so dL/dW2 = unfold(2 (X - O)) unfold(W1 X0)^T and likewise for W1.
  const Matrix r = unfold3((x0 - o) * 2.0), u0 = unfold3(x0);
  EXPECT_LT((lg.grads[1] - r * u0.transpose()).norm(), 1e-12);
  EXPECT_LT((lg.grads[0] - r * u0.transpose()).norm(), 1e-12);
  EXPECT_NEAR(lg.loss.l2_fidelity, std::pow(fro_norm(x0 - o), 2), 1e-12);
  EXPECT_EQ(lg.loss.l1_lowrank, 0.0);
}

TEST(Loss, ZeroWeightsWithRelu) {
  std::mt19937_64 gen(11);
  const Tensor3 o = random_tensor(Dims{3, 3, 4}, gen, 0.0, 1.0);
  NetworkParams p = init_weights(Architecture{4, 8, 2, 2, ActivationKind::relu()}, 1);
  for (Index m = 0; m < p.layer_count(); ++m) p.weight(m).setZero();
  EXPECT_EQ(fro_norm(transform(o, p)), 0.0);
  const LossBreakdown l = evaluate_loss(o, p, full_tc(o), LossWeights{1.0, Regularizer::LowRank});
  EXPECT_EQ(l.l1_lowrank, 0.0);
  EXPECT_NEAR(l.l2_fidelity, std::pow(fro_norm(o), 2), 1e-12);
}

TEST(Loss, BreakdownSumsAndIsNonNegative) {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor3 o = random_tensor(Dims{4, 3, 3}, gen, 0.0, 1.0);
    const NetworkParams p = init_weights(Architecture{3, 6, 2, 2, ActivationKind::leaky_relu()}, gen());
    const Tensor3 v1 = random_tensor(o.dims(), gen), v2 = random_tensor(o.dims(), gen);
    const Tensor3 m1 = random_tensor(o.dims(), gen), m2 = random_tensor(o.dims(), gen);
    const TvCoupling tv{&v1, &v2, &m1, &m2, 1.3};
    const LossBreakdown l = evaluate_loss(o, p, full_tc(o), LossWeights{0.3, Regularizer::LowRank}, &tv);
    EXPECT_GE(l.l1_lowrank, 0.0);
    EXPECT_GE(l.tv_penalty, 0.0);
    EXPECT_DOUBLE_EQ(l.total, l.l1_lowrank + l.l2_fidelity + l.tv_penalty);
    const LossAndGrad lg = loss_and_grad(o, p, full_tc(o), LossWeights{0.3, Regularizer::LowRank}, &tv);
    EXPECT_DOUBLE_EQ(lg.loss.total, l.total);
  }
}

TEST(Loss, Deterministic) {
  std::mt19937_64 gen(13);
  const Tensor3 o = random_tensor(Dims{5, 4, 3}, gen, 0.0, 1.0);
  const NetworkParams p = init_weights(Architecture{3, 6, 2, 2, ActivationKind::leaky_relu()}, 4);
  const LossAndGrad a = loss_and_grad(o, p, full_tc(o), LossWeights{0.2, Regularizer::LowRank});
  const LossAndGrad b = loss_and_grad(o, p, full_tc(o), LossWeights{0.2, Regularizer::LowRank});
  EXPECT_EQ(a.loss.total, b.loss.total);
  for (Index m = 0; m < a.grads.size(); ++m) EXPECT_EQ(a.grads[m], b.grads[m]);
}

double central_fd(const Tensor3& x0, NetworkParams p, const ObservationModel& model, const LossWeights& w, Index m,
                  Eigen::Index e, double h) {
  const double w0 = p.weight(m).data()[e];
  p.weight(m).data()[e] = w0 + h;
  const double up = evaluate_loss(x0, p, model, w).total;
  p.weight(m).data()[e] = w0 - h;
  const double down = evaluate_loss(x0, p, model, w).total;
  return (up - down) / (2 * h);
}

void check_gradients(const Tensor3& x0, const NetworkParams& p, const ObservationModel& model, const LossWeights& w) {
  const LossAndGrad lg = loss_and_grad(x0, p, model, w);
  for (Index m = 0; m < p.layer_count(); ++m) {
    for (Eigen::Index e = 0; e < p.weight(m).size(); ++e) {
      const double fd = central_fd(x0, p, model, w, m, e, 1e-6);
      EXPECT_NEAR(lg.grads[m].data()[e], fd, 1e-5 * std::max({std::abs(fd), 1.0})) << "layer " << m << " entry " << e;
    }
  }
}

TEST(Loss, GradientMatchesFiniteDifferencesSmoothNet) {
  // Identity activations keep the loss smooth in the weights away from
  // singular-value crossings, so plain central differences apply.
  std::mt19937_64 gen(14);
  const Tensor3 truth = random_tensor(Dims{4, 5, 6}, gen, 0.0, 1.0);
  ObservationModel model = full_tc(truth);
  model.mask = random_mask(truth.dims(), 0.6, gen);
  model.measurement = hadamard(*model.mask, truth);
  const NetworkParams p = init_weights(Architecture{6, 8, 2, 2, ActivationKind::identity()}, 21);
  check_gradients(random_tensor(truth.dims(), gen, 0.0, 1.0), p, model, LossWeights{0.3, Regularizer::LowRank});
}

TEST(Loss, GradientMatchesFiniteDifferencesSci) {
  std::mt19937_64 gen(15);
  const Tensor3 truth = random_tensor(Dims{4, 4, 3}, gen, 0.0, 1.0);
  ObservationModel model;
  model.kind = ProblemKind::SCI;
  model.mask = random_mask(truth.dims(), 0.5, gen);
  model.measurement = sci_measure(truth, *model.mask);
  const NetworkParams p = init_weights(Architecture{3, 6, 2, 2, ActivationKind::identity()}, 22);
  check_gradients(random_tensor(truth.dims(), gen, 0.0, 1.0), p, model, LossWeights{0.1, Regularizer::LowRank});
}

TEST(Loss, SparseRegularizerGradient) {
  std::mt19937_64 gen(16);
  const Tensor3 o = random_tensor(Dims{3, 4, 3}, gen, 0.0, 1.0);
  const NetworkParams p = init_weights(Architecture{3, 5, 2, 2, ActivationKind::identity()}, 23);
  const LossWeights w{0.25, Regularizer::Sparse};
  const LossBreakdown l = evaluate_loss(o, p, full_tc(o), w);
  EXPECT_NEAR(l.l1_lowrank, 0.25 * l1_norm(transform(o, p)), 1e-12);
  check_gradients(o, p, full_tc(o), w);
}

TEST(Loss, NoneRegularizerDropsTerm) {
  std::mt19937_64 gen(17);
  const Tensor3 o = random_tensor(Dims{3, 4, 3}, gen, 0.0, 1.0);
  const NetworkParams p = init_weights(Architecture{3, 5, 2, 2, ActivationKind::leaky_relu()}, 24);
  EXPECT_EQ(evaluate_loss(o, p, full_tc(o), LossWeights{5.0, Regularizer::None}).l1_lowrank, 0.0);
  EXPECT_EQ(parse_regularizer("none"), Regularizer::None);
  EXPECT_EQ(parse_regularizer(to_string(Regularizer::Sparse)), Regularizer::Sparse);
  EXPECT_THROW(parse_regularizer("l2"), std::invalid_argument);
}

TEST(Loss, NonFiniteInputAborts) {
  Tensor3 o(Dims{2, 2, 2}, 0.5);
  NetworkParams p = init_weights(Architecture{2, 4, 2, 2, ActivationKind::leaky_relu()}, 1);
  p.weight(0)(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(loss_and_grad(o, p, full_tc(o), LossWeights{0.1, Regularizer::LowRank}), NumericalError);
}

}  // namespace

// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ef/nn.hpp"
#include "support.hpp"

namespace ef {
namespace {

TEST(InitParams, ShapesAndBound) {
  const MlpParams p = init_params(MlpSpec{{2, 3, 2}}, 7);
  ASSERT_EQ(p.layers.size(), 2u);
  EXPECT_EQ(p.layers[0].weight.rows(), 3u);
  EXPECT_EQ(p.layers[0].weight.cols(), 2u);
  EXPECT_EQ(p.layers[1].weight.rows(), 2u);
  EXPECT_EQ(p.layers[1].weight.cols(), 3u);
  EXPECT_EQ(p.layers[0].bias, std::vector<double>(3, 0.0));
  EXPECT_EQ(p.layers[1].bias, std::vector<double>(2, 0.0));
  const double bound = std::sqrt(6.0 / 5.0);
  for (const auto& layer : p.layers) {
    for (double w : layer.weight.values()) EXPECT_LE(std::abs(w), bound);
  }
}

TEST(InitParams, Deterministic) {
  const MlpSpec spec{{2, 3, 2}};
  EXPECT_EQ(init_params(spec, 7), init_params(spec, 7));
  EXPECT_NE(init_params(spec, 7), init_params(spec, 8));
}

TEST(InitParams, ParameterCount) {
  const MlpParams p = init_params(MlpSpec{{784, 50, 50, 10}}, 1);
  EXPECT_EQ(p.parameter_count(), 784u * 50 + 50 + 50 * 50 + 50 + 50 * 10 + 10);
  EXPECT_EQ(p.parameter_count(), 42310u);
}

TEST(InitParams, RejectsBadSpec) {
  EXPECT_THROW((void)init_params(MlpSpec{{4}}, 1), std::invalid_argument);
  EXPECT_THROW((void)init_params(MlpSpec{{4, 0, 2}}, 1), std::invalid_argument);
}

TEST(Forward, ZeroWeightsGiveZeroLogits) {
  MlpParams p = init_params(MlpSpec{{3, 4, 2}}, 1);
  for (auto t : p.tensors()) std::fill(t.begin(), t.end(), 0.0);
  Xoshiro256 rng(2);
  const Matrix logits = forward(p, test::random_matrix(5, 3, rng)).logits;
  EXPECT_EQ(logits, Matrix(5, 2));
}

TEST(Forward, IdentityLayer) {
  MlpParams p = init_params(MlpSpec{{3, 3}}, 1);
  p.layers[0].weight = Matrix{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  Xoshiro256 rng(3);
  const Matrix x = test::random_matrix(4, 3, rng);
  EXPECT_EQ(forward(p, x).logits, x);
}

TEST(Forward, MatchesStraightLineEvaluation) {
  Xoshiro256 rng(4);
  MlpParams p = init_params(MlpSpec{{6, 5, 4}}, 9);
  for (auto t : p.tensors()) {
    for (double& v : t) v = rng.uniform(-1, 1);
  }
  const Matrix x = test::random_matrix(8, 6, rng);
  const Matrix logits = forward(p, x).logits;
  const auto& l0 = p.layers[0];
  const auto& l1 = p.layers[1];
  for (std::size_t b = 0; b < 8; ++b) {
    std::vector<double> h(5);
    for (std::size_t j = 0; j < 5; ++j) {
      double s = l0.bias[j];
      for (std::size_t i = 0; i < 6; ++i) s += l0.weight(j, i) * x(b, i);
      h[j] = s > 0 ? s : 0.0;
    }
    for (std::size_t k = 0; k < 4; ++k) {
      double s = l1.bias[k];
      for (std::size_t j = 0; j < 5; ++j) s += l1.weight(k, j) * h[j];
      EXPECT_NEAR(logits(b, k), s, 1e-12);
    }
  }
}

TEST(Forward, RejectsShapeMismatch) {
  const MlpParams p = init_params(MlpSpec{{3, 2}}, 1);
  EXPECT_THROW((void)forward(p, Matrix(2, 4)), std::invalid_argument);
}

TEST(Softmax, Examples) {
  const Matrix half = softmax_t(Matrix{{0, 0}}, 1.0);
  EXPECT_DOUBLE_EQ(half(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(half(0, 1), 0.5);

  const Matrix p = softmax_t(Matrix{{1, 0}}, 1.0);
  EXPECT_NEAR(p(0, 0), std::exp(1.0) / (std::exp(1.0) + 1.0), 1e-15);
  EXPECT_NEAR(p(0, 0), 0.7310585786300049, 1e-15);
  EXPECT_NEAR(p(0, 1), 0.2689414213699951, 1e-15);

  const Matrix hot = softmax_t(Matrix{{5, 1}}, 1000.0);
  EXPECT_NEAR(hot(0, 0), 0.5, 1e-3);
  EXPECT_NEAR(hot(0, 1), 0.5, 1e-3);
}

TEST(Softmax, RejectsNonPositiveTemperature) {
  EXPECT_THROW((void)softmax_t(Matrix{{1, 2}}, 0.0), std::invalid_argument);
  EXPECT_THROW((void)softmax_t(Matrix{{1, 2}}, -1.0), std::invalid_argument);
}

TEST(Softmax, StableForLargeLogits) {
  const Matrix p = softmax_t(Matrix{{1000, 999}}, 1.0);
  EXPECT_NEAR(p(0, 0), 0.7310585786300049, 1e-12);
}

TEST(SoftmaxProperty, RowsSumToOne) {
  Xoshiro256 rng(5);
  for (double t : {0.5, 1.0, 2.0, 10.0}) {
    for (int trial = 0; trial < 50; ++trial) {
      const Matrix p = softmax_t(test::random_matrix(6, 10, rng, -20, 20), t);
      for (std::size_t r = 0; r < p.rows(); ++r) {
        double sum = 0;
        for (double v : p.row(r)) {
          EXPECT_GE(v, 0.0);
          sum += v;
        }
        EXPECT_LT(std::abs(sum - 1.0), 1e-12);
      }
    }
  }
}

TEST(SoftmaxProperty, UnitTemperatureIsPlainSoftmax) {
  Xoshiro256 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix z = test::random_matrix(4, 7, rng, -5, 5);
    const Matrix p = softmax_t(z, 1.0);
    EXPECT_EQ(p, softmax(z));
    for (std::size_t r = 0; r < z.rows(); ++r) {
      double denom = 0;
      for (double v : z.row(r)) denom += std::exp(v);
      for (std::size_t c = 0; c < z.cols(); ++c) EXPECT_NEAR(p(r, c), std::exp(z(r, c)) / denom, 1e-14);
    }
  }
}

TEST(SoftmaxProperty, MaxProbabilityFallsWithTemperature) {
  Xoshiro256 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix z = test::random_matrix(1, 5, rng, -3, 3);
    double previous = 2.0;
    for (double t : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
      const Matrix p = softmax_t(z, t);
      const double top = *std::max_element(p.values().begin(), p.values().end());
      EXPECT_LT(top, previous);
      previous = top;
    }
  }
}

TEST(CrossEntropy, Examples) {
  EXPECT_NEAR(cross_entropy(Matrix{{1, 0}}, Matrix{{1, 0}}), 0.0, 1e-12);
  EXPECT_NEAR(cross_entropy(Matrix{{0.5, 0.5}}, Matrix{{1, 0}}), 0.6931471805599453, 1e-12);
  EXPECT_NEAR(cross_entropy(Matrix{{0.25, 0.75}}, Matrix{{0, 1}}), 0.2876820724517809, 1e-12);
  // Batch mean.
  EXPECT_NEAR(cross_entropy(Matrix{{0.5, 0.5}, {0.25, 0.75}}, Matrix{{1, 0}, {0, 1}}),
              0.5 * (0.6931471805599453 + 0.2876820724517809), 1e-12);
  // Floor keeps a hard miss finite.
  EXPECT_NEAR(cross_entropy(Matrix{{0, 1}}, Matrix{{1, 0}}), -std::log(kLogFloor), 1e-9);
  EXPECT_THROW((void)cross_entropy(Matrix{{1, 0}}, Matrix{{1, 0, 0}}), std::invalid_argument);
}

TEST(KlDivergence, Examples) {
  EXPECT_NEAR(kl_divergence(Matrix{{0.3, 0.7}}, Matrix{{0.3, 0.7}}), 0.0, 1e-15);
  EXPECT_NEAR(kl_divergence(Matrix{{1, 0}}, Matrix{{0.5, 0.5}}), 0.6931471805599453, 1e-12);
  EXPECT_NEAR(kl_divergence(Matrix{{0.5, 0.5}}, Matrix{{0.9, 0.1}}), 0.5108256237659907, 1e-12);
  EXPECT_THROW((void)kl_divergence(Matrix{{1, 0}}, Matrix{{1, 0, 0}}), std::invalid_argument);
}

TEST(KlProperty, NonNegativeAndZeroOnlyAtEquality) {
  Xoshiro256 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix p = test::random_stochastic(3, 6, rng);
    const Matrix q = test::random_stochastic(3, 6, rng);
    EXPECT_GT(kl_divergence(p, q), 0.0);
    EXPECT_NEAR(kl_divergence(p, p), 0.0, 1e-15);
  }
}

TEST(Backward, ZeroUpstreamGradient) {
  const MlpParams p = init_params(MlpSpec{{4, 6, 3}}, 2);
  Xoshiro256 rng(9);
  const ForwardResult fwd = forward(p, test::random_matrix(5, 4, rng));
  const MlpParams g = backward(p, fwd.cache, Matrix(5, 3));
  for (auto t : g.tensors()) {
    for (double v : t) EXPECT_EQ(v, 0.0);
  }
}

TEST(Backward, LinearLayerSumOfLogits) {
  const MlpParams p = init_params(MlpSpec{{3, 2}}, 3);
  Xoshiro256 rng(10);
  const Matrix x = test::random_matrix(6, 3, rng);
  const ForwardResult fwd = forward(p, x);
  const MlpParams g = backward(p, fwd.cache, Matrix(6, 2, 1.0));
  for (std::size_t i = 0; i < 3; ++i) {
    double col = 0;
    for (std::size_t b = 0; b < 6; ++b) col += x(b, i);
    EXPECT_NEAR(g.layers[0].weight(0, i), col, 1e-12);
    EXPECT_NEAR(g.layers[0].weight(1, i), col, 1e-12);
  }
  EXPECT_NEAR(g.layers[0].bias[0], 6.0, 1e-12);
}

TEST(Backward, RejectsShapeMismatch) {
  const MlpParams p = init_params(MlpSpec{{3, 2}}, 3);
  const ForwardResult fwd = forward(p, Matrix(4, 3));
  EXPECT_THROW((void)backward(p, fwd.cache, Matrix(4, 3)), std::invalid_argument);
}

// Cross-entropy of softmax composed with forward; the gradient w.r.t. logits
// is (p - y) / B.
TEST(BackwardProperty, CrossEntropyMatchesFiniteDifferences) {
  Xoshiro256 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    MlpParams p = init_params(MlpSpec{{5, 7, 6, 4}}, 100 + trial);
    for (auto& layer : p.layers) {
      for (double& b : layer.bias) b = rng.uniform(-0.5, 0.5);
    }
    const Matrix x = test::random_matrix(9, 5, rng);
    const Matrix y = test::random_onehot(9, 4, rng);
    const ForwardResult fwd = forward(p, x);
    Matrix grad = softmax(fwd.logits);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      grad.values()[i] = (grad.values()[i] - y.values()[i]) / 9.0;
    }
    const MlpParams g = backward(p, fwd.cache, grad);
    const auto loss = [&] { return cross_entropy(softmax(predict_logits(p, x)), y); };
    const auto params = p.tensors();
    const auto grads = g.tensors();
    EXPECT_LT(test::fd_max_error(params, grads, loss, 120, rng), 1e-4);
  }
}

TEST(MultiHead, SingleHeadMatchesMlp) {
  const MlpParams p = init_params(MlpSpec{{4, 5, 3}}, 12);
  const MultiHeadNet net = as_multi_head(p);
  EXPECT_EQ(net.head_count(), 1u);
  EXPECT_EQ(to_mlp(net), p);
  Xoshiro256 rng(13);
  const Matrix x = test::random_matrix(3, 4, rng);
  EXPECT_EQ(predict_head_logits(net, x).front(), predict_logits(p, x));
}

TEST(MultiHeadProperty, GradientsMatchFiniteDifferences) {
  Xoshiro256 rng(14);
  MultiHeadNet net = as_multi_head(init_params(MlpSpec{{5, 6, 4}}, 15));
  net.heads.push_back(init_dense(6, 4, rng));
  net.heads.push_back(init_dense(6, 4, rng));
  const Matrix x = test::random_matrix(7, 5, rng);
  const std::vector<Matrix> targets{test::random_stochastic(7, 4, rng),
                                    test::random_stochastic(7, 4, rng),
                                    test::random_stochastic(7, 4, rng)};
  const MultiHeadForward fwd = forward(net, x);
  std::vector<Matrix> grads;
  for (std::size_t h = 0; h < 3; ++h) {
    Matrix g = softmax(fwd.head_logits[h]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g.values()[i] = (g.values()[i] - targets[h].values()[i]) / 7.0;
    }
    grads.push_back(std::move(g));
  }
  const MultiHeadNet g = backward(net, fwd, grads);
  const auto loss = [&] {
    const auto logits = predict_head_logits(net, x);
    double total = 0;
    for (std::size_t h = 0; h < 3; ++h) total += cross_entropy(softmax(logits[h]), targets[h]);
    return total;
  };
  const auto params = net.tensors();
  const auto gt = g.tensors();
  EXPECT_LT(test::fd_max_error(params, gt, loss, 150, rng), 1e-4);
}

TEST(Adam, ZeroGradientLeavesParamsAndMoments) {
  MlpParams p = init_params(MlpSpec{{3, 2}}, 1);
  const MlpParams before = p;
  MlpParams zero = p;
  for (auto t : zero.tensors()) std::fill(t.begin(), t.end(), 0.0);
  AdamState state = AdamState::for_params(AdamConfig{}, p);
  adam_step(p, zero, state);
  EXPECT_EQ(p, before);
  EXPECT_EQ(state.step, 1u);
  for (const auto& m : state.first_moment) {
    for (double v : m) EXPECT_EQ(v, 0.0);
  }
  for (const auto& v2 : state.second_moment) {
    for (double v : v2) EXPECT_EQ(v, 0.0);
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> param{0.5};
  const std::vector<double> grad{-3.0};
  const AdamConfig config{};
  const std::vector<std::span<double>> ps{std::span<double>(param)};
  const std::vector<std::span<const double>> gs{std::span<const double>(grad)};
  AdamState state = AdamState::for_tensors(config, gs);
  adam_step(ps, gs, state, config.learning_rate);
  // m_hat = g, v_hat = g^2 at t = 1.
  const double expected = 0.5 + config.learning_rate * 3.0 / (3.0 + config.epsilon);
  EXPECT_NEAR(param[0], expected, 1e-15);
  EXPECT_NEAR(param[0] - 0.5, config.learning_rate, 1e-9);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, RejectsShapeMismatch) {
  MlpParams p = init_params(MlpSpec{{3, 2}}, 1);
  const MlpParams other = init_params(MlpSpec{{3, 3}}, 1);
  AdamState state = AdamState::for_params(AdamConfig{}, p);
  EXPECT_THROW(adam_step(p, other, state), std::invalid_argument);
}

TEST(Adam, DeterministicTrajectories) {
  const auto run = [] {
    MlpParams p = init_params(MlpSpec{{4, 5, 3}}, 21);
    AdamState state = AdamState::for_params(AdamConfig{}, p);
    Xoshiro256 rng(22);
    const Matrix x = test::random_matrix(10, 4, rng);
    const Matrix y = test::random_onehot(10, 3, rng);
    for (int step = 0; step < 20; ++step) {
      const ForwardResult fwd = forward(p, x);
      Matrix g = softmax(fwd.logits);
      for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] = (g.values()[i] - y.values()[i]) / 10.0;
      adam_step(p, backward(p, fwd.cache, g), state);
    }
    return p;
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace ef

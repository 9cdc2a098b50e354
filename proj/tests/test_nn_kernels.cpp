#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "handover/nn/layers.hpp"
#include "handover/nn/network.hpp"
#include "oracles.hpp"

using namespace handover::nn;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

Conv1DLayer random_conv(std::mt19937_64& rng, std::size_t in, std::size_t out, std::size_t ks) {
  Conv1DLayer layer(in, out, ks);
  layer.kernels = random_vector(rng, in * out * ks);
  layer.bias = random_vector(rng, out);
  return layer;
}

}  // namespace

TEST(Conv1D, IdentityKernel) {
  Conv1DLayer layer(1, 1, 3);
  layer.kernels = {0.0, 1.0, 0.0};
  const Tensor1D in(1, 4, {1, 2, 3, 4});
  EXPECT_EQ(conv1d_forward(in, layer).data, (std::vector<double>{1, 2, 3, 4}));
}

TEST(Conv1D, ZeroKernelsGiveZeros) {
  std::mt19937_64 rng(1);
  Conv1DLayer layer(3, 5, 3);
  const Tensor1D in(3, 17, random_vector(rng, 51));
  for (double v : conv1d_forward(in, layer).data) EXPECT_EQ(v, 0.0);
}

TEST(Conv1D, RejectsChannelMismatch) {
  Conv1DLayer layer(2, 4, 3);
  EXPECT_THROW(conv1d_forward(Tensor1D(3, 8), layer), std::invalid_argument);
}

TEST(Conv1D, MatchesTripleLoopOracle) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> ch(1, 8);
  std::uniform_int_distribution<std::size_t> len(1, 64);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t cin = ch(rng), cout = ch(rng), n = len(rng);
    const auto layer = random_conv(rng, cin, cout, 3);
    const Tensor1D in(cin, n, random_vector(rng, cin * n, -5, 5));
    const auto got = conv1d_forward(in, layer);
    const auto want = oracle::conv1d(in.data, cin, n, layer.kernels, 3, layer.bias, cout);
    ASSERT_EQ(got.channels, cout);
    ASSERT_EQ(got.length, n);
    for (std::size_t k = 0; k < want.size(); ++k) ASSERT_NEAR(got.data[k], want[k], 1e-9);
  }
}

TEST(BatchNorm, ConstantChannelGivesZeros) {
  BatchNorm1DLayer bn(2);
  std::vector<Tensor1D> batch{Tensor1D(2, 3, {5, 5, 5, 1, 2, 3}), Tensor1D(2, 3, {5, 5, 5, 4, 5, 6})};
  const auto out = batchnorm_forward(batch, bn, Mode::Train);
  for (const auto& t : out) {
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(t.at(0, i), 0.0);
  }
}

TEST(BatchNorm, AffineOnStandardizedInput) {
  // Zero mean, unit biased variance over batch x length.
  BatchNorm1DLayer bn(1);
  bn.gamma = {2.0};
  bn.beta = {1.0};
  bn.epsilon = 1e-12;
  std::vector<Tensor1D> batch{Tensor1D(1, 2, {1.0, -1.0}), Tensor1D(1, 2, {-1.0, 1.0})};
  const auto out = batchnorm_forward(batch, bn, Mode::Train);
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t t = 0; t < 2; ++t) EXPECT_NEAR(out[n].at(0, t), 2.0 * batch[n].at(0, t) + 1.0, 1e-9);
  }
}

TEST(BatchNorm, TrainOutputStatisticsMatchGammaBeta) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> gb(0.5, 1.5);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t c = 1 + rep % 4, len = 3 + rep % 9, nb = 2 + rep % 5;
    BatchNorm1DLayer bn(c);
    for (std::size_t k = 0; k < c; ++k) {
      bn.gamma[k] = gb(rng);
      bn.beta[k] = gb(rng) - 1.0;
    }
    std::vector<Tensor1D> batch;
    for (std::size_t n = 0; n < nb; ++n) batch.emplace_back(c, len, random_vector(rng, c * len, -20, 20));
    const auto out = batchnorm_forward(batch, bn, Mode::Train);
    for (std::size_t k = 0; k < c; ++k) {
      std::vector<double> in_vals, out_vals;
      for (std::size_t n = 0; n < nb; ++n) {
        for (std::size_t t = 0; t < len; ++t) {
          in_vals.push_back(batch[n].at(k, t));
          out_vals.push_back(out[n].at(k, t));
        }
      }
      const double v_in = oracle::biased_variance(in_vals);
      ASSERT_NEAR(oracle::mean(out_vals), bn.beta[k], 1e-6);
      ASSERT_NEAR(oracle::biased_variance(out_vals), bn.gamma[k] * bn.gamma[k], 1e-6);
      ASSERT_NEAR(oracle::biased_variance(out_vals),
                  bn.gamma[k] * bn.gamma[k] * v_in / (v_in + bn.epsilon), 1e-9);
    }
  }
}

TEST(BatchNorm, RunningStatisticsUpdate) {
  BatchNorm1DLayer bn(1);
  std::vector<Tensor1D> batch{Tensor1D(1, 2, {1.0, 3.0}), Tensor1D(1, 2, {5.0, 7.0})};
  batchnorm_forward(batch, bn, Mode::Train);
  // mean 4, unbiased variance 20/3
  EXPECT_NEAR(bn.running_mean[0], 0.9 * 0.0 + 0.1 * 4.0, 1e-15);
  EXPECT_NEAR(bn.running_var[0], 0.9 * 1.0 + 0.1 * (20.0 / 3.0), 1e-15);
}

TEST(BatchNorm, InferUsesFrozenStatisticsAndEmptyTrainBatchThrows) {
  BatchNorm1DLayer bn(1);
  bn.running_mean = {2.0};
  bn.running_var = {4.0};
  const BatchNorm1DLayer before = bn;
  std::vector<Tensor1D> batch{Tensor1D(1, 1, {6.0})};
  const auto a = batchnorm_forward(batch, bn, Mode::Infer);
  EXPECT_EQ(bn, before);
  EXPECT_NEAR(a[0].at(0, 0), 4.0 / std::sqrt(4.0 + 1e-5), 1e-12);
  std::vector<Tensor1D> other{Tensor1D(1, 1, {-3.0}), Tensor1D(1, 1, {6.0})};
  const auto b = batchnorm_forward(other, bn, Mode::Infer);
  EXPECT_EQ(b[1].at(0, 0), a[0].at(0, 0));
  std::vector<Tensor1D> empty;
  EXPECT_THROW(batchnorm_forward(empty, bn, Mode::Train), std::invalid_argument);
}

TEST(Relu, DefinitionAndIdempotence) {
  EXPECT_EQ(relu(Tensor1D(1, 3, {-1, 0, 2})).data, (std::vector<double>{0, 0, 2}));
  for (double v : relu(Tensor1D(1, 4, {-1, -2, -0.5, -7})).data) EXPECT_EQ(v, 0.0);
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    const Tensor1D x(3, 11, random_vector(rng, 33));
    EXPECT_EQ(relu(relu(x)), relu(x));
  }
}

TEST(GlobalAvgPool, MeansPerChannel) {
  EXPECT_EQ(global_avg_pool(Tensor1D(1, 2, {2, 4})), std::vector<double>{3.0});
  EXPECT_EQ(global_avg_pool(Tensor1D(1, 5, {1.5, 1.5, 1.5, 1.5, 1.5})), std::vector<double>{1.5});
  EXPECT_THROW(global_avg_pool(Tensor1D(2, 0)), std::invalid_argument);
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t c = 1 + rep % 6, n = 1 + rep % 50;
    const Tensor1D x(c, n, random_vector(rng, c * n, -10, 10));
    const auto got = global_avg_pool(x);
    for (std::size_t k = 0; k < c; ++k) {
      const std::vector<double> ch(x.data.begin() + k * n, x.data.begin() + (k + 1) * n);
      ASSERT_NEAR(got[k], oracle::mean(ch), 1e-12);
    }
  }
}

TEST(Softmax, UniformShiftAndOracle) {
  const std::vector<double> same(6, 3.7);
  for (double p : softmax(same)) EXPECT_NEAR(p, 1.0 / 6.0, 1e-15);
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 300; ++rep) {
    const auto z = random_vector(rng, 6, -8, 8);
    const auto p = softmax(z);
    auto shifted = z;
    for (double& v : shifted) v += 123.0;
    const auto q = softmax(shifted);
    const auto want = oracle::softmax(z);
    double sum = 0.0;
    for (std::size_t k = 0; k < 6; ++k) {
      ASSERT_NEAR(p[k], want[k], 1e-12);
      ASSERT_NEAR(q[k], p[k], 1e-12);
      sum += p[k];
    }
    ASSERT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Softmax, ExtremeLogitsStayNormalized) {
  const std::vector<double> z{1e4, -1e4, 0.0, 1e4, -3.0, 9999.0};
  const auto p = softmax(z);
  double sum = 0.0;
  for (double v : p) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, 0.0);
    sum += v;
  }
  EXPECT_NEAR(sum, 1.0, 1e-9);
  EXPECT_GT(p[0], p[5]);
}

TEST(CrossEntropy, AnalyticCasesAndOracle) {
  EXPECT_EQ(cross_entropy_loss(std::vector<double>{0, 0, 1, 0, 0, 0}, 2), 0.0);
  const std::vector<double> uniform(6, 1.0 / 6.0);
  EXPECT_NEAR(cross_entropy_loss(uniform, 4), std::log(6.0), 1e-15);
  EXPECT_NEAR(cross_entropy_loss(uniform, 4), 1.7918, 1e-4);
  EXPECT_NEAR(cross_entropy_loss(std::vector<double>{1, 0, 0, 0, 0, 0}, 3), -std::log(1e-12), 1e-9);
  EXPECT_THROW(cross_entropy_loss(uniform, 6), std::out_of_range);
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 300; ++rep) {
    auto p = random_vector(rng, 6, 0.0, 1.0);
    double s = 0.0;
    for (double v : p) s += v;
    for (double& v : p) v /= s;
    const std::size_t t = static_cast<std::size_t>(rep % 6);
    ASSERT_NEAR(cross_entropy_loss(p, t), oracle::neg_log(p[t]), 1e-12);
  }
}

TEST(Sgd, ZeroGradientLeavesParameters) {
  auto net = make_network({1, {4, 4}, 3, 6}, 3);
  const auto before = net;
  sgd_step(net, GradientTape::zeros_like(net), 0.5);
  EXPECT_EQ(net, before);
}

TEST(Sgd, UnitRateSubtractsGradient) {
  auto net = make_network({1, {4}, 3, 6}, 3);
  auto tape = GradientTape::zeros_like(net);
  tape.blocks[0].kernels[5] = 0.375;
  const double before = net.blocks[0].conv.kernels[5];
  sgd_step(net, tape, 1.0);
  EXPECT_EQ(net.blocks[0].conv.kernels[5], before - 0.375);
  EXPECT_THROW(sgd_step(net, tape, 0.0), std::invalid_argument);
  EXPECT_THROW(sgd_step(net, tape, -1.0), std::invalid_argument);
}

TEST(Sgd, QuadraticProbeDecreasesMonotonically) {
  // L(theta) = 0.5 * sum (theta - c)^2 over every trainable parameter.
  auto net = make_network({1, {3, 3}, 3, 6}, 21);
  std::mt19937_64 rng(2);
  std::vector<std::vector<double>> centers;
  for (auto v : parameter_views(net)) centers.push_back(random_vector(rng, v.size(), -2, 2));
  auto loss = [&] {
    double l = 0.0;
    auto views = parameter_views(net);
    for (std::size_t a = 0; a < views.size(); ++a)
      for (std::size_t k = 0; k < views[a].size(); ++k) l += 0.5 * std::pow(views[a][k] - centers[a][k], 2);
    return l;
  };
  double prev = loss();
  for (int step = 0; step < 25; ++step) {
    auto tape = GradientTape::zeros_like(net);
    auto g = tape.views();
    auto views = parameter_views(net);
    for (std::size_t a = 0; a < views.size(); ++a)
      for (std::size_t k = 0; k < views[a].size(); ++k) g[a][k] = views[a][k] - centers[a][k];
    sgd_step(net, tape, 0.2);
    const double now = loss();
    ASSERT_LT(now, prev);
    prev = now;
  }
}

TEST(Backward, SaturatedCorrectBatchHasTinyGradient) {
  auto net = make_network({1, {4, 4}, 3, 6}, 8);
  std::fill(net.head.weights.begin(), net.head.weights.end(), 0.0);
  std::fill(net.head.bias.begin(), net.head.bias.end(), 0.0);
  net.head.bias[2] = 60.0;
  std::mt19937_64 rng(4);
  std::vector<Tensor1D> batch;
  for (int n = 0; n < 4; ++n) batch.emplace_back(1, 10, random_vector(rng, 10));
  const std::vector<std::size_t> targets(4, 2);
  EXPECT_LT(backward(net, batch, targets).norm(), 1e-6);
}

TEST(Backward, HeadBiasGradientIsMeanResidual) {
  auto net = make_network({1, {5, 5}, 3, 6}, 12);
  std::mt19937_64 rng(6);
  std::vector<Tensor1D> batch;
  for (int n = 0; n < 5; ++n) batch.emplace_back(1, 9, random_vector(rng, 9, -2, 2));
  const std::vector<std::size_t> targets{0, 3, 5, 3, 1};
  const auto cache = forward_train(net, batch);
  const auto tape = backward(net, cache, targets);
  for (std::size_t c = 0; c < 6; ++c) {
    double want = 0.0;
    for (std::size_t n = 0; n < 5; ++n) want += cache.probabilities[n][c] - (targets[n] == c ? 1.0 : 0.0);
    EXPECT_NEAR(tape.head_bias[c], want / 5.0, 1e-12);
  }
}

TEST(Network, SerializationRoundTrip) {
  auto net = make_network({1, {4, 4, 4}, 3, 6}, 99);
  net.blocks[1].norm.running_var[2] = 3.25;
  const auto doc = network_to_json(net);
  EXPECT_EQ(doc.at("version"), "tcnn-v1");
  EXPECT_EQ(network_from_json(nlohmann::json::parse(doc.dump())), net);
}

#include <gtest/gtest.h>

#include <random>

#include "gradcheck.hpp"
#include "handover/nn/network.hpp"

using namespace handover::nn;

namespace {

std::vector<Tensor1D> random_batch(std::size_t n, std::size_t channels, std::size_t len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<Tensor1D> batch;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor1D t(channels, len);
    for (double& v : t.data) v = z(rng);
    batch.push_back(std::move(t));
  }
  return batch;
}

}  // namespace

TEST(GradientCheck, SmallNetworkMatchesFiniteDifferences) {
  const auto net = make_network({1, {6, 6, 6}, 3, 6}, 5);
  const auto batch = random_batch(6, 1, 40, 6);
  const std::vector<std::size_t> targets{0, 1, 2, 3, 4, 5};
  const auto r = gradcheck::run(net, batch, targets, 100, 7);
  EXPECT_EQ(r.checked, 100u);
  EXPECT_EQ(r.failures, 0u) << "worst relative error " << r.worst_relative;
  EXPECT_LT(r.skipped_kinks, 20u);
}

TEST(GradientCheck, MultiChannelInputAndWiderKernel) {
  const auto net = make_network({3, {5, 4}, 5, 6}, 11);
  const auto batch = random_batch(4, 3, 17, 12);
  const std::vector<std::size_t> targets{5, 5, 2, 0};
  const auto r = gradcheck::run(net, batch, targets, 60, 13);
  EXPECT_EQ(r.failures, 0u) << "worst relative error " << r.worst_relative;
}

TEST(GradientCheck, TorqueArchitectureOnShortWindows) {
  const auto net = make_network({1, {64, 64, 64}, 3, 6}, 20210);
  const auto batch = random_batch(4, 1, 24, 3);
  const std::vector<std::size_t> targets{1, 3, 4, 0};
  const auto r = gradcheck::run(net, batch, targets, 40, 17);
  EXPECT_EQ(r.failures, 0u) << "worst relative error " << r.worst_relative;
}

TEST(GradientCheck, RelativeErrorFloor) {
  EXPECT_EQ(gradcheck::relative_error(2.0, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(gradcheck::relative_error(1.0, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(gradcheck::relative_error(1e-9, 0.0), 1e-3);
}

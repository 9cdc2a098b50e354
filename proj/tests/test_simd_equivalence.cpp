#include <gtest/gtest.h>

#include <random>

#include "handover/nn/kernels.hpp"
#include "handover/nn/network.hpp"
#include "oracles.hpp"

using namespace handover::nn;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Restores the process-wide kernel table after each test.
class KernelTables : public ::testing::Test {
 protected:
  void TearDown() override { kernels::set_active_kernels(*saved_); }
  const kernels::KernelSet* saved_ = &kernels::active_kernels();
};

}  // namespace

TEST_F(KernelTables, ScalarIsAlwaysAvailableAndFirst) {
  const auto all = kernels::available_kernels();
  ASSERT_FALSE(all.empty());
  EXPECT_EQ(all.front()->name, "scalar");
}

TEST_F(KernelTables, EveryTableMatchesOracle) {
  std::mt19937_64 rng(31);
  // Lengths straddle the vector width; channel counts straddle the 4-wide
  // output tile.
  const std::size_t lens[] = {1, 2, 3, 7, 8, 9, 15, 16, 17, 40, 63, 280};
  const std::size_t chans[] = {1, 3, 4, 5, 8, 9};
  for (const auto* table : kernels::available_kernels()) {
    SCOPED_TRACE(std::string(table->name));
    for (std::size_t len : lens) {
      for (std::size_t cin : chans) {
        for (std::size_t cout : chans) {
          for (std::size_t ks : {1, 3, 5}) {
            const auto x = random_vector(rng, cin * len);
            const auto w = random_vector(rng, cout * cin * ks);
            const auto b = random_vector(rng, cout);
            std::vector<double> out(cout * len, -1.0);
            table->conv1d(x.data(), cin, len, w.data(), ks, b.data(), cout, out.data());
            const auto want = oracle::conv1d(x, cin, len, w, ks, b, cout);
            for (std::size_t k = 0; k < want.size(); ++k) ASSERT_NEAR(out[k], want[k], 1e-9);

            std::vector<double> nobias(cout * len);
            table->conv1d(x.data(), cin, len, w.data(), ks, nullptr, cout, nobias.data());
            const auto want0 = oracle::conv1d(x, cin, len, w, ks, {}, cout);
            for (std::size_t k = 0; k < want0.size(); ++k) ASSERT_NEAR(nobias[k], want0[k], 1e-9);

            const auto g = random_vector(rng, cout * len);
            std::vector<double> gw(cout * cin * ks, 0.5);
            table->conv1d_weight_grad(x.data(), cin, len, g.data(), cout, ks, gw.data());
            const auto want_gw = oracle::conv1d_weight_grad(x, cin, len, g, cout, ks);
            for (std::size_t k = 0; k < gw.size(); ++k) ASSERT_NEAR(gw[k], 0.5 + want_gw[k], 1e-9);
          }
        }
      }
    }
  }
}

TEST_F(KernelTables, TablesAgreeOnFullNetworkPass) {
  const auto all = kernels::available_kernels();
  if (all.size() < 2) GTEST_SKIP() << "only the scalar table is available";
  auto net = make_network({1, {16, 16, 16}, 3, 6}, 4);
  std::mt19937_64 rng(8);
  std::vector<Tensor1D> batch;
  for (int n = 0; n < 6; ++n) batch.emplace_back(1, 280, random_vector(rng, 280));
  const std::vector<std::size_t> targets{0, 1, 2, 3, 4, 5};

  kernels::set_active_kernels(*all[0]);
  const auto ref_cache = forward_train(net, batch);
  const auto ref_tape = backward(net, ref_cache, targets);
  for (std::size_t t = 1; t < all.size(); ++t) {
    kernels::set_active_kernels(*all[t]);
    const auto cache = forward_train(net, batch);
    const auto tape = backward(net, cache, targets);
    for (std::size_t n = 0; n < batch.size(); ++n)
      for (std::size_t c = 0; c < 6; ++c)
        EXPECT_NEAR(cache.probabilities[n][c], ref_cache.probabilities[n][c], 1e-10);
    const auto a = tape.views();
    const auto b = ref_tape.views();
    for (std::size_t v = 0; v < a.size(); ++v)
      for (std::size_t k = 0; k < a[v].size(); ++k) EXPECT_NEAR(a[v][k], b[v][k], 1e-9);
  }
}

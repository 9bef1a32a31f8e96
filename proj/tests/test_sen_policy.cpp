#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "intersad/sen_policy.hpp"
#include "fixtures.hpp"

using namespace intersad;

namespace {

std::vector<std::vector<double>> random_set(Rng& rng, std::size_t b, std::size_t d) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::vector<double>> u(b, std::vector<double>(d));
  for (auto& v : u) {
    for (auto& x : v) x = n(rng);
  }
  return u;
}

using Setup = fixture::SenSetup;

Setup make_setup(std::uint64_t seed, std::size_t batch = 3) { return fixture::sen_setup(seed, batch); }

}  // namespace

TEST(PolicyAct, ZeroWeightsGiveZeroAction) {
  Rng rng(1);
  auto p = PolicyModel::create(4, 3, rng);
  for (auto& [name, t] : p.params) std::fill(t.values.begin(), t.values.end(), 0.0);
  EXPECT_EQ(policy_act(p, std::vector<double>{1, 2, 3, 4}), std::vector<double>(3, 0.0));
}

TEST(PolicyAct, BoundedAndDeterministic) {
  Rng rng(2);
  auto p = PolicyModel::create(4, 3, rng);
  for (auto& v : p.params.at("policy.out.W").values) v *= 100.0;
  std::normal_distribution<double> n(0.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(4);
    for (auto& v : s) v = n(rng);
    const auto a = policy_act(p, s);
    for (double x : a) {
      EXPECT_GE(x, -1.0);
      EXPECT_LE(x, 1.0);
    }
    EXPECT_EQ(a, policy_act(p, s));
  }
  EXPECT_THROW(policy_act(p, std::vector<double>{1, 2}), ContractViolation);
}

TEST(SenLoss, Examples) {
  const std::vector<std::vector<double>> same(4, {0.3, -2.0});
  EXPECT_EQ(sen_loss(same), 0.0);
  const std::vector<std::vector<double>> u = {{1, 0}, {-1, 0}, {0, 0}};
  EXPECT_DOUBLE_EQ(sen_loss(u), 2.0);
  EXPECT_DOUBLE_EQ(pairwise_loss(u), 8.0);
  EXPECT_EQ(pairwise_loss(same), 0.0);
  // Equality case of the centroid bound: collinear and symmetric about the centroid.
  EXPECT_DOUBLE_EQ(pairwise_loss(u), 2.0 * (u.size() - 1) * sen_loss(u));
  EXPECT_THROW(sen_loss(std::vector<std::vector<double>>{}), ContractViolation);
  EXPECT_THROW(pairwise_loss(std::vector<std::vector<double>>{}), ContractViolation);
}

TEST(SenLoss, CentroidBoundOnRandomSets) {
  Rng rng(3);
  std::uniform_int_distribution<std::size_t> bdist(2, 64);
  std::uniform_int_distribution<std::size_t> ddist(1, 16);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t b = bdist(rng);
    const auto u = random_set(rng, b, ddist(rng));
    ASSERT_LE(pairwise_loss(u), 2.0 * (b - 1) * sen_loss(u) + 1e-9);
  }
}

TEST(SenLoss, TriangleInequalityThroughCentroid) {
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const auto u = random_set(rng, 3, 5);
    const auto c = centroid(u);
    EXPECT_LE(euclidean(u[0], u[1]), euclidean(u[0], c) + euclidean(u[1], c) + 1e-12);
  }
}

TEST(SenLoss, PermutationTranslationScaling) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto u = random_set(rng, 10, 4);
    const double base = sen_loss(u);
    auto perm = u;
    std::shuffle(perm.begin(), perm.end(), rng);
    EXPECT_NEAR(sen_loss(perm), base, 1e-12 * base);
    auto shifted = u;
    for (auto& v : shifted) {
      for (std::size_t k = 0; k < v.size(); ++k) v[k] += 3.5 - static_cast<double>(k);
    }
    EXPECT_NEAR(sen_loss(shifted), base, 1e-10 * base);
    auto scaled = u;
    for (auto& v : scaled) {
      for (auto& x : v) x *= -2.5;
    }
    EXPECT_NEAR(sen_loss(scaled), 2.5 * base, 1e-10 * base);
  }
}

TEST(SenPolicyUpdate, ZeroLearningRateChangesNothing) {
  auto s = make_setup(6);
  const auto policy_before = s.policy.params;
  const auto encoder_before = s.encoder.params;
  nn::AdamState opt;
  sen_policy_update(s.policy, s.encoder, s.batch, opt, 0.0);
  EXPECT_EQ(s.policy.params, policy_before);
  EXPECT_EQ(s.encoder.params, encoder_before);
}

TEST(SenPolicyUpdate, NeverTouchesEncoder) {
  auto s = make_setup(7);
  const auto encoder_before = s.encoder.params;
  nn::AdamState opt;
  for (int k = 0; k < 5; ++k) sen_policy_update(s.policy, s.encoder, s.batch, opt, 0.05);
  EXPECT_EQ(s.encoder.params, encoder_before);
  EXPECT_NE(s.policy.params, make_setup(7).policy.params);
}

TEST(PolicyForward, GradientPassesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto report = fixture::fd_policy(seed);
    EXPECT_TRUE(report.passed) << "seed " << seed << " " << report.worst_param << " " << report.max_rel_error;
  }
}

TEST(SenPolicyUpdate, GradientMatchesFixedStateFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto report = fixture::fd_sen(100 + seed);
    EXPECT_TRUE(report.passed) << "seed " << seed << " " << report.worst_param << " " << report.max_rel_error;
    const auto s = make_setup(100 + seed);
    const auto g = sen_gradient(s.policy, s.encoder, s.batch);
    EXPECT_NEAR(g.loss, sen_objective(s.policy, s.encoder, s.batch), 1e-12 * (1 + g.loss));
  }
}

TEST(SenPolicyUpdate, SmallStepDescends) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = make_setup(200 + seed, 6);
    const auto g = sen_gradient(s.policy, s.encoder, s.batch);
    const double base = sen_objective(s.policy, s.encoder, s.batch, g.center);
    const auto flat = s.policy.params.flatten();
    const auto grad = g.grads.flatten();
    bool descended = false;
    double lr = 1e-2;
    for (int halving = 0; halving <= 20 && !descended; ++halving, lr /= 2) {
      PolicyModel probe = s.policy;
      auto moved = flat;
      for (std::size_t i = 0; i < moved.size(); ++i) moved[i] -= lr * grad[i];
      probe.params.unflatten(moved);
      descended = sen_objective(probe, s.encoder, s.batch, g.center) < base;
    }
    EXPECT_TRUE(descended) << "seed " << seed;
  }
}

TEST(SenPolicyUpdate, RejectsMismatchedInputs) {
  auto s = make_setup(8);
  nn::AdamState opt;
  EXPECT_THROW(sen_policy_update(s.policy, s.encoder, std::vector<InteractionRecord>{}, opt, 0.1),
               ContractViolation);
  auto bad = s.batch;
  bad[0].trajectory.pop_back();
  EXPECT_THROW(sen_policy_update(s.policy, s.encoder, bad, opt, 0.1), ContractViolation);
}

TEST(PolicyModel, JsonRoundTrip) {
  Rng rng(9);
  const auto p = PolicyModel::create(5, 2, rng);
  const auto back = policy_from_json(to_json(p));
  EXPECT_EQ(back.params, p.params);
  EXPECT_EQ(back.state_dim, 5u);
  EXPECT_EQ(back.action_dim, 2u);
  auto bad = to_json(p);
  bad["kind"] = "embedder";
  EXPECT_THROW(policy_from_json(bad), LoadError);
}

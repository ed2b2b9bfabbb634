#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "simmc/losses.hpp"
#include "test_util.hpp"

namespace simmc {
namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

Matrix unit_rows(Index rows, Index cols, Rng& rng) {
  return l2_normalize_rows(test::random_matrix(rows, cols, rng));
}

// Central-difference gradient of f at x, coordinate by coordinate.
template <typename F>
Vector numeric_grad(F f, Vector x, double h = 1e-6) {
  Vector g(x.size());
  for (Index k = 0; k < x.size(); ++k) {
    g(k) = oracle::central_difference(
        [&](double t) {
          Vector y = x;
          y(k) = t;
          return f(y);
        },
        x(k), h);
  }
  return g;
}

TEST(Mpc, SinglePrototypeIsZero) {
  Rng rng(1);
  const Matrix p = unit_rows(1, 4, rng);
  const Vector v = l2_normalize(test::random_vector(4, rng));
  EXPECT_NEAR(mpc_instance_loss(v, p, 0, 0.08, nullptr), 0.0, 1e-15);
}

TEST(Mpc, TwoPrototypeExample) {
  Matrix p(2, 2);
  p << 1, 0, 0, 1;
  // log(e + 1) - 1
  EXPECT_NEAR(mpc_instance_loss(vec({1, 0}), p, 0, 1.0, nullptr), 0.3132617, 1e-6);
}

TEST(Mpc, SmallTemperatureDrivesCorrectTargetToZero) {
  Matrix p(2, 2);
  p << 1, 0, 0, 1;
  EXPECT_LT(mpc_instance_loss(vec({1, 0}), p, 0, 0.01, nullptr), 1e-40);
  EXPECT_GT(mpc_instance_loss(vec({1, 0}), p, 1, 0.01, nullptr), 99.0);
}

TEST(Mpc, InvariantToPrototypeOrder) {
  Rng rng(2);
  const Matrix p = unit_rows(5, 6, rng);
  const Vector v = l2_normalize(test::random_vector(6, rng));
  std::vector<Index> perm{3, 0, 4, 2, 1};
  Matrix q(5, 6);
  for (Index c = 0; c < 5; ++c) q.row(c) = p.row(perm[c]);
  // Target 2 moved to position 3.
  EXPECT_NEAR(mpc_instance_loss(v, p, 2, 0.1, nullptr), mpc_instance_loss(v, q, 3, 0.1, nullptr),
              1e-12);
}

TEST(Mpc, BoundedForUnitVectors) {
  Rng rng(3);
  std::uniform_int_distribution<int> count(1, 12);
  std::uniform_real_distribution<double> temp(0.02, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const int c = count(rng);
    const double tau = temp(rng);
    const Matrix p = unit_rows(c, 8, rng);
    const Vector v = l2_normalize(test::random_vector(8, rng));
    const double l = mpc_instance_loss(v, p, trial % c, tau, nullptr);
    EXPECT_GE(l, 0.0);
    EXPECT_LE(l, std::log(c) + 2.0 / tau + 1e-9);
  }
}

TEST(Mpc, GradientMatchesFiniteDifference) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix p = unit_rows(4, 5, rng);
    const Vector v = test::random_vector(5, rng);
    Vector g;
    mpc_instance_loss(v, p, trial % 4, 0.3, &g);
    const Vector n = numeric_grad(
        [&](const Vector& x) { return mpc_instance_loss(x, p, trial % 4, 0.3, nullptr); }, v);
    EXPECT_LT((g - n).cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(Mpc, BatchMeanSkipsNoise) {
  Rng rng(5);
  PrototypeSet ps;
  ps.prototypes = unit_rows(3, 4, rng);
  ps.member_counts = {1, 1, 1};
  const Vector a = test::random_vector(4, rng), b = test::random_vector(4, rng),
               c = test::random_vector(4, rng);
  const std::vector<MpcSample> samples{{&a, 0, 1}, {&b, 0, kNoise}, {&c, 0, 2}};
  const auto r = mpc_loss(samples, std::span<const PrototypeSet>(&ps, 1), 0.5);
  EXPECT_EQ(r.count, 2);
  EXPECT_FALSE(r.skipped);
  const double want = 0.5 * (mpc_instance_loss(a, ps.prototypes, 1, 0.5, nullptr) +
                             mpc_instance_loss(c, ps.prototypes, 2, 0.5, nullptr));
  EXPECT_NEAR(r.loss, want, 1e-14);
  EXPECT_EQ(r.grads[1].size(), 0);
}

TEST(Mpc, AllNoiseIsSkipped) {
  PrototypeSet ps;
  const Vector a = Vector::Ones(3);
  const std::vector<MpcSample> samples{{&a, 0, kNoise}};
  const auto r = mpc_loss(samples, std::span<const PrototypeSet>(&ps, 1), 0.5);
  EXPECT_TRUE(r.skipped);
  EXPECT_EQ(r.loss, 0.0);
}

TEST(Mpc, RejectsBadArguments) {
  Matrix p = Matrix::Identity(2, 2);
  EXPECT_THROW(mpc_instance_loss(vec({1, 0}), p, 2, 0.1, nullptr), std::invalid_argument);
  EXPECT_THROW(mpc_instance_loss(vec({1, 0}), p, 0, 0.0, nullptr), std::invalid_argument);
  PrototypeSet ps;
  ps.prototypes = p;
  const Vector a = vec({1, 0});
  const std::vector<MpcSample> samples{{&a, 1, 0}};
  EXPECT_THROW(mpc_loss(samples, std::span<const PrototypeSet>(&ps, 1), 0.1),
               std::invalid_argument);
}

TEST(Mic, Examples) {
  const Vector x = vec({1, 0}), y = vec({0, 1}), d = vec({1, 1});
  EXPECT_NEAR(mic_loss(x, x, x, x, 0.5, 0.5).loss, -1.0, 1e-15);
  EXPECT_NEAR(mic_loss(y, x, y, x, 0.5, 0.5).loss, 0.0, 1e-15);
  EXPECT_NEAR(mic_loss(d, d, x, x, 0.5, 0.5).loss, -std::sqrt(0.5), 1e-12);
}

TEST(Mic, ZeroNormTermDropped) {
  const Vector x = vec({1, 0}), zero = Vector::Zero(2);
  const auto r = mic_loss(x, x, zero, x, 0.5, 0.5);
  EXPECT_EQ(r.degenerate_terms, 1);
  EXPECT_NEAR(r.loss, -0.5, 1e-15);
  EXPECT_EQ(r.grad_zi, Vector::Zero(2));
}

TEST(Mic, RangeAndSymmetry) {
  Rng rng(6);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector vi = test::random_vector(6, rng), vj = test::random_vector(6, rng),
                 zi = test::random_vector(6, rng), zj = test::random_vector(6, rng);
    const double a = w(rng), b = w(rng);
    const double l = mic_loss(vi, vj, zi, zj, a, b).loss;
    EXPECT_GE(l, -(a + b) - 1e-12);
    EXPECT_LE(l, a + b + 1e-12);
    // Swapping the pair and the weights gives the same value.
    EXPECT_NEAR(l, mic_loss(vj, vi, zj, zi, b, a).loss, 1e-14);
  }
}

TEST(Mic, GradientMatchesFiniteDifference) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector vi = test::random_vector(5, rng), vj = test::random_vector(5, rng),
                 zi = test::random_vector(5, rng), zj = test::random_vector(5, rng);
    const auto r = mic_loss(vi, vj, zi, zj, 0.3, 0.7);
    const Vector ni =
        numeric_grad([&](const Vector& x) { return mic_loss(vi, vj, x, zj, 0.3, 0.7).loss; }, zi);
    const Vector nj =
        numeric_grad([&](const Vector& x) { return mic_loss(vi, vj, zi, x, 0.3, 0.7).loss; }, zj);
    EXPECT_LT((r.grad_zi - ni).cwiseAbs().maxCoeff(), 1e-7);
    EXPECT_LT((r.grad_zj - nj).cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(MicMulti, TwoSamplingsEqualPair) {
  Rng rng(8);
  const std::vector<Vector> v{test::random_vector(4, rng), test::random_vector(4, rng)};
  const std::vector<Vector> z{test::random_vector(4, rng), test::random_vector(4, rng)};
  const auto m = mic_loss_multi(v, z, 0.5, 0.5);
  const auto p = mic_loss(v[0], v[1], z[0], z[1], 0.5, 0.5);
  EXPECT_EQ(m.loss, p.loss);
  EXPECT_EQ(m.grad_z[0], p.grad_zi);
  EXPECT_EQ(m.grad_z[1], p.grad_zj);
}

TEST(MicMulti, IdenticalTriple) {
  const Vector x = vec({1, 2, 3});
  const std::vector<Vector> v{x, x, x};
  EXPECT_NEAR(mic_loss_multi(v, v, 0.5, 0.5).loss, -1.0, 1e-14);
}

TEST(MicMulti, MeanOverPairs) {
  Rng rng(9);
  std::vector<Vector> v, z;
  for (int i = 0; i < 4; ++i) {
    v.push_back(test::random_vector(3, rng));
    z.push_back(test::random_vector(3, rng));
  }
  double sum = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) sum += mic_loss(v[i], v[j], z[i], z[j], 0.4, 0.6).loss;
  EXPECT_NEAR(mic_loss_multi(v, z, 0.4, 0.6).loss, sum / 6.0, 1e-14);
}

TEST(MicMulti, DisabledBelowTwo) {
  const std::vector<Vector> one{vec({1, 0})};
  const auto r = mic_loss_multi(one, one, 0.5, 0.5);
  EXPECT_TRUE(r.disabled);
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_THROW(mic_loss_multi(one, std::vector<Vector>{}, 0.5, 0.5), std::invalid_argument);
}

TEST(Combined, Weighting) {
  EXPECT_EQ(combined_loss(0.7, -0.3, 0.0).total, 0.7);
  EXPECT_EQ(combined_loss(0.7, -0.3, 1.0).total, -0.3);
  EXPECT_NEAR(combined_loss(0.4, -0.6, 0.5).total, -0.1, 1e-15);
}

TEST(LossConfig, Validation) {
  LossConfig c;
  EXPECT_NO_THROW(c.validate());
  c.tau = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = LossConfig{};
  c.lambda = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = LossConfig{};
  c.alpha = c.beta = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Normalize, BackwardMatchesFiniteDifference) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector v = test::random_vector(6, rng);
    const Vector up = test::random_vector(6, rng);
    const Vector n =
        numeric_grad([&](const Vector& x) { return up.dot(l2_normalize(x)); }, v);
    EXPECT_LT((l2_normalize_backward(v, up) - n).cwiseAbs().maxCoeff(), 1e-8);
  }
  EXPECT_EQ(l2_normalize(Vector::Zero(3)), Vector::Zero(3));
  EXPECT_EQ(l2_normalize_backward(Vector::Zero(3), Vector::Ones(3)), Vector::Zero(3));
}

TEST(Cosine, GradientMatchesFiniteDifference) {
  Rng rng(11);
  const Vector a = test::random_vector(5, rng), b = test::random_vector(5, rng);
  const Vector n = numeric_grad([&](const Vector& x) { return cosine(x, b); }, a);
  EXPECT_LT((cosine_grad(a, b) - n).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_EQ(cosine(a, Vector::Zero(5)), 0.0);
}

}  // namespace
}  // namespace simmc

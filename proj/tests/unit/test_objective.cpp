#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "simmc/gradcheck.hpp"
#include "simmc/objective.hpp"
#include "simmc/optimizer.hpp"
#include "test_util.hpp"

namespace simmc {
namespace {

// A small random batch with its masks, labels and prototypes kept alive.
struct Fixture {
  ModelParams params;
  std::vector<Matrix> frames;
  std::vector<std::vector<MaskVector>> masks;
  std::vector<std::vector<int>> labels;
  std::vector<PrototypeSet> prototypes;
  std::vector<std::vector<Vector>> targets;

  Fixture(int q, std::uint64_t seed, bool bias = false) {
    Rng rng(seed);
    params = ModelParams::initialize(4, 6, bias, rng);
    for (int b = 0; b < 5; ++b) {
      frames.push_back(test::random_matrix(5, 6, rng));
      masks.push_back(sample_masks(5, 1, q, rng));
      std::vector<int> l;
      for (int i = 0; i < q; ++i) l.push_back((b + i) % 4 == 3 ? kNoise : (b + i) % 3);
      labels.push_back(l);
    }
    for (int i = 0; i < q; ++i) {
      PrototypeSet p;
      p.sampling_index = i;
      p.prototypes = 0.8 * l2_normalize_rows(test::random_matrix(3, 4, rng));
      p.member_counts = {1, 1, 1};
      prototypes.push_back(p);
    }
    for (std::size_t b = 0; b < frames.size(); ++b) {
      std::vector<Vector> t;
      for (const auto& m : masks[b]) t.push_back(encode_sequence_frames(m, b));
      targets.push_back(t);
    }
  }

  Vector encode_sequence_frames(const MaskVector& m, std::size_t b) const {
    return pool_instance(encode_frames(params, frames[b]), m).v;
  }

  std::vector<BatchItem> batch(bool pinned) const {
    std::vector<BatchItem> out;
    for (std::size_t b = 0; b < frames.size(); ++b) {
      out.push_back(BatchItem{&frames[b], masks[b], labels[b],
                              pinned ? std::span<const Vector>(targets[b])
                                     : std::span<const Vector>()});
    }
    return out;
  }
};

double max_abs_diff(const ModelParams& a, const ModelParams& b) {
  double worst = 0.0;
  std::vector<std::span<const double>> bb;
  for_each_block(b, [&](std::string_view, std::span<const double> s) { bb.push_back(s); });
  std::size_t k = 0;
  for_each_block(a, [&](std::string_view, std::span<const double> s) {
    for (std::size_t i = 0; i < s.size(); ++i) worst = std::max(worst, std::abs(s[i] - bb[k][i]));
    ++k;
  });
  return worst;
}

ModelParams numeric_gradient(const Fixture& fx, const ObjectiveConfig& cfg) {
  const auto batch = fx.batch(true);
  ModelParams probe = fx.params;
  ModelParams out = fx.params.zeros_like();
  std::vector<std::span<double>> dst;
  for_each_block(out, [&](std::string_view, std::span<double> s) { dst.push_back(s); });
  std::size_t block = 0;
  for_each_block(probe, [&](std::string_view, std::span<double> s) {
    for (std::size_t k = 0; k < s.size(); ++k) {
      dst[block][k] = oracle::central_difference(
          [&](double t) {
            const double saved = s[k];
            s[k] = t;
            const double l = batch_objective(probe, batch, fx.prototypes, cfg, nullptr).loss.total;
            s[k] = saved;
            return l;
          },
          s[k], 1e-6);
    }
    ++block;
  });
  return out;
}

TEST(Objective, GradientMatchesFiniteDifference) {
  for (int q : {1, 2, 3}) {
    for (double lambda : {0.0, 0.5, 1.0}) {
      for (bool bias : {false, true}) {
        Fixture fx(q, 100 + q, bias);
        ObjectiveConfig cfg;
        cfg.loss.lambda = lambda;
        cfg.loss.tau = 0.3;
        ModelParams g;
        batch_objective(fx.params, fx.batch(true), fx.prototypes, cfg, &g);
        EXPECT_LT(max_abs_diff(g, numeric_gradient(fx, cfg)), 1e-6)
            << "q=" << q << " lambda=" << lambda << " bias=" << bias;
      }
    }
  }
}

TEST(Objective, PinnedTargetsMatchLiveAtBasePoint) {
  Fixture fx(2, 7);
  ObjectiveConfig cfg;
  ModelParams live, pinned;
  const auto a = batch_objective(fx.params, fx.batch(false), fx.prototypes, cfg, &live);
  const auto b = batch_objective(fx.params, fx.batch(true), fx.prototypes, cfg, &pinned);
  EXPECT_EQ(a.loss.total, b.loss.total);
  // The stopped operands contribute nothing to the gradient either way.
  EXPECT_TRUE(live == pinned);
}

TEST(Objective, PrototypeOnlyLeavesProjectionUntouched) {
  Fixture fx(2, 8);
  ObjectiveConfig cfg;
  cfg.loss.lambda = 0.0;
  ModelParams g;
  batch_objective(fx.params, fx.batch(false), fx.prototypes, cfg, &g);
  EXPECT_TRUE(g.wc.isZero(0.0));
  EXPECT_FALSE(g.w1.isZero(0.0));
}

TEST(Objective, ValueIsWeightedSum) {
  Fixture fx(3, 9);
  ObjectiveConfig cfg;
  cfg.loss.lambda = 0.3;
  const auto r = batch_objective(fx.params, fx.batch(false), fx.prototypes, cfg, nullptr);
  EXPECT_NEAR(r.loss.total, 0.3 * r.loss.mic + 0.7 * r.loss.mpc, 1e-15);
  EXPECT_FALSE(r.mic_disabled);
  EXPECT_LE(std::abs(r.loss.mic), 1.0);
}

TEST(Objective, SingleSamplingDisablesIntraTerm) {
  Fixture fx(1, 10);
  ObjectiveConfig cfg;
  const auto r = batch_objective(fx.params, fx.batch(false), fx.prototypes, cfg, nullptr);
  EXPECT_TRUE(r.mic_disabled);
  EXPECT_EQ(r.loss.mic, 0.0);
}

TEST(Objective, RejectsInconsistentBatch) {
  Fixture fx(2, 11);
  auto batch = fx.batch(false);
  batch[1].labels = std::span<const int>(fx.labels[1].data(), 1);
  EXPECT_THROW(batch_objective(fx.params, batch, fx.prototypes, ObjectiveConfig{}, nullptr),
               std::invalid_argument);
  auto pinned = fx.batch(true);
  pinned[0].mic_targets = pinned[0].mic_targets.first(1);
  EXPECT_THROW(batch_objective(fx.params, pinned, fx.prototypes, ObjectiveConfig{}, nullptr),
               std::invalid_argument);
  EXPECT_THROW(batch_objective(fx.params, {}, fx.prototypes, ObjectiveConfig{}, nullptr),
               std::invalid_argument);
}

// ------------------------------------------------------------------ Adam

ModelParams filled(const ModelParams& like, double value) {
  ModelParams p = like.zeros_like();
  for_each_block(p, [&](std::string_view, std::span<double> s) {
    for (double& x : s) x = value;
  });
  return p;
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Rng rng(1);
  ModelParams p = ModelParams::initialize(3, 4, true, rng);
  const ModelParams before = p;
  AdamState st = AdamState::for_params(p);
  adam_step(p, p.zeros_like(), st, AdamConfig{});
  EXPECT_TRUE(p == before);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Rng rng(2);
  ModelParams p = ModelParams::initialize(3, 4, false, rng);
  const ModelParams before = p;
  AdamState st = AdamState::for_params(p);
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  adam_step(p, filled(p, 2.5), st, cfg);
  // Bias correction makes the first step lr * g / (|g| + eps).
  EXPECT_NEAR(p.w1(0, 0) - before.w1(0, 0), -0.1, 1e-8);
  EXPECT_NEAR(p.wc(2, 1) - before.wc(2, 1), -0.1, 1e-8);
}

TEST(Adam, MatchesScalarRecurrence) {
  Rng rng(3);
  ModelParams p = ModelParams::initialize(2, 3, true, rng);
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  AdamState st = AdamState::for_params(p);
  std::vector<oracle::ScalarAdam> ref(p.parameter_count(),
                                      oracle::ScalarAdam{0.01, 0.9, 0.999, 1e-8});
  std::vector<double> theta;
  for_each_block(p, [&](std::string_view, std::span<const double> s) {
    theta.insert(theta.end(), s.begin(), s.end());
  });
  for (int step = 0; step < 5; ++step) {
    ModelParams g = p.zeros_like();
    std::vector<double> flat;
    for_each_block(g, [&](std::string_view, std::span<double> s) {
      for (double& x : s) {
        x = std::normal_distribution<double>(0.0, 1.0)(rng);
        flat.push_back(x);
      }
    });
    adam_step(p, g, st, cfg);
    for (std::size_t k = 0; k < theta.size(); ++k) theta[k] = ref[k].step(theta[k], flat[k]);
  }
  std::size_t k = 0;
  for_each_block(p, [&](std::string_view, std::span<const double> s) {
    for (double x : s) EXPECT_NEAR(x, theta[k++], 1e-14);
  });
}

TEST(Adam, NonFiniteGradientAbortsWithoutChanges) {
  Rng rng(4);
  ModelParams p = ModelParams::initialize(3, 4, false, rng);
  const ModelParams before = p;
  AdamState st = AdamState::for_params(p);
  ModelParams g = filled(p, 1.0);
  g.w2(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(adam_step(p, g, st, AdamConfig{}), std::domain_error);
  EXPECT_TRUE(p == before);
  EXPECT_EQ(st.step, 0);
  EXPECT_TRUE(st.m == p.zeros_like());
}

TEST(Adam, ZeroLearningRateIsIdentity) {
  Rng rng(5);
  ModelParams p = ModelParams::initialize(3, 4, false, rng);
  const ModelParams before = p;
  AdamState st = AdamState::for_params(p);
  AdamConfig cfg;
  cfg.learning_rate = 0.0;
  adam_step(p, filled(p, 3.0), st, cfg);
  EXPECT_TRUE(p == before);
}

TEST(Adam, RejectsBadConfigAndShapes) {
  Rng rng(6);
  ModelParams p = ModelParams::initialize(3, 4, false, rng);
  AdamState st = AdamState::for_params(p);
  AdamConfig cfg;
  cfg.beta1 = 1.0;
  EXPECT_THROW(adam_step(p, p.zeros_like(), st, cfg), std::invalid_argument);
  EXPECT_THROW(adam_step(p, ModelParams::zeros(3, 5), st, AdamConfig{}), std::invalid_argument);
}

// ------------------------------------------------------------- gradcheck

TEST(GradCheck, DefaultPasses) {
  const auto r = run_gradcheck(GradCheckConfig{});
  EXPECT_TRUE(r.passed);
  for (const auto& b : r.blocks) EXPECT_LT(b.max_rel_error, 1e-4) << b.name;
}

TEST(GradCheck, VariantsPass) {
  GradCheckConfig c;
  c.samplings = 3;
  c.loss.lambda = 1.0;
  EXPECT_TRUE(run_gradcheck(c).passed);
  c = GradCheckConfig{};
  c.bias = true;
  EXPECT_TRUE(run_gradcheck(c).passed);
  c = GradCheckConfig{};
  c.normalize = false;
  EXPECT_TRUE(run_gradcheck(c).passed);
}

TEST(GradCheck, PrototypeOnlyHasZeroProjectionGradient) {
  GradCheckConfig c;
  c.loss.lambda = 0.0;
  const auto r = run_gradcheck(c);
  EXPECT_TRUE(r.passed);
  for (const auto& b : r.blocks) {
    if (b.name == "wc") {
      EXPECT_EQ(b.max_abs_analytic, 0.0);
    }
  }
}

TEST(GradCheck, CorruptedGradientFails) {
  GradCheckConfig c;
  c.corrupt_gradient = true;
  const auto r = run_gradcheck(c);
  EXPECT_FALSE(r.passed);
  EXPECT_FALSE(r.blocks.front().passed);
  EXPECT_EQ(r.to_json()["passed"], false);
}

}  // namespace
}  // namespace simmc

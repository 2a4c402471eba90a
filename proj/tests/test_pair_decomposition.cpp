#include <gtest/gtest.h>

#include "slfv/pair_decomposition.hpp"

using namespace slfv;

namespace {

ModelParams params(std::int64_t n, double alpha, std::uint64_t seed = 21) {
  ModelParams p;
  p.n = n;
  p.alpha = alpha;
  p.seed = seed;
  return p;
}

}  // namespace

TEST(NeutralJump, SymmetricBoundedWithVarianceTwoThirds) {
  Rng rng = make_stream(1, 0, StreamTag::misc);
  MomentAccumulator acc;
  for (int k = 0; k < 1000000; ++k) {
    const double j = sample_neutral_jump(1.0, rng);
    ASSERT_GE(j, -2.0);
    ASSERT_LE(j, 2.0);
    acc.add(j);
  }
  EXPECT_NEAR(acc.mean(), 0.0, 3.0 * acc.standard_error());
  EXPECT_NEAR(acc.variance(), 2.0 / 3.0, 0.01 * 2.0 / 3.0);
}

TEST(NeutralJump, ScalesWithRadius) {
  Rng rng = make_stream(1, 1, StreamTag::misc);
  MomentAccumulator acc;
  for (int k = 0; k < 200000; ++k) acc.add(sample_neutral_jump(2.0, rng));
  EXPECT_NEAR(acc.variance(), 2.0 * 4.0 / 3.0, 0.02 * 8.0 / 3.0);
}

TEST(SelectiveJumps, OrderedWithThirds) {
  Rng rng = make_stream(1, 2, StreamTag::misc);
  MomentAccumulator l, r;
  for (int k = 0; k < 100000; ++k) {
    const SelectiveJumps s = sample_selective_jumps(1.0, rng);
    ASSERT_LT(s.left, s.right);
    l.add(s.left);
    r.add(s.right);
  }
  EXPECT_NEAR(l.mean(), -1.0 / 3.0, 3.0 * l.standard_error());
  EXPECT_NEAR(r.mean(), 1.0 / 3.0, 3.0 * r.standard_error());
}

TEST(Jumps, RejectNonpositiveRadius) {
  Rng rng;
  EXPECT_THROW(sample_neutral_jump(0.0, rng), ValidationError);
  EXPECT_THROW(sample_selective_jumps(-1.0, rng), ValidationError);
}

TEST(Classify, Regimes) {
  EXPECT_EQ(classify_pair(0.3, 0.3, 0.2), Regime::coalesced);
  EXPECT_EQ(classify_pair(0.3, 0.5, 0.2), Regime::nearby);
  EXPECT_EQ(classify_pair(0.3, 0.51, 0.2), Regime::separated);
}

TEST(RunPair, FirstSeparationIsExponential) {
  const ModelParams p = params(100, 1.0);
  MomentAccumulator acc;
  for (std::uint64_t r = 0; r < 10000; ++r) {
    Rng rng = make_stream(p.seed, r, StreamTag::pair);
    const PairRun run = run_pair(0.0, 0.0, 1.0, p, rng);
    ASSERT_FALSE(std::isnan(run.first_separation));
    acc.add(run.first_separation);
  }
  EXPECT_NEAR(acc.mean(), 0.05, 3.0 * acc.standard_error());
  EXPECT_NEAR(acc.stddev(), 0.05, 0.003);
}

TEST(RunPair, NeutralStaysCoalesced) {
  const ModelParams p = params(100, 0.0);
  for (std::uint64_t r = 0; r < 50; ++r) {
    Rng rng = make_stream(p.seed, r, StreamTag::pair);
    const PairRun run = run_pair(0.0, 0.0, 1.5, p, rng);
    EXPECT_EQ(run.final_state.L, run.final_state.R);
    EXPECT_EQ(run.final_state.C, 1.5);
    EXPECT_EQ(run.final_state.N, 0.0);
    EXPECT_EQ(run.final_state.S, 0.0);
  }
  EXPECT_EQ(nearby_occupation(p, 1.0, 100).mean, 0.0);
}

TEST(RunPair, ClocksOrderingAndSharedJumps) {
  const ModelParams p = params(100, 2.0);
  const double thr = 2.0 * p.max_rescaled_radius();
  for (std::uint64_t r = 0; r < 200; ++r) {
    Rng rng = make_stream(p.seed, r, StreamTag::pair);
    const PairRun run = run_pair(-0.05, 0.05, 1.0, p, rng, true);
    ASSERT_EQ(run.trajectory.size(), run.events);
    Regime prev = classify_pair(-0.05, 0.05, thr);
    double L = -0.05, R = 0.05;
    std::size_t inc = 0;
    for (const PairState& s : run.trajectory) {
      ASSERT_NEAR(s.C + s.N + s.S, s.time, 1e-12);
      ASSERT_LE(s.L, s.R);
      // increments logged for this event
      double dl = 0, dr = 0;
      bool hl = false, hr = false;
      std::uint64_t id = run.increments[inc].event_id;
      IncrementSource src = run.increments[inc].source;
      while (inc < run.increments.size() && run.increments[inc].event_id == id) {
        (run.increments[inc].left_component ? dl : dr) = run.increments[inc].delta;
        (run.increments[inc].left_component ? hl : hr) = true;
        ++inc;
      }
      if (prev == Regime::coalesced && src == IncrementSource::neutral) {
        ASSERT_TRUE(hl && hr);
        ASSERT_EQ(dl, dr);
      }
      if (prev == Regime::separated && R - L > 2.0 * thr) {
        ASSERT_FALSE(hl && hr);
      }
      ASSERT_NEAR(L + dl, s.L, 1e-12);
      ASSERT_NEAR(R + dr, s.R, 1e-12);
      L = s.L;
      R = s.R;
      prev = s.regime;
    }
    EXPECT_EQ(inc, run.increments.size());
    EXPECT_NEAR(run.final_state.C + run.final_state.N + run.final_state.S, 1.0, 1e-12);
  }
}

TEST(RunPair, Preconditions) {
  Rng rng;
  EXPECT_THROW(run_pair(1.0, 0.0, 1.0, params(100, 1.0), rng), ValidationError);
  ModelParams p = params(100, 1.0);
  p.upsilon = 0.5;
  EXPECT_THROW(run_pair(0.0, 0.0, 1.0, p, rng), UnsupportedParameter);
}

TEST(DriftDiffusion, DriftAndDerivedDiffusion) {
  const DriftDiffusionReport rep = estimate_drift_diffusion(params(100, 1.0), 1.0, 6000);
  EXPECT_NEAR(rep.zeta_hat, 2.0 / 3.0, 3.0 * rep.zeta_se);
  EXPECT_NEAR(rep.xi2_hat, 4.0 / 3.0, 3.0 * rep.xi2_se);
  EXPECT_GT(std::abs(rep.xi2_hat - 4.0 / 9.0), 10.0 * rep.xi2_se);
}

TEST(DriftDiffusion, NoSelectionNoDrift) {
  const DriftDiffusionReport rep = estimate_drift_diffusion(params(100, 0.0), 1.0, 4000);
  EXPECT_NEAR(rep.zeta_hat, 0.0, 3.0 * rep.zeta_se);
}

TEST(DriftDiffusion, DriftDoesNotDependOnN) {
  const DriftDiffusionReport a = estimate_drift_diffusion(params(100, 1.0, 5), 0.25, 4000);
  const DriftDiffusionReport b = estimate_drift_diffusion(params(10000, 1.0, 6), 0.25, 2000);
  EXPECT_LE(std::abs(a.zeta_hat - b.zeta_hat), 3.0 * std::hypot(a.zeta_se, b.zeta_se));
}

TEST(NearbyOccupation, NonnegativeAndShrinking) {
  const OccupationReport a = nearby_occupation(params(100, 1.0), 1.0, 2000);
  const OccupationReport b = nearby_occupation(params(1600, 1.0), 1.0, 2000);
  for (double v : a.samples) ASSERT_GE(v, 0.0);
  EXPECT_GT(a.mean, 0.0);
  EXPECT_LT(b.mean, a.mean);
}

TEST(DriftDiffusion, PartialImpactIsRejected) {
  ModelParams p = params(100, 1.0);
  p.upsilon = 0.5;
  EXPECT_THROW(estimate_drift_diffusion(p, 0.1, 10), UnsupportedParameter);
}

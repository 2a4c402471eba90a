#include <gtest/gtest.h>

#include <sstream>

#include "slfv/event_engine.hpp"
#include "slfv/model_config.hpp"

using namespace slfv;

namespace {

ModelParams params(std::int64_t n, double alpha, RadiusMeasure mu = RadiusMeasure::delta(1.0)) {
  ModelParams p;
  p.n = n;
  p.alpha = alpha;
  p.mu = std::move(mu);
  return p;
}

RadiusMeasure half_one_half_two() { return RadiusMeasure({{0.5, 1.0}, {0.5, 2.0}}); }

}  // namespace

TEST(LimitConstants, DriftForUnitRadius) {
  EXPECT_DOUBLE_EQ(limit_constants(params(1000, 1.0)).zeta, 2.0 / 3.0);
}

TEST(LimitConstants, NoSelectionNoDrift) {
  EXPECT_EQ(limit_constants(params(1000, 0.0)).zeta, 0.0);
  EXPECT_EQ(limit_constants(params(7, 0.0, half_one_half_two())).zeta, 0.0);
}

TEST(LimitConstants, BothDiffusionCandidates) {
  const LimitConstants c = limit_constants(params(1000, 1.0));
  EXPECT_DOUBLE_EQ(c.xi2_four_ninths, 4.0 / 9.0);
  EXPECT_DOUBLE_EQ(c.xi2_derived, 4.0 / 3.0);
}

TEST(LimitConstants, MixtureMoments) {
  // m2 = 2.5, m3 = 4.5
  const LimitConstants c = limit_constants(params(100, 2.0, half_one_half_two()));
  EXPECT_DOUBLE_EQ(c.zeta, 2.0 / 3.0 * 2.0 * 2.5);
  EXPECT_DOUBLE_EQ(c.xi2_four_ninths, 4.0 / 9.0 * 4.5);
  EXPECT_DOUBLE_EQ(c.xi2_derived, 4.0 / 3.0 * 4.5);
}

TEST(LimitConstants, HomogeneousInWeights) {
  const ModelParams p = params(400, 1.5, half_one_half_two());
  for (double c : {0.25, 2.0, 8.0}) {
    ModelParams q = p;
    q.mu = p.mu.with_weights_scaled(c);
    const LimitConstants a = limit_constants(p), b = limit_constants(q);
    EXPECT_EQ(b.zeta, c * a.zeta);
    EXPECT_EQ(b.xi2_four_ninths, c * a.xi2_four_ninths);
    EXPECT_EQ(b.xi2_derived, c * a.xi2_derived);
    EXPECT_EQ(selection_probability(q), selection_probability(p));
  }
}

TEST(SelectionProbability, Examples) {
  EXPECT_DOUBLE_EQ(selection_probability(params(10000, 1.0)), 0.01);
  EXPECT_EQ(selection_probability(params(100, 0.0)), 0.0);
  EXPECT_EQ(selection_probability(params(4, 2.0)), 1.0);
}

TEST(SelectionProbability, AboveOneRejected) {
  EXPECT_THROW(selection_probability(params(4, 2.5)), ValidationError);
}

TEST(PerPointRate, Examples) {
  EXPECT_DOUBLE_EQ(per_point_event_rate(params(1, 0.0)), 2.0);
  EXPECT_DOUBLE_EQ(per_point_event_rate(params(1000, 0.0)), 2000.0);
  EXPECT_DOUBLE_EQ(per_point_event_rate(params(1, 0.0, half_one_half_two())), 3.0);
}

TEST(PerPointRate, MatchesBoxCount) {
  for (auto mu : {RadiusMeasure::delta(1.0), half_one_half_two()}) {
    ModelParams p = params(1, 0.0, mu);
    p.seed = 77;
    const double rate = per_point_event_rate(p);
    const double T = 1e4 / rate * 1.2;
    Rng rng = make_stream(p.seed, 0, StreamTag::events);
    const EventStream s = sample_events_box(p, 0.0, 0.0, 0.0, T, rng);
    std::size_t covering = 0;
    for (const auto& e : s.events) covering += e.covers(0.0);
    const double expected = rate * T;
    EXPECT_NEAR(static_cast<double>(covering), expected, 3.0 * std::sqrt(expected));
  }
}

TEST(ModelParams, Validation) {
  EXPECT_THROW(params(0, 1.0).validate(), ValidationError);
  EXPECT_THROW(params(10, -1.0).validate(), ValidationError);
  ModelParams p = params(10, 1.0);
  p.upsilon = 0.0;
  EXPECT_THROW(p.validate(), ValidationError);
  p.upsilon = 1.5;
  EXPECT_THROW(p.validate(), ValidationError);
  p.upsilon = 1.0;
  EXPECT_NO_THROW(p.validate());
}

TEST(RadiusMeasure, RejectsBadAtoms) {
  EXPECT_THROW(RadiusMeasure(std::vector<RadiusAtom>{}), ValidationError);
  EXPECT_THROW(RadiusMeasure::delta(0.0), ValidationError);
  EXPECT_THROW(RadiusMeasure({{-1.0, 1.0}}), ValidationError);
}

TEST(RadiusMeasure, ParseAndFormatRoundTrip) {
  EXPECT_EQ(parse_radius_measure("delta:1.0"), RadiusMeasure::delta(1.0));
  const RadiusMeasure m = parse_radius_measure("atoms:(0.5,1.0),(0.5,2.0)");
  EXPECT_EQ(m, half_one_half_two());
  EXPECT_EQ(parse_radius_measure(format_radius_measure(m)), m);
  EXPECT_EQ(parse_radius_measure(format_radius_measure(RadiusMeasure::delta(0.3))), RadiusMeasure::delta(0.3));
}

TEST(RadiusMeasure, ParseErrors) {
  for (const char* bad : {"delta", "gauss:1", "atoms:(1)", "atoms:(1,2", "atoms:1,2", "delta:abc", "delta:-1"})
    EXPECT_THROW(parse_radius_measure(bad), ValidationError) << bad;
}

TEST(Config, ParsesKeyValueLines) {
  std::istringstream in(
      "# model\n"
      "n = 400\n"
      "alpha=1.5   # trailing comment\n"
      "\n"
      "mu = atoms:(0.5,1.0),(0.5,2.0)\n"
      "upsilon = 0.5\n"
      "seed = 42\n");
  const ModelParams p = apply_config(parse_config(in), ModelParams{});
  EXPECT_EQ(p.n, 400);
  EXPECT_EQ(p.alpha, 1.5);
  EXPECT_EQ(p.upsilon, 0.5);
  EXPECT_EQ(p.seed, 42u);
  EXPECT_EQ(p.mu, half_one_half_two());
}

TEST(Config, RejectsMalformed) {
  std::istringstream no_eq("n 400\n");
  EXPECT_THROW(parse_config(no_eq), ValidationError);
  std::istringstream empty_key(" = 3\n");
  EXPECT_THROW(parse_config(empty_key), ValidationError);
  std::istringstream bad_num("n = 4x\n");
  EXPECT_THROW(apply_config(parse_config(bad_num), ModelParams{}), ValidationError);
  std::istringstream out_of_range("n = 4\nalpha = 3\n");
  EXPECT_THROW(apply_config(parse_config(out_of_range), ModelParams{}), ValidationError);
}

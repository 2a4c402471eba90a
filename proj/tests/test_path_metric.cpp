#include <gtest/gtest.h>

#include "slfv/diagnostics.hpp"
#include "slfv/path_metric.hpp"

using namespace slfv;

namespace {

CadlagPath step(double sigma, double v0, std::vector<Jump> jumps = {}) {
  return CadlagPath(sigma, v0, std::move(jumps));
}

double d_prime_paths(const CadlagPath& a, const CadlagPath& b) { return d_prime_M(a, b); }

}  // namespace

TEST(Envelope, KnownValues) {
  EXPECT_EQ(envelope(0.0), 1.0);
  EXPECT_EQ(envelope(1.0), 0.0);
  EXPECT_EQ(envelope(-1.0), 0.0);
  EXPECT_NEAR(envelope(std::tanh(1.0)), 0.5, 1e-12);
  EXPECT_NEAR(envelope(-std::tanh(3.0)), 0.25, 1e-12);
}

TEST(Compactify, ZeroPathIsZero) {
  const CompactifiedPath g = compactify(step(-CadlagPath::inf, 0.0));
  EXPECT_EQ(g.sigma(), -1.0);
  for (double t : {-0.99, -0.5, 0.0, 0.5, 0.99, 1.0, 1.5}) EXPECT_EQ(g(t), 0.0) << t;
}

TEST(Compactify, PlusBoundaryIsTheEnvelope) {
  const CompactifiedPath g = compactify(CadlagPath::boundary(true));
  EXPECT_EQ(g.sigma(), -1.0);
  for (double t : {-0.9, -0.2, 0.0, 0.3, 0.95}) EXPECT_DOUBLE_EQ(g(t), envelope(t)) << t;
  EXPECT_EQ(g(1.0), 0.0);
  const CompactifiedPath m = compactify(CadlagPath::boundary(false));
  EXPECT_DOUBLE_EQ(m(0.3), -envelope(0.3));
}

TEST(Compactify, StartAndJumpsMapThroughTanh) {
  const CompactifiedPath g = compactify(step(0.0, 1.0, {{1.0, -2.0}}));
  EXPECT_EQ(g.sigma(), 0.0);
  ASSERT_EQ(g.jumps().size(), 1u);
  EXPECT_DOUBLE_EQ(g.jumps()[0].time, std::tanh(1.0));
  EXPECT_DOUBLE_EQ(g(0.0), std::tanh(1.0));
  EXPECT_DOUBLE_EQ(g(0.9), std::tanh(-2.0) * envelope(0.9));
}

TEST(DPrime, ZeroOnTheDiagonal) {
  Rng rng = make_stream(4, 0, StreamTag::metric);
  for (int k = 0; k < 50; ++k) {
    const CadlagPath f = random_step_path(rng);
    EXPECT_EQ(d_prime_M(f, f), 0.0);
    const CompactifiedPath g = random_g_step_path(rng);
    EXPECT_EQ(d_prime(g, g), 0.0);
  }
}

TEST(DPrime, ShiftedJumpCostsTheShift) {
  for (double delta : {0.01, 0.05, 0.2}) {
    const auto g = CompactifiedPath::step(-0.5, 0.0, {{0.2, 1.0}});
    const auto h = CompactifiedPath::step(-0.5, 0.0, {{0.2 + delta, 1.0}});
    EXPECT_NEAR(d_prime(g, h), delta, 1e-12) << delta;
  }
  // Shifting past the level gap is worse than not matching at all.
  const auto g = CompactifiedPath::step(-0.5, 0.0, {{0.0, 0.1}});
  const auto h = CompactifiedPath::step(-0.5, 0.0, {{0.5, 0.1}});
  EXPECT_NEAR(d_prime(g, h), 0.1, 1e-12);
}

TEST(DPrime, StartTimesCountDirectly) {
  const auto g = CompactifiedPath::step(-0.5, 0.3, {});
  const auto h = CompactifiedPath::step(-0.2, 0.3, {});
  EXPECT_NEAR(d_prime(g, h), 0.3, 1e-12);
}

TEST(DPrime, BoundedBySupDistanceOnSameJumpTimes) {
  Rng rng = make_stream(4, 1, StreamTag::metric);
  for (int k = 0; k < 200; ++k) {
    const CadlagPath a = random_step_path(rng);
    std::vector<Jump> j(a.jumps().begin(), a.jumps().end());
    for (auto& x : j) x.value += normal(rng, 0.3);
    const CadlagPath b(a.sigma(), a.initial() + normal(rng, 0.3), j);
    EXPECT_LE(d_prime_M(a, b), sup_distance(a, b) + 1e-12);
  }
}

TEST(DPrime, SymmetricAndTriangle) {
  Rng rng = make_stream(4, 2, StreamTag::metric);
  for (int k = 0; k < 200; ++k) {
    const auto f = random_g_step_path(rng), g = random_g_step_path(rng), h = random_g_step_path(rng);
    const double fg = d_prime(f, g);
    EXPECT_EQ(fg, d_prime(g, f));
    EXPECT_LE(d_prime(f, h), fg + d_prime(g, h) + 1e-9);
  }
}

TEST(DPrime, AgreesWithBruteForce) {
  Rng rng = make_stream(4, 3, StreamTag::metric);
  for (int k = 0; k < 200; ++k) {
    const auto g = random_g_step_path(rng), h = random_g_step_path(rng);
    EXPECT_NEAR(d_prime(g, h), brute_force_d_prime(g, h), 1e-12);
  }
}

TEST(DPrime, JumpBudget) {
  std::vector<Jump> j;
  for (int k = 1; k <= 70; ++k) j.push_back({0.01 * k, k % 2 ? 0.5 : -0.5});
  const auto g = CompactifiedPath::step(0.0, 0.0, j), h = CompactifiedPath::step(0.0, 0.0, {});
  EXPECT_THROW(d_prime(g, h), ResourceError);
  EXPECT_NO_THROW(d_prime(g, h, 80));
}

TEST(DM, IdentityBoundaryAndSymmetry) {
  EXPECT_EQ(d_M(step(0, 1, {{1, 2}}), step(0, 1, {{1, 2}})).value, 0.0);
  EXPECT_EQ(d_M(CadlagPath::boundary(true), CadlagPath::boundary(false)).value, 2.0);
  Rng rng = make_stream(4, 4, StreamTag::metric);
  for (int k = 0; k < 100; ++k) {
    const CadlagPath a = random_step_path(rng), b = random_step_path(rng);
    const MetricValue ab = d_M(a, b), ba = d_M(b, a);
    EXPECT_EQ(ab.value, ba.value);
    EXPECT_GE(ab.value, 0.0);
  }
}

// Jump-time convergence: the Skorokhod-type distance goes to zero while the
// uniform distance does not. Uniform convergence implies both.
TEST(Topology, SequencesConvergeTheSameWay) {
  const CadlagPath f = step(0.0, 0.0, {{0.5, 1.0}});
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 2; k <= 256; k *= 2) {
    const CadlagPath fk = step(0.0, 0.0, {{0.5 + 1.0 / k, 1.0}});
    const double d = d_prime_M(fk, f);
    EXPECT_LT(d, prev);
    EXPECT_LE(d, std::tanh(0.5 + 1.0 / k) - std::tanh(0.5) + 1e-12);
    EXPECT_EQ(sup_distance(fk, f), 1.0);
    prev = d;
  }
  EXPECT_LT(prev, 0.004);
  for (int k = 2; k <= 256; k *= 2) {
    const CadlagPath gk = step(0.0, 1.0 / k, {{0.5, 1.0 + 1.0 / k}});
    EXPECT_LE(d_prime_M(gk, f), 1.0 / k);
    EXPECT_LE(d_M(gk, f).value, 1.0 / k + 1e-12);
  }
}

TEST(SupContinuous, IdenticalShiftedAndBruteForce) {
  LinearPath f{-0.5, {{-0.5, 0.0}, {0.3, 1.2}, {1.4, -0.7}, {2.0, 0.1}}};
  EXPECT_EQ(sup_metric_continuous(f, f), 0.0);
  LinearPath g = f;
  for (auto& k : g.knots) k.value += 0.25;
  const double s = sup_metric_continuous(f, g);
  EXPECT_GT(s, 0.0);
  EXPECT_LE(s, 0.25);

  LinearPath h{0.1, {{0.1, -0.4}, {0.6, 0.9}, {3.0, 2.0}}};
  const double v = sup_metric_continuous(f, h);
  double brute = std::abs(std::tanh(f.sigma) - std::tanh(h.sigma));
  for (int k = 0; k <= 200000; ++k) {
    const double t = -1.0 + 2.0 * k / 200000.0;
    brute = std::max(brute, std::abs(compactified_value(f, t) - compactified_value(h, t)));
  }
  EXPECT_LE(brute, v + 1e-12);
  EXPECT_NEAR(v, brute, 1e-6);
}

TEST(Hausdorff, BasicProperties) {
  const std::vector<CadlagPath> P{step(0, 0), step(0, 1, {{1, 0}})}, Q{step(0, 0.5)};
  const auto P_ = std::span<const CadlagPath>(P), Q_ = std::span<const CadlagPath>(Q);
  EXPECT_EQ(hausdorff(P_, P_, d_prime_paths), 0.0);
  EXPECT_EQ(hausdorff(Q_.first(1), P_.first(1), d_prime_paths), d_prime_M(Q[0], P[0]));
  EXPECT_EQ(hausdorff(P_, Q_, d_prime_paths), hausdorff(Q_, P_, d_prime_paths));
  // A subset is within directed distance zero of its superset.
  EXPECT_EQ(directed_hausdorff(P_.first(1), P_, d_prime_paths), 0.0);
  EXPECT_GT(directed_hausdorff(P_, P_.first(1), d_prime_paths), 0.0);
}

TEST(Hausdorff, EmptySets) {
  const std::vector<CadlagPath> P{step(0, 0)}, E;
  const auto P_ = std::span<const CadlagPath>(P), E_ = std::span<const CadlagPath>(E);
  EXPECT_EQ(hausdorff(E_, E_, d_prime_paths), 0.0);
  EXPECT_THROW(hausdorff(P_, E_, d_prime_paths), ValidationError);
  EXPECT_EQ(hausdorff(P_, E_, d_prime_paths, EmptySetConvention::isolated_point),
            std::numeric_limits<double>::infinity());
}

TEST(Interpolate, JumpFreeUnchanged) {
  const LinearPath l = interpolate(step(0.0, 0.7), {});
  for (double t : {0.0, 1.0, 10.0}) EXPECT_EQ(l.at(t), 0.7);
}

TEST(Interpolate, SingleJumpRamp) {
  const CadlagPath f = step(0.0, 0.0, {{1.0, 1.0}});
  const std::vector<double> m{0.2};
  const LinearPath l = interpolate(f, m);
  EXPECT_EQ(l.at(0.5), 0.0);
  EXPECT_EQ(l.at(0.8), 0.0);
  EXPECT_NEAR(l.at(0.9), 0.5, 1e-12);
  EXPECT_EQ(l.at(1.0), 1.0);
  EXPECT_EQ(l.at(3.0), 1.0);
  EXPECT_NEAR(sup_distance(f, l), 1.0, 1e-12);
}

TEST(Interpolate, Rejections) {
  const CadlagPath f = step(0.0, 0.0, {{1.0, 1.0}, {1.1, 0.0}});
  const std::vector<double> overlap{0.2, 0.2}, one{0.1}, bad{0.05, 0.0};
  EXPECT_THROW(interpolate(f, overlap), ValidationError);
  EXPECT_THROW(interpolate(f, one), ValidationError);
  EXPECT_THROW(interpolate(f, bad), ValidationError);
  const std::vector<double> ok{0.1, 0.05};
  EXPECT_NO_THROW(interpolate(f, ok));
}

TEST(Selftest, SmallRunPasses) {
  const MetricSelftest r = metric_selftest(8, 100, 50, 50);
  EXPECT_TRUE(r.passed()) << r.max_triangle_excess << " " << r.max_bruteforce_diff;
  EXPECT_EQ(r.triples, 100u);
  EXPECT_EQ(r.boundary_distance, 2.0);
}

#include <gtest/gtest.h>

#include <map>

#include "slfv/dual_sim.hpp"
#include "slfv/stats.hpp"

using namespace slfv;

namespace {

ReproductionEvent neutral_event(double t, double x, double rho, double z) {
  ReproductionEvent e;
  e.time = t;
  e.center = x;
  e.radius = rho;
  e.z1 = z;
  return e;
}

ReproductionEvent selective_event(double t, double x, double rho, double z1, double z2) {
  ReproductionEvent e = neutral_event(t, x, rho, z1);
  e.kind = EventKind::selective;
  e.z2 = z2;
  return e;
}

ModelParams params(std::int64_t n, double alpha, double upsilon = 1.0, std::uint64_t seed = 5) {
  ModelParams p;
  p.n = n;
  p.alpha = alpha;
  p.upsilon = upsilon;
  p.seed = seed;
  return p;
}

std::vector<double> positions_after(std::vector<double> start, const ReproductionEvent& e) {
  Rng rng;
  return apply_event(DualState::from_points(start), e, 1.0, rng).positions;
}

}  // namespace

TEST(ApplyEvent, NeutralReplacesCoveredLineage) {
  EXPECT_EQ(positions_after({0.1}, neutral_event(1.0, 0.0, 0.2, -0.05)), std::vector<double>{-0.05});
}

TEST(ApplyEvent, NeutralCoalescesAllCovered) {
  EXPECT_EQ(positions_after({0.1, -0.1}, neutral_event(1.0, 0.0, 0.2, -0.05)), std::vector<double>{-0.05});
}

TEST(ApplyEvent, SelectiveBranches) {
  EXPECT_EQ(positions_after({0.1}, selective_event(1.0, 0.0, 0.2, -0.1, 0.15)), (std::vector<double>{-0.1, 0.15}));
}

TEST(ApplyEvent, UncoveredUntouched) {
  EXPECT_EQ(positions_after({0.5, 2.0}, neutral_event(1.0, 0.0, 0.2, -0.05)), (std::vector<double>{0.5, 2.0}));
  EXPECT_EQ(positions_after({-1.0, 0.1, 3.0}, neutral_event(1.0, 0.0, 0.2, 0.05)),
            (std::vector<double>{-1.0, 0.05, 3.0}));
}

TEST(ApplyEvent, EventMustBeLater) {
  Rng rng;
  DualState st = DualState::from_points(std::vector<double>{0.0}, 2.0);
  EXPECT_THROW(apply_event_inplace(st, neutral_event(1.0, 0.0, 0.2, 0.0), 1.0, rng), ValidationError);
}

TEST(ApplyEvent, MarkingIsBinomial) {
  Rng rng = make_stream(3, 0, StreamTag::marking);
  const double ups = 0.3;
  std::vector<double> start;
  for (int k = 0; k < 10; ++k) start.push_back(-0.09 + 0.02 * k);
  MomentAccumulator marked;
  std::size_t unchanged = 0;
  const int N = 20000;
  for (int r = 0; r < N; ++r) {
    DualState st = DualState::from_points(start);
    EventOutcome out;
    apply_event_inplace(st, neutral_event(1.0, 0.0, 0.2, 0.0), ups, rng, &out);
    ASSERT_EQ(out.covered, 10u);
    marked.add(static_cast<double>(out.marked.size()));
    if (out.marked.empty()) {
      ++unchanged;
      EXPECT_EQ(st.positions, start);
    } else {
      EXPECT_EQ(st.size(), 10 - out.marked.size() + 1);
    }
  }
  EXPECT_NEAR(marked.mean(), 10 * ups, 3.0 * marked.standard_error());
  EXPECT_NEAR(marked.variance(), 10 * ups * (1 - ups), 0.1);
  const double p0 = std::pow(1 - ups, 10);
  EXPECT_NEAR(unchanged / double(N), p0, 3.0 * std::sqrt(p0 * (1 - p0) / N));
}

TEST(RunDual, NeutralGenealogyIsAChain) {
  const ModelParams p = params(100, 0.0);
  DualOptions opt;
  opt.record = true;
  const double start[1] = {0.0};
  const GenealogyGraph g = run_dual(start, 1.0, p, 0, opt);
  EXPECT_EQ(g.final_state.size(), 1u);
  ASSERT_FALSE(g.events.empty());
  EXPECT_EQ(g.nodes.size(), g.events.size() + 1);
  EXPECT_EQ(g.edges.size(), g.events.size());
  for (const auto& e : g.edges) EXPECT_EQ(e.role, EdgeRole::neutral_parent);
  std::map<LineageId, int> children;
  for (const auto& e : g.edges) ++children[e.child];
  for (const auto& [id, c] : children) EXPECT_EQ(c, 1) << id;
}

TEST(RunDual, BranchingOnlyAtSelectiveEvents) {
  const ModelParams p = params(100, 2.0);
  DualOptions opt;
  opt.record = true;
  const double start[2] = {0.0, 0.3};
  for (std::uint64_t r = 0; r < 20; ++r) {
    const GenealogyGraph g = run_dual(start, 0.5, p, r, opt);
    std::map<std::uint64_t, EventKind> kind;
    for (const auto& e : g.events) kind[e.id] = e.kind;
    std::map<std::pair<LineageId, std::uint64_t>, int> parents;
    for (const auto& e : g.edges) {
      ++parents[{e.child, e.event_id}];
      EXPECT_EQ(kind.at(e.event_id) == EventKind::selective, e.role != EdgeRole::neutral_parent);
    }
    for (const auto& [key, c] : parents) EXPECT_EQ(c, kind.at(key.second) == EventKind::selective ? 2 : 1);
  }
}

TEST(RunDual, TwoNeutralLineagesCoalesce) {
  const ModelParams p = params(100, 0.0);
  const double start[2] = {0.0, 0.05};
  int single = 0;
  for (std::uint64_t r = 0; r < 50; ++r) single += run_dual(start, 20.0, p, r).final_state.size() == 1;
  EXPECT_GE(single, 45);
}

TEST(RunDual, DeterministicPerReplicate) {
  const ModelParams p = params(100, 1.0, 0.6);
  const double start[3] = {-0.2, 0.0, 0.4};
  const GenealogyGraph a = run_dual(start, 0.5, p, 7), b = run_dual(start, 0.5, p, 7);
  EXPECT_EQ(a.final_state.positions, b.final_state.positions);
  EXPECT_NE(a.final_state.positions, run_dual(start, 0.5, p, 8).final_state.positions);
}

TEST(RunDual, BudgetGuard) {
  const ModelParams p = params(10000, 100.0);
  DualOptions opt;
  opt.incidence_budget = 1000;
  const double start[1] = {0.0};
  EXPECT_THROW(run_dual(start, 1.0, p, 0, opt), ResourceError);
}

TEST(ForwardTrace, RightTakesEastParent) {
  EXPECT_EQ(forward_choice(Side::right, selective_event(1.0, 0.0, 0.2, -0.1, 0.15)), 0.15);
  EXPECT_EQ(forward_choice(Side::left, selective_event(1.0, 0.0, 0.2, -0.1, 0.15)), -0.1);
  EventStream s;
  s.events = {selective_event(0.5, 0.0, 0.2, -0.1, 0.15)};
  const ExtremalTrace tr = trace_forward_extremal_on(s, Side::right, 0.1, 0.0, 1.0);
  EXPECT_EQ(tr.path.final_value(), 0.15);
  ASSERT_EQ(tr.steps.size(), 1u);
  EXPECT_DOUBLE_EQ(tr.steps[0].delta(), 0.05);
}

TEST(ForwardTrace, NeutralLeftAndRightCoincide) {
  const ModelParams p = params(1000, 0.0);
  for (std::uint64_t r = 0; r < 20; ++r) {
    Rng a = make_stream(p.seed, r, StreamTag::forward), b = make_stream(p.seed, r, StreamTag::forward);
    EXPECT_EQ(trace_forward_extremal(Side::left, 0.0, 1.0, p, a).path,
              trace_forward_extremal(Side::right, 0.0, 1.0, p, b).path);
  }
}

TEST(ForwardTrace, NeedsFullImpact) {
  Rng rng;
  EXPECT_THROW(trace_forward_extremal(Side::right, 0.0, 1.0, params(100, 1.0, 0.5), rng), UnsupportedParameter);
}

TEST(BackwardTrace, ArrowRules) {
  EXPECT_EQ(backward_choice(Side::right, neutral_event(1.0, 0.0, 0.2, 0.15), 0.1), -0.2);
  EXPECT_EQ(backward_choice(Side::left, neutral_event(1.0, 0.0, 0.2, 0.05), 0.1), 0.2);
  const ReproductionEvent s = selective_event(1.0, 0.0, 0.2, -0.05, 0.05);
  EXPECT_EQ(backward_choice(Side::left, s, 0.1), 0.2);
  EXPECT_EQ(backward_choice(Side::right, s, 0.1), 0.2);
  EXPECT_EQ(backward_choice(Side::left, s, -0.1), -0.2);
  EXPECT_EQ(backward_choice(Side::left, s, 0.0), 0.2);
  EXPECT_EQ(backward_choice(Side::right, s, 0.0), -0.2);
}

TEST(BackwardTrace, StoredRotated) {
  EventStream s;
  s.events = {neutral_event(0.4, 0.0, 0.2, 0.15)};
  const CoupledBackwardTrace c = trace_backward_extremal_on(s, Side::right, 0.1, 1.0, 1.0);
  // Travel from time 1 down to 0: one jump to -0.2 at event time 0.4.
  EXPECT_EQ(c.trace.path.sigma(), -1.0);
  EXPECT_EQ(c.trace.path.initial(), -0.1);
  ASSERT_EQ(c.trace.path.jump_count(), 1u);
  EXPECT_EQ(c.trace.path.jumps()[0].time, -0.4);
  EXPECT_EQ(c.trace.path.jumps()[0].value, 0.2);
  EXPECT_EQ(c.forward_time.at(0.2), -0.2);
  EXPECT_EQ(c.forward_time.at(0.7), 0.1);
}

TEST(ExtremalAncestor, NeutralIsTheSingleLineage) {
  const ModelParams p = params(100, 0.0, 0.5);
  for (std::uint64_t r = 0; r < 10; ++r) {
    const double start[1] = {0.0};
    const GenealogyGraph g = run_dual(start, 1.0, p, r);
    ASSERT_EQ(g.final_state.size(), 1u);
    EXPECT_EQ(extremal_ancestor(0.0, 1.0, p, r), g.final_state.positions[0]);
    EXPECT_EQ(extremal_ancestor(0.0, 1.0, p, r, Side::left), g.final_state.positions[0]);
  }
}

// At full impact the outermost ancestor is the extremal trace, event by event.
TEST(ExtremalAncestor, PathwiseEqualToExtremalTraceOnSharedStream) {
  const ModelParams p = params(100, 1.0);
  const double T = 0.5, W = 6.0;
  for (std::uint64_t r = 0; r < 1000; ++r) {
    Rng rng = make_stream(p.seed, r, StreamTag::events);
    const EventStream s = sample_events_box(p, -W, W, 0.0, T, rng);
    DualState st = DualState::from_points(std::vector<double>{0.0});
    ReplaySource src(s);
    Rng unused;
    evolve_dual(st, T, 1.0, src, unused, DualOptions{});
    ASSERT_LT(st.max(), W);
    ASSERT_GT(st.min(), -W);
    ASSERT_EQ(st.max(), trace_forward_extremal_on(s, Side::right, 0.0, 0.0, T).path.final_value()) << r;
    ASSERT_EQ(st.min(), trace_forward_extremal_on(s, Side::left, 0.0, 0.0, T).path.final_value()) << r;
  }
}

TEST(ExtremalAncestor, MeanDriftAtFullImpact) {
  const ModelParams p = params(100, 1.0);
  MomentAccumulator acc;
  for (std::uint64_t r = 0; r < 3000; ++r) acc.add(extremal_ancestor(0.0, 1.0, p, r));
  EXPECT_NEAR(acc.mean(), 2.0 / 3.0, 3.0 * acc.standard_error());
}

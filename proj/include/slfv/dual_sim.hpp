#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "slfv/cadlag_path.hpp"
#include "slfv/errors.hpp"
#include "slfv/event_engine.hpp"
#include "slfv/model_config.hpp"
#include "slfv/rng.hpp"

namespace slfv {

using LineageId = std::uint64_t;

// Lineage positions Xi_t, kept sorted by position with ids alongside.
struct DualState {
  double time = 0.0;
  std::vector<double> positions;
  std::vector<LineageId> ids;
  LineageId next_id = 0;

  static DualState from_points(std::span<const double> points, double t0 = 0.0) {
    if (points.empty()) throw ValidationError("dual: need at least one start point");
    DualState s;
    s.time = t0;
    std::vector<std::pair<double, LineageId>> tmp;
    for (double p : points) tmp.emplace_back(p, s.next_id++);
    std::sort(tmp.begin(), tmp.end());
    for (auto& [p, id] : tmp) {
      s.positions.push_back(p);
      s.ids.push_back(id);
    }
    return s;
  }

  std::size_t size() const { return positions.size(); }
  double min() const { return positions.front(); }
  double max() const { return positions.back(); }
};

struct EventOutcome {
  std::size_t covered = 0;
  std::vector<LineageId> marked;                 // lineages removed
  std::vector<std::pair<LineageId, double>> added;  // new lineages (west first)
};

// Marks each covered lineage with probability upsilon; if any is marked they
// are all replaced by one lineage at z1 (neutral) or two at z1, z2
// (selective).
inline void apply_event_inplace(DualState& st, const ReproductionEvent& e, double upsilon, Rng& rng,
                                EventOutcome* out = nullptr) {
  if (!(e.time > st.time)) throw ValidationError("dual: event must be later than the state time");
  st.time = e.time;
  auto lo = std::lower_bound(st.positions.begin(), st.positions.end(), e.west());
  auto hi = std::upper_bound(lo, st.positions.end(), e.east());
  const std::size_t a = static_cast<std::size_t>(lo - st.positions.begin());
  const std::size_t b = static_cast<std::size_t>(hi - st.positions.begin());
  if (out) {
    out->covered = b - a;
    out->marked.clear();
    out->added.clear();
  }
  if (a == b) return;

  std::size_t marked = 0;
  if (upsilon >= 1.0) {
    marked = b - a;
    if (out) out->marked.assign(st.ids.begin() + a, st.ids.begin() + b);
    st.positions.erase(st.positions.begin() + a, st.positions.begin() + b);
    st.ids.erase(st.ids.begin() + a, st.ids.begin() + b);
  } else {
    std::size_t w = a;
    for (std::size_t i = a; i < b; ++i) {
      if (bernoulli(rng, upsilon)) {
        ++marked;
        if (out) out->marked.push_back(st.ids[i]);
      } else {
        st.positions[w] = st.positions[i];
        st.ids[w] = st.ids[i];
        ++w;
      }
    }
    st.positions.erase(st.positions.begin() + w, st.positions.begin() + b);
    st.ids.erase(st.ids.begin() + w, st.ids.begin() + b);
  }
  if (marked == 0) return;

  auto insert = [&](double z) {
    auto it = std::upper_bound(st.positions.begin(), st.positions.end(), z);
    const auto k = it - st.positions.begin();
    st.positions.insert(it, z);
    st.ids.insert(st.ids.begin() + k, st.next_id);
    if (out) out->added.emplace_back(st.next_id, z);
    ++st.next_id;
  };
  insert(e.z1);
  if (e.selective()) insert(e.z2);
}

inline DualState apply_event(DualState st, const ReproductionEvent& e, double upsilon, Rng& rng) {
  apply_event_inplace(st, e, upsilon, rng);
  return st;
}

enum class EdgeRole : std::uint8_t { neutral_parent, selective_west, selective_east };

inline const char* to_string(EdgeRole r) {
  switch (r) {
    case EdgeRole::neutral_parent: return "neutral-parent";
    case EdgeRole::selective_west: return "selective-west";
    default: return "selective-east";
  }
}

struct GenealogyNode {
  LineageId id = 0;
  double position = 0.0;
  double birth_time = 0.0;
};

// Edge from a lineage that was marked by an event to one of the lineages
// that replaced it.
struct GenealogyEdge {
  LineageId child = 0;
  LineageId parent = 0;
  std::uint64_t event_id = 0;
  EdgeRole role = EdgeRole::neutral_parent;
};

struct GenealogyGraph {
  std::vector<GenealogyNode> nodes;
  std::vector<GenealogyEdge> edges;
  std::vector<ReproductionEvent> events;  // only events that marked something
  double horizon = 0.0;
  DualState final_state;

  void record(const ReproductionEvent& e, const EventOutcome& o) {
    if (o.marked.empty()) return;
    events.push_back(e);
    for (std::size_t k = 0; k < o.added.size(); ++k) {
      const auto& [id, pos] = o.added[k];
      nodes.push_back({id, pos, e.time});
      const EdgeRole role = !e.selective() ? EdgeRole::neutral_parent
                            : k == 0       ? EdgeRole::selective_west
                                           : EdgeRole::selective_east;
      for (LineageId c : o.marked) edges.push_back({c, id, e.id, role});
    }
  }
};

struct DualOptions {
  double incidence_budget = 1e6;  // covered lineage-event incidences per replicate
  double crossover = 1.0;         // adaptive source: hitting preferred below this cost ratio
  bool record = false;
};

// Switches between lineage-conditioned sampling and window sampling by a
// rough cost model. Switching only happens at returned events, and nothing
// after such an event has been drawn, so every switch is exact.
class AdaptiveSource {
 public:
  AdaptiveSource(const ModelParams& params, Rng& rng, double t0, double crossover)
      : params_(&params), rng_(&rng), sampler_(params), time_(t0), crossover_(crossover) {
    rho_ = params.max_rescaled_radius();
    pad_ = 16.0 * rho_;
  }

  std::optional<ReproductionEvent> next(std::span<const double> pos, double horizon) {
    if (since_check_++ % 64 == 0) choose_mode(pos);
    if (hitting_) {
      ReproductionEvent e = sampler_.next(pos, time_, *rng_, next_id_);
      if (e.time > horizon) {
        time_ = horizon;
        return std::nullopt;
      }
      ++next_id_;
      time_ = e.time;
      return e;
    }
    for (;;) {
      if (!box_ || pos.front() < lo_ || pos.back() > hi_ || box_t1_ != horizon) {
        lo_ = pos.front() - pad_;
        hi_ = pos.back() + pad_;
        box_t1_ = horizon;
        box_.emplace(*params_, lo_, hi_, time_, horizon, *rng_, BoxEventSource::Mode::touching, next_id_);
      }
      auto e = box_->next([&](const ReproductionEvent& c) { return any_in(pos, c.west(), c.east()); });
      if (!e) {
        time_ = horizon;
        box_.reset();
        return std::nullopt;
      }
      time_ = e->time;
      next_id_ = e->id + 1;
      return e;
    }
  }

  bool using_hitting() const { return hitting_; }
  double time() const { return time_; }

 private:
  void choose_mode(std::span<const double> pos) {
    const double n = static_cast<double>(pos.size());
    const double span = pos.back() - pos.front();
    const double covered = std::min(n * 2.0 * rho_, span + 2.0 * rho_);
    const double hit_cost = covered * (n + 8.0);
    const double box_cost = (span + 2.0 * pad_ + 2.0 * rho_) * (std::log2(n + 1.0) + 4.0);
    const bool want_hitting = hit_cost <= crossover_ * box_cost;
    if (want_hitting != hitting_) {
      hitting_ = want_hitting;
      box_.reset();
    }
  }

  const ModelParams* params_;
  Rng* rng_;
  HittingSampler sampler_;
  double time_;
  double crossover_;
  double rho_ = 0.0, pad_ = 0.0;
  bool hitting_ = true;
  std::optional<BoxEventSource> box_;
  double lo_ = 0.0, hi_ = 0.0, box_t1_ = 0.0;
  std::uint64_t next_id_ = 0;
  std::uint64_t since_check_ = 0;
};

// Runs the lineage dynamics up to time T with events from `source`.
template <class Source>
void evolve_dual(DualState& st, double T, double upsilon, Source& source, Rng& rng, const DualOptions& opt,
                 GenealogyGraph* graph = nullptr) {
  EventOutcome outcome;
  double incidences = 0.0;
  while (auto e = source.next(st.positions, T)) {
    apply_event_inplace(st, *e, upsilon, rng, &outcome);
    incidences += static_cast<double>(outcome.covered);
    if (graph) graph->record(*e, outcome);
    if (incidences > opt.incidence_budget)
      throw ResourceError("dual: lineage-event budget exceeded at t=" + std::to_string(st.time), st.time);
  }
  st.time = T;
}

inline GenealogyGraph run_dual(std::span<const double> start, double T, const ModelParams& params,
                               std::uint64_t replicate, const DualOptions& opt = {}) {
  params.validate();
  if (!(T > 0.0)) throw ValidationError("run_dual: T must be positive");
  Rng rng = make_stream(params.seed, replicate, StreamTag::dual);
  DualState st = DualState::from_points(start);
  GenealogyGraph g;
  g.horizon = T;
  if (opt.record)
    for (std::size_t i = 0; i < st.size(); ++i) g.nodes.push_back({st.ids[i], st.positions[i], 0.0});
  AdaptiveSource src(params, rng, 0.0, opt.crossover);
  evolve_dual(st, T, params.upsilon, src, rng, opt, opt.record ? &g : nullptr);
  g.final_state = std::move(st);
  return g;
}

enum class Side : std::uint8_t { left, right };
enum class Direction : std::uint8_t { forward, backward };

inline const char* to_string(Side s) { return s == Side::left ? "left" : "right"; }

// Right-most (or left-most) position of Xi_T started from a single point.
inline double extremal_ancestor(double start, double T, const ModelParams& params, std::uint64_t replicate,
                                Side side = Side::right, const DualOptions& opt = {}) {
  DualOptions o = opt;
  o.record = false;
  const double pts[1] = {start};
  GenealogyGraph g = run_dual(pts, T, params, replicate, o);
  return side == Side::right ? g.final_state.max() : g.final_state.min();
}

struct TraceStep {
  double time = 0.0;  // event time (travel time for backward traces)
  double from = 0.0;
  double to = 0.0;
  EventKind kind = EventKind::neutral;
  std::uint64_t event_id = 0;
  double event_time = 0.0;  // time of the event in stream coordinates
  double delta() const { return to - from; }
};

// Forward traces store the path as is. Backward traces store the rotated
// path t -> -f(-t), which is again a forward cadlag path.
struct ExtremalTrace {
  Side side = Side::right;
  Direction direction = Direction::forward;
  CadlagPath path;
  std::vector<TraceStep> steps;
};

inline double forward_choice(Side side, const ReproductionEvent& e) {
  if (!e.selective()) return e.z1;
  return side == Side::left ? e.z1 : e.z2;
}

// Backward arrow rules at an event covering y.
inline double backward_choice(Side side, const ReproductionEvent& e, double y) {
  if (!e.selective()) return y <= e.z1 ? e.west() : e.east();
  if (y < e.z1) return e.west();
  if (y > e.z2) return e.east();
  return side == Side::left ? e.east() : e.west();
}

template <class Source>
ExtremalTrace trace_forward_extremal_with(Side side, double start, double t0, double T, Source& source) {
  ExtremalTrace tr;
  tr.side = side;
  tr.direction = Direction::forward;
  double y = start;
  std::vector<Jump> jumps;
  while (auto e = source.next(std::span<const double>(&y, 1), T)) {
    const double to = forward_choice(side, *e);
    tr.steps.push_back({e->time, y, to, e->kind, e->id, e->time});
    if (to != y) jumps.push_back({e->time, to});
    y = to;
  }
  tr.path = CadlagPath(t0, start, std::move(jumps), T);
  return tr;
}

inline ExtremalTrace trace_forward_extremal(Side side, double start, double T, const ModelParams& params,
                                            Rng& rng) {
  params.validate();
  if (params.upsilon < 1.0)
    throw UnsupportedParameter("extremal paths need upsilon = 1; use extremal_ancestor instead");
  HittingSource src(params, rng, 0.0);
  return trace_forward_extremal_with(side, start, 0.0, T, src);
}

inline ExtremalTrace trace_forward_extremal_on(const EventStream& stream, Side side, double start, double t0,
                                               double T) {
  ReplaySource src(stream, t0);
  return trace_forward_extremal_with(side, start, t0, T, src);
}

// Backward trace on a fresh stream: travel time u in [0, T] from (start, s).
inline ExtremalTrace trace_backward_extremal(Side side, double start, double T, const ModelParams& params,
                                             Rng& rng, double s = 0.0) {
  params.validate();
  if (params.upsilon < 1.0) throw UnsupportedParameter("backward extremal paths need upsilon = 1");
  ExtremalTrace tr;
  tr.side = side;
  tr.direction = Direction::backward;
  HittingSource src(params, rng, 0.0);
  double y = start;
  std::vector<Jump> jumps;
  while (auto e = src.next(std::span<const double>(&y, 1), T)) {
    const double to = backward_choice(side, *e, y);
    tr.steps.push_back({e->time, y, to, e->kind, e->id, s - e->time});
    if (to != y) jumps.push_back({-s + e->time, -to});
    y = to;
  }
  tr.path = CadlagPath(-s, -start, std::move(jumps), -s + T);
  return tr;
}

// Backward trace from (start, s) through a stored stream, down to time s - T.
// Also returns the path in forward-time coordinates (defined on [s - T, s],
// value on each open interval between events) for coupled diagnostics.
struct CoupledBackwardTrace {
  ExtremalTrace trace;
  CadlagPath forward_time;
};

inline CoupledBackwardTrace trace_backward_extremal_on(const EventStream& stream, Side side, double start,
                                                       double s, double T) {
  CoupledBackwardTrace out;
  ExtremalTrace& tr = out.trace;
  tr.side = side;
  tr.direction = Direction::backward;
  const auto& ev = stream.events;
  auto it = std::lower_bound(ev.begin(), ev.end(), s,
                             [](const ReproductionEvent& e, double x) { return e.time < x; });
  double y = start;
  const double bottom = s - T;
  std::vector<Jump> rotated;
  while (it != ev.begin()) {
    --it;
    if (it->time <= bottom) break;
    if (!it->covers(y)) continue;
    const double to = backward_choice(side, *it, y);
    tr.steps.push_back({s - it->time, y, to, it->kind, it->id, it->time});
    if (to != y) rotated.push_back({-it->time, -to});
    y = to;
  }
  tr.path = CadlagPath(-s, -start, rotated, -bottom);
  // Forward time: value y_final below the lowest event, then at each event the
  // value north of it.
  std::vector<Jump> fwd;
  for (auto st = tr.steps.rbegin(); st != tr.steps.rend(); ++st)
    if (st->from != st->to) fwd.push_back({st->event_time, st->from});
  out.forward_time = CadlagPath(bottom, y, std::move(fwd), s);
  return out;
}

}  // namespace slfv

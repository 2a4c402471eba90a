#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "slfv/errors.hpp"
#include "slfv/model_config.hpp"
#include "slfv/rng.hpp"

namespace slfv {

enum class EventKind : std::uint8_t { neutral, selective };

inline const char* to_string(EventKind k) { return k == EventKind::neutral ? "neutral" : "selective"; }

// One point of the driving Poisson process, in rescaled units. For neutral
// events z2 is NaN; for selective events z1 < z2.
struct ReproductionEvent {
  std::uint64_t id = 0;
  double time = 0.0;
  double center = 0.0;
  double radius = 0.0;
  EventKind kind = EventKind::neutral;
  double z1 = 0.0;
  double z2 = std::numeric_limits<double>::quiet_NaN();

  double west() const { return center - radius; }
  double east() const { return center + radius; }
  bool covers(double y) const { return y >= west() && y <= east(); }
  bool selective() const { return kind == EventKind::selective; }
  bool overlaps(const ReproductionEvent& o) const { return west() <= o.east() && o.west() <= east(); }
};

struct ParentDraw {
  double z1 = 0.0;
  double z2 = std::numeric_limits<double>::quiet_NaN();
};

inline ParentDraw sample_parents(double center, double rho, EventKind kind, Rng& rng) {
  if (!(rho > 0.0)) throw ValidationError("sample_parents: rho must be positive");
  const double a = center - rho, b = center + rho;
  if (kind == EventKind::neutral) return {uniform_open(rng, a, b)};
  for (;;) {
    const double u = uniform_open(rng, a, b), v = uniform_open(rng, a, b);
    if (u != v) return {std::min(u, v), std::max(u, v)};
  }
}

struct EventStream {
  std::vector<ReproductionEvent> events;
  double space_lo = 0.0, space_hi = 0.0;
  double t0 = 0.0, t1 = 0.0;
  std::uint64_t seed = 0, replicate = 0;
};

// True if some entry of the sorted `positions` lies in [lo, hi].
inline bool any_in(std::span<const double> positions, double lo, double hi) {
  auto it = std::lower_bound(positions.begin(), positions.end(), lo);
  return it != positions.end() && *it <= hi;
}

inline double atom_rate_factor(const ModelParams& p) {
  const double n = static_cast<double>(p.n);
  return n * std::sqrt(n);
}

// Lazily generated events with centers in [lo - e_i, hi + e_i], where e_i is
// the atom's rescaled radius (every event touching [lo, hi]) or minus it
// (every event contained in [lo, hi]). Times ascend; nothing beyond the
// returned event has been drawn.
class BoxEventSource {
 public:
  enum class Mode { touching, contained };

  BoxEventSource(const ModelParams& params, double lo, double hi, double t0, double t1, Rng& rng,
                 Mode mode = Mode::touching, std::uint64_t first_id = 0)
      : params_(&params), rng_(&rng), time_(t0), t1_(t1), next_id_(first_id) {
    if (!(lo <= hi)) throw ValidationError("box: empty space window");
    if (!(t0 <= t1)) throw ValidationError("box: empty time window");
    s_n_ = selection_probability(params);
    const double k = atom_rate_factor(params);
    for (const auto& a : params.mu.atoms()) {
      const double rho = params.rescaled_radius(a.radius);
      Slot s;
      s.rho = rho;
      s.lo = mode == Mode::touching ? lo - rho : lo + rho;
      s.hi = mode == Mode::touching ? hi + rho : hi - rho;
      s.rate = s.hi > s.lo ? k * a.weight * (s.hi - s.lo) : 0.0;
      total_ += s.rate;
      slots_.push_back(s);
    }
  }

  double total_rate() const { return total_; }
  double expected_count() const { return total_ * (t1_ - time_); }
  double time() const { return time_; }
  std::uint64_t next_id() const { return next_id_; }

  std::optional<ReproductionEvent> next() {
    return next([](const ReproductionEvent&) { return true; });
  }

  // Like next(), but events whose (time, center, radius) fail `keep` are
  // discarded before their kind and parents are drawn.
  template <class Keep>
  std::optional<ReproductionEvent> next(Keep&& keep) {
    if (!(total_ > 0.0)) return std::nullopt;
    for (;;) {
      time_ += exponential(*rng_, total_);
      if (time_ > t1_) {
        time_ = t1_;
        return std::nullopt;
      }
      std::size_t i = 0;
      if (slots_.size() > 1) {
        double u = uniform(*rng_, 0.0, total_);
        while (i + 1 < slots_.size() && u >= slots_[i].rate) u -= slots_[i++].rate;
      }
      const Slot& s = slots_[i];
      ReproductionEvent e;
      e.id = next_id_++;
      e.time = time_;
      e.center = uniform(*rng_, s.lo, s.hi);
      e.radius = s.rho;
      if (!keep(e)) continue;
      e.kind = bernoulli(*rng_, s_n_) ? EventKind::selective : EventKind::neutral;
      const ParentDraw pd = sample_parents(e.center, e.radius, e.kind, *rng_);
      e.z1 = pd.z1;
      e.z2 = pd.z2;
      return e;
    }
  }

 private:
  struct Slot {
    double rho = 0, lo = 0, hi = 0, rate = 0;
  };
  const ModelParams* params_;
  Rng* rng_;
  double time_, t1_;
  std::uint64_t next_id_;
  double s_n_ = 0.0;
  double total_ = 0.0;
  std::vector<Slot> slots_;
};

inline constexpr double kDefaultEventBudget = 5e7;

// Every event whose interval meets [a, b] during [t0, t1].
inline EventStream sample_events_box(const ModelParams& params, double a, double b, double t0, double t1,
                                     Rng& rng, double budget = kDefaultEventBudget) {
  params.validate();
  EventStream out;
  out.space_lo = a;
  out.space_hi = b;
  out.t0 = t0;
  out.t1 = t1;
  out.seed = params.seed;
  BoxEventSource src(params, a, b, t0, t1, rng);
  const double expected = src.expected_count();
  if (expected > budget)
    throw ResourceError("box window too large: expected " + std::to_string(expected) + " events", t0);
  out.events.reserve(static_cast<std::size_t>(expected * 1.1 + 16));
  while (auto e = src.next()) out.events.push_back(*e);
  return out;
}

// Lineage-conditioned sampling: the next event after t0 covering at least one
// of the sorted positions. The covering-centre set for atom i is the union of
// [y - rho_i, y + rho_i] over positions y.
class HittingSampler {
 public:
  explicit HittingSampler(const ModelParams& params) : params_(&params) {
    s_n_ = selection_probability(params);
    const double k = atom_rate_factor(params);
    for (const auto& a : params.mu.atoms()) {
      rho_.push_back(params.rescaled_radius(a.radius));
      weight_.push_back(k * a.weight);
    }
    leb_.resize(rho_.size());
  }

  static double union_length(std::span<const double> sorted, double rho) {
    double total = 0.0;
    double cur_lo = sorted[0] - rho, cur_hi = sorted[0] + rho;
    for (std::size_t j = 1; j < sorted.size(); ++j) {
      const double lo = sorted[j] - rho, hi = sorted[j] + rho;
      if (lo > cur_hi) {
        total += cur_hi - cur_lo;
        cur_lo = lo;
      }
      cur_hi = hi;
    }
    return total + (cur_hi - cur_lo);
  }

  // Total rate of events covering at least one position.
  double rate(std::span<const double> sorted) {
    if (sorted.empty()) throw ValidationError("hitting: positions must be nonempty");
    double r = 0.0;
    for (std::size_t i = 0; i < rho_.size(); ++i) {
      leb_[i] = union_length(sorted, rho_[i]);
      r += weight_[i] * leb_[i];
    }
    return r;
  }

  ReproductionEvent next(std::span<const double> sorted, double t0, Rng& rng, std::uint64_t id = 0) {
    const double total = rate(sorted);
    ReproductionEvent e;
    e.id = id;
    e.time = t0 + exponential(rng, total);
    std::size_t i = 0;
    if (rho_.size() > 1) {
      double u = uniform(rng, 0.0, total);
      while (i + 1 < rho_.size() && u >= weight_[i] * leb_[i]) {
        u -= weight_[i] * leb_[i];
        ++i;
      }
    }
    const double rho = rho_[i];
    e.radius = rho;
    e.center = locate(sorted, rho, uniform(rng, 0.0, leb_[i]));
    e.kind = bernoulli(rng, s_n_) ? EventKind::selective : EventKind::neutral;
    const ParentDraw pd = sample_parents(e.center, rho, e.kind, rng);
    e.z1 = pd.z1;
    e.z2 = pd.z2;
    return e;
  }

 private:
  // Maps an offset u in [0, Leb(U)) to the point of U at that arc length.
  static double locate(std::span<const double> sorted, double rho, double u) {
    double cur_lo = sorted[0] - rho, cur_hi = sorted[0] + rho;
    for (std::size_t j = 1; j < sorted.size(); ++j) {
      const double lo = sorted[j] - rho, hi = sorted[j] + rho;
      if (lo > cur_hi) {
        if (u < cur_hi - cur_lo) return cur_lo + u;
        u -= cur_hi - cur_lo;
        cur_lo = lo;
      }
      cur_hi = hi;
    }
    return std::min(cur_lo + u, cur_hi);
  }

  const ModelParams* params_;
  double s_n_ = 0.0;
  std::vector<double> rho_, weight_, leb_;
};

inline ReproductionEvent next_event_hitting(const ModelParams& params, std::span<const double> positions,
                                            double t0, Rng& rng) {
  std::vector<double> sorted(positions.begin(), positions.end());
  std::sort(sorted.begin(), sorted.end());
  HittingSampler s(params);
  return s.next(sorted, t0, rng);
}

// Event sources feed the lineage engines. next(positions, horizon) returns the
// next event with time <= horizon covering at least one of the sorted
// positions, or nullopt when none occurs before the horizon.

class HittingSource {
 public:
  HittingSource(const ModelParams& params, Rng& rng, double t0 = 0.0)
      : sampler_(params), rng_(&rng), time_(t0) {}

  std::optional<ReproductionEvent> next(std::span<const double> positions, double horizon) {
    ReproductionEvent e = sampler_.next(positions, time_, *rng_, next_id_);
    if (e.time > horizon) {
      time_ = horizon;
      return std::nullopt;
    }
    ++next_id_;
    time_ = e.time;
    return e;
  }
  double time() const { return time_; }

 private:
  HittingSampler sampler_;
  Rng* rng_;
  double time_;
  std::uint64_t next_id_ = 0;
};

// Replays a stored stream in increasing time.
class ReplaySource {
 public:
  explicit ReplaySource(const EventStream& stream, double t0 = -std::numeric_limits<double>::infinity())
      : events_(&stream.events) {
    idx_ = static_cast<std::size_t>(
        std::upper_bound(events_->begin(), events_->end(), t0,
                         [](double t, const ReproductionEvent& e) { return t < e.time; }) -
        events_->begin());
  }

  std::optional<ReproductionEvent> next(std::span<const double> positions, double horizon) {
    while (idx_ < events_->size()) {
      const ReproductionEvent& e = (*events_)[idx_];
      if (e.time > horizon) return std::nullopt;
      ++idx_;
      if (any_in(positions, e.west(), e.east())) return e;
    }
    return std::nullopt;
  }

 private:
  const std::vector<ReproductionEvent>* events_;
  std::size_t idx_ = 0;
};

inline void write_event_csv(std::ostream& os, std::span<const ReproductionEvent> events) {
  const auto old = os.precision(17);
  os << "t,x,rho,kind,z1,z2\n";
  for (const auto& e : events) {
    os << e.time << ',' << e.center << ',' << e.radius << ',' << to_string(e.kind) << ',' << e.z1 << ',';
    if (e.selective()) os << e.z2;
    os << '\n';
  }
  os.precision(old);
}

}  // namespace slfv

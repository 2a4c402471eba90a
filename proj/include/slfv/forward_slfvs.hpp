#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iterator>
#include <map>
#include <ostream>
#include <span>
#include <vector>

#include "slfv/dual_sim.hpp"
#include "slfv/errors.hpp"
#include "slfv/event_engine.hpp"
#include "slfv/model_config.hpp"
#include "slfv/parallel.hpp"
#include "slfv/rng.hpp"
#include "slfv/stats.hpp"

namespace slfv {

// Piecewise-constant frequency of type a on [lo, hi); cells are keyed by their
// left end. Outside the window the profile is frozen at the boundary values.
class AlleleProfile {
 public:
  AlleleProfile(double lo, double hi, double value) : AlleleProfile(lo, hi, value, value, value) {}

  AlleleProfile(double lo, double hi, double inside, double left, double right)
      : lo_(lo), hi_(hi), left_(left), right_(right) {
    if (!(lo < hi)) throw ValidationError("profile: empty window");
    check_value(inside);
    check_value(left);
    check_value(right);
    cells_[lo] = inside;
  }

  // 1 below x0 and 0 from x0 on (or the given pair of values).
  static AlleleProfile step(double lo, double hi, double x0, double below = 1.0, double above = 0.0) {
    AlleleProfile p(lo, hi, below, below, above);
    if (x0 <= lo) p.cells_[lo] = above;
    else if (x0 < hi) p.cells_[x0] = above;
    p.merge_around(x0);
    return p;
  }

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double left_value() const { return left_; }
  double right_value() const { return right_; }
  std::size_t cell_count() const { return cells_.size(); }

  double value_at(double x) const {
    if (x < lo_) return left_;
    if (x >= hi_) return right_;
    return std::prev(cells_.upper_bound(x))->second;
  }

  // True if [a, b] lies in one cell whose value is 0 or 1.
  bool fixed_on(double a, double b) const {
    if (a < lo_ || b >= hi_) return false;
    auto it = std::prev(cells_.upper_bound(a));
    if (it->second != 0.0 && it->second != 1.0) return false;
    auto nx = std::next(it);
    return nx == cells_.end() || b < nx->first;
  }

  // w <- (1 - upsilon) w + upsilon * target on [a, b].
  void blend(double a, double b, double upsilon, double target) {
    if (a < lo_ || b > hi_) throw WindowError("profile: update outside window");
    split(a);
    if (b < hi_) split(b);
    auto first = cells_.find(a);
    auto last = b < hi_ ? cells_.find(b) : cells_.end();
    if (upsilon >= 1.0) {
      first->second = target;
      cells_.erase(std::next(first), last);
    } else {
      for (auto it = first; it != last; ++it) it->second = (1.0 - upsilon) * it->second + upsilon * target;
    }
    merge_around(a);
    if (b < hi_) merge_around(b);
  }

  // Breakpoints (cell left ends) with the cell values.
  std::vector<std::pair<double, double>> cells() const { return {cells_.begin(), cells_.end()}; }

  // Mean of w over [a, b] within the window.
  double average(double a, double b) const {
    if (!(a < b) || a < lo_ || b > hi_) throw ValidationError("profile: bad averaging interval");
    double s = 0.0;
    for (auto it = std::prev(cells_.upper_bound(a)); it != cells_.end() && it->first < b; ++it) {
      auto nx = std::next(it);
      const double e = nx == cells_.end() ? hi_ : nx->first;
      s += it->second * (std::min(e, b) - std::max(it->first, a));
    }
    return s / (b - a);
  }

 private:
  static void check_value(double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("profile: values must lie in [0,1]");
  }

  void split(double x) {
    if (x <= lo_ || x >= hi_) return;
    auto it = std::prev(cells_.upper_bound(x));
    if (it->first != x) cells_.emplace_hint(std::next(it), x, it->second);
  }

  void merge_around(double x) {
    auto it = cells_.find(x);
    if (it == cells_.end() || it == cells_.begin()) return;
    if (std::prev(it)->second == it->second) cells_.erase(it);
  }

  double lo_, hi_, left_, right_;
  std::map<double, double> cells_;
};

inline void write_profile_csv(std::ostream& os, const AlleleProfile& w) {
  const auto old = os.precision(17);
  os << "breakpoint,value\n";
  for (const auto& [x, v] : w.cells()) os << x << ',' << v << '\n';
  os.precision(old);
}

inline void apply_forward_event_inplace(AlleleProfile& w, const ReproductionEvent& e, double upsilon, Rng& rng) {
  if (e.west() < w.lo() || e.east() > w.hi()) throw WindowError("forward event escapes the profile window");
  if (w.fixed_on(e.west(), e.east())) return;
  bool a_wins = bernoulli(rng, w.value_at(e.z1));
  if (e.selective()) a_wins = bernoulli(rng, w.value_at(e.z2)) && a_wins;
  w.blend(e.west(), e.east(), upsilon, a_wins ? 1.0 : 0.0);
}

inline AlleleProfile apply_forward_event(AlleleProfile w, const ReproductionEvent& e, double upsilon, Rng& rng) {
  apply_forward_event_inplace(w, e, upsilon, rng);
  return w;
}

inline constexpr std::size_t kDefaultCellBudget = 1'000'000;

// Evolves w0 to time T with all events contained in the profile window.
inline AlleleProfile run_forward(AlleleProfile w, double T, const ModelParams& params, Rng& rng,
                                 std::size_t cell_budget = kDefaultCellBudget) {
  params.validate();
  if (w.hi() - w.lo() <= 2.0 * params.max_rescaled_radius())
    throw ValidationError("run_forward: window narrower than an event");
  BoxEventSource src(params, w.lo(), w.hi(), 0.0, T, rng, BoxEventSource::Mode::contained);
  const double ups = params.upsilon;
  while (auto e = src.next([&](const ReproductionEvent& c) { return !w.fixed_on(c.west(), c.east()); })) {
    apply_forward_event_inplace(w, *e, ups, rng);
    if (w.cell_count() > cell_budget) throw ResourceError("run_forward: breakpoint budget exceeded", e->time);
  }
  return w;
}

// Half-width of a window that keeps boundary effects well below Monte Carlo
// error for points xs up to time T.
inline double duality_window(std::span<const double> xs, double T, const ModelParams& params) {
  double m = 0.0;
  for (double x : xs) m = std::max(m, std::abs(x));
  const double spread = std::sqrt(limit_constants(params).xi2_derived * T) * 6.0 + params.max_rescaled_radius();
  return m + 4.0 * spread;
}

struct DualityReport {
  double forward_mean = 0.0, forward_se = 0.0;
  double dual_mean = 0.0, dual_se = 0.0;
  double z = 0.0;
  std::size_t replicates = 0;
};

// Compares E[prod_j w_T(x_j)] from the forward field against
// E[prod_j w0(xi_T^j)] from the lineage dual. `w0` must be given on the
// window returned by duality_window (or wider).
inline DualityReport duality_check(const AlleleProfile& w0, std::span<const double> xs, double T,
                                   const ModelParams& params, std::size_t replicates, unsigned workers = 1,
                                   std::uint64_t replicate_offset = 0) {
  params.validate();
  const std::vector<double> pts(xs.begin(), xs.end());
  auto fwd = parallel_replicates(replicates, workers, [&](std::size_t r) {
    Rng rng = make_stream(params.seed, replicate_offset + r, StreamTag::forward);
    AlleleProfile w = run_forward(w0, T, params, rng);
    double prod = 1.0;
    for (double x : pts) prod *= w.value_at(x);
    return prod;
  });
  auto dual = parallel_replicates(replicates, workers, [&](std::size_t r) {
    GenealogyGraph g = run_dual(pts, T, params, replicate_offset + r);
    double prod = 1.0;
    for (double y : g.final_state.positions) prod *= w0.value_at(y);
    return prod;
  });
  MomentAccumulator a, b;
  for (double v : fwd) a.add(v);
  for (double v : dual) b.add(v);
  DualityReport rep;
  rep.forward_mean = a.mean();
  rep.forward_se = a.standard_error();
  rep.dual_mean = b.mean();
  rep.dual_se = b.standard_error();
  rep.replicates = replicates;
  const double se = std::hypot(rep.forward_se, rep.dual_se);
  const double diff = rep.forward_mean - rep.dual_mean;
  rep.z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff));
  return rep;
}

}  // namespace slfv

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <unordered_map>
#include <vector>

#include "slfv/cadlag_path.hpp"
#include "slfv/errors.hpp"
#include "slfv/event_engine.hpp"
#include "slfv/limit_reference.hpp"

namespace slfv {

// Compactified time t = tanh(s) in [-1, 1]; envelope 1/(1+|atanh t|), zero
// at |t| = 1.
inline double envelope(double t) {
  if (t >= 1.0 || t <= -1.0) return 0.0;
  return 1.0 / (1.0 + std::abs(std::atanh(t)));
}

// The G-representative of a path: levels tanh(f) carried by the envelope on
// [sigma, 1), zero on [1, 2].
class CompactifiedPath {
 public:
  CompactifiedPath() = default;
  CompactifiedPath(double sigma, double level0, std::vector<Jump> jumps)
      : sigma_(sigma), level0_(level0), jumps_(std::move(jumps)) {}

  // A plain step element of G: no envelope, constant on [1, 2].
  static CompactifiedPath step(double sigma, double level0, std::vector<Jump> jumps) {
    if (!(sigma >= -1.0 && sigma <= 1.0)) throw ValidationError("step path: sigma outside [-1, 1]");
    double prev = sigma;
    auto bad_level = [](double v) { return !(v >= -1.0 && v <= 1.0); };
    if (bad_level(level0)) throw ValidationError("step path: level outside [-1, 1]");
    for (const auto& j : jumps) {
      if (!(j.time > prev) || j.time > 1.0) throw ValidationError("step path: jump times must increase within (sigma, 1]");
      if (bad_level(j.value)) throw ValidationError("step path: level outside [-1, 1]");
      prev = j.time;
    }
    CompactifiedPath p(sigma, level0, std::move(jumps));
    p.enveloped_ = false;
    return p;
  }

  double sigma() const { return sigma_; }
  double initial_level() const { return level0_; }
  bool enveloped() const { return enveloped_; }

  // Multiplier applied to the level at time t.
  double carrier(double t) const {
    if (!enveloped_) return 1.0;
    return t >= 1.0 ? 0.0 : envelope(t);
  }
  std::span<const Jump> jumps() const { return jumps_; }

  double level(double t) const {
    auto it = std::upper_bound(jumps_.begin(), jumps_.end(), t,
                               [](double x, const Jump& j) { return x < j.time; });
    return it == jumps_.begin() ? level0_ : std::prev(it)->value;
  }

  // Evaluation for t >= sigma.
  double operator()(double t) const { return level(t) * carrier(t); }

 private:
  double sigma_ = -1.0;
  double level0_ = 0.0;
  std::vector<Jump> jumps_;  // (compactified time, level)
  bool enveloped_ = true;
};

inline CompactifiedPath compactify(const CadlagPath& f) {
  const double sigma = std::tanh(f.sigma());
  double level0 = std::tanh(f.initial());
  std::vector<Jump> j;
  for (const auto& x : f.jumps()) {
    const double t = std::tanh(x.time);
    const double a = std::tanh(x.value);
    if (t >= 1.0) break;  // indistinguishable from the terminal time
    if (t <= sigma) {
      level0 = a;
      continue;
    }
    if (!j.empty() && j.back().time == t) j.back().value = a;
    else j.push_back({t, a});
  }
  return CompactifiedPath(sigma, level0, std::move(j));
}

namespace detail {

// max |phi| on [p, q], never above the true supremum. Returns early once the
// running maximum reaches `cutoff`.
template <class F>
double max_abs_on(const F& phi, double p, double q, double cutoff) {
  double best = std::max(std::abs(phi(p)), std::abs(phi(q)));
  if (best >= cutoff || !(q > p)) return best;
  constexpr int M = 24;
  double v[M + 1];
  v[0] = std::abs(phi(p));
  v[M] = std::abs(phi(q));
  const double step = (q - p) / M;
  for (int k = 1; k < M; ++k) {
    v[k] = std::abs(phi(p + step * k));
    best = std::max(best, v[k]);
  }
  if (best >= cutoff) return best;
  constexpr double g = 0.6180339887498949;
  for (int k = 1; k < M; ++k) {
    if (v[k] < v[k - 1] || v[k] < v[k + 1]) continue;
    double a = p + step * (k - 1), b = p + step * (k + 1);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = std::abs(phi(c)), fd = std::abs(phi(d));
    for (int it = 0; it < 48; ++it) {
      if (fc > fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - g * (b - a);
        fc = std::abs(phi(c));
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + g * (b - a);
        fd = std::abs(phi(d));
      }
    }
    best = std::max({best, fc, fd});
    if (best >= cutoff) return best;
  }
  return best;
}

struct Knot {
  double t = 0.0, u = 0.0;
  int i = 0, j = 0;  // g jumps 1..i and h jumps 1..j lie at or before the knot
};

enum class SlopeCost { displacement, log_slope };

// Cost of the linear piece of lambda between knots a and b:
// max(time-change cost, sup |g(t) - h(lambda(t))| over [a.t, b.t]).
inline double segment_cost(const CompactifiedPath& g, const CompactifiedPath& h, const Knot& a, const Knot& b,
                           SlopeCost kind, double cutoff) {
  const double dt = b.t - a.t, du = b.u - a.u;
  if (!(dt > 0.0) || !(du > 0.0)) return std::numeric_limits<double>::infinity();
  double cost = kind == SlopeCost::displacement ? std::max(std::abs(a.u - a.t), std::abs(b.u - b.t))
                                                : std::abs(std::log(du / dt));
  if (cost >= cutoff) return cost;
  const double k = du / dt;
  const bool identity = a.t == a.u && b.t == b.u;
  auto lam = [&](double t) { return identity ? t : a.u + k * (t - a.t); };
  auto lam_inv = [&](double u) { return a.t + (u - a.u) / k; };

  // Piece boundaries with the levels that hold to their right.
  struct Cut {
    double t;
    int which;  // 0 split only, 1 g jump, 2 h jump
    double level;
  };
  std::vector<Cut> cuts;
  const auto gj = g.jumps();
  const auto hj = h.jumps();
  for (int m = a.i; m < b.i - 1; ++m) cuts.push_back({gj[m].time, 1, gj[m].value});
  for (int m = a.j; m < b.j - 1; ++m) cuts.push_back({lam_inv(hj[m].time), 2, hj[m].value});
  if (a.t < 0.0 && 0.0 < b.t) cuts.push_back({0.0, 0, 0.0});
  if (a.u < 0.0 && 0.0 < b.u) cuts.push_back({lam_inv(0.0), 0, 0.0});
  if (a.t < 1.0 && 1.0 < b.t) cuts.push_back({1.0, 0, 0.0});
  if (a.u < 1.0 && 1.0 < b.u) cuts.push_back({lam_inv(1.0), 0, 0.0});
  std::sort(cuts.begin(), cuts.end(), [](const Cut& x, const Cut& y) { return x.t < y.t; });

  double A = a.i == 0 ? g.initial_level() : gj[a.i - 1].value;
  double B = a.j == 0 ? h.initial_level() : hj[a.j - 1].value;
  double p = a.t;
  auto piece = [&](double lo, double hi) {
    auto phi = [&](double t) {
      return A * g.carrier(t) - B * h.carrier(lam(t));
    };
    cost = std::max(cost, max_abs_on(phi, lo, hi, cutoff));
  };
  for (const Cut& c : cuts) {
    const double q = std::clamp(c.t, p, b.t);
    piece(p, q);
    if (cost >= cutoff) return cost;
    if (c.which == 1) A = c.level;
    if (c.which == 2) B = c.level;
    p = q;
  }
  piece(p, b.t);
  return cost;
}

// Knot coordinates: index 0 is the start, 1..P the jumps, P+1 the terminal time.
inline void knot_axis(const CompactifiedPath& g, const CompactifiedPath& h, double terminal_t,
                                   double terminal_u, std::vector<double>& ts, std::vector<double>& us) {
  ts.clear();
  us.clear();
  ts.push_back(g.sigma());
  for (const auto& j : g.jumps()) ts.push_back(j.time);
  ts.push_back(terminal_t);
  us.push_back(h.sigma());
  for (const auto& j : h.jumps()) us.push_back(j.time);
  us.push_back(terminal_u);
}

inline Knot make_knot(const std::vector<double>& ts, const std::vector<double>& us, int i, int j) {
  return {ts[static_cast<std::size_t>(i)], us[static_cast<std::size_t>(j)], i, j};
}

struct DpResult {
  double value = 0.0;
  std::vector<std::pair<int, int>> matching;  // matched (g jump, h jump), 1-based
};

// Bottleneck DP over order-preserving matchings of jump indices.
inline DpResult time_change_dp(const CompactifiedPath& g, const CompactifiedPath& h, SlopeCost kind) {
  std::vector<double> ts, us;
  const bool degenerate = g.sigma() >= 1.0 || h.sigma() >= 1.0;
  const double term = degenerate ? 2.0 : 1.0;
  knot_axis(g, h, term, term, ts, us);
  const int P = static_cast<int>(g.jumps().size()), Q = static_cast<int>(h.jumps().size());
  const double inf = std::numeric_limits<double>::infinity();
  DpResult res;
  if (degenerate) {
    // One side is the zero path on [1, 2]: lambda is linear on [sigma, 2].
    res.value = segment_cost(g, h, make_knot(ts, us, 0, 0), make_knot(ts, us, P + 1, Q + 1), kind, inf);
    return res;
  }
  const int W = Q + 2;
  std::vector<double> best(static_cast<std::size_t>((P + 2) * W), inf);
  std::vector<int> from(best.size(), -1);
  auto at = [&](int i, int j) -> double& { return best[static_cast<std::size_t>(i * W + j)]; };
  at(0, 0) = 0.0;
  auto relax = [&](int i, int j) {
    const Knot b = make_knot(ts, us, i, j);
    double cur = at(i, j);
    int arg = -1;
    for (int i0 = 0; i0 < i; ++i0) {
      for (int j0 = 0; j0 < j; ++j0) {
        const double base = at(i0, j0);
        if (!(base < cur)) continue;
        const double c = segment_cost(g, h, make_knot(ts, us, i0, j0), b, kind, cur);
        const double v = std::max(base, c);
        if (v < cur) {
          cur = v;
          arg = i0 * W + j0;
        }
      }
    }
    at(i, j) = cur;
    from[static_cast<std::size_t>(i * W + j)] = arg;
  };
  for (int i = 1; i <= P; ++i)
    for (int j = 1; j <= Q; ++j) relax(i, j);
  relax(P + 1, Q + 1);
  res.value = at(P + 1, Q + 1);
  for (int k = from[static_cast<std::size_t>((P + 1) * W + Q + 1)]; k > 0; k = from[static_cast<std::size_t>(k)])
    res.matching.insert(res.matching.begin(), {k / W, k % W});
  return res;
}

inline bool canonical_first(const CompactifiedPath& a, const CompactifiedPath& b) {
  if (a.enveloped() != b.enveloped()) return a.enveloped();
  if (a.sigma() != b.sigma()) return a.sigma() < b.sigma();
  if (a.initial_level() != b.initial_level()) return a.initial_level() < b.initial_level();
  const auto ja = a.jumps(), jb = b.jumps();
  if (ja.size() != jb.size()) return ja.size() < jb.size();
  for (std::size_t k = 0; k < ja.size(); ++k) {
    if (ja[k].time != jb[k].time) return ja[k].time < jb[k].time;
    if (ja[k].value != jb[k].value) return ja[k].value < jb[k].value;
  }
  return true;
}

}  // namespace detail

inline constexpr std::size_t kDefaultJumpBudget = 64;

inline void check_jump_budget(const CompactifiedPath& g, const CompactifiedPath& h, std::size_t budget) {
  if (g.jumps().size() > budget || h.jumps().size() > budget)
    throw ResourceError("path metric: jump count above budget");
}

// Cost of the specific piecewise-linear time change through the given
// matched jump pairs (1-based indices), pinned at the start and at t = 1.
inline double time_change_cost(const CompactifiedPath& g, const CompactifiedPath& h,
                               std::span<const std::pair<int, int>> matching,
                               detail::SlopeCost kind = detail::SlopeCost::displacement) {
  std::vector<double> ts, us;
  detail::knot_axis(g, h, 1.0, 1.0, ts, us);
  const int P = static_cast<int>(g.jumps().size()), Q = static_cast<int>(h.jumps().size());
  const double inf = std::numeric_limits<double>::infinity();
  detail::Knot prev = detail::make_knot(ts, us, 0, 0);
  double cost = 0.0;
  for (auto [i, j] : matching) {
    const detail::Knot k = detail::make_knot(ts, us, i, j);
    cost = std::max(cost, detail::segment_cost(g, h, prev, k, kind, inf));
    prev = k;
  }
  cost = std::max(cost, detail::segment_cost(g, h, prev, detail::make_knot(ts, us, P + 1, Q + 1), kind, inf));
  return cost;
}

// d'(g, h) = |sigma_g - sigma_h| v inf_lambda (sup|lambda - id| v sup|g - h o lambda|),
// the infimum over the jump-matching family. Symmetric by evaluating the
// pair in a canonical order.
inline double d_prime(const CompactifiedPath& g, const CompactifiedPath& h, std::size_t budget = kDefaultJumpBudget) {
  check_jump_budget(g, h, budget);
  const bool swap = !detail::canonical_first(g, h);
  const CompactifiedPath& a = swap ? h : g;
  const CompactifiedPath& b = swap ? g : h;
  const double dp = detail::time_change_dp(a, b, detail::SlopeCost::displacement).value;
  return std::max(std::abs(a.sigma() - b.sigma()), dp);
}

inline double d_prime_M(const CadlagPath& f1, const CadlagPath& f2, std::size_t budget = kDefaultJumpBudget) {
  return d_prime(compactify(f1), compactify(f2), budget);
}

struct MetricValue {
  double value = 0.0;
  bool upper_bound = false;  // true when the infimum was only taken over the DP family
};

// d_M = rho v |tanh sigma1 - tanh sigma2| with rho's log-slope cost evaluated
// on the same DP family, hence reported as an upper bound.
inline MetricValue d_M(const CadlagPath& f1, const CadlagPath& f2, std::size_t budget = kDefaultJumpBudget) {
  const CompactifiedPath g = compactify(f1), h = compactify(f2);
  check_jump_budget(g, h, budget);
  const bool swap = !detail::canonical_first(g, h);
  const CompactifiedPath& a = swap ? h : g;
  const CompactifiedPath& b = swap ? g : h;
  const double rho = detail::time_change_dp(a, b, detail::SlopeCost::log_slope).value;
  const bool trivial = rho == 0.0;
  return {std::max(rho, std::abs(a.sigma() - b.sigma())), !trivial};
}

// Continuous path through (time, value) knots, constant after the last one.
struct LinearPath {
  double sigma = 0.0;
  std::vector<Jump> knots;  // knots[0].time == sigma

  double at(double t) const {
    if (knots.empty()) throw ValidationError("linear path: no knots");
    if (t <= knots.front().time) return knots.front().value;
    if (t >= knots.back().time) return knots.back().value;
    auto it = std::upper_bound(knots.begin(), knots.end(), t,
                               [](double x, const Jump& j) { return x < j.time; });
    const Jump& b = *it;
    const Jump& a = *std::prev(it);
    if (b.time == a.time) return b.value;
    return a.value + (b.value - a.value) * (t - a.time) / (b.time - a.time);
  }

  static LinearPath from_grid(const GridPath& g) {
    LinearPath p;
    p.sigma = g.start;
    for (std::size_t k = 0; k < g.values.size(); ++k)
      p.knots.push_back({g.start + g.dt * static_cast<double>(k), g.values[k]});
    return p;
  }
};

// Compactified continuous path: tanh(f(atanh t)) * envelope(t) for t >= tanh(sigma).
inline double compactified_value(const LinearPath& f, double t) {
  if (t >= 1.0) return 0.0;
  const double s = std::max(t, std::tanh(f.sigma));
  if (s >= 1.0) return 0.0;
  return std::tanh(f.at(std::atanh(s))) * envelope(s);
}

inline double sup_metric_continuous(const LinearPath& f1, const LinearPath& f2) {
  const double s1 = std::tanh(f1.sigma), s2 = std::tanh(f2.sigma);
  std::vector<double> cuts{-1.0, 0.0, 1.0, s1, s2};
  for (const auto* f : {&f1, &f2})
    for (const auto& k : f->knots) cuts.push_back(std::tanh(k.time));
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  auto phi = [&](double t) { return compactified_value(f1, t) - compactified_value(f2, t); };
  double best = std::abs(s1 - s2);
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) best = std::max(best, detail::max_abs_on(phi, cuts[k], cuts[k + 1], inf));
  return best;
}

inline double sup_metric_continuous(const GridPath& a, const GridPath& b) {
  return sup_metric_continuous(LinearPath::from_grid(a), LinearPath::from_grid(b));
}

// Replaces the jump at tau_k by a linear ramp on [tau_k - margin_k, tau_k].
inline LinearPath interpolate(const CadlagPath& f, std::span<const double> margins) {
  if (margins.size() != f.jumps().size()) throw ValidationError("interpolate: one margin per jump");
  LinearPath out;
  out.sigma = f.sigma();
  out.knots.push_back({f.sigma(), f.initial()});
  double prev_t = f.sigma(), cur = f.initial();
  for (std::size_t k = 0; k < margins.size(); ++k) {
    const Jump& j = f.jumps()[k];
    const double m = margins[k];
    if (!(m > 0.0)) throw ValidationError("interpolate: margins must be positive");
    const double start = j.time - m;
    if (start < prev_t) throw ValidationError("interpolate: margin boxes overlap");
    if (start > out.knots.back().time) out.knots.push_back({start, cur});
    out.knots.push_back({j.time, j.value});
    prev_t = j.time;
    cur = j.value;
  }
  return out;
}

// Half the smallest time gap to any other event whose interval overlaps,
// capped at `cap`.
inline std::unordered_map<std::uint64_t, double> event_margins(std::span<const ReproductionEvent> events,
                                                               double cap) {
  std::vector<const ReproductionEvent*> ev;
  for (const auto& e : events) ev.push_back(&e);
  std::sort(ev.begin(), ev.end(), [](auto* a, auto* b) { return a->time < b->time; });
  std::unordered_map<std::uint64_t, double> out;
  for (std::size_t k = 0; k < ev.size(); ++k) {
    double m = cap;
    for (std::size_t l = k + 1; l < ev.size() && ev[l]->time - ev[k]->time < 2.0 * m; ++l)
      if (ev[l]->overlaps(*ev[k])) m = std::min(m, 0.5 * (ev[l]->time - ev[k]->time));
    for (std::size_t l = k; l-- > 0 && ev[k]->time - ev[l]->time < 2.0 * m;)
      if (ev[l]->overlaps(*ev[k])) m = std::min(m, 0.5 * (ev[k]->time - ev[l]->time));
    out[ev[k]->id] = m;
  }
  return out;
}

// sup_t |f(t) - g(t)| for a step path and a continuous path with the same start.
inline double sup_distance(const CadlagPath& f, const LinearPath& g) {
  std::vector<double> cuts{f.sigma()};
  for (const auto& j : f.jumps()) cuts.push_back(j.time);
  for (const auto& k : g.knots) cuts.push_back(k.time);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double best = 0.0;
  for (std::size_t k = 0; k < cuts.size(); ++k) {
    const double c = f.at(cuts[k]);
    best = std::max(best, std::abs(c - g.at(cuts[k])));
    if (k + 1 < cuts.size()) best = std::max(best, std::abs(c - g.at(cuts[k + 1])));
  }
  return best;
}

// sup |f - g| over the common domain of two step paths.
inline double sup_distance(const CadlagPath& f, const CadlagPath& g) {
  std::vector<double> cuts{std::max(f.sigma(), g.sigma())};
  for (const auto* p : {&f, &g})
    for (const auto& j : p->jumps())
      if (j.time > cuts[0]) cuts.push_back(j.time);
  double best = 0.0;
  for (double t : cuts) best = std::max(best, std::abs(f.at(t) - g.at(t)));
  return best;
}

enum class EmptySetConvention { reject, isolated_point };

// Hausdorff distance between finite path sets under `metric`.
template <class Path, class Metric>
double hausdorff(std::span<const Path> P, std::span<const Path> Q, Metric&& metric,
                 EmptySetConvention conv = EmptySetConvention::reject) {
  if (P.empty() || Q.empty()) {
    if (P.empty() && Q.empty()) return 0.0;
    if (conv == EmptySetConvention::reject) throw ValidationError("hausdorff: empty path set");
    return std::numeric_limits<double>::infinity();
  }
  auto directed = [&](std::span<const Path> A, std::span<const Path> B) {
    double d = 0.0;
    for (const auto& a : A) {
      double m = std::numeric_limits<double>::infinity();
      for (const auto& b : B) m = std::min(m, static_cast<double>(metric(a, b)));
      d = std::max(d, m);
    }
    return d;
  };
  return std::max(directed(P, Q), directed(Q, P));
}

template <class Path, class Metric>
double directed_hausdorff(std::span<const Path> A, std::span<const Path> B, Metric&& metric) {
  double d = 0.0;
  for (const auto& a : A) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& b : B) m = std::min(m, static_cast<double>(metric(a, b)));
    d = std::max(d, m);
  }
  return d;
}

}  // namespace slfv

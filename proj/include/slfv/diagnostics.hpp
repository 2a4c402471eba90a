#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "slfv/cadlag_path.hpp"
#include "slfv/dual_sim.hpp"
#include "slfv/event_engine.hpp"
#include "slfv/model_config.hpp"
#include "slfv/path_metric.hpp"
#include "slfv/rng.hpp"
#include "slfv/structure.hpp"

namespace slfv {

// Backward left-most path from 0 and backward right-most path from `gap` on
// one fresh stream; returns the first travel time with rhat <= lhat, or
// nullopt if that does not happen before max_time.
inline std::optional<double> backward_pair_meeting_time(double gap, const ModelParams& params, Rng& rng,
                                                        double max_time) {
  params.validate();
  if (params.upsilon < 1.0) throw UnsupportedParameter("backward pair needs upsilon = 1");
  HittingSource src(params, rng, 0.0);
  double l = 0.0, r = gap;
  std::array<double, 2> pos{};
  for (;;) {
    pos = {std::min(l, r), std::max(l, r)};
    auto e = src.next(pos, max_time);
    if (!e) return std::nullopt;
    const double nl = e->covers(l) ? backward_choice(Side::left, *e, l) : l;
    const double nr = e->covers(r) ? backward_choice(Side::right, *e, r) : r;
    l = nl;
    r = nr;
    if (r <= l) return e->time;
  }
}

struct CoupledOptions {
  double half_width = 6.0;   // event window [-half_width, half_width]
  double horizon = 1.0;      // events on [0, horizon]
  double start_spread = 0.5; // starts uniform in [-start_spread, start_spread]
  int forward_per_side = 4;
  int backward_per_side = 4;
};

struct CoupledResult {
  std::size_t forward_pairs = 0;
  std::size_t same_side_crossings = 0;
  std::size_t mixed_crossings = 0;  // forward vs backward of the same side
  std::size_t wedges = 0;
  std::size_t wedge_violations = 0;
  std::size_t window_exits = 0;
  std::size_t events = 0;

  // Fault injection: a planted defect that goes undetected is a detector bug.
  bool injection_attempted = false;
  bool crossing_planted = false, crossing_detected = false;
  bool wedge_planted = false, wedge_detected = false;
};

namespace detail {

inline bool stays_inside(const CadlagPath& p, double lo, double hi) {
  if (p.initial() < lo || p.initial() > hi) return false;
  for (const auto& j : p.jumps())
    if (j.value < lo || j.value > hi) return false;
  return true;
}

// A path that runs along `base` and then jumps just east of `other` at a
// time where base lies strictly west of it.
inline std::optional<std::pair<CadlagPath, CadlagPath>> plant_crossing(const CadlagPath& a, const CadlagPath& b,
                                                                       double eps) {
  const double lo = std::max(a.sigma(), b.sigma()), hi = std::min(a.end(), b.end());
  if (!(lo < hi)) return std::nullopt;
  std::vector<double> cuts{lo};
  for (const auto* p : {&a, &b})
    for (const auto& j : p->jumps())
      if (j.time > lo && j.time < hi) cuts.push_back(j.time);
  std::sort(cuts.begin(), cuts.end());
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const CadlagPath& west = a.at(cuts[k]) < b.at(cuts[k]) ? a : b;
    const CadlagPath& east = &west == &a ? b : a;
    if (!(west.at(cuts[k]) < east.at(cuts[k]))) continue;
    const double t = 0.5 * (cuts[k] + cuts[k + 1]);
    std::vector<Jump> j;
    for (const auto& x : west.jumps())
      if (x.time < t) j.push_back(x);
    j.push_back({t, east.at(t) + eps});
    return std::make_pair(CadlagPath(west.sigma(), west.initial(), j, west.end()), east);
  }
  return std::nullopt;
}

// A path that sits outside the wedge and then jumps into its interior.
inline std::optional<CadlagPath> plant_wedge_entry(const Wedge& w) {
  const double lo = w.bottom, hi = w.top;
  std::vector<double> cuts{lo};
  for (const auto* p : {w.rhat, w.lhat})
    for (const auto& j : p->jumps())
      if (j.time > lo && j.time < hi) cuts.push_back(j.time);
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k], b = cuts[k + 1];
    if (!(b > a)) continue;
    const double r = w.rhat->at(a), l = w.lhat->at(a);
    if (!(r < l)) continue;
    const double t0 = a + 0.25 * (b - a), t1 = a + 0.5 * (b - a);
    return CadlagPath(t0, l + 1.0, {{t1, 0.5 * (r + l)}}, b);
  }
  return std::nullopt;
}

}  // namespace detail

// One coupled configuration: forward left/right-most and backward
// left/right-most traces on a shared stored stream, checked for crossings
// and wedge entries. With `inject` set, planted defects must be detected.
inline CoupledResult coupled_configuration(const ModelParams& params, std::uint64_t replicate,
                                           const CoupledOptions& opt = {}, bool inject = false) {
  params.validate();
  if (params.upsilon < 1.0) throw UnsupportedParameter("coupled diagnostics need upsilon = 1");
  Rng rng = make_stream(params.seed, replicate, StreamTag::diagnostics);
  const EventStream stream = sample_events_box(params, -opt.half_width, opt.half_width, 0.0, opt.horizon, rng);
  CoupledResult res;
  res.events = stream.events.size();

  std::vector<CadlagPath> fwd_left, fwd_right, bwd_left, bwd_right;
  for (int k = 0; k < opt.forward_per_side; ++k) {
    for (Side side : {Side::left, Side::right}) {
      const double y = uniform(rng, -opt.start_spread, opt.start_spread);
      const double t0 = uniform(rng, 0.0, 0.5 * opt.horizon);
      auto tr = trace_forward_extremal_on(stream, side, y, t0, opt.horizon);
      (side == Side::left ? fwd_left : fwd_right).push_back(std::move(tr.path));
    }
  }
  for (int k = 0; k < opt.backward_per_side; ++k) {
    for (Side side : {Side::left, Side::right}) {
      const double y = uniform(rng, -opt.start_spread, opt.start_spread);
      const double s = uniform(rng, 0.5 * opt.horizon, opt.horizon);
      auto tr = trace_backward_extremal_on(stream, side, y, s, s);
      (side == Side::left ? bwd_left : bwd_right).push_back(std::move(tr.forward_time));
    }
  }
  for (const auto* fam : {&fwd_left, &fwd_right, &bwd_left, &bwd_right})
    for (const auto& p : *fam)
      if (!detail::stays_inside(p, -opt.half_width, opt.half_width)) ++res.window_exits;

  for (const auto* fam : {&fwd_left, &fwd_right}) {
    for (std::size_t i = 0; i < fam->size(); ++i) {
      for (std::size_t j = i + 1; j < fam->size(); ++j) {
        ++res.forward_pairs;
        res.same_side_crossings += detect_crossing((*fam)[i], (*fam)[j]).size();
      }
    }
  }
  for (const auto& f : fwd_left)
    for (const auto& b : bwd_left) res.mixed_crossings += detect_crossing(f, b).size();
  for (const auto& f : fwd_right)
    for (const auto& b : bwd_right) res.mixed_crossings += detect_crossing(f, b).size();

  std::vector<CadlagPath> forward = fwd_left;
  forward.insert(forward.end(), fwd_right.begin(), fwd_right.end());
  const WedgeReport wr = wedge_diagnostic(forward, bwd_left, bwd_right);
  res.wedges = wr.wedges;
  res.wedge_violations = wr.violations;

  if (inject) {
    res.injection_attempted = true;
    for (std::size_t i = 0; i < fwd_right.size() && !res.crossing_planted; ++i) {
      for (std::size_t j = i + 1; j < fwd_right.size() && !res.crossing_planted; ++j) {
        auto planted = detail::plant_crossing(fwd_right[i], fwd_right[j], params.max_rescaled_radius());
        if (!planted) continue;
        res.crossing_planted = true;
        res.crossing_detected = !detect_crossing(planted->first, planted->second).empty();
      }
    }
    for (const auto& r : bwd_right) {
      for (const auto& l : bwd_left) {
        auto w = make_wedge(r, l);
        if (!w) continue;
        auto bad = detail::plant_wedge_entry(*w);
        if (!bad) continue;
        const CadlagPath one[1] = {*bad};
        res.wedge_planted = true;
        res.wedge_detected =
            wedge_diagnostic(one, std::span<const CadlagPath>(&l, 1), std::span<const CadlagPath>(&r, 1)).violations > 0;
        break;
      }
      if (res.wedge_planted) break;
    }
  }
  return res;
}

// sup |f - f~| for the interpolation of a traced path, with margins from the
// events the path saw. The bound to compare against is 2 * max rescaled radius.
inline double interpolation_gap(const ExtremalTrace& tr, double cap = 1e-3) {
  std::vector<ReproductionEvent> ev;
  std::vector<double> margins;
  for (const auto& s : tr.steps) {
    ReproductionEvent e;
    e.id = s.event_id;
    e.time = s.time;
    e.center = 0.0;  // every event seen by one path overlaps the next one
    e.radius = 1.0;
    ev.push_back(e);
  }
  const auto m = event_margins(ev, cap);
  // The ramp also has to stay inside the path's domain.
  for (const auto& s : tr.steps)
    if (s.to != s.from) {
      const double since_start = tr.direction == Direction::forward ? s.time - tr.path.sigma() : s.time;
      margins.push_back(std::min(m.at(s.event_id), since_start));
    }
  const LinearPath lin = interpolate(tr.path, margins);
  return sup_distance(tr.path, lin);
}

}  // namespace slfv

namespace slfv {

// Random step path with up to max_jumps jumps; sigma = -inf with probability 0.1.
inline CadlagPath random_step_path(Rng& rng, int max_jumps = 4) {
  const bool minus_inf = uniform01(rng) < 0.1;
  const double sigma = minus_inf ? -CadlagPath::inf : uniform(rng, -1.5, 0.5);
  const double from = minus_inf ? -2.0 : sigma;
  const int k = std::uniform_int_distribution<int>(0, max_jumps)(rng);
  std::vector<double> times;
  for (int i = 0; i < k; ++i) times.push_back(uniform_open(rng, from, from + 3.0));
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  std::vector<Jump> jumps;
  double v = normal(rng, 1.5);
  const double v0 = v;
  for (double t : times) {
    double nv = normal(rng, 1.5);
    if (nv == v) continue;
    jumps.push_back({t, nv});
    v = nv;
  }
  return CadlagPath(sigma, v0, std::move(jumps));
}

// A step element of G: levels in [-1, 1], jumps in (sigma, 1).
inline CompactifiedPath random_g_step_path(Rng& rng, int max_jumps = 4) {
  const double sigma = uniform(rng, -1.0, 0.6);
  const int k = std::uniform_int_distribution<int>(0, max_jumps)(rng);
  std::vector<double> times;
  for (int i = 0; i < k; ++i) times.push_back(uniform_open(rng, sigma, 1.0));
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  double v = uniform(rng, -1.0, 1.0);
  const double v0 = v;
  std::vector<Jump> jumps;
  for (double t : times) {
    const double nv = uniform(rng, -1.0, 1.0);
    if (nv == v) continue;
    jumps.push_back({t, nv});
    v = nv;
  }
  return CompactifiedPath::step(sigma, v0, std::move(jumps));
}

// Minimum over every order-preserving matching of jump indices, each priced
// with time_change_cost. Exponential; meant for paths with few jumps.
inline double brute_force_d_prime(const CompactifiedPath& g, const CompactifiedPath& h) {
  const int P = static_cast<int>(g.jumps().size()), Q = static_cast<int>(h.jumps().size());
  if (g.sigma() >= 1.0 || h.sigma() >= 1.0) throw ValidationError("brute force: degenerate start");
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::pair<int, int>> m;
  for (unsigned gm = 0; gm < (1u << P); ++gm) {
    for (unsigned hm = 0; hm < (1u << Q); ++hm) {
      if (__builtin_popcount(gm) != __builtin_popcount(hm)) continue;
      m.clear();
      int j = 1;
      for (int i = 1; i <= P; ++i) {
        if (!(gm >> (i - 1) & 1u)) continue;
        while (!(hm >> (j - 1) & 1u)) ++j;
        m.push_back({i, j});
        ++j;
      }
      best = std::min(best, time_change_cost(g, h, m));
    }
  }
  return std::max(best, std::abs(g.sigma() - h.sigma()));
}

struct MetricSelftest {
  std::size_t triples = 0;
  double max_triangle_excess = 0.0;  // max of d(f,h) - d(f,g) - d(g,h)
  std::size_t symmetry_failures = 0;
  std::size_t identity_failures = 0;
  std::size_t negative_values = 0;
  std::size_t bruteforce_cases = 0;
  double max_bruteforce_diff = 0.0;
  std::size_t interp2_cases = 0;
  std::size_t interp2_failures = 0;
  std::size_t envelope_failures = 0;
  double boundary_distance = 0.0;  // d_M(+inf, -inf), expected 2
  // Same triangle check on compactified (enveloped) paths; informational, the
  // matching family need not attain the infimum there.
  double compactified_triangle_excess = 0.0;

  bool passed(double tol = 1e-9) const {
    return max_triangle_excess <= tol && symmetry_failures == 0 && identity_failures == 0 && negative_values == 0 &&
           max_bruteforce_diff <= 1e-12 && interp2_failures == 0 && envelope_failures == 0 &&
           boundary_distance == 2.0;
  }
};

inline MetricSelftest metric_selftest(std::uint64_t seed, std::size_t triples, std::size_t bruteforce_pairs = 300,
                                      std::size_t interp_pairs = 300) {
  MetricSelftest out;
  Rng rng = make_stream(seed, 0, StreamTag::metric);
  for (std::size_t k = 0; k < triples; ++k) {
    const CompactifiedPath f = random_g_step_path(rng), g = random_g_step_path(rng), h = random_g_step_path(rng);
    const double fg = d_prime(f, g), gh = d_prime(g, h), fh = d_prime(f, h);
    out.max_triangle_excess = std::max(out.max_triangle_excess, fh - fg - gh);
    if (fg != d_prime(g, f)) ++out.symmetry_failures;
    if (d_prime(f, f) != 0.0) ++out.identity_failures;
    if (fg < 0.0 || gh < 0.0 || fh < 0.0) ++out.negative_values;
    ++out.triples;
  }
  for (std::size_t k = 0; k < triples; ++k) {
    const CompactifiedPath f = compactify(random_step_path(rng)), g = compactify(random_step_path(rng)),
                           h = compactify(random_step_path(rng));
    const double fg = d_prime(f, g), gh = d_prime(g, h), fh = d_prime(f, h);
    out.compactified_triangle_excess = std::max(out.compactified_triangle_excess, fh - fg - gh);
    if (fg != d_prime(g, f)) ++out.symmetry_failures;
    if (d_prime(f, f) != 0.0) ++out.identity_failures;
    for (double t : {-0.9, -0.3, 0.0, 0.2, 0.7, 0.99})
      if (t >= f.sigma() && std::abs(f(t)) > envelope(t)) ++out.envelope_failures;
  }
  for (std::size_t k = 0; k < bruteforce_pairs; ++k) {
    CadlagPath a = random_step_path(rng), b = random_step_path(rng);
    const CompactifiedPath g = compactify(a), h = compactify(b);
    if (g.sigma() < 1.0 && h.sigma() < 1.0) {
      out.max_bruteforce_diff = std::max(out.max_bruteforce_diff, std::abs(d_prime(g, h) - brute_force_d_prime(g, h)));
      ++out.bruteforce_cases;
    }
    const CompactifiedPath gs = random_g_step_path(rng), hs = random_g_step_path(rng);
    out.max_bruteforce_diff = std::max(out.max_bruteforce_diff, std::abs(d_prime(gs, hs) - brute_force_d_prime(gs, hs)));
    ++out.bruteforce_cases;
  }
  for (std::size_t k = 0; k < interp_pairs; ++k) {
    const CadlagPath a = random_step_path(rng);
    // Same start; values perturbed and some jump times shifted.
    std::vector<Jump> j(a.jumps().begin(), a.jumps().end());
    for (auto& x : j) x.value += normal(rng, 0.2);
    const CadlagPath b(a.sigma(), a.initial() + normal(rng, 0.2), j);
    const double r = sup_distance(a, b);
    if (d_prime_M(a, b) > r) ++out.interp2_failures;
    ++out.interp2_cases;
  }
  out.boundary_distance = d_M(CadlagPath::boundary(true), CadlagPath::boundary(false)).value;
  return out;
}

}  // namespace slfv

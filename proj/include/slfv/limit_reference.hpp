#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "slfv/errors.hpp"
#include "slfv/rng.hpp"
#include "slfv/stats.hpp"

namespace slfv {

// Values on the uniform grid start + k*dt, k = 0..size-1. Between grid
// points the path is read by linear interpolation.
struct GridPath {
  double dt = 1e-4;
  double start = 0.0;
  std::vector<double> values;

  double end() const { return start + dt * static_cast<double>(values.empty() ? 0 : values.size() - 1); }
  double at(double t) const {
    if (values.empty()) throw ValidationError("grid path: empty");
    if (t <= start) return values.front();
    const double u = (t - start) / dt;
    const auto k = static_cast<std::size_t>(u);
    if (k + 1 >= values.size()) return values.back();
    const double f = u - static_cast<double>(k);
    return values[k] + f * (values[k + 1] - values[k]);
  }
};

struct LRConfig {
  double zeta = 0.0;
  double xi2 = 1.0;
  double dt = 1e-4;

  // The natural time scale of the pair is xi2 / zeta^2 (time for drift to
  // beat diffusion); dt must resolve it.
  void validate() const {
    if (!(dt > 0.0)) throw ValidationError("lr: dt must be positive");
    if (!(xi2 > 0.0)) throw ValidationError("lr: xi2 must be positive");
    if (!(zeta >= 0.0)) throw ValidationError("lr: zeta must be nonnegative");
    if (zeta > 0.0 && dt > 1e-3 * xi2 / (zeta * zeta))
      throw ValidationError("lr: dt too coarse for the pair time scale xi2/zeta^2");
  }
};

namespace detail {

// Sticky left/right pair on a real-time grid. Free steps are independent
// with drifts -zeta/+zeta. When a free step leaves L above R by p the pair
// is placed at the midpoint and then moves with one common Brownian driver,
// without drift, for an extra p/(2 zeta) of time before stepping freely
// again. This is the time-changed construction (free time plus the
// coalesced clock C with 2 zeta dC = d(local push)) laid out on a grid.
struct StickyPair {
  double L = 0.0, R = 0.0;
  double hold = 0.0;
  bool ordered = true;

  void step(double h, double zeta, double xi, Rng& rng) {
    const double c = std::min(hold, h);
    if (c > 0.0) {
      const double common = xi * std::sqrt(c) * normal(rng);
      L += common;
      R += common;
      hold -= c;
    }
    const double f = h - c;
    if (!(f > 0.0)) return;
    const double sf = xi * std::sqrt(f);
    double l = L + sf * normal(rng) - zeta * f;
    double r = R + sf * normal(rng) + zeta * f;
    if (ordered && l >= r) {
      const double p = l - r;
      l = r = 0.5 * (l + r);
      hold = zeta > 0.0 ? p / (2.0 * zeta) : std::numeric_limits<double>::infinity();
    } else if (!ordered && l <= r) {
      l = r = 0.5 * (l + r);
      ordered = true;
      if (zeta == 0.0) hold = std::numeric_limits<double>::infinity();
    }
    L = l;
    R = r;
  }
};

inline std::size_t grid_steps(double T, double dt) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(T / dt - 1e-9)));
}

}  // namespace detail

struct LRPaths {
  GridPath L, R;
};

// Left/right pair started at (L0, R0). If L0 > R0 the paths run independently
// until they meet and form a sticky pair from then on.
inline LRPaths simulate_lr_pair(double L0, double R0, double T, const LRConfig& cfg, Rng& rng) {
  cfg.validate();
  if (!(T > 0.0)) throw ValidationError("lr: T must be positive");
  const std::size_t K = detail::grid_steps(T, cfg.dt);
  const double h = T / static_cast<double>(K);
  const double xi = std::sqrt(cfg.xi2);
  detail::StickyPair p;
  p.L = L0;
  p.R = R0;
  p.ordered = L0 <= R0;
  if (L0 == R0 && cfg.zeta == 0.0) p.hold = std::numeric_limits<double>::infinity();
  LRPaths out{{h, 0.0, {}}, {h, 0.0, {}}};
  out.L.values.reserve(K + 1);
  out.R.values.reserve(K + 1);
  out.L.values.push_back(p.L);
  out.R.values.push_back(p.R);
  for (std::size_t k = 0; k < K; ++k) {
    p.step(h, cfg.zeta, xi, rng);
    out.L.values.push_back(p.L);
    out.R.values.push_back(p.R);
  }
  return out;
}

enum class Orientation : std::uint8_t { left, right };

struct SpaceTimePoint {
  double x = 0.0;
  double t = 0.0;
};

// Finite system of drifted Brownian paths (left: drift -zeta, right: +zeta).
// Same-orientation paths coalesce when they meet (crossing within a step is
// detected with the Brownian-bridge hitting probability); a left and a right
// path interact as a sticky pair. Start times are rounded up to the grid.
inline std::vector<GridPath> simulate_coalescing_system(std::span<const SpaceTimePoint> points,
                                                        std::span<const Orientation> orientations, double T,
                                                        const LRConfig& cfg, Rng& rng) {
  cfg.validate();
  if (points.size() != orientations.size()) throw ValidationError("system: points/orientations mismatch");
  if (points.empty()) return {};
  double t0 = points[0].t;
  for (const auto& p : points) t0 = std::min(t0, p.t);
  if (!(T > t0)) throw ValidationError("system: horizon before all start times");
  const std::size_t K = detail::grid_steps(T - t0, cfg.dt);
  const double h = (T - t0) / static_cast<double>(K);
  const double xi = std::sqrt(cfg.xi2);
  const std::size_t P = points.size();

  std::vector<std::size_t> begin(P);
  for (std::size_t i = 0; i < P; ++i)
    begin[i] = std::min(K, static_cast<std::size_t>(std::ceil((points[i].t - t0) / h - 1e-9)));

  std::vector<GridPath> out(P);
  std::vector<double> pos(P);
  std::vector<std::size_t> leader(P);
  std::iota(leader.begin(), leader.end(), 0);
  std::vector<bool> alive(P, false);
  auto find = [&](std::size_t i) {
    while (leader[i] != i) i = leader[i] = leader[leader[i]];
    return i;
  };
  // Sticky state for (left leader, right leader).
  std::map<std::pair<std::size_t, std::size_t>, detail::StickyPair> bound;

  for (std::size_t k = 0; k <= K; ++k) {
    for (std::size_t i = 0; i < P; ++i) {
      if (begin[i] == k) {
        alive[i] = true;
        pos[i] = points[i].x;
        out[i].dt = h;
        out[i].start = t0 + static_cast<double>(k) * h;
      }
    }
    if (k > 0) {
      std::vector<std::size_t> roots;
      for (std::size_t i = 0; i < P; ++i)
        if (alive[i] && begin[i] < k && find(i) == i) roots.push_back(i);
      std::vector<double> old(P);
      for (std::size_t i : roots) old[i] = pos[i];
      std::vector<bool> moved(P, false);
      // Pairs still in a sticky hold move together first.
      for (auto& [key, sp] : bound) {
        auto [a, b] = key;
        if (find(a) != a || find(b) != b || moved[a] || moved[b] || !(sp.hold > 0.0)) continue;
        sp.L = pos[a];
        sp.R = pos[b];
        sp.step(h, cfg.zeta, xi, rng);
        pos[a] = sp.L;
        pos[b] = sp.R;
        moved[a] = moved[b] = true;
      }
      for (std::size_t i : roots) {
        if (moved[i]) continue;
        const double drift = orientations[i] == Orientation::left ? -cfg.zeta : cfg.zeta;
        pos[i] += xi * std::sqrt(h) * normal(rng) + drift * h;
      }
      // Same-orientation coalescence.
      for (std::size_t x = 0; x < roots.size(); ++x) {
        for (std::size_t y = x + 1; y < roots.size(); ++y) {
          std::size_t a = find(roots[x]), b = find(roots[y]);
          if (a == b || orientations[a] != orientations[b]) continue;
          const double g0 = old[roots[y]] - old[roots[x]], g1 = pos[b] - pos[a];
          bool met = g0 * g1 <= 0.0;
          if (!met && !moved[a] && !moved[b]) {
            const double pr = std::exp(-2.0 * g0 * g1 / (2.0 * cfg.xi2 * h));
            met = uniform01(rng) < pr;
          }
          if (met) {
            pos[b] = pos[a];
            leader[b] = a;
          }
        }
      }
      // Mixed pairs: first contact or a free step that crossed an ordered pair.
      for (std::size_t x : roots) {
        for (std::size_t y : roots) {
          const std::size_t a = find(x), b = find(y);
          if (a != x || b != y || orientations[a] != Orientation::left || orientations[b] != Orientation::right)
            continue;
          auto it = bound.find({a, b});
          if (it == bound.end()) {
            detail::StickyPair sp;
            sp.ordered = old[a] <= old[b];
            it = bound.emplace(std::make_pair(a, b), sp).first;
          }
          auto& sp = it->second;
          if (sp.hold > 0.0 && moved[a]) continue;
          if (sp.ordered && pos[a] >= pos[b]) {
            const double p = pos[a] - pos[b];
            pos[a] = pos[b] = 0.5 * (pos[a] + pos[b]);
            sp.hold = cfg.zeta > 0.0 ? p / (2.0 * cfg.zeta) : std::numeric_limits<double>::infinity();
          } else if (!sp.ordered && pos[a] <= pos[b]) {
            pos[a] = pos[b] = 0.5 * (pos[a] + pos[b]);
            sp.ordered = true;
            if (cfg.zeta == 0.0) sp.hold = std::numeric_limits<double>::infinity();
          }
        }
      }
    }
    for (std::size_t i = 0; i < P; ++i)
      if (alive[i]) out[i].values.push_back(pos[find(i)]);
  }
  return out;
}

// Law of the first time a Brownian gap started at gap0, drifting toward 0 at
// rate `drift` with variance `variance` per unit time, reaches 0.
class InverseGaussian {
 public:
  InverseGaussian(double gap0, double drift, double variance)
      : gap0_(gap0), drift_(drift), variance_(variance) {
    if (!(gap0 > 0.0)) throw ValidationError("first passage: gap0 must be positive");
    if (!(variance > 0.0)) throw ValidationError("first passage: variance must be positive");
    if (!(drift > 0.0)) throw UnsupportedParameter("first passage: drift toward 0 must be positive");
    mean_ = gap0 / drift;
    shape_ = gap0 * gap0 / variance;
  }

  double mean() const { return mean_; }
  double shape() const { return shape_; }

  double cdf(double t) const {
    if (!(t > 0.0)) return 0.0;
    const double a = std::sqrt(shape_ / t);
    const double first = normal_cdf(a * (t / mean_ - 1.0));
    const double z = a * (t / mean_ + 1.0) / std::numbers::sqrt2;
    const double log_second = 2.0 * shape_ / mean_ + log_erfc(z) - std::numbers::ln2;
    return std::clamp(first + std::exp(log_second), 0.0, 1.0);
  }

 private:
  static double log_erfc(double z) {
    if (z < 20.0) return std::log(std::erfc(z));
    const double z2 = z * z;
    const double series = 1.0 - 1.0 / (2.0 * z2) + 3.0 / (4.0 * z2 * z2) - 15.0 / (8.0 * z2 * z2 * z2);
    return -z2 - std::log(z * std::sqrt(std::numbers::pi)) + std::log(series);
  }

  double gap0_, drift_, variance_;
  double mean_ = 0.0, shape_ = 0.0;
};

inline InverseGaussian first_passage_oracle(double gap0, double drift, double variance) {
  return InverseGaussian(gap0, drift, variance);
}

// First-passage CDF without drift (Levy law); no finite mean.
inline double driftless_first_passage_cdf(double gap0, double variance, double t) {
  if (!(t > 0.0)) return 0.0;
  return std::erfc(gap0 / std::sqrt(2.0 * variance * t));
}

}  // namespace slfv

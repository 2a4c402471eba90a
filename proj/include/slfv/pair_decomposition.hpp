#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "slfv/dual_sim.hpp"
#include "slfv/errors.hpp"
#include "slfv/event_engine.hpp"
#include "slfv/model_config.hpp"
#include "slfv/parallel.hpp"
#include "slfv/rng.hpp"
#include "slfv/stats.hpp"

namespace slfv {

// Unscaled neutral displacement Z - U with Z, U ~ U[0, 2r].
inline double sample_neutral_jump(double r, Rng& rng) {
  if (!(r > 0.0)) throw ValidationError("jump radius must be positive");
  return uniform(rng, 0.0, 2.0 * r) - uniform(rng, 0.0, 2.0 * r);
}

struct SelectiveJumps {
  double left = 0.0;
  double right = 0.0;
};

// (min(U1,U2) - Y, max(U1,U2) - Y) with U1, U2, Y ~ U[0, 2r].
inline SelectiveJumps sample_selective_jumps(double r, Rng& rng) {
  if (!(r > 0.0)) throw ValidationError("jump radius must be positive");
  double u1, u2;
  do {
    u1 = uniform(rng, 0.0, 2.0 * r);
    u2 = uniform(rng, 0.0, 2.0 * r);
  } while (u1 == u2);
  const double y = uniform(rng, 0.0, 2.0 * r);
  return {std::min(u1, u2) - y, std::max(u1, u2) - y};
}

enum class Regime : std::uint8_t { coalesced, nearby, separated };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::coalesced: return "coalesced";
    case Regime::nearby: return "nearby";
    default: return "separated";
  }
}

inline Regime classify_pair(double L, double R, double threshold) {
  const double gap = R - L;
  if (gap == 0.0) return Regime::coalesced;
  return gap <= threshold ? Regime::nearby : Regime::separated;
}

struct PairState {
  double time = 0.0;
  double L = 0.0, R = 0.0;
  Regime regime = Regime::coalesced;
  double C = 0.0, N = 0.0, S = 0.0;
};

enum class IncrementSource : std::uint8_t { neutral, selective_left, selective_right };

struct WalkIncrement {
  double time = 0.0;
  double delta = 0.0;
  IncrementSource source = IncrementSource::neutral;
  bool left_component = true;
  std::uint64_t event_id = 0;
};

struct PairRun {
  std::vector<PairState> trajectory;  // state after every event (when recorded)
  std::vector<WalkIncrement> increments;
  PairState final_state;
  double first_separation = std::numeric_limits<double>::quiet_NaN();
  std::size_t events = 0;
};

// Left-most trace from yl and right-most trace from yr on one shared stream.
inline PairRun run_pair(double yl, double yr, double T, const ModelParams& params, Rng& rng, bool record = false) {
  params.validate();
  if (params.upsilon < 1.0) throw UnsupportedParameter("run_pair needs upsilon = 1");
  if (!(yl <= yr)) throw ValidationError("run_pair: need yl <= yr");
  const double threshold = 2.0 * params.max_rescaled_radius();
  HittingSource src(params, rng, 0.0);
  PairRun run;
  PairState st;
  st.L = yl;
  st.R = yr;
  st.regime = classify_pair(yl, yr, threshold);
  auto advance = [&](double t) {
    const double dt = t - st.time;
    (st.regime == Regime::coalesced ? st.C : st.regime == Regime::nearby ? st.N : st.S) += dt;
    st.time = t;
  };
  std::array<double, 2> pos{};
  for (;;) {
    pos = {st.L, st.R};
    auto e = src.next(pos, T);
    if (!e) break;
    advance(e->time);
    ++run.events;
    const bool hitL = e->covers(st.L), hitR = e->covers(st.R);
    const double newL = hitL ? e->z1 : st.L;
    const double newR = hitR ? (e->selective() ? e->z2 : e->z1) : st.R;
    if (record) {
      if (hitL)
        run.increments.push_back({e->time, newL - st.L,
                                  e->selective() ? IncrementSource::selective_left : IncrementSource::neutral, true,
                                  e->id});
      if (hitR)
        run.increments.push_back({e->time, newR - st.R,
                                  e->selective() ? IncrementSource::selective_right : IncrementSource::neutral,
                                  false, e->id});
    }
    const Regime before = st.regime;
    st.L = newL;
    st.R = newR;
    st.regime = classify_pair(st.L, st.R, threshold);
    if (before == Regime::coalesced && st.regime != Regime::coalesced && std::isnan(run.first_separation))
      run.first_separation = st.time;
    if (record) run.trajectory.push_back(st);
  }
  advance(T);
  run.final_state = st;
  return run;
}

struct DriftDiffusionReport {
  double zeta_hat = 0.0, zeta_se = 0.0;
  double xi2_hat = 0.0, xi2_se = 0.0;
  std::int64_t n = 0;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  double T = 1.0;
  std::vector<double> drift_samples;      // right-most displacement per replicate
  std::vector<double> diffusion_samples;  // neutral displacement per replicate
};

// zeta_hat: mean right-most displacement / T. xi2_hat: variance of a neutral
// (alpha = 0) lineage displacement / T.
inline DriftDiffusionReport estimate_drift_diffusion(const ModelParams& params, double T, std::size_t replicates,
                                                     unsigned workers = 1) {
  params.validate();
  if (!(T > 0.0)) throw ValidationError("estimate_drift_diffusion: T must be positive");
  if (params.upsilon < 1.0) throw UnsupportedParameter("drift-diffusion needs upsilon = 1");
  const ModelParams& drift = params;
  ModelParams neutral = params;
  neutral.alpha = 0.0;
  DriftDiffusionReport rep;
  rep.n = params.n;
  rep.replicates = replicates;
  rep.seed = params.seed;
  rep.T = T;
  rep.drift_samples = parallel_replicates(replicates, workers, [&](std::size_t r) {
    Rng rng = make_stream(params.seed, r, StreamTag::pair);
    return trace_forward_extremal(Side::right, 0.0, T, drift, rng).path.final_value();
  });
  rep.diffusion_samples = parallel_replicates(replicates, workers, [&](std::size_t r) {
    Rng rng = make_stream(params.seed, r, StreamTag::backward);
    return trace_forward_extremal(Side::right, 0.0, T, neutral, rng).path.final_value();
  });
  MomentAccumulator a, b;
  for (double v : rep.drift_samples) a.add(v);
  for (double v : rep.diffusion_samples) b.add(v);
  rep.zeta_hat = a.mean() / T;
  rep.zeta_se = a.standard_error() / T;
  rep.xi2_hat = b.variance() / T;
  rep.xi2_se = b.variance_standard_error() / T;
  return rep;
}

struct OccupationReport {
  double mean = 0.0, se = 0.0;
  std::vector<double> samples;
};

// Mean time spent in the nearby regime by a pair started coalesced at 0.
inline OccupationReport nearby_occupation(const ModelParams& params, double T, std::size_t replicates,
                                          unsigned workers = 1) {
  params.validate();
  OccupationReport rep;
  rep.samples = parallel_replicates(replicates, workers, [&](std::size_t r) {
    Rng rng = make_stream(params.seed, r, StreamTag::pair);
    return run_pair(0.0, 0.0, T, params, rng).final_state.N;
  });
  MomentAccumulator a;
  for (double v : rep.samples) a.add(v);
  rep.mean = a.mean();
  rep.se = a.standard_error();
  return rep;
}

}  // namespace slfv

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "slfv/diagnostics.hpp"
#include "slfv/dual_sim.hpp"
#include "slfv/errors.hpp"
#include "slfv/forward_slfvs.hpp"
#include "slfv/io.hpp"
#include "slfv/limit_reference.hpp"
#include "slfv/model_config.hpp"
#include "slfv/pair_decomposition.hpp"
#include "slfv/parallel.hpp"
#include "slfv/path_metric.hpp"
#include "slfv/rng.hpp"
#include "slfv/stats.hpp"

namespace slfv {

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"pu-curve",  "drift-diffusion", "duality",
                                              "samelaw",   "nearby-scaling",  "meeting-time",
                                              "net-diagnostics", "metric-selftest", "simulate"};
  return names;
}

struct ExperimentSpec {
  std::string name;
  ModelParams params;
  std::size_t replicates = 1000;
  double horizon = 1.0;
  unsigned workers = 1;
  std::vector<double> upsilons;      // pu-curve sweep; empty means k/20, k = 1..20
  std::vector<double> starts{0.0};   // sampling points for simulate
  std::vector<std::int64_t> ns{100, 400, 1600};  // nearby-scaling
  double gap = 1.0;                  // meeting-time initial gap
  double max_time = 50.0;            // meeting-time censoring
  std::size_t target_jumps = 10000;  // samelaw, per class and direction
  bool battery = false;              // duality: also run the 20-case battery
  std::size_t battery_replicates = 2000;

  void validate() const {
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), name) == names.end())
      throw ValidationError("unknown experiment '" + name + "'");
    if (replicates < 1) throw ValidationError("replicates must be at least 1");
    if (!(horizon > 0.0)) throw ValidationError("horizon must be positive");
    for (double u : upsilons)
      if (!(u > 0.0 && u <= 1.0)) throw ValidationError("upsilon sweep must lie in (0, 1]");
    params.validate();
  }
};

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) {
    if (row.size() != columns.size()) throw ValidationError("table: row width does not match the header");
    rows.push_back(std::move(row));
  }

  void write_csv(std::ostream& os) const {
    for (std::size_t k = 0; k < columns.size(); ++k) os << (k ? "," : "") << columns[k];
    os << '\n';
    for (const auto& r : rows) {
      for (std::size_t k = 0; k < r.size(); ++k) os << (k ? "," : "") << r[k];
      os << '\n';
    }
  }
};

// `main` goes to <name>.csv, each extra table to <name>_<suffix>.csv.
struct ResultTable {
  std::string name;
  Table main;
  std::vector<std::pair<std::string, Table>> extra;
  json summary = json::object();
  json attachment;  // simulate: genealogy
  bool structural_failure = false;
  bool budget_failure = false;
};

inline std::string fmt(double v) { return format_number(v); }
inline std::string fmt(std::size_t v) { return std::to_string(v); }
inline std::string fmt(std::int64_t v) { return std::to_string(v); }

inline json params_json(const ModelParams& p) {
  return {{"n", p.n}, {"alpha", p.alpha}, {"upsilon", p.upsilon}, {"mu", format_radius_measure(p.mu)},
          {"seed", p.seed}};
}

inline json constants_json(const ModelParams& p) {
  const LimitConstants c = limit_constants(p);
  return {{"zeta", c.zeta}, {"xi2_four_ninths", c.xi2_four_ninths}, {"xi2_derived", c.xi2_derived},
          {"s_n", selection_probability(p)}};
}

inline bool three_se_ok(double est, double se, double target) { return std::abs(est - target) <= 3.0 * se; }

// ---------------------------------------------------------------- pu-curve

inline std::vector<double> default_upsilon_sweep(int count = 20) {
  std::vector<double> u;
  for (int k = 1; k <= count; ++k) u.push_back(static_cast<double>(k) / count);
  return u;
}

inline std::uint64_t sweep_key(std::size_t index, std::size_t replicate) {
  return (static_cast<std::uint64_t>(index) << 32) | static_cast<std::uint64_t>(replicate);
}

inline ResultTable run_pu_curve(const ExperimentSpec& spec) {
  spec.validate();
  const std::vector<double> sweep = spec.upsilons.empty() ? default_upsilon_sweep() : spec.upsilons;
  ResultTable out;
  out.name = "pu-curve";
  out.main.columns = {"upsilon", "mean", "se", "replicates"};
  Table samples;
  samples.columns = {"upsilon", "replicate", "position"};
  json status = json::array();
  const double zeta = limit_constants(spec.params).zeta;
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    ModelParams p = spec.params;
    p.upsilon = sweep[i];
    std::vector<double> v;
    try {
      v = parallel_replicates(spec.replicates, spec.workers, [&](std::size_t r) {
        return extremal_ancestor(0.0, spec.horizon, p, sweep_key(i, r));
      });
    } catch (const ResourceError& e) {
      out.budget_failure = true;
      status.push_back({{"upsilon", sweep[i]}, {"status", "budget"}, {"message", e.what()}});
      continue;
    }
    MomentAccumulator a;
    for (std::size_t r = 0; r < v.size(); ++r) {
      a.add(v[r]);
      samples.add({fmt(sweep[i]), fmt(r), fmt(v[r])});
    }
    out.main.add({fmt(sweep[i]), fmt(a.mean()), fmt(a.standard_error()), fmt(v.size())});
    json st = {{"upsilon", sweep[i]}, {"status", "ok"}};
    if (sweep[i] == 1.0) {
      const double target = zeta * spec.horizon;
      out.summary["endpoint"] = {{"target", target},
                                 {"mean", a.mean()},
                                 {"se", a.standard_error()},
                                 {"within_3se", three_se_ok(a.mean(), a.standard_error(), target)}};
    }
    status.push_back(st);
  }
  out.summary["status"] = status;
  out.extra.emplace_back("samples", std::move(samples));
  return out;
}

// ------------------------------------------------------- drift-diffusion

struct DiffusionVerdict {
  std::string matched;  // "4/9", "4/3", "both", "neither"
  double rel_four_ninths = 0.0, rel_derived = 0.0;
};

inline DiffusionVerdict arbitrate_diffusion(double xi2_hat, const ModelParams& p, double rel_tol = 0.01) {
  const LimitConstants c = limit_constants(p);
  DiffusionVerdict v;
  v.rel_four_ninths = std::abs(xi2_hat - c.xi2_four_ninths) / c.xi2_four_ninths;
  v.rel_derived = std::abs(xi2_hat - c.xi2_derived) / c.xi2_derived;
  const bool a = v.rel_four_ninths <= rel_tol, b = v.rel_derived <= rel_tol;
  v.matched = a && b ? "both" : a ? "4/9" : b ? "4/3" : "neither";
  return v;
}

inline ResultTable run_drift_diffusion(const ExperimentSpec& spec) {
  spec.validate();
  const DriftDiffusionReport rep = estimate_drift_diffusion(spec.params, spec.horizon, spec.replicates, spec.workers);
  ResultTable out;
  out.name = "drift-diffusion";
  out.main.columns = {"replicate", "rightmost_displacement", "neutral_displacement"};
  for (std::size_t r = 0; r < rep.replicates; ++r)
    out.main.add({fmt(r), fmt(rep.drift_samples[r]), fmt(rep.diffusion_samples[r])});
  const LimitConstants c = limit_constants(spec.params);
  const DiffusionVerdict v = arbitrate_diffusion(rep.xi2_hat, spec.params);
  out.summary = {{"zeta_hat", rep.zeta_hat},
                 {"zeta_se", rep.zeta_se},
                 {"xi2_hat", rep.xi2_hat},
                 {"xi2_se", rep.xi2_se},
                 {"n", rep.n},
                 {"replicates", rep.replicates},
                 {"seed", rep.seed},
                 {"T", rep.T},
                 {"zeta_within_3se", three_se_ok(rep.zeta_hat, rep.zeta_se, c.zeta)},
                 {"xi2_matched", v.matched},
                 {"xi2_rel_error_4_9", v.rel_four_ninths},
                 {"xi2_rel_error_4_3", v.rel_derived},
                 {"xi2_four_ninths_rejected", v.matched == "4/3"}};
  return out;
}

// ---------------------------------------------------------------- duality

struct DualityCase {
  std::string label;
  std::vector<double> xs;
  double alpha = 1.0, upsilon = 1.0, T = 0.25;
  double below = 1.0, above = 0.0;  // w0 = below on x < 0, above on x >= 0
};

inline std::vector<DualityCase> duality_battery() {
  std::vector<DualityCase> cases;
  int k = 0;
  for (double alpha : {0.0, 1.0, 2.0})
    for (double x : {-0.2, 0.0, 0.2})
      cases.push_back({"point" + std::to_string(k++), {x}, alpha, 1.0, 0.25, 1.0, 0.0});
  for (double T : {0.1, 0.5}) cases.push_back({"horizon" + std::to_string(k++), {0.0}, 1.0, 1.0, T, 1.0, 0.0});
  for (double u : {0.3, 0.6})
    cases.push_back({"impact" + std::to_string(k++), {0.05}, 1.0, u, 0.25, 1.0, 0.0});
  cases.push_back({"levels" + std::to_string(k++), {0.0}, 1.0, 1.0, 0.25, 0.7, 0.2});
  cases.push_back({"levels" + std::to_string(k++), {0.1}, 2.0, 0.5, 0.25, 0.9, 0.4});
  cases.push_back({"pair" + std::to_string(k++), {-0.1, 0.1}, 1.0, 1.0, 0.25, 1.0, 0.0});
  cases.push_back({"pair" + std::to_string(k++), {-0.3, 0.2}, 0.0, 1.0, 0.25, 1.0, 0.0});
  cases.push_back({"pair" + std::to_string(k++), {0.0, 0.15}, 1.0, 0.5, 0.25, 0.8, 0.3});
  cases.push_back({"triple" + std::to_string(k++), {-0.2, 0.0, 0.2}, 1.0, 1.0, 0.25, 1.0, 0.0});
  cases.push_back({"triple" + std::to_string(k++), {-0.1, 0.05, 0.3}, 2.0, 0.7, 0.1, 0.9, 0.1});
  return cases;
}

inline DualityReport run_duality_case(const DualityCase& c, const ModelParams& base, std::size_t reps,
                                      unsigned workers, std::uint64_t offset) {
  ModelParams p = base;
  p.alpha = c.alpha;
  p.upsilon = c.upsilon;
  const double W = duality_window(c.xs, c.T, p);
  const AlleleProfile w0 = AlleleProfile::step(-W, W, 0.0, c.below, c.above);
  return duality_check(w0, c.xs, c.T, p, reps, workers, offset);
}

inline ResultTable run_duality(const ExperimentSpec& spec) {
  spec.validate();
  ResultTable out;
  out.name = "duality";
  out.main.columns = {"case", "points", "alpha", "upsilon", "T", "forward_mean", "forward_se",
                      "dual_mean", "dual_se", "z", "replicates"};
  auto row = [&](const DualityCase& c, const DualityReport& r) {
    std::string pts;
    for (std::size_t k = 0; k < c.xs.size(); ++k) pts += (k ? " " : "") + fmt(c.xs[k]);
    out.main.add({c.label, pts, fmt(c.alpha), fmt(c.upsilon), fmt(c.T), fmt(r.forward_mean), fmt(r.forward_se),
                  fmt(r.dual_mean), fmt(r.dual_se), fmt(r.z), fmt(r.replicates)});
  };
  const DualityCase main{"main", {0.0}, spec.params.alpha, spec.params.upsilon, spec.horizon, 1.0, 0.0};
  const DualityReport r = run_duality_case(main, spec.params, spec.replicates, spec.workers, 0);
  row(main, r);
  out.summary["main_z"] = r.z;
  out.summary["main_within_3"] = std::abs(r.z) <= 3.0;
  if (spec.battery) {
    double worst = 0.0;
    std::uint64_t offset = 1ull << 40;
    for (const auto& c : duality_battery()) {
      const DualityReport b = run_duality_case(c, spec.params, spec.battery_replicates, spec.workers, offset);
      offset += 1ull << 32;
      worst = std::max(worst, std::abs(b.z));
      row(c, b);
    }
    out.summary["battery_cases"] = duality_battery().size();
    out.summary["battery_max_abs_z"] = worst;
    out.summary["battery_within_4"] = worst <= 4.0;
  }
  return out;
}

// ---------------------------------------------------------------- samelaw

struct SameLawReport {
  std::array<std::vector<double>, 2> forward, backward_negated;  // [neutral, selective]
  std::array<KsResult, 2> ks{};
  std::size_t traces = 0;
};

// Forward left-most jumps against negated backward left-most jumps, per event
// class, each on its own fresh streams.
inline SameLawReport same_law_jumps(const ModelParams& params, std::size_t target, double T = 1.0,
                                    std::size_t max_traces = 1u << 22) {
  params.validate();
  if (params.alpha <= 0.0) throw ValidationError("samelaw needs alpha > 0 for selective jumps");
  SameLawReport rep;
  auto full = [&](const std::array<std::vector<double>, 2>& a) {
    return a[0].size() >= target && a[1].size() >= target;
  };
  for (std::size_t r = 0; !(full(rep.forward) && full(rep.backward_negated)); ++r) {
    if (r >= max_traces) throw ResourceError("samelaw: trace budget exceeded before reaching the jump target");
    if (!full(rep.forward)) {
      Rng rng = make_stream(params.seed, r, StreamTag::forward);
      for (const auto& s : trace_forward_extremal(Side::left, 0.0, T, params, rng).steps) {
        auto& v = rep.forward[s.kind == EventKind::selective];
        if (v.size() < target) v.push_back(s.delta());
      }
    }
    if (!full(rep.backward_negated)) {
      Rng rng = make_stream(params.seed, r, StreamTag::backward);
      for (const auto& s : trace_backward_extremal(Side::left, 0.0, T, params, rng).steps) {
        auto& v = rep.backward_negated[s.kind == EventKind::selective];
        if (v.size() < target) v.push_back(-s.delta());
      }
    }
    rep.traces = r + 1;
  }
  for (int k = 0; k < 2; ++k) rep.ks[k] = ks_two_sample(rep.forward[k], rep.backward_negated[k]);
  return rep;
}

inline ResultTable run_samelaw(const ExperimentSpec& spec) {
  spec.validate();
  ModelParams p = spec.params;
  p.upsilon = 1.0;
  const SameLawReport rep = same_law_jumps(p, spec.target_jumps, spec.horizon);
  ResultTable out;
  out.name = "samelaw";
  out.main.columns = {"class", "source", "delta"};
  const char* cls[2] = {"neutral", "selective"};
  for (int k = 0; k < 2; ++k) {
    for (double d : rep.forward[k]) out.main.add({cls[k], "forward", fmt(d)});
    for (double d : rep.backward_negated[k]) out.main.add({cls[k], "backward_negated", fmt(d)});
    out.summary[cls[k]] = {{"ks_statistic", rep.ks[k].statistic},
                           {"p_value", rep.ks[k].p_value},
                           {"jumps", rep.forward[k].size()}};
  }
  out.summary["traces"] = rep.traces;
  return out;
}

// --------------------------------------------------------- nearby-scaling

struct SlopeFit {
  double slope = 0.0, se = 0.0, intercept = 0.0;
};

// Weighted least squares of log y on log x, weights from the delta-method
// variance se^2 / y^2.
inline SlopeFit loglog_slope(std::span<const double> x, std::span<const double> y, std::span<const double> se) {
  if (x.size() < 2 || x.size() != y.size() || y.size() != se.size())
    throw ValidationError("slope fit: need matching inputs with at least two points");
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ValidationError("slope fit: values must be positive");
    const double rel = se[i] / y[i];
    const double w = rel > 0.0 ? 1.0 / (rel * rel) : 1.0;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sw += w;
    sx += w * lx;
    sy += w * ly;
    sxx += w * lx * lx;
    sxy += w * lx * ly;
  }
  const double den = sw * sxx - sx * sx;
  SlopeFit f;
  f.slope = (sw * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / sw;
  f.se = std::sqrt(sw / den);
  return f;
}

inline ResultTable run_nearby_scaling(const ExperimentSpec& spec) {
  spec.validate();
  ResultTable out;
  out.name = "nearby-scaling";
  out.main.columns = {"n", "mean_nearby_time", "se", "replicates"};
  std::vector<double> xs, ys, ses;
  for (std::size_t i = 0; i < spec.ns.size(); ++i) {
    ModelParams p = spec.params;
    p.n = spec.ns[i];
    p.seed = spec.params.seed + i;
    const OccupationReport r = nearby_occupation(p, spec.horizon, spec.replicates, spec.workers);
    out.main.add({fmt(spec.ns[i]), fmt(r.mean), fmt(r.se), fmt(r.samples.size())});
    xs.push_back(static_cast<double>(spec.ns[i]));
    ys.push_back(r.mean);
    ses.push_back(r.se);
  }
  const SlopeFit f = loglog_slope(xs, ys, ses);
  out.summary = {{"slope", f.slope}, {"slope_se", f.se}, {"target", -0.5},
                 {"within_0_15", std::abs(f.slope + 0.5) <= 0.15}};
  return out;
}

// ----------------------------------------------------------- meeting-time

struct MeetingReport {
  std::vector<double> times;  // +inf when censored
  std::size_t censored = 0;
  KsResult ks{};
  double oracle_mean = std::numeric_limits<double>::infinity();
  bool driftless = false;
};

inline std::function<double(double)> meeting_time_cdf(double gap, const ModelParams& p) {
  const LimitConstants c = limit_constants(p);
  const double variance = 2.0 * c.xi2_derived;
  if (c.zeta > 0.0) {
    const InverseGaussian ig = first_passage_oracle(gap, 2.0 * c.zeta, variance);
    return [ig](double t) { return std::isinf(t) ? 1.0 : ig.cdf(t); };
  }
  return [gap, variance](double t) { return std::isinf(t) ? 1.0 : driftless_first_passage_cdf(gap, variance, t); };
}

inline MeetingReport meeting_times(const ModelParams& params, double gap, std::size_t reps, double max_time,
                                   unsigned workers) {
  params.validate();
  if (!(gap > 0.0)) throw ValidationError("meeting time: gap must be positive");
  MeetingReport rep;
  rep.times = parallel_replicates(reps, workers, [&](std::size_t r) {
    Rng rng = make_stream(params.seed, r, StreamTag::limit);
    const auto t = backward_pair_meeting_time(gap, params, rng, max_time);
    return t ? *t : std::numeric_limits<double>::infinity();
  });
  for (double t : rep.times) rep.censored += std::isinf(t);
  const LimitConstants c = limit_constants(params);
  rep.driftless = !(c.zeta > 0.0);
  if (!rep.driftless) rep.oracle_mean = gap / (2.0 * c.zeta);
  rep.ks = ks_one_sample(rep.times, meeting_time_cdf(gap, params));
  return rep;
}

inline ResultTable run_meeting_time(const ExperimentSpec& spec) {
  spec.validate();
  ModelParams p = spec.params;
  p.upsilon = 1.0;
  const MeetingReport rep = meeting_times(p, spec.gap, spec.replicates, spec.max_time, spec.workers);
  ResultTable out;
  out.name = "meeting-time";
  out.main.columns = {"replicate", "meeting_time"};
  for (std::size_t r = 0; r < rep.times.size(); ++r) out.main.add({fmt(r), fmt(rep.times[r])});
  MomentAccumulator a;
  for (double t : rep.times)
    if (!std::isinf(t)) a.add(t);
  out.summary = {{"gap", spec.gap},
                 {"max_time", spec.max_time},
                 {"censored", rep.censored},
                 {"mean_uncensored", a.count() ? json(a.mean()) : json(nullptr)},
                 {"oracle", rep.driftless ? "levy" : "inverse_gaussian"},
                 {"oracle_mean", number_json(rep.oracle_mean)},
                 {"ks_statistic", rep.ks.statistic},
                 {"p_value", rep.ks.p_value}};
  return out;
}

// --------------------------------------------------------- net-diagnostics

struct NetTotals {
  std::size_t configs = 0, forward_pairs = 0, same_side_crossings = 0, mixed_crossings = 0;
  std::size_t wedges = 0, wedge_violations = 0, window_exits = 0, events = 0;
  std::size_t crossings_planted = 0, crossings_detected = 0, wedges_planted = 0, wedges_detected = 0;

  bool structural_ok() const {
    return same_side_crossings == 0 && mixed_crossings == 0 && wedge_violations == 0 && window_exits == 0;
  }
  bool injection_ok() const {
    return crossings_planted > 0 && wedges_planted > 0 && crossings_detected == crossings_planted &&
           wedges_detected == wedges_planted;
  }
};

inline std::pair<NetTotals, std::vector<CoupledResult>> coupled_diagnostics(const ModelParams& params,
                                                                           std::size_t configs, unsigned workers,
                                                                           bool inject,
                                                                           const CoupledOptions& opt = {}) {
  auto res = parallel_replicates(configs, workers,
                                 [&](std::size_t r) { return coupled_configuration(params, r, opt, inject); });
  NetTotals t;
  for (const auto& c : res) {
    ++t.configs;
    t.forward_pairs += c.forward_pairs;
    t.same_side_crossings += c.same_side_crossings;
    t.mixed_crossings += c.mixed_crossings;
    t.wedges += c.wedges;
    t.wedge_violations += c.wedge_violations;
    t.window_exits += c.window_exits;
    t.events += c.events;
    t.crossings_planted += c.crossing_planted;
    t.crossings_detected += c.crossing_planted && c.crossing_detected;
    t.wedges_planted += c.wedge_planted;
    t.wedges_detected += c.wedge_planted && c.wedge_detected;
  }
  return {t, std::move(res)};
}

inline ResultTable run_net_diagnostics(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.params.upsilon != 1.0) throw UnsupportedParameter("net-diagnostics needs upsilon = 1");
  CoupledOptions opt;
  opt.horizon = spec.horizon;
  auto [t, res] = coupled_diagnostics(spec.params, spec.replicates, spec.workers, true, opt);
  ResultTable out;
  out.name = "net-diagnostics";
  out.main.columns = {"config", "events", "forward_pairs", "same_side_crossings", "mixed_crossings",
                      "wedges", "wedge_violations", "window_exits"};
  for (std::size_t r = 0; r < res.size(); ++r) {
    const auto& c = res[r];
    out.main.add({fmt(r), fmt(c.events), fmt(c.forward_pairs), fmt(c.same_side_crossings), fmt(c.mixed_crossings),
                  fmt(c.wedges), fmt(c.wedge_violations), fmt(c.window_exits)});
  }
  const MeetingReport m = meeting_times(spec.params, spec.gap, spec.replicates, spec.max_time, spec.workers);
  out.summary = {{"configs", t.configs},
                 {"same_side_crossings", t.same_side_crossings},
                 {"mixed_crossings", t.mixed_crossings},
                 {"wedges", t.wedges},
                 {"wedge_violations", t.wedge_violations},
                 {"window_exits", t.window_exits},
                 {"injection",
                  {{"crossings_planted", t.crossings_planted},
                   {"crossings_detected", t.crossings_detected},
                   {"wedges_planted", t.wedges_planted},
                   {"wedges_detected", t.wedges_detected}}},
                 {"meeting_time", {{"ks_statistic", m.ks.statistic}, {"p_value", m.ks.p_value}, {"censored", m.censored}}}};
  out.structural_failure = !t.structural_ok() || !t.injection_ok();
  return out;
}

// -------------------------------------------------------- metric-selftest

struct InterpolationCheck {
  std::size_t paths = 0, failures = 0;
  double worst_ratio = 0.0;  // max gap / bound
};

// Interpolation gap of forward and backward extremal traces against 2 R / sqrt(n).
inline InterpolationCheck interpolation_bound_check(const ModelParams& params, std::size_t traces, double T,
                                                    unsigned workers) {
  ModelParams p = params;
  p.upsilon = 1.0;
  const double bound = 2.0 * p.max_rescaled_radius();
  auto gaps = parallel_replicates(traces, workers, [&](std::size_t r) {
    Rng rng = make_stream(p.seed, r, StreamTag::metric);
    const Side side = r % 2 ? Side::left : Side::right;
    const ExtremalTrace tr = r % 4 < 2 ? trace_forward_extremal(side, 0.0, T, p, rng)
                                       : trace_backward_extremal(side, 0.0, T, p, rng);
    return interpolation_gap(tr);
  });
  InterpolationCheck c;
  for (double g : gaps) {
    ++c.paths;
    if (!(g < bound)) ++c.failures;
    c.worst_ratio = std::max(c.worst_ratio, g / bound);
  }
  return c;
}

inline ResultTable run_metric_selftest(const ExperimentSpec& spec) {
  spec.validate();
  const MetricSelftest m = metric_selftest(spec.params.seed, spec.replicates);
  const InterpolationCheck ic = interpolation_bound_check(spec.params, 200, spec.horizon, spec.workers);
  ResultTable out;
  out.name = "metric-selftest";
  out.main.columns = {"check", "cases", "value", "pass"};
  auto add = [&](const std::string& name, std::size_t cases, double value, bool pass) {
    out.main.add({name, fmt(cases), fmt(value), pass ? "1" : "0"});
  };
  add("triangle_excess", m.triples, m.max_triangle_excess, m.max_triangle_excess <= 1e-9);
  add("symmetry_failures", m.triples, static_cast<double>(m.symmetry_failures), m.symmetry_failures == 0);
  add("identity_failures", m.triples, static_cast<double>(m.identity_failures), m.identity_failures == 0);
  add("negative_values", m.triples, static_cast<double>(m.negative_values), m.negative_values == 0);
  add("bruteforce_max_diff", m.bruteforce_cases, m.max_bruteforce_diff, m.max_bruteforce_diff <= 1e-12);
  add("interp2_failures", m.interp2_cases, static_cast<double>(m.interp2_failures), m.interp2_failures == 0);
  add("envelope_failures", m.triples, static_cast<double>(m.envelope_failures), m.envelope_failures == 0);
  add("boundary_distance", 1, m.boundary_distance, m.boundary_distance == 2.0);
  add("interpolation_bound_failures", ic.paths, static_cast<double>(ic.failures), ic.failures == 0);
  out.summary = {{"passed", m.passed() && ic.failures == 0},
                 {"compactified_triangle_excess", m.compactified_triangle_excess},
                 {"interpolation_worst_ratio", ic.worst_ratio}};
  out.structural_failure = !(m.passed() && ic.failures == 0);
  return out;
}

// ---------------------------------------------------------------- simulate

inline ResultTable run_simulate(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.starts.empty()) throw ValidationError("simulate: need at least one start point");
  DualOptions opt;
  opt.record = true;
  const GenealogyGraph g = run_dual(spec.starts, spec.horizon, spec.params, 0, opt);
  ResultTable out;
  out.name = "simulate";
  out.main.columns = {"id", "position"};
  for (std::size_t i = 0; i < g.final_state.size(); ++i)
    out.main.add({std::to_string(g.final_state.ids[i]), fmt(g.final_state.positions[i])});
  out.attachment = genealogy_to_json(g);
  out.summary = {{"lineages", g.final_state.size()}, {"nodes", g.nodes.size()}, {"events", g.events.size()}};
  return out;
}

// ------------------------------------------------------- pair agreement

struct PairAgreement {
  std::vector<double> prelimit_L, prelimit_R, limit_L, limit_R;
  KsResult ks_L{}, ks_R{};
};

// (L_T, R_T) of the prelimit pair started coalesced at 0 against the sticky
// reference pair with the derived diffusion constant.
inline PairAgreement pair_agreement(const ModelParams& params, double T, std::size_t reps,
                                    std::size_t reference_reps, unsigned workers, double dt = 1e-4) {
  params.validate();
  auto pre = parallel_replicates(reps, workers, [&](std::size_t r) {
    Rng rng = make_stream(params.seed, r, StreamTag::pair);
    const PairRun run = run_pair(0.0, 0.0, T, params, rng);
    return std::array<double, 2>{run.final_state.L, run.final_state.R};
  });
  const LimitConstants c = limit_constants(params);
  LRConfig cfg;
  cfg.zeta = c.zeta;
  cfg.xi2 = c.xi2_derived;
  cfg.dt = dt;
  auto ref = parallel_replicates(reference_reps, workers, [&](std::size_t r) {
    Rng rng = make_stream(params.seed, r, StreamTag::limit);
    const LRPaths lr = simulate_lr_pair(0.0, 0.0, T, cfg, rng);
    return std::array<double, 2>{lr.L.values.back(), lr.R.values.back()};
  });
  PairAgreement out;
  for (const auto& v : pre) {
    out.prelimit_L.push_back(v[0]);
    out.prelimit_R.push_back(v[1]);
  }
  for (const auto& v : ref) {
    out.limit_L.push_back(v[0]);
    out.limit_R.push_back(v[1]);
  }
  out.ks_L = ks_two_sample(out.prelimit_L, out.limit_L);
  out.ks_R = ks_two_sample(out.prelimit_R, out.limit_R);
  return out;
}

inline ResultTable run_experiment(const ExperimentSpec& spec) {
  if (spec.name == "pu-curve") return run_pu_curve(spec);
  if (spec.name == "drift-diffusion") return run_drift_diffusion(spec);
  if (spec.name == "duality") return run_duality(spec);
  if (spec.name == "samelaw") return run_samelaw(spec);
  if (spec.name == "nearby-scaling") return run_nearby_scaling(spec);
  if (spec.name == "meeting-time") return run_meeting_time(spec);
  if (spec.name == "net-diagnostics") return run_net_diagnostics(spec);
  if (spec.name == "metric-selftest") return run_metric_selftest(spec);
  if (spec.name == "simulate") return run_simulate(spec);
  throw ValidationError("unknown experiment '" + spec.name + "'");
}

}  // namespace slfv

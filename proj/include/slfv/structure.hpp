#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "slfv/cadlag_path.hpp"
#include "slfv/errors.hpp"

namespace slfv {

enum class CrossDirection : std::uint8_t { left_to_right, right_to_left };

struct Crossing {
  double time = 0.0;
  CrossDirection direction = CrossDirection::left_to_right;
};

namespace detail {

// Sorted breakpoints of several paths strictly inside (lo, hi).
inline std::vector<double> breakpoints(std::initializer_list<const CadlagPath*> paths, double lo, double hi) {
  std::vector<double> t;
  for (const CadlagPath* p : paths)
    for (const auto& j : p->jumps())
      if (j.time > lo && j.time < hi) t.push_back(j.time);
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

inline int sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace detail

// Crossings of a relative to b, judged on the open intervals between
// breakpoints: a sign change of a - b, possibly through intervals where the
// two agree, is a crossing at the start of the first interval with the new
// sign.
inline std::vector<Crossing> detect_crossing(const CadlagPath& a, const CadlagPath& b) {
  std::vector<Crossing> out;
  const double lo = std::max(a.sigma(), b.sigma());
  const double hi = std::min(a.end(), b.end());
  if (!(lo < hi)) return out;
  std::vector<double> cuts = detail::breakpoints({&a, &b}, lo, hi);
  cuts.insert(cuts.begin(), lo);
  int prev = 0;
  for (double t : cuts) {
    const int s = detail::sign(a.at(t) - b.at(t));
    if (s == 0) continue;
    if (prev != 0 && s != prev)
      out.push_back({t, prev < 0 ? CrossDirection::left_to_right : CrossDirection::right_to_left});
    prev = s;
  }
  return out;
}

// p up to time t, then q from t on.
inline CadlagPath hop(const CadlagPath& p, const CadlagPath& q, double t) {
  std::vector<Jump> j;
  for (const auto& x : p.jumps())
    if (x.time < t) j.push_back(x);
  CadlagPath h(p.sigma(), p.initial(), std::move(j), q.end());
  if (t > p.sigma()) h.append(t, q.at(t));
  for (const auto& x : q.jumps())
    if (x.time > t) h.append(x.time, x.value);
  return h;
}

inline std::vector<CadlagPath> hop_cross(std::span<const CadlagPath> paths, std::size_t budget = 4096) {
  std::vector<CadlagPath> all;
  std::set<CadlagPath> seen;
  for (const auto& p : paths)
    if (seen.insert(p).second) all.push_back(p);
  std::size_t done = 0;  // pairs (i, j) with both < done were already examined
  while (done < all.size()) {
    const std::size_t cur = all.size();
    for (std::size_t i = 0; i < cur; ++i) {
      for (std::size_t j = std::max(i + 1, done); j < cur; ++j) {
        for (const Crossing& c : detect_crossing(all[i], all[j])) {
          for (auto h : {hop(all[i], all[j], c.time), hop(all[j], all[i], c.time)}) {
            if (seen.insert(h).second) {
              all.push_back(std::move(h));
              if (all.size() > budget) throw ResourceError("hop_cross: path budget exceeded");
            }
          }
        }
      }
    }
    done = cur;
  }
  std::sort(all.begin(), all.end());
  return all;
}

// Region strictly between a backward right-most path rhat (west side) and a
// backward left-most path lhat (east side), both given in forward time, from
// their last meeting time `bottom` up to top = the earlier start.
struct Wedge {
  const CadlagPath* rhat = nullptr;
  const CadlagPath* lhat = nullptr;
  double top = 0.0;
  double bottom = 0.0;
  bool closed = false;  // false if the paths never met within their traced range
};

inline std::optional<Wedge> make_wedge(const CadlagPath& rhat, const CadlagPath& lhat) {
  const double s = std::min(rhat.end(), lhat.end());
  const double low = std::max(rhat.sigma(), lhat.sigma());
  if (!(low < s)) return std::nullopt;
  if (!(rhat.before(s) < lhat.before(s))) return std::nullopt;
  std::vector<double> cuts = detail::breakpoints({&rhat, &lhat}, low, s);
  cuts.insert(cuts.begin(), low);
  Wedge w{&rhat, &lhat, s, low, false};
  for (std::size_t k = cuts.size(); k-- > 0;) {
    if (rhat.at(cuts[k]) == lhat.at(cuts[k])) {
      w.bottom = k + 1 < cuts.size() ? cuts[k + 1] : s;
      w.closed = true;
      break;
    }
  }
  return w;
}

// True if `path` is strictly inside the wedge at some time after having been
// outside its closure.
inline bool enters_wedge(const CadlagPath& path, const Wedge& w) {
  const double lo = path.sigma();
  const double hi = std::min(path.end(), w.top);
  if (!(lo < hi)) return false;
  std::vector<double> cuts = detail::breakpoints({&path, w.rhat, w.lhat}, lo, hi);
  if (w.bottom > lo && w.bottom < hi) cuts.push_back(w.bottom);
  cuts.push_back(lo);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  bool outside = false;
  for (double t : cuts) {
    if (t < w.bottom) {
      if (w.closed) outside = true;
      continue;
    }
    const double v = path.at(t), r = w.rhat->at(t), l = w.lhat->at(t);
    if (v < r || v > l) outside = true;
    else if (r < v && v < l && outside) return true;
  }
  return false;
}

struct WedgeReport {
  std::size_t wedges = 0;
  std::size_t violations = 0;
};

inline WedgeReport wedge_diagnostic(std::span<const CadlagPath> forward, std::span<const CadlagPath> backward_left,
                                    std::span<const CadlagPath> backward_right) {
  WedgeReport rep;
  for (const auto& r : backward_right) {
    for (const auto& l : backward_left) {
      auto w = make_wedge(r, l);
      if (!w) continue;
      ++rep.wedges;
      for (const auto& f : forward)
        if (enters_wedge(f, *w)) ++rep.violations;
    }
  }
  return rep;
}

}  // namespace slfv

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "slfv/errors.hpp"

namespace slfv {

struct Jump {
  double time = 0.0;
  double value = 0.0;
  bool operator==(const Jump&) const = default;
};

// Right-continuous step path started at sigma with value v0, defined up to
// `end` (infinite unless the path was traced to a finite horizon). Values
// may be +-inf only for the two boundary paths.
class CadlagPath {
 public:
  static constexpr double inf = std::numeric_limits<double>::infinity();

  CadlagPath() = default;
  CadlagPath(double sigma, double v0, std::vector<Jump> jumps = {}, double end = inf)
      : sigma_(sigma), v0_(v0), end_(end), jumps_(std::move(jumps)) {
    if (std::isnan(sigma) || std::isnan(v0) || std::isnan(end)) throw ValidationError("path: NaN field");
    if (end < sigma) throw ValidationError("path: end before start");
    double prev = sigma;
    for (const auto& j : jumps_) {
      if (!(j.time > prev) || j.time > end) throw ValidationError("path: jump times must increase");
      if (std::isnan(j.value)) throw ValidationError("path: NaN jump value");
      prev = j.time;
    }
  }

  static CadlagPath boundary(bool plus, double sigma = -inf) { return CadlagPath(sigma, plus ? inf : -inf); }

  double sigma() const { return sigma_; }
  double initial() const { return v0_; }
  double end() const { return end_; }
  std::span<const Jump> jumps() const { return jumps_; }
  std::size_t jump_count() const { return jumps_.size(); }
  bool is_boundary() const { return std::isinf(v0_); }
  double final_value() const { return jumps_.empty() ? v0_ : jumps_.back().value; }

  // Value of the last jump at or before t. Undefined before sigma.
  double at(double t) const {
    if (t < sigma_) return std::numeric_limits<double>::quiet_NaN();
    auto it = std::upper_bound(jumps_.begin(), jumps_.end(), t,
                               [](double x, const Jump& j) { return x < j.time; });
    return it == jumps_.begin() ? v0_ : std::prev(it)->value;
  }

  // Left limit f(t-).
  double before(double t) const {
    if (t <= sigma_) return v0_;
    auto it = std::lower_bound(jumps_.begin(), jumps_.end(), t,
                               [](const Jump& j, double x) { return j.time < x; });
    return it == jumps_.begin() ? v0_ : std::prev(it)->value;
  }

  // Appends a jump; a jump to the current value is dropped.
  void append(double t, double v) {
    if (!(t > (jumps_.empty() ? sigma_ : jumps_.back().time)) || t > end_)
      throw ValidationError("path: appended jump out of order");
    if (v == final_value()) return;
    jumps_.push_back({t, v});
  }

  void set_end(double e) {
    if (e < sigma_ || (!jumps_.empty() && e < jumps_.back().time)) throw ValidationError("path: bad end");
    end_ = e;
  }

  bool operator==(const CadlagPath& o) const {
    return sigma_ == o.sigma_ && v0_ == o.v0_ && end_ == o.end_ && jumps_ == o.jumps_;
  }
  bool operator<(const CadlagPath& o) const {
    if (sigma_ != o.sigma_) return sigma_ < o.sigma_;
    if (v0_ != o.v0_) return v0_ < o.v0_;
    if (end_ != o.end_) return end_ < o.end_;
    return std::lexicographical_compare(jumps_.begin(), jumps_.end(), o.jumps_.begin(), o.jumps_.end(),
                                        [](const Jump& a, const Jump& b) {
                                          return a.time != b.time ? a.time < b.time : a.value < b.value;
                                        });
  }

 private:
  double sigma_ = 0.0;
  double v0_ = 0.0;
  double end_ = inf;
  std::vector<Jump> jumps_;
};

}  // namespace slfv

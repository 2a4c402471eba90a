#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "slfv/errors.hpp"

namespace slfv {

struct RadiusAtom {
  double weight = 1.0;
  double radius = 1.0;
};

// Finite discrete radius measure mu = sum_i w_i delta_{r_i} (unscaled radii).
class RadiusMeasure {
 public:
  RadiusMeasure() : atoms_{{1.0, 1.0}} {}

  explicit RadiusMeasure(std::vector<RadiusAtom> atoms) : atoms_(std::move(atoms)) {
    if (atoms_.empty()) throw ValidationError("radius measure needs at least one atom");
    for (const auto& a : atoms_) {
      if (!(a.radius > 0.0) || !std::isfinite(a.radius))
        throw ValidationError("radius must be positive and finite");
      if (!(a.weight > 0.0) || !std::isfinite(a.weight))
        throw ValidationError("atom weight must be positive and finite");
    }
  }

  static RadiusMeasure delta(double r, double weight = 1.0) { return RadiusMeasure({{weight, r}}); }

  std::span<const RadiusAtom> atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }

  double moment(int k) const {
    double m = 0.0;
    for (const auto& a : atoms_) m += a.weight * std::pow(a.radius, k);
    return m;
  }
  double total_mass() const { return moment(0); }
  double max_radius() const {
    double r = 0.0;
    for (const auto& a : atoms_) r = std::max(r, a.radius);
    return r;
  }

  RadiusMeasure with_weights_scaled(double c) const {
    auto atoms = atoms_;
    for (auto& a : atoms) a.weight *= c;
    return RadiusMeasure(std::move(atoms));
  }

  bool operator==(const RadiusMeasure& o) const {
    if (atoms_.size() != o.atoms_.size()) return false;
    for (std::size_t i = 0; i < atoms_.size(); ++i)
      if (atoms_[i].weight != o.atoms_[i].weight || atoms_[i].radius != o.atoms_[i].radius) return false;
    return true;
  }

 private:
  std::vector<RadiusAtom> atoms_;
};

struct ModelParams {
  std::int64_t n = 1;
  double alpha = 0.0;
  double upsilon = 1.0;
  RadiusMeasure mu;
  std::uint64_t seed = 1;

  double sqrt_n() const { return std::sqrt(static_cast<double>(n)); }
  double rescaled_radius(double r) const { return r / sqrt_n(); }
  double max_rescaled_radius() const { return rescaled_radius(mu.max_radius()); }

  void validate() const {
    if (n < 1) throw ValidationError("n must be a positive integer");
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ValidationError("alpha must be nonnegative");
    if (!(upsilon > 0.0 && upsilon <= 1.0)) throw ValidationError("upsilon must lie in (0,1]");
    const double s = alpha / sqrt_n();
    if (s > 1.0) throw ValidationError("alpha/sqrt(n) must not exceed 1");
  }
};

struct LimitConstants {
  double zeta = 0.0;
  double xi2_four_ninths = 0.0;
  double xi2_derived = 0.0;
};

inline double selection_probability(const ModelParams& p) {
  p.validate();
  return p.alpha / p.sqrt_n();
}

// Rate (rescaled time) at which events of either kind cover a fixed point.
inline double per_point_event_rate(const ModelParams& p) {
  p.validate();
  return 2.0 * static_cast<double>(p.n) * p.mu.moment(1);
}

// Drift zeta and the two candidate diffusion constants, (4/9) m3 and
// (4/3) m3. xi2_derived is what the jump law Z - U with
// Z, U ~ U[0, 2r] gives (variance 2r^2/3 at rate 2r).
inline LimitConstants limit_constants(const ModelParams& p) {
  p.validate();
  const double m2 = p.mu.moment(2), m3 = p.mu.moment(3);
  return {2.0 / 3.0 * p.alpha * m2, 4.0 / 9.0 * m3, 4.0 / 3.0 * m3};
}

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

inline double parse_double(std::string_view s, std::string_view what) {
  std::string t = trim(s);
  try {
    std::size_t used = 0;
    double v = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ValidationError("cannot parse " + std::string(what) + ": '" + t + "'");
  }
}

inline std::int64_t parse_int(std::string_view s, std::string_view what) {
  std::string t = trim(s);
  try {
    std::size_t used = 0;
    long long v = std::stoll(t, &used);
    if (used != t.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ValidationError("cannot parse " + std::string(what) + ": '" + t + "'");
  }
}

inline std::uint64_t parse_uint(std::string_view s, std::string_view what) {
  std::string t = trim(s);
  try {
    if (!t.empty() && t[0] == '-') throw std::invalid_argument("negative");
    std::size_t used = 0;
    unsigned long long v = std::stoull(t, &used);
    if (used != t.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ValidationError("cannot parse " + std::string(what) + ": '" + t + "'");
  }
}

}  // namespace detail

// "delta:1.0" or "atoms:(0.5,1.0),(0.5,2.0)" with (weight,radius) pairs.
inline RadiusMeasure parse_radius_measure(std::string_view text) {
  const std::string s = detail::trim(text);
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ValidationError("mu: expected 'delta:r' or 'atoms:(w,r),...'");
  const std::string kind = detail::trim(std::string_view(s).substr(0, colon));
  const std::string body = detail::trim(std::string_view(s).substr(colon + 1));
  if (kind == "delta") return RadiusMeasure::delta(detail::parse_double(body, "mu radius"));
  if (kind != "atoms") throw ValidationError("mu: unknown kind '" + kind + "'");

  std::vector<RadiusAtom> atoms;
  std::size_t pos = 0;
  while (pos < body.size()) {
    while (pos < body.size() && (std::isspace(static_cast<unsigned char>(body[pos])) || body[pos] == ','))
      ++pos;
    if (pos >= body.size()) break;
    if (body[pos] != '(') throw ValidationError("mu: expected '(' in atom list");
    const auto close = body.find(')', pos);
    if (close == std::string::npos) throw ValidationError("mu: unbalanced parenthesis");
    const std::string pair = body.substr(pos + 1, close - pos - 1);
    const auto comma = pair.find(',');
    if (comma == std::string::npos) throw ValidationError("mu: atom needs (weight,radius)");
    atoms.push_back({detail::parse_double(pair.substr(0, comma), "mu weight"),
                     detail::parse_double(pair.substr(comma + 1), "mu radius")});
    pos = close + 1;
  }
  return RadiusMeasure(std::move(atoms));
}

inline std::string format_radius_measure(const RadiusMeasure& mu) {
  std::ostringstream os;
  os.precision(17);
  if (mu.size() == 1 && mu.atoms()[0].weight == 1.0) {
    os << "delta:" << mu.atoms()[0].radius;
    return os.str();
  }
  os << "atoms:";
  bool first = true;
  for (const auto& a : mu.atoms()) {
    if (!first) os << ',';
    first = false;
    os << '(' << a.weight << ',' << a.radius << ')';
  }
  return os.str();
}

using ConfigMap = std::map<std::string, std::string>;

// key = value lines; '#' starts a comment.
inline ConfigMap parse_config(std::istream& in) {
  ConfigMap out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw ValidationError("config line " + std::to_string(lineno) + ": empty key");
    out[key] = detail::trim(std::string_view(t).substr(eq + 1));
  }
  return out;
}

// Applies the model keys of a config map on top of `base`; other keys are
// left for the caller.
inline ModelParams apply_config(const ConfigMap& cfg, ModelParams base) {
  for (const auto& [k, v] : cfg) {
    if (k == "n") base.n = detail::parse_int(v, "n");
    else if (k == "alpha") base.alpha = detail::parse_double(v, "alpha");
    else if (k == "upsilon") base.upsilon = detail::parse_double(v, "upsilon");
    else if (k == "mu") base.mu = parse_radius_measure(v);
    else if (k == "seed") base.seed = detail::parse_uint(v, "seed");
  }
  base.validate();
  return base;
}

}  // namespace slfv

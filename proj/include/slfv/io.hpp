#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"

#include "slfv/cadlag_path.hpp"
#include "slfv/dual_sim.hpp"
#include "slfv/event_engine.hpp"

namespace slfv {

using json = nlohmann::json;

// Shortest round-trip decimal form; identical input gives identical text.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

// JSON has no infinities; +-inf become the strings "inf" / "-inf".
inline json number_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double number_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return CadlagPath::inf;
    if (s == "-inf") return -CadlagPath::inf;
    throw ValidationError("expected a number, got '" + s + "'");
  }
  return j.get<double>();
}

inline json path_to_json(const CadlagPath& p) {
  json jumps = json::array();
  for (const auto& j : p.jumps()) jumps.push_back({j.time, number_json(j.value)});
  return {{"sigma", number_json(p.sigma())}, {"v0", number_json(p.initial())}, {"jumps", jumps}};
}

inline CadlagPath path_from_json(const json& j) {
  std::vector<Jump> jumps;
  for (const auto& x : j.at("jumps")) jumps.push_back({x.at(0).get<double>(), number_from_json(x.at(1))});
  return CadlagPath(number_from_json(j.at("sigma")), number_from_json(j.at("v0")), std::move(jumps));
}

inline json event_to_json(const ReproductionEvent& e) {
  json j = {{"id", e.id}, {"t", e.time}, {"x", e.center}, {"rho", e.radius}, {"kind", to_string(e.kind)}, {"z1", e.z1}};
  j["z2"] = e.selective() ? json(e.z2) : json(nullptr);
  return j;
}

inline json genealogy_to_json(const GenealogyGraph& g) {
  json nodes = json::array(), edges = json::array(), events = json::array(), alive = json::array();
  for (const auto& n : g.nodes) nodes.push_back({{"id", n.id}, {"position", n.position}, {"birth_time", n.birth_time}});
  for (const auto& e : g.edges)
    edges.push_back({{"child", e.child}, {"parent", e.parent}, {"event", e.event_id}, {"role", to_string(e.role)}});
  for (const auto& e : g.events) events.push_back(event_to_json(e));
  for (std::size_t i = 0; i < g.final_state.size(); ++i)
    alive.push_back({{"id", g.final_state.ids[i]}, {"position", g.final_state.positions[i]}});
  return {{"horizon", g.horizon}, {"nodes", nodes}, {"edges", edges}, {"events", events}, {"alive", alive}};
}

}  // namespace slfv

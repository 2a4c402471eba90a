#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "slfv/experiments.hpp"

#ifndef SLFV_BUILD_ID
#define SLFV_BUILD_ID "unknown"
#endif

namespace {

using namespace slfv;
namespace fs = std::filesystem;

enum Exit : int { ok = 0, validation = 2, budget = 3, structural = 4 };

struct Flags {
  std::string config;
  std::optional<std::int64_t> n;
  std::optional<double> alpha, upsilon, horizon;
  std::optional<std::string> mu;
  std::optional<std::size_t> reps;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::string out = ".";
  // experiment-specific
  std::optional<std::string> upsilons, starts, ns;
  std::optional<double> gap, max_time;
  std::optional<std::size_t> target_jumps, battery_reps;
  bool battery = false;
};

// Defaults follow the experiment's reference setting.
ExperimentSpec defaults_for(const std::string& name) {
  ExperimentSpec s;
  s.name = name;
  s.params.n = 1000;
  s.params.alpha = 1.0;
  s.params.upsilon = 1.0;
  s.params.seed = 1;
  if (name == "pu-curve") s.replicates = 200;
  else if (name == "drift-diffusion") s.replicates = 10000;
  else if (name == "duality") {
    s.params.n = 100;
    s.horizon = 0.25;
    s.replicates = 10000;
  } else if (name == "samelaw") s.replicates = 1;
  else if (name == "nearby-scaling") s.replicates = 10000;
  else if (name == "meeting-time") s.replicates = 5000;
  else if (name == "net-diagnostics") {
    s.params.n = 100;
    s.replicates = 1000;
  } else if (name == "metric-selftest") {
    s.params.n = 10000;
    s.replicates = 1000;
  } else if (name == "simulate") {
    s.params.n = 100;
    s.replicates = 1;
  }
  return s;
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = detail::trim(item);
    if (t.empty()) continue;
    if constexpr (std::is_integral_v<T>) out.push_back(static_cast<T>(detail::parse_int(t, what)));
    else out.push_back(detail::parse_double(t, what));
  }
  if (out.empty()) throw ValidationError(std::string(what) + ": empty list");
  return out;
}

void apply_harness_keys(const ConfigMap& cfg, ExperimentSpec& s) {
  for (const auto& [k, v] : cfg) {
    if (k == "reps") s.replicates = detail::parse_uint(v, "reps");
    else if (k == "horizon") s.horizon = detail::parse_double(v, "horizon");
    else if (k == "workers") s.workers = static_cast<unsigned>(detail::parse_uint(v, "workers"));
    else if (k == "upsilons") s.upsilons = parse_list<double>(v, "upsilons");
    else if (k == "starts") s.starts = parse_list<double>(v, "starts");
    else if (k == "ns") s.ns = parse_list<std::int64_t>(v, "ns");
    else if (k == "gap") s.gap = detail::parse_double(v, "gap");
    else if (k == "max_time") s.max_time = detail::parse_double(v, "max_time");
    else if (k == "target_jumps") s.target_jumps = detail::parse_uint(v, "target_jumps");
    else if (k == "battery") s.battery = v == "1" || v == "true";
    else if (k == "battery_reps") s.battery_replicates = detail::parse_uint(v, "battery_reps");
    else if (k != "n" && k != "alpha" && k != "upsilon" && k != "mu" && k != "seed")
      throw ValidationError("config: unknown key '" + k + "'");
  }
}

ExperimentSpec build_spec(const std::string& name, const Flags& f) {
  ExperimentSpec s = defaults_for(name);
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw ValidationError("cannot open config '" + f.config + "'");
    const ConfigMap cfg = parse_config(in);
    s.params = apply_config(cfg, s.params);
    apply_harness_keys(cfg, s);
  }
  if (f.n) s.params.n = *f.n;
  if (f.alpha) s.params.alpha = *f.alpha;
  if (f.upsilon) s.params.upsilon = *f.upsilon;
  if (f.mu) s.params.mu = parse_radius_measure(*f.mu);
  if (f.seed) s.params.seed = *f.seed;
  if (f.reps) s.replicates = *f.reps;
  if (f.horizon) s.horizon = *f.horizon;
  if (f.workers) s.workers = *f.workers;
  if (f.upsilons) s.upsilons = parse_list<double>(*f.upsilons, "upsilons");
  if (f.starts) s.starts = parse_list<double>(*f.starts, "starts");
  if (f.ns) s.ns = parse_list<std::int64_t>(*f.ns, "ns");
  if (f.gap) s.gap = *f.gap;
  if (f.max_time) s.max_time = *f.max_time;
  if (f.target_jumps) s.target_jumps = *f.target_jumps;
  if (f.battery_reps) s.battery_replicates = *f.battery_reps;
  if (f.battery) s.battery = true;
  if (s.workers == 0) throw ValidationError("workers must be at least 1");
  s.validate();
  return s;
}

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
  os << body;
}

std::string file_stem(const std::string& name) {
  std::string s = name;
  for (char& c : s)
    if (c == '-') c = '_';
  return s;
}

int run(const std::string& name, const Flags& f) {
  const ExperimentSpec spec = build_spec(name, f);
  const auto t0 = std::chrono::steady_clock::now();
  const ResultTable r = run_experiment(spec);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path out(f.out);
  fs::create_directories(out);
  const std::string stem = file_stem(name);
  std::ostringstream csv;
  r.main.write_csv(csv);
  write_file(out / (stem + ".csv"), csv.str());
  for (const auto& [suffix, table] : r.extra) {
    std::ostringstream os;
    table.write_csv(os);
    write_file(out / (stem + "_" + suffix + ".csv"), os.str());
  }
  if (!r.attachment.is_null()) write_file(out / "genealogy.json", r.attachment.dump(1) + "\n");

  json spec_j = {{"replicates", spec.replicates}, {"horizon", spec.horizon}};
  if (name == "pu-curve") spec_j["upsilons"] = spec.upsilons.empty() ? default_upsilon_sweep() : spec.upsilons;
  if (name == "nearby-scaling") spec_j["ns"] = spec.ns;
  if (name == "meeting-time" || name == "net-diagnostics") {
    spec_j["gap"] = spec.gap;
    spec_j["max_time"] = spec.max_time;
  }
  if (name == "samelaw") spec_j["target_jumps"] = spec.target_jumps;
  if (name == "simulate") spec_j["starts"] = spec.starts;
  json doc = {{"experiment", name},
              {"params", params_json(spec.params)},
              {"constants", constants_json(spec.params)},
              {"run", spec_j},
              {"summary", r.summary},
              {"structural_failure", r.structural_failure},
              {"provenance",
               {{"seed", spec.params.seed},
                {"alpha", spec.params.alpha},
                {"build_id", SLFV_BUILD_ID},
                {"workers", spec.workers},
                {"wall_seconds", wall}}}};
  write_file(out / (stem + "_summary.json"), doc.dump(2) + "\n");
  std::cout << r.summary.dump() << "\n";
  if (r.structural_failure) return Exit::structural;
  if (r.budget_failure) return Exit::budget;
  return Exit::ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rescaled spatial Lambda-Fleming-Viot lineage experiments"};
  app.require_subcommand(1);
  Flags f;
  std::string chosen;
  for (const auto& name : experiment_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", f.config, "key = value config file");
    sub->add_option("--n", f.n, "scaling stage n");
    sub->add_option("--alpha", f.alpha, "selection strength alpha");
    sub->add_option("--upsilon", f.upsilon, "impact upsilon in (0, 1]");
    sub->add_option("--mu", f.mu, "radius measure, e.g. delta:1 or atoms:(0.5,1),(0.5,2)");
    sub->add_option("--reps", f.reps, "replicates");
    sub->add_option("--horizon", f.horizon, "time horizon T");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--workers", f.workers, "worker threads");
    sub->add_option("--out", f.out, "output directory");
    if (name == "pu-curve") sub->add_option("--upsilons", f.upsilons, "comma-separated sweep");
    if (name == "simulate") sub->add_option("--starts", f.starts, "comma-separated start points");
    if (name == "nearby-scaling") sub->add_option("--ns", f.ns, "comma-separated n values");
    if (name == "meeting-time" || name == "net-diagnostics") {
      sub->add_option("--gap", f.gap, "initial gap");
      sub->add_option("--max-time", f.max_time, "censoring time");
    }
    if (name == "samelaw") sub->add_option("--target-jumps", f.target_jumps, "jumps per class");
    if (name == "duality") {
      sub->add_flag("--battery", f.battery, "also run the 20-case battery");
      sub->add_option("--battery-reps", f.battery_reps, "replicates per battery case");
    }
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : Exit::validation;
  }
  try {
    return run(chosen, f);
  } catch (const ResourceError& e) {
    std::cerr << "budget: " << e.what() << "\n";
    return Exit::budget;
  } catch (const ValidationError& e) {
    std::cerr << "invalid: " << e.what() << "\n";
    return Exit::validation;
  } catch (const WindowError& e) {
    std::cerr << "window: " << e.what() << "\n";
    return Exit::budget;
  }
}

#include "stochvsl/config.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <set>
#include <sstream>
#include <yaml-cpp/yaml.h>

namespace stochvsl {

void HorizonConfig::validate() const {
  if (project_steps < 1 || rolling_steps < 1 || rolling_steps > project_steps) {
    throw InvalidParameter(fmt::format("horizon needs 1 <= rolling ({}) <= project ({}) steps",
                                       rolling_steps, project_steps));
  }
  if (!(T > 0.0)) throw InvalidParameter("time step must be positive");
  if (horizons < 1) throw InvalidParameter("need at least one horizon");
}

void ExperimentConfig::validate() const {
  horizon.validate();
  demand.validate();
  weights.validate();
  if (seeds < 1) throw InvalidParameter("need at least one seed");
  for (double p : sweep_p) {
    if (!(p >= 0.0 && p <= 0.5)) throw InvalidParameter(fmt::format("sweep p = {} outside [0, 0.5]", p));
  }
  if (sweep_levels.size() != 3) throw InvalidParameter("sweep needs three demand levels");
  if (std::find(speed_limits.begin(), speed_limits.end(), vf) == speed_limits.end() &&
      std::any_of(mainline.begin(), mainline.end(), [](const MainlineLink& l) { return l.vsl; })) {
    throw InvalidParameter("nominal free-flow speed must be one of the speed limits");
  }
  require_valid(build_corridor(*this));
}

ExperimentConfig case_study_config() {
  ExperimentConfig c;
  c.mainline = {{"L1", 1200, 2, false}, {"L2", 1200, 2, false}, {"L3", 1200, 2, true}, {"L4", 1200, 2, false}};
  c.ramps = {OnRamp{}};
  c.capacity_drop = {"L4", 1.4, 0.0};
  c.demand = {{1.0, 1.5, 2.0}, {0.4, 0.2, 0.4}};
  return c;
}

ExperimentConfig preset_config(const std::string& name) {
  if (name == "case_study") return case_study_config();
  throw InvalidParameter(fmt::format("unknown preset '{}'", name));
}

Corridor build_corridor(const ExperimentConfig& cfg) {
  if (cfg.mainline.empty()) throw InvalidParameter("corridor has no mainline links");
  Corridor c;
  const auto nominal = TriangularFD::make(cfg.vf, cfg.w, cfg.rho_m);
  double xi = 0.0;
  for (const auto& m : cfg.mainline) {
    if (m.segments < 1 || !(m.length > 0.0)) {
      throw InvalidParameter(fmt::format("link '{}' needs a positive length and segment count", m.id));
    }
    LinkSpec l;
    l.id = m.id;
    l.geometry = LinkGeometry::make(xi, m.length / m.segments, m.segments, cfg.lanes);
    l.is_vsl = m.vsl;
    if (m.vsl) {
      l.vsl = VslSets::make(cfg.speed_limits, cfg.w, cfg.rho_m);
      const double fastest = *std::max_element(cfg.speed_limits.begin(), cfg.speed_limits.end());
      l.fd = TriangularFD::make(fastest, cfg.w, cfg.rho_m);
    } else {
      l.fd = nominal;
    }
    xi += m.length;
    c.links.push_back(std::move(l));
  }
  c.entries.push_back({cfg.entry, true, 0.0});
  c.junctions.push_back({"J0", {cfg.entry}, {cfg.mainline.front().id}, JunctionKind::serial});
  for (std::size_t i = 1; i < cfg.mainline.size(); ++i) {
    const auto& down = cfg.mainline[i].id;
    Junction j{fmt::format("J{}", i), {cfg.mainline[i - 1].id}, {down}, JunctionKind::serial};
    for (const auto& r : cfg.ramps) {
      if (r.joins != down) continue;
      if (j.kind == JunctionKind::merge) throw InvalidParameter(fmt::format("two ramps join '{}'", down));
      j.kind = JunctionKind::merge;
      j.incoming.push_back(r.id);
      c.entries.push_back({r.id, false, r.demand});
    }
    c.junctions.push_back(std::move(j));
  }
  for (const auto& r : cfg.ramps) {
    if (!c.is_entry(r.id)) throw InvalidParameter(fmt::format("ramp '{}' joins no interior link", r.id));
  }
  c.exit_links.push_back(cfg.mainline.back().id);
  if (!cfg.capacity_drop.link.empty()) c.exit_capacity.push_back(cfg.capacity_drop);
  return c;
}

namespace {

template <class T>
T get_or(const YAML::Node& n, const char* key, T fallback) {
  return n[key] ? n[key].as<T>() : fallback;
}

ExperimentConfig from_yaml(const YAML::Node& root) {
  ExperimentConfig c = root["preset"] ? preset_config(root["preset"].as<std::string>())
                                      : case_study_config();
  if (auto fd = root["fundamental_diagram"]) {
    c.vf = get_or(fd, "free_flow_speed", c.vf);
    c.w = get_or(fd, "congestion_wave_speed", c.w);
    c.rho_m = get_or(fd, "jam_density", c.rho_m);
    c.lanes = get_or(fd, "lanes", c.lanes);
  }
  if (root["speed_limits"]) c.speed_limits = root["speed_limits"].as<std::vector<double>>();
  if (auto cor = root["corridor"]) {
    c.entry = get_or<std::string>(cor, "entry", c.entry);
    if (auto ml = cor["mainline"]) {
      c.mainline.clear();
      for (const auto& l : ml) {
        c.mainline.push_back({l["id"].as<std::string>(), get_or(l, "length", 1200.0),
                              get_or(l, "segments", 2), get_or(l, "vsl", false)});
      }
    }
    if (auto rs = cor["ramps"]) {
      c.ramps.clear();
      for (const auto& r : rs) {
        c.ramps.push_back({r["id"].as<std::string>(), r["joins"].as<std::string>(),
                           get_or(r, "demand", 0.0)});
      }
    }
    if (auto cd = cor["capacity_drop"]) {
      c.capacity_drop = {get_or<std::string>(cd, "link", ""), get_or(cd, "supply", kInf),
                         get_or(cd, "start", 0.0)};
    }
  }
  if (auto d = root["demand"]) {
    c.demand.levels = d["levels"].as<std::vector<double>>();
    c.demand.probabilities = d["probabilities"].as<std::vector<double>>();
  }
  if (auto w = root["weights"]) {
    c.weights.w0 = get_or(w, "w0", c.weights.w0);
    c.weights.w1 = get_or(w, "w1", c.weights.w1);
    c.weights.w2 = get_or(w, "w2", c.weights.w2);
    c.weights.w3 = get_or(w, "w3", c.weights.w3);
    c.weights.w4 = get_or(w, "w4", c.weights.w4);
  }
  if (auto h = root["horizon"]) {
    c.horizon.project_steps = get_or(h, "project_steps", c.horizon.project_steps);
    c.horizon.rolling_steps = get_or(h, "rolling_steps", c.horizon.rolling_steps);
    c.horizon.T = get_or(h, "step", c.horizon.T);
    c.horizon.horizons = get_or(h, "horizons", c.horizon.horizons);
  }
  if (auto e = root["experiment"]) {
    c.seeds = get_or(e, "seeds", c.seeds);
    c.first_seed = get_or<std::uint64_t>(e, "first_seed", c.first_seed);
    if (e["sweep_p"]) c.sweep_p = e["sweep_p"].as<std::vector<double>>();
    if (e["sweep_levels"]) c.sweep_levels = e["sweep_levels"].as<std::vector<double>>();
  }
  if (auto s = root["solver"]) {
    c.solver.relative_gap = get_or(s, "relative_gap", c.solver.relative_gap);
    c.solver.time_limit = get_or(s, "time_limit", c.solver.time_limit);
    c.solver.node_limit = get_or<long>(s, "node_limit", c.solver.node_limit);
    c.solver.feasibility_tol = get_or(s, "feasibility_tol", c.solver.feasibility_tol);
    c.solver.integrality_tol = get_or(s, "integrality_tol", c.solver.integrality_tol);
  }
  c.validate();
  return c;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  try {
    return from_yaml(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw InvalidParameter(fmt::format("config: {}", e.what()));
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidParameter(fmt::format("cannot read config '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(12);
  out << YAML::BeginMap;
  out << YAML::Key << "fundamental_diagram" << YAML::Value << YAML::BeginMap
      << YAML::Key << "free_flow_speed" << YAML::Value << c.vf
      << YAML::Key << "congestion_wave_speed" << YAML::Value << c.w
      << YAML::Key << "jam_density" << YAML::Value << c.rho_m
      << YAML::Key << "lanes" << YAML::Value << c.lanes << YAML::EndMap;
  out << YAML::Key << "speed_limits" << YAML::Value << YAML::Flow << c.speed_limits;
  out << YAML::Key << "corridor" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "entry" << YAML::Value << c.entry;
  out << YAML::Key << "mainline" << YAML::Value << YAML::BeginSeq;
  for (const auto& l : c.mainline) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "id" << YAML::Value << l.id
        << YAML::Key << "length" << YAML::Value << l.length
        << YAML::Key << "segments" << YAML::Value << l.segments
        << YAML::Key << "vsl" << YAML::Value << l.vsl << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "ramps" << YAML::Value << YAML::BeginSeq;
  for (const auto& r : c.ramps) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "id" << YAML::Value << r.id
        << YAML::Key << "joins" << YAML::Value << r.joins
        << YAML::Key << "demand" << YAML::Value << r.demand << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "capacity_drop" << YAML::Value << YAML::BeginMap
      << YAML::Key << "link" << YAML::Value << c.capacity_drop.link
      << YAML::Key << "supply" << YAML::Value << c.capacity_drop.supply
      << YAML::Key << "start" << YAML::Value << c.capacity_drop.start << YAML::EndMap;
  out << YAML::EndMap;
  out << YAML::Key << "demand" << YAML::Value << YAML::BeginMap
      << YAML::Key << "levels" << YAML::Value << YAML::Flow << c.demand.levels
      << YAML::Key << "probabilities" << YAML::Value << YAML::Flow << c.demand.probabilities
      << YAML::EndMap;
  out << YAML::Key << "weights" << YAML::Value << YAML::BeginMap
      << YAML::Key << "w0" << YAML::Value << c.weights.w0
      << YAML::Key << "w1" << YAML::Value << c.weights.w1
      << YAML::Key << "w2" << YAML::Value << c.weights.w2
      << YAML::Key << "w3" << YAML::Value << c.weights.w3
      << YAML::Key << "w4" << YAML::Value << c.weights.w4 << YAML::EndMap;
  out << YAML::Key << "horizon" << YAML::Value << YAML::BeginMap
      << YAML::Key << "project_steps" << YAML::Value << c.horizon.project_steps
      << YAML::Key << "rolling_steps" << YAML::Value << c.horizon.rolling_steps
      << YAML::Key << "step" << YAML::Value << c.horizon.T
      << YAML::Key << "horizons" << YAML::Value << c.horizon.horizons << YAML::EndMap;
  out << YAML::Key << "experiment" << YAML::Value << YAML::BeginMap
      << YAML::Key << "seeds" << YAML::Value << c.seeds
      << YAML::Key << "first_seed" << YAML::Value << c.first_seed
      << YAML::Key << "sweep_p" << YAML::Value << YAML::Flow << c.sweep_p
      << YAML::Key << "sweep_levels" << YAML::Value << YAML::Flow << c.sweep_levels << YAML::EndMap;
  out << YAML::Key << "solver" << YAML::Value << YAML::BeginMap
      << YAML::Key << "relative_gap" << YAML::Value << c.solver.relative_gap
      << YAML::Key << "time_limit" << YAML::Value << c.solver.time_limit
      << YAML::Key << "node_limit" << YAML::Value << c.solver.node_limit
      << YAML::Key << "feasibility_tol" << YAML::Value << c.solver.feasibility_tol
      << YAML::Key << "integrality_tol" << YAML::Value << c.solver.integrality_tol << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace stochvsl

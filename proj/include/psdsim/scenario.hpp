#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "psdsim/config.hpp"
#include "psdsim/drift.hpp"
#include "psdsim/errors.hpp"
#include "psdsim/strategy.hpp"
#include "psdsim/time.hpp"
#include "psdsim/topology.hpp"

namespace psdsim {

using json = nlohmann::ordered_json;

// A scenario document: topology + strategy + simulation config + optional
// memory section. Time quantities are {"value": N, "unit": "ps|ns|us|ms|s"};
// lengths are plain numbers in meters.
struct ScenarioDocument {
  std::string name;
  NetworkTopology topology;
  std::vector<DriftModel> drift_models;
  StrategyKind strategy = StrategyKind::QuantumPathAdjustAtBsa;
  std::optional<ConstraintMode> constraint_mode;  // overrides the strategy default
  SimulationConfig simulation;
  std::optional<MemoryConfig> memory;
  std::vector<std::string> warnings;  // lenient-mode unknown keys

  ConstraintMode effective_mode() const {
    if (constraint_mode) return *constraint_mode;
    return strategy == StrategyKind::FrequencySyncQuantumAdjust ? ConstraintMode::ModuloPeriod
                                                                : ConstraintMode::Exact;
  }

  StrategyCapability capability() const {
    StrategyCapability caps = capability_of(strategy, topology, simulation.rep_period);
    if (constraint_mode) caps.mode = *constraint_mode;
    return caps;
  }
};

namespace detail {

struct KeyChecker {
  const json& obj;
  std::string where;
  std::set<std::string> allowed;
  bool strict;
  std::vector<std::string>* warnings;

  void finish() const {
    if (!obj.is_object()) return;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (allowed.count(it.key())) continue;
      const std::string msg = "unknown key '" + it.key() + "' in " + where;
      if (strict) throw ValidationError(msg);
      if (warnings) warnings->push_back(msg);
    }
  }
};

inline ps_t parse_time(const json& j, const std::string& where) {
  if (j.is_object()) {
    if (!j.contains("value") || !j.contains("unit"))
      throw ParseError(where + ": time quantity needs {value, unit}");
    if (!j["value"].is_number()) throw ParseError(where + ": time value must be a number");
    if (!j["unit"].is_string()) throw ParseError(where + ": time unit must be a string");
    try {
      return ps_from_value_unit(j["value"].get<double>(), j["unit"].get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  throw ParseError(where + ": expected a {value, unit} time quantity");
}

inline json time_json(ps_t ps) {
  json j;
  if (ps % ps_per_us == 0 && ps != 0) {
    j["value"] = ps / ps_per_us;
    j["unit"] = "us";
  } else if (ps % ps_per_ns == 0 && ps != 0) {
    j["value"] = ps / ps_per_ns;
    j["unit"] = "ns";
  } else {
    j["value"] = ps;
    j["unit"] = "ps";
  }
  return j;
}

inline double require_number(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ParseError(where + ": missing '" + key + "'");
  if (!j[key].is_number()) throw ParseError(where + ": '" + key + "' must be a number");
  return j[key].get<double>();
}

inline std::string require_string(const json& j, const std::string& key,
                                  const std::string& where) {
  if (!j.contains(key)) throw ParseError(where + ": missing '" + key + "'");
  if (!j[key].is_string()) throw ParseError(where + ": '" + key + "' must be a string");
  return j[key].get<std::string>();
}

}  // namespace detail

inline ScenarioDocument parse_scenario(const json& root, bool strict = true) {
  if (!root.is_object()) throw ParseError("scenario root must be an object");
  ScenarioDocument doc;

  detail::KeyChecker top{root,
                         "scenario",
                         {"name", "description", "nodes", "links", "drift_models", "strategy",
                          "constraint_mode", "simulation", "memory", "output"},
                         strict,
                         &doc.warnings};

  doc.name = root.value("name", "");

  if (!root.contains("nodes") || !root["nodes"].is_array())
    throw ParseError("scenario needs a 'nodes' array");
  for (const auto& jn : root["nodes"]) {
    const std::string where = "node " + jn.value("id", "?");
    detail::KeyChecker kc{jn,
                          where,
                          {"id", "kind", "rep_period", "emission_offset", "coincidence_window",
                           "odl_bounds", "odl_settings", "coherence_time", "capture_efficiency",
                           "release_efficiency"},
                          strict,
                          &doc.warnings};
    NodeSpec n;
    n.id = detail::require_string(jn, "id", where);
    const std::string kind = detail::require_string(jn, "kind", where);
    if (kind == "source") n.kind = NodeKind::Source;
    else if (kind == "bsa") n.kind = NodeKind::BsaSupport;
    else if (kind == "memory") n.kind = NodeKind::Memory;
    else if (kind == "detector") n.kind = NodeKind::EndDetector;
    else throw ParseError(where + ": unknown kind '" + kind + "'");

    if (jn.contains("rep_period")) n.rep_period = detail::parse_time(jn["rep_period"], where);
    if (jn.contains("emission_offset"))
      n.emission_offset = detail::parse_time(jn["emission_offset"], where);
    if (jn.contains("coincidence_window"))
      n.coincidence_window = detail::parse_time(jn["coincidence_window"], where);
    if (jn.contains("odl_bounds")) {
      const auto& ob = jn["odl_bounds"];
      if (!ob.is_array() || ob.size() != 2)
        throw ParseError(where + ": odl_bounds must be an array of two {lo, hi}");
      for (int p = 0; p < 2; ++p) {
        const auto& jb = ob[static_cast<std::size_t>(p)];
        if (!jb.contains("lo") || !jb.contains("hi"))
          throw ParseError(where + ": odl_bounds entries need lo and hi");
        n.odl[static_cast<std::size_t>(p)].lo = detail::parse_time(jb["lo"], where);
        n.odl[static_cast<std::size_t>(p)].hi = detail::parse_time(jb["hi"], where);
        n.odl[static_cast<std::size_t>(p)].setting = n.odl[static_cast<std::size_t>(p)].lo;
      }
    }
    if (jn.contains("odl_settings")) {
      const auto& os = jn["odl_settings"];
      if (!os.is_array() || os.size() != 2)
        throw ParseError(where + ": odl_settings must be an array of two time quantities");
      for (int p = 0; p < 2; ++p)
        n.odl[static_cast<std::size_t>(p)].setting =
            detail::parse_time(os[static_cast<std::size_t>(p)], where);
    }
    if (jn.contains("coherence_time")) {
      if (jn["coherence_time"].is_string() && jn["coherence_time"].get<std::string>() == "inf")
        n.coherence_time.reset();
      else
        n.coherence_time = detail::parse_time(jn["coherence_time"], where);
    }
    if (jn.contains("capture_efficiency"))
      n.capture_efficiency = detail::require_number(jn, "capture_efficiency", where);
    if (jn.contains("release_efficiency"))
      n.release_efficiency = detail::require_number(jn, "release_efficiency", where);
    kc.finish();
    doc.topology.nodes.push_back(std::move(n));
  }

  if (!root.contains("links") || !root["links"].is_array())
    throw ParseError("scenario needs a 'links' array");
  for (const auto& jl : root["links"]) {
    const std::string where = "link " + jl.value("id", "?");
    detail::KeyChecker kc{jl,
                          where,
                          {"id", "channel", "from", "to", "length", "group_index",
                           "extra_fixed_delay", "drift", "pump_delay_bounds", "pump_delay"},
                          strict,
                          &doc.warnings};
    Link l;
    l.id = detail::require_string(jl, "id", where);
    const std::string channel = jl.value("channel", "quantum");
    if (channel == "quantum") l.channel = ChannelKind::Quantum;
    else if (channel == "control") l.channel = ChannelKind::ClassicalControl;
    else throw ParseError(where + ": unknown channel '" + channel + "'");
    auto parse_end = [&](const char* key) -> PortRef {
      if (!jl.contains(key)) throw ParseError(where + ": missing '" + std::string(key) + "'");
      const auto& je = jl[key];
      PortRef ref;
      ref.node = detail::require_string(je, "node", where);
      ref.port = je.value("port", 0);
      return ref;
    };
    l.from = parse_end("from");
    l.to = parse_end("to");
    l.length_m = detail::require_number(jl, "length", where);
    if (jl.contains("group_index")) l.group_index = jl["group_index"].get<double>();
    if (jl.contains("extra_fixed_delay"))
      l.extra_fixed_delay = detail::parse_time(jl["extra_fixed_delay"], where);
    if (jl.contains("drift")) l.drift_ref = jl["drift"].get<std::string>();
    if (jl.contains("pump_delay_bounds")) {
      const auto& pb = jl["pump_delay_bounds"];
      l.pump_delay_lo = detail::parse_time(pb["lo"], where);
      l.pump_delay_hi = detail::parse_time(pb["hi"], where);
      l.pump_delay = l.pump_delay_lo;
    }
    if (jl.contains("pump_delay")) l.pump_delay = detail::parse_time(jl["pump_delay"], where);
    kc.finish();
    doc.topology.links.push_back(std::move(l));
  }

  if (root.contains("drift_models")) {
    for (const auto& jd : root["drift_models"]) {
      const std::string where = "drift model " + jd.value("id", "?");
      detail::KeyChecker kc{jd,
                            where,
                            {"id", "kind", "offset", "rate", "amplitude", "period", "phase",
                             "step_std", "step_interval"},
                            strict,
                            &doc.warnings};
      DriftModel m;
      m.id = detail::require_string(jd, "id", where);
      const std::string kind = detail::require_string(jd, "kind", where);
      if (kind == "static") {
        m.kind = DriftKind::Static;
        m.offset = detail::parse_time(jd["offset"], where);
      } else if (kind == "linear") {
        m.kind = DriftKind::Linear;
        m.rate = detail::require_number(jd, "rate", where);
      } else if (kind == "sinusoidal") {
        m.kind = DriftKind::Sinusoidal;
        m.amplitude = detail::parse_time(jd["amplitude"], where);
        m.period = detail::parse_time(jd["period"], where);
        m.phase = jd.value("phase", 0.0);
        if (m.period <= 0) throw ValidationError(where + ": period must be > 0");
      } else if (kind == "random_walk") {
        m.kind = DriftKind::RandomWalk;
        m.step_std = detail::parse_time(jd["step_std"], where);
        m.step_interval = detail::parse_time(jd["step_interval"], where);
        if (m.step_interval <= 0) throw ValidationError(where + ": step_interval must be > 0");
      } else {
        throw ParseError(where + ": unknown kind '" + kind + "'");
      }
      kc.finish();
      doc.drift_models.push_back(std::move(m));
    }
  }

  const std::string strategy_name = root.value("strategy", "quantum-odl");
  auto strategy = strategy_from_name(strategy_name);
  if (!strategy) throw ValidationError("unknown strategy '" + strategy_name + "'");
  doc.strategy = *strategy;

  if (root.contains("constraint_mode")) {
    const std::string mode = root["constraint_mode"].get<std::string>();
    if (mode == "exact") doc.constraint_mode = ConstraintMode::Exact;
    else if (mode == "modulo") doc.constraint_mode = ConstraintMode::ModuloPeriod;
    else throw ParseError("constraint_mode must be 'exact' or 'modulo'");
  }

  if (root.contains("simulation")) {
    const auto& js = root["simulation"];
    detail::KeyChecker kc{js,
                          "simulation",
                          {"slots", "rep_period", "p_gen", "p0", "sigma", "window", "seed",
                           "report_interval", "warmup_updates", "drift_enabled",
                           "record_delta_series", "record_photons", "controller"},
                          strict,
                          &doc.warnings};
    auto& sim = doc.simulation;
    if (js.contains("slots")) sim.slots = js["slots"].get<std::int64_t>();
    if (js.contains("rep_period")) sim.rep_period = detail::parse_time(js["rep_period"], "simulation");
    if (js.contains("p_gen")) sim.p_gen = js["p_gen"].get<double>();
    if (js.contains("p0")) sim.p0 = js["p0"].get<double>();
    if (js.contains("sigma")) sim.sigma = detail::parse_time(js["sigma"], "simulation");
    if (js.contains("window")) sim.default_window = detail::parse_time(js["window"], "simulation");
    if (js.contains("seed")) sim.seed = js["seed"].get<std::uint64_t>();
    if (js.contains("report_interval")) sim.report_interval = js["report_interval"].get<std::int64_t>();
    if (js.contains("warmup_updates")) sim.warmup_updates = js["warmup_updates"].get<int>();
    if (js.contains("drift_enabled")) sim.drift_enabled = js["drift_enabled"].get<bool>();
    if (js.contains("record_delta_series"))
      sim.record_delta_series = js["record_delta_series"].get<bool>();
    if (js.contains("record_photons")) sim.record_photons = js["record_photons"].get<bool>();
    if (js.contains("controller")) {
      const auto& jc = js["controller"];
      detail::KeyChecker kcc{jc, "controller", {"gain", "estimate_window", "max_step"}, strict,
                             &doc.warnings};
      ControllerConfig ctrl;
      if (jc.contains("gain")) ctrl.gain = jc["gain"].get<double>();
      if (jc.contains("estimate_window")) ctrl.estimate_window = jc["estimate_window"].get<int>();
      if (jc.contains("max_step")) ctrl.max_step = detail::parse_time(jc["max_step"], "controller");
      kcc.finish();
      sim.controller = ctrl;
    }
    kc.finish();
  }

  if (root.contains("memory")) {
    const auto& jm = root["memory"];
    detail::KeyChecker kc{jm,
                          "memory",
                          {"mode", "delay", "max_hold", "link_success_prob", "p_swap_mem",
                           "max_deliveries", "baseline"},
                          strict,
                          &doc.warnings};
    MemoryConfig mem;
    const std::string mode = detail::require_string(jm, "mode", "memory");
    if (mode == "hold-until-ready") mem.mode = MemoryMode::HoldUntilReady;
    else if (mode == "fixed-delay") mem.mode = MemoryMode::FixedDelayBuffer;
    else throw ParseError("memory mode must be 'hold-until-ready' or 'fixed-delay'");
    if (jm.contains("delay")) mem.fixed_delay = detail::parse_time(jm["delay"], "memory");
    if (jm.contains("max_hold")) {
      if (jm["max_hold"].is_string() && jm["max_hold"].get<std::string>() == "inf")
        mem.max_hold.reset();
      else
        mem.max_hold = detail::parse_time(jm["max_hold"], "memory");
    }
    if (jm.contains("link_success_prob"))
      mem.link_success_prob = jm["link_success_prob"].get<double>();
    if (jm.contains("p_swap_mem")) mem.p_swap_mem = jm["p_swap_mem"].get<double>();
    if (jm.contains("max_deliveries")) mem.max_deliveries = jm["max_deliveries"].get<std::int64_t>();
    if (jm.contains("baseline"))
      mem.synchronous_baseline = jm["baseline"].get<std::string>() == "memoryless";
    kc.finish();
    doc.memory = mem;
  }

  top.finish();
  return doc;
}

inline ScenarioDocument load_scenario(const std::string& path, bool strict = true) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file: " + path);
  json root;
  try {
    root = json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("scenario is not valid JSON: ") + e.what());
  }
  return parse_scenario(root, strict);
}

// Semantic checks beyond topology invariants: dangling drift references,
// strategy resolution, config sanity.
inline ValidationReport validate_scenario(const ScenarioDocument& doc) {
  ValidationReport report = validate_topology(doc.topology);
  for (const auto& l : doc.topology.links) {
    if (!l.drift_ref) continue;
    bool found = false;
    for (const auto& m : doc.drift_models) found |= m.id == *l.drift_ref;
    if (!found)
      report.violations.push_back({l.id, "drift reference '" + *l.drift_ref + "' not defined"});
  }
  for (const auto& n : doc.topology.nodes) {
    if (n.kind == NodeKind::Source && n.rep_period > 0 &&
        n.rep_period != doc.simulation.rep_period)
      report.violations.push_back(
          {n.id, "rep_period differs from the shared simulation rep_period"});
  }
  try {
    doc.simulation.check();
    if (doc.memory) doc.memory->check();
  } catch (const ConfigError& e) {
    report.violations.push_back({"simulation", e.what()});
  }
  return report;
}

inline json scenario_to_json(const ScenarioDocument& doc) {
  json root;
  if (!doc.name.empty()) root["name"] = doc.name;
  root["strategy"] = to_string(doc.strategy);
  if (doc.constraint_mode)
    root["constraint_mode"] =
        *doc.constraint_mode == ConstraintMode::Exact ? "exact" : "modulo";
  root["nodes"] = json::array();
  for (const auto& n : doc.topology.nodes) {
    json jn;
    jn["id"] = n.id;
    jn["kind"] = to_string(n.kind);
    if (n.kind == NodeKind::Source) {
      if (n.rep_period > 0) jn["rep_period"] = detail::time_json(n.rep_period);
      jn["emission_offset"] = detail::time_json(n.emission_offset);
    }
    if (n.kind == NodeKind::BsaSupport) {
      if (n.coincidence_window >= 0)
        jn["coincidence_window"] = detail::time_json(n.coincidence_window);
      jn["odl_bounds"] = json::array();
      for (int p = 0; p < 2; ++p) {
        json jb;
        jb["lo"] = detail::time_json(n.odl[static_cast<std::size_t>(p)].lo);
        jb["hi"] = detail::time_json(n.odl[static_cast<std::size_t>(p)].hi);
        jn["odl_bounds"].push_back(jb);
      }
      jn["odl_settings"] = json::array();
      for (int p = 0; p < 2; ++p)
        jn["odl_settings"].push_back(detail::time_json(n.odl[static_cast<std::size_t>(p)].setting));
    }
    if (n.kind == NodeKind::Memory) {
      if (n.coherence_time) jn["coherence_time"] = detail::time_json(*n.coherence_time);
      else jn["coherence_time"] = "inf";
      jn["capture_efficiency"] = n.capture_efficiency;
      jn["release_efficiency"] = n.release_efficiency;
    }
    root["nodes"].push_back(jn);
  }
  root["links"] = json::array();
  for (const auto& l : doc.topology.links) {
    json jl;
    jl["id"] = l.id;
    jl["channel"] = l.channel == ChannelKind::Quantum ? "quantum" : "control";
    jl["from"] = {{"node", l.from.node}, {"port", l.from.port}};
    jl["to"] = {{"node", l.to.node}, {"port", l.to.port}};
    jl["length"] = l.length_m;
    jl["group_index"] = l.group_index;
    if (l.extra_fixed_delay != 0) jl["extra_fixed_delay"] = detail::time_json(l.extra_fixed_delay);
    if (l.drift_ref) jl["drift"] = *l.drift_ref;
    if (l.channel == ChannelKind::ClassicalControl &&
        (l.pump_delay_lo != 0 || l.pump_delay_hi != 0)) {
      jl["pump_delay_bounds"] = {{"lo", detail::time_json(l.pump_delay_lo)},
                                 {"hi", detail::time_json(l.pump_delay_hi)}};
      jl["pump_delay"] = detail::time_json(l.pump_delay);
    }
    root["links"].push_back(jl);
  }
  if (!doc.drift_models.empty()) {
    root["drift_models"] = json::array();
    for (const auto& m : doc.drift_models) {
      json jd;
      jd["id"] = m.id;
      jd["kind"] = to_string(m.kind);
      switch (m.kind) {
        case DriftKind::Static: jd["offset"] = detail::time_json(m.offset); break;
        case DriftKind::Linear: jd["rate"] = m.rate; break;
        case DriftKind::Sinusoidal:
          jd["amplitude"] = detail::time_json(m.amplitude);
          jd["period"] = detail::time_json(m.period);
          jd["phase"] = m.phase;
          break;
        case DriftKind::RandomWalk:
          jd["step_std"] = detail::time_json(m.step_std);
          jd["step_interval"] = detail::time_json(m.step_interval);
          break;
      }
      root["drift_models"].push_back(jd);
    }
  }
  json js;
  js["slots"] = doc.simulation.slots;
  js["rep_period"] = detail::time_json(doc.simulation.rep_period);
  js["p_gen"] = doc.simulation.p_gen;
  js["p0"] = doc.simulation.p0;
  js["sigma"] = detail::time_json(doc.simulation.sigma);
  js["window"] = detail::time_json(doc.simulation.default_window);
  js["seed"] = doc.simulation.seed;
  if (doc.simulation.report_interval > 0) js["report_interval"] = doc.simulation.report_interval;
  if (!doc.simulation.drift_enabled) js["drift_enabled"] = false;
  if (doc.simulation.record_delta_series) js["record_delta_series"] = true;
  if (doc.simulation.controller) {
    js["controller"] = {{"gain", doc.simulation.controller->gain},
                        {"estimate_window", doc.simulation.controller->estimate_window},
                        {"max_step", detail::time_json(doc.simulation.controller->max_step)}};
  }
  root["simulation"] = js;
  if (doc.memory) {
    json jm;
    jm["mode"] =
        doc.memory->mode == MemoryMode::HoldUntilReady ? "hold-until-ready" : "fixed-delay";
    if (doc.memory->mode == MemoryMode::FixedDelayBuffer)
      jm["delay"] = detail::time_json(doc.memory->fixed_delay);
    if (doc.memory->max_hold) jm["max_hold"] = detail::time_json(*doc.memory->max_hold);
    jm["link_success_prob"] = doc.memory->link_success_prob;
    jm["p_swap_mem"] = doc.memory->p_swap_mem;
    if (doc.memory->max_deliveries > 0) jm["max_deliveries"] = doc.memory->max_deliveries;
    if (doc.memory->synchronous_baseline) jm["baseline"] = "memoryless";
    root["memory"] = jm;
  }
  return root;
}

}  // namespace psdsim

#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "psdsim/cascade.hpp"
#include "psdsim/memory.hpp"
#include "psdsim/rng.hpp"
#include "psdsim/scenario.hpp"
#include "psdsim/simulator.hpp"
#include "psdsim/solver.hpp"

namespace psdsim {

inline constexpr const char* tool_version = "0.1.0";

// FNV-1a 64 content digest, hex-encoded; identifies the scenario bytes in
// report headers.
inline std::string content_digest(const std::string& bytes) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << RandomStream::fnv1a(bytes);
  return out.str();
}

inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file for digest: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return content_digest(buf.str());
}

// Reports are line-delimited JSON records. Every line is a pure function of
// (scenario bytes, flags, seed); wall-clock time never enters the payload, so
// byte-for-byte reproducibility holds for whole files.
inline json report_header(const std::string& command, const std::string& scenario_name,
                          const std::string& scenario_hash) {
  json j;
  j["type"] = "header";
  j["tool"] = "psdsim";
  j["version"] = tool_version;
  j["command"] = command;
  j["scenario"] = scenario_name;
  j["scenario_hash"] = scenario_hash;
  return j;
}

inline json to_json(const TimingAssignment& a) {
  json j;
  j["type"] = "assignment";
  j["status"] = "feasible";
  j["variables_ps"] = json::object();
  for (const auto& [id, v] : a.values) j["variables_ps"][id] = v;
  j["residuals_ps"] = json::object();
  for (const auto& [id, v] : a.residuals) j["residuals_ps"][id] = v;
  return j;
}

inline json to_json(const BoundsCertificate& c) {
  json j;
  j["type"] = "certificate";
  j["kind"] = "bounds";
  j["bsa"] = c.bsa;
  j["required_ps"] = c.required;
  j["available_lo_ps"] = c.available_lo;
  j["available_hi_ps"] = c.available_hi;
  j["modular"] = c.modular;
  return j;
}

inline json to_json(const CycleCertificate& c) {
  json j;
  j["type"] = "certificate";
  j["kind"] = "cycle";
  j["cycle_links"] = c.cycle_links;
  j["fixed_imbalance_ps"] = c.fixed_imbalance;
  j["adjustable_lo_ps"] = c.adjustable_lo;
  j["adjustable_hi_ps"] = c.adjustable_hi;
  j["total_adjustable_range_ps"] = c.total_adjustable_range;
  j["modular"] = c.modular;
  if (c.modular) j["period_ps"] = c.period;
  return j;
}

inline json to_json(const SolveResult& r) {
  switch (r.status) {
    case SolveStatus::Feasible: return to_json(*r.assignment);
    case SolveStatus::InfeasibleBounds: return to_json(*r.bounds);
    case SolveStatus::InfeasibleCycle: return to_json(*r.cycle);
  }
  return {};
}

inline json to_json(const CascadeReport& r) {
  json j;
  j["type"] = "cascade_report";
  j["strategy"] = to_string(r.strategy);
  j["perturbed_link"] = r.perturbed_link;
  j["delta_length_m"] = r.delta_length_m;
  j["affected_variables"] = r.affected_variables;
  j["affected_bsas"] = r.affected_bsas;
  j["cascade_depth"] = r.cascade_depth;
  j["psd_partition"] = r.psd_partition;
  j["infeasible_after"] = r.infeasible_after;
  return j;
}

inline std::vector<json> to_json_lines(const RunMetrics& m) {
  std::vector<json> lines;
  for (const auto& rec : m.intervals) {
    json j;
    j["type"] = "bsa_interval";
    j["bsa"] = rec.bsa;
    j["slot_start"] = rec.slot_start;
    j["slots"] = rec.slots;
    j["paired"] = rec.paired;
    j["coincidences"] = rec.coincidences;
    j["swaps"] = rec.swaps;
    j["sum_abs_delta_ps"] = rec.sum_abs_delta;
    j["max_abs_delta_ps"] = rec.max_abs_delta;
    j["saturation_events"] = rec.saturation_events;
    j["odl_left_ps"] = rec.odl_left;
    j["odl_right_ps"] = rec.odl_right;
    lines.push_back(j);
  }
  json s;
  s["type"] = "summary";
  s["slots"] = m.slots;
  s["seed"] = m.seed;
  s["all_fired_slots"] = m.all_fired_slots;
  s["end_to_end_successes"] = m.end_to_end_successes;
  s["per_bsa"] = json::object();
  for (const auto& [id, t] : m.per_bsa) {
    json jb;
    jb["paired"] = t.paired;
    jb["coincidences"] = t.coincidences;
    jb["swaps"] = t.swaps;
    jb["sum_abs_delta_ps"] = t.sum_abs_delta;
    jb["max_abs_delta_ps"] = t.max_abs_delta;
    jb["saturation_events"] = t.saturation_events;
    jb["controller_updates"] = t.controller_updates;
    jb["paired_post_warmup"] = t.paired_post_warmup;
    jb["in_window_post_warmup"] = t.in_window_post_warmup;
    s["per_bsa"][id] = jb;
  }
  lines.push_back(s);
  return lines;
}

inline json to_json(const HopByHopMetrics& m) {
  json j;
  j["type"] = "hop_by_hop_summary";
  j["slots"] = m.slots;
  j["seed"] = m.seed;
  j["deliveries"] = m.deliveries;
  j["retention_losses"] = m.retention_losses;
  j["swap_failures"] = m.swap_failures;
  j["total_latency_slots"] = m.total_latency_slots;
  j["mean_delivery_latency_slots"] = m.mean_delivery_latency_slots();
  return j;
}

inline void write_report_lines(std::ostream& out, const std::vector<json>& lines) {
  for (const auto& line : lines) out << line.dump() << "\n";
}

}  // namespace psdsim

#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "psdsim/constraints.hpp"
#include "psdsim/solver.hpp"
#include "psdsim/strategy.hpp"
#include "psdsim/topology.hpp"

namespace psdsim {

// Which nodes must negotiate together under a strategy, and how far a
// single-link perturbation propagates through the canonical assignment.

struct CascadeReport {
  StrategyKind strategy = StrategyKind::QuantumPathAdjustAtBsa;
  std::string perturbed_link;
  double delta_length_m = 0.0;
  std::vector<std::string> affected_variables;
  std::vector<std::string> affected_bsas;
  int cascade_depth = 0;
  std::vector<std::vector<std::string>> psd_partition;
  bool infeasible_after = false;
};

namespace detail {

// Nodes that take part in satisfying one constraint: the BSA plus the host
// and controlling node of every adjustable variable the constraint touches.
inline std::set<std::string> constraint_participants(const TimingConstraintSystem& sys,
                                                     const SimultaneityConstraint& c,
                                                     const StrategyCapability& caps) {
  std::set<std::string> out{c.bsa};
  auto add_var = [&](const std::string& vid) {
    auto it = caps.adjustable.find(vid);
    if (it == caps.adjustable.end()) return;
    if (!it->second.node.empty()) out.insert(it->second.node);
    if (!it->second.controller.empty()) out.insert(it->second.controller);
  };
  for (const auto* side : {&c.left, &c.right}) {
    const auto& info = sys.epochs.at(side->source);
    if (info.var) add_var(*info.var);
    if (side->odl_var) add_var(*side->odl_var);
  }
  return out;
}

}  // namespace detail

// Partition of all nodes into photonic synchronization domains: connected
// components of "must coordinate on some adjustable variable", with every
// uninvolved node its own singleton cell.
inline std::vector<std::vector<std::string>> psd_of(const NetworkTopology& topo,
                                                    StrategyKind strategy, ps_t rep_period) {
  StrategyCapability caps = capability_of(strategy, topo, rep_period);
  TimingConstraintSystem sys = build_constraints(topo, caps, rep_period);

  std::map<std::string, std::string> parent;
  for (const auto& n : topo.nodes) parent[n.id] = n.id;
  std::function<std::string(const std::string&)> find = [&](const std::string& x) {
    if (parent.at(x) == x) return x;
    parent[x] = find(parent.at(x));
    return parent.at(x);
  };
  auto unite = [&](const std::string& a, const std::string& b) {
    std::string ra = find(a), rb = find(b);
    if (ra == rb) return;
    if (rb < ra) std::swap(ra, rb);
    parent[rb] = ra;
  };

  for (const auto& c : sys.constraints) {
    auto members = detail::constraint_participants(sys, c, caps);
    const std::string* first = nullptr;
    for (const auto& m : members) {
      if (!parent.count(m)) continue;
      if (!first) first = &m;
      else unite(*first, m);
    }
  }

  std::map<std::string, std::vector<std::string>> cells;
  for (const auto& n : topo.nodes) cells[find(n.id)].push_back(n.id);
  std::vector<std::vector<std::string>> out;
  for (auto& [root, members] : cells) {
    std::sort(members.begin(), members.end());
    out.push_back(members);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace detail {

// Links whose delay enters a constraint: photon paths plus the pump control
// path when the strategy drives emission from the BSA.
inline std::set<std::string> constraint_links(const NetworkTopology& topo,
                                              const TimingConstraintSystem& sys,
                                              const SimultaneityConstraint& c,
                                              bool pump_timing) {
  std::set<std::string> out;
  for (const auto* side : {&c.left, &c.right}) {
    for (const auto& l : side->path_links) out.insert(l);
    if (pump_timing) {
      const auto& info = sys.epochs.at(side->source);
      const Link* pl = pump_link_of(topo, info.emitter);
      if (pl) out.insert(pl->id);
    }
  }
  return out;
}

}  // namespace detail

// Re-solve after stretching one link and report which canonical values moved.
// Depth counts BSA-to-BSA hops from the perturbed link's own BSA(s) to the
// farthest BSA whose variables moved.
inline CascadeReport analyze_cascade(const NetworkTopology& topo, StrategyKind strategy,
                                     const std::string& perturbed_link, double delta_length_m,
                                     ps_t rep_period, ps_t epsilon = 1) {
  CascadeReport report;
  report.strategy = strategy;
  report.perturbed_link = perturbed_link;
  report.delta_length_m = delta_length_m;
  report.psd_partition = psd_of(topo, strategy, rep_period);

  StrategyCapability caps = capability_of(strategy, topo, rep_period);
  TimingConstraintSystem base_sys = build_constraints(topo, caps, rep_period);
  SolveResult base = solve(base_sys, epsilon);
  if (!base.feasible())
    throw ConfigError("cascade analysis needs a feasible baseline, but solve failed");

  NetworkTopology bumped = perturb_link_length(topo, perturbed_link, delta_length_m);
  StrategyCapability caps2 = capability_of(strategy, bumped, rep_period);
  TimingConstraintSystem sys2 = build_constraints(bumped, caps2, rep_period);
  SolveResult after = solve(sys2, epsilon);
  if (!after.feasible()) {
    report.infeasible_after = true;
    return report;
  }

  std::set<std::string> affected;
  for (const auto& [id, v] : base.assignment->values) {
    auto it = after.assignment->values.find(id);
    const ps_t other = it == after.assignment->values.end() ? v : it->second;
    if (std::abs(other - v) > epsilon) affected.insert(id);
  }
  report.affected_variables.assign(affected.begin(), affected.end());

  std::set<std::string> affected_bsas;
  for (const auto& c : base_sys.constraints) {
    bool hit = false;
    for (const auto* side : {&c.left, &c.right}) {
      const auto& info = base_sys.epochs.at(side->source);
      if (info.var && affected.count(*info.var)) hit = true;
      if (side->odl_var && affected.count(*side->odl_var)) hit = true;
    }
    if (hit) affected_bsas.insert(c.bsa);
  }
  report.affected_bsas.assign(affected_bsas.begin(), affected_bsas.end());

  // Hop metric: the BSA-adjacency graph (BSAs sharing an emitting source).
  const bool pump_timing = caps.uses_pump_timing();
  std::map<std::string, std::set<std::string>> bsa_sources;
  std::map<std::string, int> depth;
  for (const auto& c : base_sys.constraints) {
    bsa_sources[c.bsa] = {c.left.source, c.right.source};
    if (detail::constraint_links(topo, base_sys, c, pump_timing).count(perturbed_link))
      depth[c.bsa] = 0;
  }
  std::vector<std::string> frontier;
  for (const auto& [b, d] : depth) frontier.push_back(b);
  while (!frontier.empty()) {
    std::vector<std::string> next;
    for (const auto& b : frontier) {
      for (const auto& [other, sources] : bsa_sources) {
        if (depth.count(other)) continue;
        bool shares = false;
        for (const auto& s : bsa_sources.at(b)) shares |= sources.count(s) > 0;
        if (shares) {
          depth[other] = depth.at(b) + 1;
          next.push_back(other);
        }
      }
    }
    frontier = std::move(next);
  }
  int max_depth = 0;
  for (const auto& b : report.affected_bsas) {
    auto it = depth.find(b);
    max_depth = std::max(max_depth, it == depth.end() ? 0 : it->second);
  }
  report.cascade_depth = max_depth;
  return report;
}

}  // namespace psdsim

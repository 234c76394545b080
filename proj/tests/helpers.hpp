#pragma once

// Shared test utilities: an exhaustive grid-search feasibility oracle that is
// independent of the shortest-path solver, an arrival-time evaluator that
// recomputes residuals straight from a topology and an assignment, and small
// topology builders.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "psdsim/constraints.hpp"
#include "psdsim/solver.hpp"
#include "psdsim/strategy.hpp"
#include "psdsim/topology.hpp"

namespace testutil {

using namespace psdsim;

// Recompute a BSA's residual from first principles: emission epoch + path
// propagation + ODL, reading adjustable values from the assignment only.
inline ps_t recompute_residual(const NetworkTopology& topo, const StrategyCapability& caps,
                               ps_t rep_period, const TimingAssignment& a,
                               const std::string& bsa_id) {
  auto arrival = [&](int port) {
    PhotonPath path = trace_photon_path(topo, bsa_id, port);
    const NodeSpec* src = topo.find_node(path.source);
    ps_t t = 0;
    const Link* pump = caps.uses_pump_timing() ? pump_link_of(topo, path.source) : nullptr;
    if (pump) {
      t += propagation_delay_ps(*pump);
      const std::string vid = pump_var_id(pump->id);
      t += a.values.count(vid) ? a.values.at(vid) : pump->pump_delay;
    } else {
      const std::string vid = offset_var_id(path.source);
      t += a.values.count(vid) ? a.values.at(vid) : src->emission_offset;
    }
    for (const auto& lid : path.links) t += propagation_delay_ps(*topo.find_link(lid));
    const NodeSpec* bsa = topo.find_node(bsa_id);
    const std::string ovid = odl_var_id(bsa_id, port);
    t += a.values.count(ovid) ? a.values.at(ovid)
                              : bsa->odl[static_cast<std::size_t>(port)].setting;
    return t;
  };
  ps_t delta = arrival(0) - arrival(1);
  if (caps.mode == ConstraintMode::ModuloPeriod) delta = wrap_to_period(delta, rep_period);
  return delta;
}

// --- Exhaustive grid oracle -------------------------------------------------
//
// Enumerates every ODL variable on a fixed-resolution grid. For each grid
// point the epoch variables form pure difference equalities, so feasibility
// reduces to BFS propagation of relative offsets plus an interval
// intersection over the epoch windows and a closure check per extra edge.

struct OracleResult {
  bool feasible = false;
  long long points_checked = 0;
};

inline OracleResult grid_search_feasible(const TimingConstraintSystem& sys, ps_t resolution,
                                         ps_t epsilon) {
  std::vector<std::string> odl_ids;
  std::vector<ps_t> lo, hi;
  for (const auto& c : sys.constraints) {
    for (const auto* side : {&c.left, &c.right}) {
      if (!side->odl_var) continue;
      if (std::find(odl_ids.begin(), odl_ids.end(), *side->odl_var) != odl_ids.end()) continue;
      odl_ids.push_back(*side->odl_var);
      lo.push_back(side->odl_lo);
      hi.push_back(side->odl_hi);
    }
  }

  std::vector<ps_t> point(odl_ids.size());
  OracleResult result;

  std::vector<std::string> epoch_ids;
  for (const auto& [id, info] : sys.epochs) epoch_ids.push_back(id);
  std::sort(epoch_ids.begin(), epoch_ids.end());
  std::map<std::string, int> epoch_index;
  for (int i = 0; i < static_cast<int>(epoch_ids.size()); ++i) epoch_index[epoch_ids[i]] = i;

  auto odl_value = [&](const ArrivalExpr& side) {
    if (!side.odl_var) return side.odl_current;
    for (std::size_t i = 0; i < odl_ids.size(); ++i)
      if (odl_ids[i] == *side.odl_var) return point[i];
    return side.odl_current;
  };

  auto feasible_at_point = [&]() -> bool {
    // Relative epoch offsets per connected component via BFS.
    const int n = static_cast<int>(epoch_ids.size());
    std::vector<ps_t> rel(static_cast<std::size_t>(n), 0);
    std::vector<int> comp(static_cast<std::size_t>(n), -1);
    int n_comp = 0;
    for (int root = 0; root < n; ++root) {
      if (comp[static_cast<std::size_t>(root)] >= 0) continue;
      comp[static_cast<std::size_t>(root)] = n_comp;
      rel[static_cast<std::size_t>(root)] = 0;
      std::vector<int> queue{root};
      while (!queue.empty()) {
        int u = queue.back();
        queue.pop_back();
        for (const auto& c : sys.constraints) {
          const int li = epoch_index.at(c.left.source);
          const int ri = epoch_index.at(c.right.source);
          if (li != u && ri != u) continue;
          if (li == ri) continue;
          // e_L - e_R = (FR + OR) - (FL + OL)
          const ps_t need = (c.right.path_fixed + odl_value(c.right)) -
                            (c.left.path_fixed + odl_value(c.left));
          const int other = li == u ? ri : li;
          if (comp[static_cast<std::size_t>(other)] >= 0) continue;
          comp[static_cast<std::size_t>(other)] = n_comp;
          rel[static_cast<std::size_t>(other)] =
              li == u ? rel[static_cast<std::size_t>(u)] - need
                      : rel[static_cast<std::size_t>(u)] + need;
          queue.push_back(other);
        }
      }
      ++n_comp;
    }
    // Closure checks for every constraint (tree edges hold by construction).
    for (const auto& c : sys.constraints) {
      const int li = epoch_index.at(c.left.source);
      const int ri = epoch_index.at(c.right.source);
      const ps_t need = (c.right.path_fixed + odl_value(c.right)) -
                        (c.left.path_fixed + odl_value(c.left));
      ps_t err = (rel[static_cast<std::size_t>(li)] - rel[static_cast<std::size_t>(ri)]) - need;
      if (sys.mode == ConstraintMode::ModuloPeriod) err = wrap_to_period(err, sys.period);
      if (std::abs(err) > 2 * epsilon) return false;
    }
    // Per component, a common shift t must land every epoch in its window.
    for (int k = 0; k < n_comp; ++k) {
      ps_t t_lo = std::numeric_limits<ps_t>::min() / 4;
      ps_t t_hi = std::numeric_limits<ps_t>::max() / 4;
      for (int i = 0; i < n; ++i) {
        if (comp[static_cast<std::size_t>(i)] != k) continue;
        const auto& info = sys.epochs.at(epoch_ids[static_cast<std::size_t>(i)]);
        if (sys.mode == ConstraintMode::ModuloPeriod &&
            info.hi() - info.lo() + 1 >= sys.period)
          continue;  // full-period window never binds modulo the period
        t_lo = std::max(t_lo, info.lo() - rel[static_cast<std::size_t>(i)]);
        t_hi = std::min(t_hi, info.hi() - rel[static_cast<std::size_t>(i)]);
      }
      if (t_lo > t_hi) return false;
    }
    return true;
  };

  // Odometer over the grid.
  std::vector<ps_t> cursor(odl_ids.size());
  for (std::size_t i = 0; i < odl_ids.size(); ++i) cursor[i] = lo[i];
  while (true) {
    for (std::size_t i = 0; i < odl_ids.size(); ++i) point[i] = cursor[i];
    ++result.points_checked;
    if (feasible_at_point()) {
      result.feasible = true;
      return result;
    }
    std::size_t axis = 0;
    while (axis < odl_ids.size()) {
      cursor[axis] += resolution;
      if (cursor[axis] <= hi[axis]) break;
      cursor[axis] = lo[axis];
      ++axis;
    }
    if (axis == odl_ids.size()) break;
    if (odl_ids.empty()) break;
  }
  return result;
}

// --- Topology builders ------------------------------------------------------

// Triangle of three sources and three BSAs with one surplus-delay link.
// Each source fires one photon to each of its two flanking BSAs.
inline NetworkTopology make_triangle(ps_t odl_hi, ps_t imbalance, ps_t pump_hi) {
  NetworkTopology topo;
  const std::vector<std::string> sources{"A", "B", "C"};
  const std::vector<std::string> bsas{"I_AB", "I_BC", "I_CA"};
  for (const auto& s : sources) {
    NodeSpec n;
    n.id = s;
    n.kind = NodeKind::Source;
    topo.nodes.push_back(n);
  }
  for (const auto& b : bsas) {
    NodeSpec n;
    n.id = b;
    n.kind = NodeKind::BsaSupport;
    n.coincidence_window = 100;
    n.odl[0] = {0, odl_hi, 0};
    n.odl[1] = {0, odl_hi, 0};
    topo.nodes.push_back(n);
  }
  auto quantum = [&](const std::string& id, const std::string& s, int sp, const std::string& b,
                     int bp, ps_t extra) {
    Link l;
    l.id = id;
    l.channel = ChannelKind::Quantum;
    l.from = {s, sp};
    l.to = {b, bp};
    l.length_m = 10000;
    l.group_index = 1.0;
    l.extra_fixed_delay = extra;
    topo.links.push_back(l);
  };
  auto control = [&](const std::string& b, const std::string& s) {
    Link l;
    l.id = "c_" + b + "_" + s;
    l.channel = ChannelKind::ClassicalControl;
    l.from = {b, 0};
    l.to = {s, 0};
    l.length_m = 10000;
    l.group_index = 1.0;
    l.pump_delay_hi = pump_hi;
    topo.links.push_back(l);
  };
  quantum("qA_AB", "A", 0, "I_AB", 0, 0);
  quantum("qB_AB", "B", 0, "I_AB", 1, imbalance);  // the loop surplus
  quantum("qB_BC", "B", 1, "I_BC", 0, 0);
  quantum("qC_BC", "C", 0, "I_BC", 1, 0);
  quantum("qC_CA", "C", 1, "I_CA", 0, 0);
  quantum("qA_CA", "A", 1, "I_CA", 1, 0);
  for (const auto& b : bsas)
    for (const auto& s : sources)
      if (b.find(s) != std::string::npos) control(b, s);
  return topo;
}

inline std::string chain_notation(int n_bsas) {
  std::string text = "DS";
  for (int i = 0; i < n_bsas; ++i) text += "IS";
  text += "D";
  return text;
}

}  // namespace testutil

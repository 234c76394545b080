#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "psdsim/config.hpp"
#include "psdsim/errors.hpp"
#include "psdsim/strategy.hpp"
#include "psdsim/time.hpp"
#include "psdsim/topology.hpp"

namespace psdsim {

// Window wide enough for any physical delay here, small enough that
// shortest-path sums cannot overflow int64.
inline constexpr ps_t free_epoch_range = ps_t{1} << 55;

// Emission epoch of one emitter within the slot grid, split into a fixed base
// and an optional adjustable variable on top of it:
//   epoch = base + (variable value | current)
// Offset-adjusted emitters have base 0; pump-driven emitters have base equal
// to the control-path propagation delay.
struct EpochInfo {
  std::string emitter;
  ps_t base = 0;
  std::optional<std::string> var;  // adjustable epoch variable id, if any
  ps_t var_lo = 0;
  ps_t var_hi = 0;
  ps_t var_current = 0;

  ps_t current_epoch() const { return base + var_current; }
  ps_t lo() const { return var ? base + var_lo : current_epoch(); }
  ps_t hi() const { return var ? base + var_hi : current_epoch(); }
};

// Arrival time of the photon feeding one BSA input port:
//   arrival = epoch(source) + path_fixed + odl
struct ArrivalExpr {
  std::string source;                   // key into TimingConstraintSystem::epochs
  ps_t path_fixed = 0;                  // propagation delays + buffer delays
  std::optional<std::string> odl_var;   // adjustable ODL on this port, if any
  ps_t odl_lo = 0;
  ps_t odl_hi = 0;
  ps_t odl_current = 0;
  std::vector<std::string> path_links;  // quantum links, source -> bsa order

  ps_t odl_fixed() const { return odl_var ? 0 : odl_current; }
};

// Photons on both inputs of `bsa` must arrive at the same instant
// (exactly, or modulo the repetition period).
struct SimultaneityConstraint {
  std::string bsa;
  ArrivalExpr left;   // port 0
  ArrivalExpr right;  // port 1
};

struct TimingConstraintSystem {
  std::vector<SimultaneityConstraint> constraints;
  std::map<std::string, EpochInfo> epochs;
  std::map<std::string, TimingVariable> variables;  // the adjustable set in play
  ConstraintMode mode = ConstraintMode::Exact;
  ps_t period = 0;
};

namespace detail {

inline bool is_quantum_emitter(const NetworkTopology& topo, const NodeSpec& n) {
  if (n.kind == NodeKind::Source) return true;
  if (n.kind != NodeKind::Memory) return false;
  for (const auto& l : topo.links)
    if (l.channel == ChannelKind::Quantum && l.from.node == n.id) return true;
  return false;
}

inline void check_capability(const NetworkTopology& topo, const StrategyCapability& caps) {
  for (const auto& [id, v] : caps.adjustable) {
    switch (v.kind) {
      case VariableKind::OdlDelay: {
        const NodeSpec* n = topo.find_node(v.node);
        if (!n || n->kind != NodeKind::BsaSupport || v.port < 0 || v.port > 1)
          throw CapabilityMismatch("capability references unknown ODL " + id);
        break;
      }
      case VariableKind::EmissionOffset: {
        const NodeSpec* n = topo.find_node(v.node);
        if (!n || (n->kind != NodeKind::Source && n->kind != NodeKind::Memory))
          throw CapabilityMismatch("capability references unknown source " + id);
        break;
      }
      case VariableKind::PumpPathDelay: {
        const Link* l = topo.find_link(v.link);
        if (!l || l->channel != ChannelKind::ClassicalControl)
          throw CapabilityMismatch("capability references unknown control link " + id);
        break;
      }
    }
  }
}

}  // namespace detail

// Build one simultaneity constraint per BSA. Variables the capability does
// not cover enter the expressions as constants at their current settings.
// Photons that crossed a hold-until-ready memory are decoupled: their release
// time is a free per-port variable rather than a shared emission epoch.
inline TimingConstraintSystem build_constraints(const NetworkTopology& topo,
                                                const StrategyCapability& caps,
                                                ps_t rep_period,
                                                std::optional<MemoryConfig> memcfg = {}) {
  detail::check_capability(topo, caps);

  TimingConstraintSystem sys;
  sys.mode = caps.mode;
  sys.period = rep_period;
  sys.variables = caps.adjustable;

  const bool hold_until_ready =
      memcfg && memcfg->mode == MemoryMode::HoldUntilReady;
  const ps_t buffer_delay =
      memcfg && memcfg->mode == MemoryMode::FixedDelayBuffer ? memcfg->fixed_delay : 0;

  auto epoch_of = [&](const std::string& emitter_id) -> EpochInfo {
    const NodeSpec* n = topo.find_node(emitter_id);
    EpochInfo info;
    info.emitter = emitter_id;
    const Link* pump = caps.uses_pump_timing() ? pump_link_of(topo, emitter_id) : nullptr;
    if (pump) {
      info.base = propagation_delay_ps(*pump);
      const std::string vid = pump_var_id(pump->id);
      if (caps.can_adjust(vid)) {
        const auto& v = caps.adjustable.at(vid);
        info.var = vid;
        info.var_lo = v.lo;
        info.var_hi = v.hi;
        info.var_current = v.current;
      } else {
        info.var_current = pump->pump_delay;
      }
      // Memory emitters in fixed-delay mode still present their buffer latency.
      if (n->kind == NodeKind::Memory) info.base += buffer_delay;
      return info;
    }
    info.base = n->kind == NodeKind::Memory ? buffer_delay : 0;
    const std::string vid = offset_var_id(emitter_id);
    if (caps.can_adjust(vid)) {
      const auto& v = caps.adjustable.at(vid);
      info.var = vid;
      info.var_lo = v.lo;
      info.var_hi = v.hi;
      info.var_current = v.current;
    } else {
      info.var_current = n->emission_offset;
    }
    return info;
  };

  for (const auto& n : topo.nodes) {
    if (n.kind != NodeKind::BsaSupport) continue;
    SimultaneityConstraint c;
    c.bsa = n.id;
    for (int port = 0; port < 2; ++port) {
      PhotonPath path = trace_photon_path(topo, n.id, port);
      ArrivalExpr expr;
      expr.path_links = path.links;
      for (const auto& lid : path.links) expr.path_fixed += propagation_delay_ps(*topo.find_link(lid));
      expr.path_fixed += buffer_delay * static_cast<ps_t>(path.memories_crossed.size());

      const NodeSpec* emitter = topo.find_node(path.source);
      const bool decoupled =
          hold_until_ready &&
          (emitter->kind == NodeKind::Memory || !path.memories_crossed.empty());
      if (decoupled) {
        const std::string sid = "release:" + n.id + ":" + std::to_string(port);
        EpochInfo info;
        info.emitter = sid;
        info.var = sid;
        info.var_lo = -free_epoch_range;
        info.var_hi = free_epoch_range;
        sys.epochs.emplace(sid, info);
        TimingVariable v;
        v.id = sid;
        v.kind = VariableKind::EmissionOffset;
        v.node = path.source;
        v.lo = info.var_lo;
        v.hi = info.var_hi;
        v.controller = path.source;
        sys.variables.emplace(sid, std::move(v));
        expr.source = sid;
      } else {
        sys.epochs.emplace(path.source, epoch_of(path.source));
        expr.source = path.source;
      }

      const std::string ovid = odl_var_id(n.id, port);
      const auto& odl = n.odl[static_cast<std::size_t>(port)];
      if (caps.can_adjust(ovid)) {
        expr.odl_var = ovid;
        expr.odl_lo = odl.lo;
        expr.odl_hi = odl.hi;
      }
      expr.odl_current = odl.setting;

      (port == 0 ? c.left : c.right) = std::move(expr);
    }
    sys.constraints.push_back(std::move(c));
  }

  // Epochs of emitters that feed no constraint (e.g. sources facing only
  // detectors) still get entries so assignments cover every capability var.
  for (const auto& n : topo.nodes)
    if (detail::is_quantum_emitter(topo, n) && !sys.epochs.count(n.id))
      sys.epochs.emplace(n.id, epoch_of(n.id));

  return sys;
}

}  // namespace psdsim

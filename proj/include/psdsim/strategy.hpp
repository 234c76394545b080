#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "psdsim/errors.hpp"
#include "psdsim/time.hpp"
#include "psdsim/topology.hpp"

namespace psdsim {

// The four single-mechanism coordination strategies plus the pump+ODL combination.
enum class StrategyKind {
  PumpPathAdjust,            // 1: delay the pump/trigger on the classical path
  QuantumPathAdjustAtBsa,    // 2: ODLs on the BSA's quantum input ports
  EmissionOffsetAdjust,      // 3: sources shift their emission phase
  FrequencySyncQuantumAdjust,// 4: shared clock, ODL compensation modulo period
  Combined12,                // pump adjustment followed by quantum-path cleanup
};

inline std::string to_string(StrategyKind s) {
  switch (s) {
    case StrategyKind::PumpPathAdjust: return "pump-path";
    case StrategyKind::QuantumPathAdjustAtBsa: return "quantum-odl";
    case StrategyKind::EmissionOffsetAdjust: return "emission-offset";
    case StrategyKind::FrequencySyncQuantumAdjust: return "freq-sync";
    case StrategyKind::Combined12: return "combined-1-2";
  }
  return "?";
}

inline std::optional<StrategyKind> strategy_from_name(const std::string& name) {
  if (name == "pump-path") return StrategyKind::PumpPathAdjust;
  if (name == "quantum-odl") return StrategyKind::QuantumPathAdjustAtBsa;
  if (name == "emission-offset") return StrategyKind::EmissionOffsetAdjust;
  if (name == "freq-sync") return StrategyKind::FrequencySyncQuantumAdjust;
  if (name == "combined-1-2") return StrategyKind::Combined12;
  return std::nullopt;
}

enum class ConstraintMode { Exact, ModuloPeriod };

enum class VariableKind { EmissionOffset, OdlDelay, PumpPathDelay };

struct TimingVariable {
  std::string id;
  VariableKind kind = VariableKind::OdlDelay;
  std::string node;      // source (EmissionOffset), bsa (OdlDelay), or pump target source
  std::string link;      // control link id for PumpPathDelay
  int port = -1;         // OdlDelay only
  ps_t lo = 0;
  ps_t hi = 0;
  ps_t current = 0;
  std::string controller;  // node that commands this adjustment

  bool operator==(const TimingVariable&) const = default;
};

inline std::string odl_var_id(const std::string& bsa, int port) {
  return "odl:" + bsa + ":" + std::to_string(port);
}
inline std::string offset_var_id(const std::string& source) { return "offset:" + source; }
inline std::string pump_var_id(const std::string& link) { return "pump:" + link; }

// Which timing variables the strategy may adjust on a concrete topology,
// keyed by variable id.
struct StrategyCapability {
  StrategyKind strategy = StrategyKind::QuantumPathAdjustAtBsa;
  ConstraintMode mode = ConstraintMode::Exact;
  std::map<std::string, TimingVariable> adjustable;

  bool can_adjust(const std::string& var_id) const { return adjustable.count(var_id) > 0; }
  bool uses_pump_timing() const {
    return strategy == StrategyKind::PumpPathAdjust || strategy == StrategyKind::Combined12;
  }
};

// The BSA that triggers a source's pair generation under pump-driven
// strategies: the lowest-id adjacent BSA reachable over a control link.
inline std::optional<std::string> pump_bsa_of(const NetworkTopology& topo,
                                              const std::string& source_id) {
  std::optional<std::string> best;
  for (const auto& l : topo.links) {
    if (l.channel != ChannelKind::ClassicalControl || l.to.node != source_id) continue;
    const NodeSpec* from = topo.find_node(l.from.node);
    if (!from || from->kind != NodeKind::BsaSupport) continue;
    if (!best || l.from.node < *best) best = l.from.node;
  }
  return best;
}

inline const Link* pump_link_of(const NetworkTopology& topo, const std::string& source_id) {
  auto bsa = pump_bsa_of(topo, source_id);
  if (!bsa) return nullptr;
  return topo.control_link_between(*bsa, source_id);
}

inline StrategyCapability capability_of(StrategyKind strategy, const NetworkTopology& topo,
                                        ps_t rep_period) {
  StrategyCapability caps;
  caps.strategy = strategy;
  caps.mode = strategy == StrategyKind::FrequencySyncQuantumAdjust ? ConstraintMode::ModuloPeriod
                                                                   : ConstraintMode::Exact;

  auto add_odls = [&] {
    for (const auto& n : topo.nodes) {
      if (n.kind != NodeKind::BsaSupport) continue;
      for (int p = 0; p < 2; ++p) {
        const auto& o = n.odl[static_cast<std::size_t>(p)];
        TimingVariable v;
        v.id = odl_var_id(n.id, p);
        v.kind = VariableKind::OdlDelay;
        v.node = n.id;
        v.port = p;
        v.lo = o.lo;
        v.hi = o.hi;
        v.current = o.setting;
        v.controller = n.id;
        caps.adjustable.emplace(v.id, std::move(v));
      }
    }
  };

  auto add_pumps = [&] {
    for (const auto& n : topo.nodes) {
      if (n.kind != NodeKind::Source) continue;
      const Link* pl = pump_link_of(topo, n.id);
      if (!pl) continue;  // no adjacent BSA: nothing to pump
      TimingVariable v;
      v.id = pump_var_id(pl->id);
      v.kind = VariableKind::PumpPathDelay;
      v.node = n.id;
      v.link = pl->id;
      v.lo = pl->pump_delay_lo;
      v.hi = pl->pump_delay_hi;
      v.current = pl->pump_delay;
      v.controller = pl->from.node;
      caps.adjustable.emplace(v.id, std::move(v));
    }
  };

  auto emits_quantum = [&](const NodeSpec& n) {
    for (const auto& l : topo.links)
      if (l.channel == ChannelKind::Quantum && l.from.node == n.id) return true;
    return false;
  };

  // Emitting memories in fixed-delay mode behave like sources, so they carry
  // the same emission-phase variable.
  auto add_offsets = [&] {
    for (const auto& n : topo.nodes) {
      if (n.kind != NodeKind::Source && !(n.kind == NodeKind::Memory && emits_quantum(n)))
        continue;
      ps_t period = n.rep_period > 0 ? n.rep_period : rep_period;
      TimingVariable v;
      v.id = offset_var_id(n.id);
      v.kind = VariableKind::EmissionOffset;
      v.node = n.id;
      v.lo = 0;
      v.hi = period > 0 ? period - 1 : 0;  // [0, rep_period)
      v.current = n.emission_offset;
      v.controller = n.id;
      caps.adjustable.emplace(v.id, std::move(v));
    }
  };

  switch (strategy) {
    case StrategyKind::PumpPathAdjust: add_pumps(); break;
    case StrategyKind::QuantumPathAdjustAtBsa: add_odls(); break;
    case StrategyKind::EmissionOffsetAdjust: add_offsets(); break;
    case StrategyKind::FrequencySyncQuantumAdjust: add_odls(); break;
    case StrategyKind::Combined12:
      add_pumps();
      add_odls();
      break;
  }
  return caps;
}

}  // namespace psdsim

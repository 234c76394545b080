#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "psdsim/errors.hpp"
#include "psdsim/time.hpp"

namespace psdsim {

enum class NodeKind { Source, BsaSupport, Memory, EndDetector };

enum class ChannelKind { Quantum, ClassicalControl };

inline std::string to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Source: return "source";
    case NodeKind::BsaSupport: return "bsa";
    case NodeKind::Memory: return "memory";
    case NodeKind::EndDetector: return "detector";
  }
  return "?";
}

// One adjustable optical delay line on a BSA input port: closed bounds plus
// the currently applied setting.
struct OdlPort {
  ps_t lo = 0;
  ps_t hi = 0;
  ps_t setting = 0;
  bool operator==(const OdlPort&) const = default;
};

struct NodeSpec {
  std::string id;
  NodeKind kind = NodeKind::Source;

  // Source fields. rep_period == 0 means "use the simulation-wide period".
  ps_t rep_period = 0;
  ps_t emission_offset = 0;

  // BsaSupport fields. coincidence_window < 0 means "use the config default".
  ps_t coincidence_window = -1;
  std::array<OdlPort, 2> odl{};

  // Memory fields. nullopt coherence time means infinite retention.
  std::optional<ps_t> coherence_time;
  double capture_efficiency = 1.0;
  double release_efficiency = 1.0;

  bool operator==(const NodeSpec&) const = default;
};

struct PortRef {
  std::string node;
  int port = 0;
  bool operator==(const PortRef&) const = default;
};

struct Link {
  std::string id;
  PortRef from;  // emitting side for quantum links, commanding side for control
  PortRef to;
  ChannelKind channel = ChannelKind::Quantum;
  double length_m = 0.0;
  double group_index = 1.0;
  ps_t extra_fixed_delay = 0;
  std::optional<std::string> drift_ref;

  // Control links may carry an adjustable pump/trigger path delay.
  ps_t pump_delay_lo = 0;
  ps_t pump_delay_hi = 0;
  ps_t pump_delay = 0;

  bool operator==(const Link&) const = default;
};

// Fixed one-way latency of a link: length * group_index / c plus any lumped
// extra delay, rounded to integer picoseconds.
inline ps_t propagation_delay_ps(const Link& link) {
  double seconds = link.length_m * link.group_index / speed_of_light_m_per_s;
  return static_cast<ps_t>(std::llround(seconds * 1e12)) + link.extra_fixed_delay;
}

struct Violation {
  std::string subject;  // node or link id
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

struct NetworkTopology {
  std::vector<NodeSpec> nodes;
  std::vector<Link> links;

  bool operator==(const NetworkTopology&) const = default;

  const NodeSpec* find_node(const std::string& id) const {
    for (const auto& n : nodes)
      if (n.id == id) return &n;
    return nullptr;
  }

  NodeSpec* find_node(const std::string& id) {
    for (auto& n : nodes)
      if (n.id == id) return &n;
    return nullptr;
  }

  const Link* find_link(const std::string& id) const {
    for (const auto& l : links)
      if (l.id == id) return &l;
    return nullptr;
  }

  Link* find_link(const std::string& id) {
    for (auto& l : links)
      if (l.id == id) return &l;
    return nullptr;
  }

  std::vector<const Link*> quantum_links_into(const std::string& node_id) const {
    std::vector<const Link*> out;
    for (const auto& l : links)
      if (l.channel == ChannelKind::Quantum && l.to.node == node_id) out.push_back(&l);
    return out;
  }

  const Link* quantum_link_into_port(const std::string& node_id, int port) const {
    for (const auto& l : links)
      if (l.channel == ChannelKind::Quantum && l.to.node == node_id && l.to.port == port)
        return &l;
    return nullptr;
  }

  std::vector<const NodeSpec*> nodes_of_kind(NodeKind k) const {
    std::vector<const NodeSpec*> out;
    for (const auto& n : nodes)
      if (n.kind == k) out.push_back(&n);
    return out;
  }

  // Control link whose commanding end is `from_id` and receiving end `to_id`.
  const Link* control_link_between(const std::string& from_id, const std::string& to_id) const {
    for (const auto& l : links)
      if (l.channel == ChannelKind::ClassicalControl && l.from.node == from_id &&
          l.to.node == to_id)
        return &l;
    return nullptr;
  }
};

// The quantum path feeding one BSA input port, traced upstream to the photon's
// source. Memory nodes pass photons through; links are listed source-first.
struct PhotonPath {
  std::string source;              // emitting Source (or Memory acting as emitter)
  std::vector<std::string> links;  // quantum link ids, source -> bsa order
  std::vector<std::string> memories_crossed;
};

inline PhotonPath trace_photon_path(const NetworkTopology& topo, const std::string& bsa_id,
                                    int port) {
  PhotonPath path;
  const Link* incoming = topo.quantum_link_into_port(bsa_id, port);
  if (!incoming)
    throw ValidationError("no quantum link into " + bsa_id + " port " + std::to_string(port));
  while (true) {
    path.links.push_back(incoming->id);
    const NodeSpec* origin = topo.find_node(incoming->from.node);
    if (!origin) throw ValidationError("dangling link endpoint " + incoming->from.node);
    if (origin->kind == NodeKind::Source) {
      path.source = origin->id;
      break;
    }
    if (origin->kind == NodeKind::Memory) {
      auto upstream = topo.quantum_links_into(origin->id);
      if (upstream.empty()) {
        // Memory with no upstream acts as the emitter itself.
        path.source = origin->id;
        break;
      }
      path.memories_crossed.push_back(origin->id);
      incoming = upstream.front();
      continue;
    }
    throw ValidationError("quantum path into " + bsa_id + " originates at non-emitting node " +
                          origin->id);
  }
  std::reverse(path.links.begin(), path.links.end());
  std::reverse(path.memories_crossed.begin(), path.memories_crossed.end());
  return path;
}

inline ValidationReport validate_topology(const NetworkTopology& topo) {
  ValidationReport report;
  auto add = [&](const std::string& subject, const std::string& msg) {
    report.violations.push_back({subject, msg});
  };

  for (const auto& n : topo.nodes) {
    for (const auto& m : topo.nodes) {
      if (&n != &m && n.id == m.id) {
        add(n.id, "duplicate node id");
        break;
      }
    }
    switch (n.kind) {
      case NodeKind::Source:
        if (n.rep_period < 0) add(n.id, "rep_period < 0");
        if (n.emission_offset < 0) add(n.id, "emission_offset < 0");
        break;
      case NodeKind::BsaSupport:
        if (n.coincidence_window < -1) add(n.id, "coincidence_window < 0");
        for (int p = 0; p < 2; ++p) {
          const auto& o = n.odl[static_cast<std::size_t>(p)];
          if (o.lo < 0) add(n.id, "odl port " + std::to_string(p) + " lower bound < 0");
          if (o.lo > o.hi) add(n.id, "odl port " + std::to_string(p) + " bounds lo > hi");
          if (o.setting < o.lo || o.setting > o.hi)
            add(n.id, "odl port " + std::to_string(p) + " setting outside bounds");
        }
        break;
      case NodeKind::Memory:
        if (n.coherence_time && *n.coherence_time <= 0) add(n.id, "coherence_time <= 0");
        if (n.capture_efficiency < 0 || n.capture_efficiency > 1)
          add(n.id, "capture_efficiency outside [0,1]");
        if (n.release_efficiency < 0 || n.release_efficiency > 1)
          add(n.id, "release_efficiency outside [0,1]");
        break;
      case NodeKind::EndDetector:
        break;
    }
  }

  for (const auto& l : topo.links) {
    for (const auto& m : topo.links) {
      if (&l != &m && l.id == m.id) {
        add(l.id, "duplicate link id");
        break;
      }
    }
    if (l.length_m < 0) add(l.id, "length < 0");
    if (l.group_index < 1) add(l.id, "group_index < 1");
    if (l.extra_fixed_delay < 0) add(l.id, "extra_fixed_delay < 0");
    if (l.pump_delay_lo < 0 || l.pump_delay_lo > l.pump_delay_hi)
      add(l.id, "pump delay bounds invalid");
    const NodeSpec* a = topo.find_node(l.from.node);
    const NodeSpec* b = topo.find_node(l.to.node);
    if (!a) add(l.id, "unresolved endpoint node " + l.from.node);
    if (!b) add(l.id, "unresolved endpoint node " + l.to.node);
    if (a && b && l.channel == ChannelKind::Quantum) {
      if (a->kind == NodeKind::BsaSupport && b->kind == NodeKind::BsaSupport)
        add(l.id, "quantum link terminates on two BSA ports");
      if (a->kind == NodeKind::BsaSupport || a->kind == NodeKind::EndDetector)
        add(l.id, "quantum link emitted by non-emitting node " + a->id);
    }
  }

  for (const auto& n : topo.nodes) {
    if (n.kind != NodeKind::BsaSupport) continue;
    auto in = topo.quantum_links_into(n.id);
    if (in.size() != 2) {
      add(n.id, "quantum in-degree " + std::to_string(in.size()) + " != 2");
      continue;
    }
    bool port0 = topo.quantum_link_into_port(n.id, 0) != nullptr;
    bool port1 = topo.quantum_link_into_port(n.id, 1) != nullptr;
    if (!port0 || !port1) add(n.id, "quantum inputs must use ports 0 and 1");
  }

  return report;
}

// Defaults used when expanding chain notation; scenario files override these
// per node and per link.
struct ChainDefaults {
  double group_index = 1.468;
  ps_t rep_period = ps_per_us;
  ps_t coincidence_window = 100;            // 100 ps
  ps_t odl_hi = 100 * ps_per_ns;            // [0, 100 ns] per BSA port
  ps_t pump_delay_hi = 10 * ps_per_us;      // generous classical headroom
};

// Expand chain notation over {D, S, I} matching D S (I S)* D into a linear
// topology. Every adjacent symbol pair gets one quantum link (photon flows
// away from the S) and one parallel classical control link (commands flow
// toward the S).
inline NetworkTopology parse_path_notation(const std::string& text, double default_link_length,
                                           const ChainDefaults& defaults = {}) {
  if (text.empty()) throw GrammarError(1, "empty path");
  auto expect = [&](std::size_t i, char want) {
    if (i >= text.size())
      throw GrammarError(text.size(), std::string("unexpected end, expected '") + want + "'");
    if (text[i] != want)
      throw GrammarError(i + 1, std::string("expected '") + want + "', found '" + text[i] + "'");
  };

  expect(0, 'D');
  expect(1, 'S');
  std::size_t i = 2;
  while (i < text.size() && text[i] == 'I') {
    expect(i + 1, 'S');
    i += 2;
  }
  expect(i, 'D');
  if (i + 1 != text.size())
    throw GrammarError(i + 2, "trailing characters after final 'D'");

  NetworkTopology topo;
  for (std::size_t p = 0; p < text.size(); ++p) {
    NodeSpec n;
    n.id = std::string(1, text[p]) + std::to_string(p);
    switch (text[p]) {
      case 'D': n.kind = NodeKind::EndDetector; break;
      case 'S':
        n.kind = NodeKind::Source;
        n.rep_period = defaults.rep_period;
        break;
      case 'I':
        n.kind = NodeKind::BsaSupport;
        n.coincidence_window = defaults.coincidence_window;
        n.odl[0] = {0, defaults.odl_hi, 0};
        n.odl[1] = {0, defaults.odl_hi, 0};
        break;
    }
    topo.nodes.push_back(std::move(n));
  }

  auto out_port = [&](std::size_t pos, bool rightward) {
    // Sources use output port 0 toward the left neighbor, 1 toward the right.
    (void)pos;
    return rightward ? 1 : 0;
  };

  for (std::size_t p = 0; p + 1 < text.size(); ++p) {
    const std::string left = topo.nodes[p].id;
    const std::string right = topo.nodes[p + 1].id;
    const bool left_is_source = text[p] == 'S';
    const std::string src = left_is_source ? left : right;
    const std::string dst = left_is_source ? right : left;

    Link q;
    q.id = "q" + std::to_string(p);
    q.channel = ChannelKind::Quantum;
    q.length_m = default_link_length;
    q.group_index = defaults.group_index;
    // BSA input ports: left neighbor enters port 0, right neighbor port 1.
    int dst_port = 0;
    if (topo.find_node(dst)->kind == NodeKind::BsaSupport) dst_port = left_is_source ? 0 : 1;
    q.from = {src, out_port(p, left_is_source)};
    q.to = {dst, dst_port};
    topo.links.push_back(std::move(q));

    Link c;
    c.id = "c" + std::to_string(p);
    c.channel = ChannelKind::ClassicalControl;
    c.length_m = default_link_length;
    c.group_index = defaults.group_index;
    c.from = {dst, 0};
    c.to = {src, 0};
    c.pump_delay_lo = 0;
    c.pump_delay_hi = defaults.pump_delay_hi;
    topo.links.push_back(std::move(c));
  }
  return topo;
}

// Returns a copy with one link lengthened (delta may be negative).
inline NetworkTopology perturb_link_length(const NetworkTopology& topo, const std::string& link_id,
                                           double delta_length_m) {
  NetworkTopology out = topo;
  Link* l = out.find_link(link_id);
  if (!l) throw UnknownVariable("no such link: " + link_id);
  l->length_m += delta_length_m;
  if (l->length_m < 0) throw BoundsViolation("perturbation makes link length negative: " + link_id);
  return out;
}

}  // namespace psdsim

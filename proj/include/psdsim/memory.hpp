#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "psdsim/config.hpp"
#include "psdsim/constraints.hpp"
#include "psdsim/errors.hpp"
#include "psdsim/rng.hpp"
#include "psdsim/simulator.hpp"
#include "psdsim/strategy.hpp"
#include "psdsim/time.hpp"
#include "psdsim/topology.hpp"

namespace psdsim {

// Capacity-1 quantum buffer with exponential retention decay. Storing is the
// timing-equivalent of inserting a delay in the channel; holding decouples
// the link's pair generation from the deferred swap.
struct QuantumBuffer {
  std::string node;
  std::optional<ps_t> coherence_time;  // nullopt = infinite
  double capture_efficiency = 1.0;
  double release_efficiency = 1.0;
  std::optional<PhotonRecord> occupancy;
  ps_t store_time = 0;

  bool occupied() const { return occupancy.has_value(); }
};

inline bool store(QuantumBuffer& buf, const PhotonRecord& photon, ps_t t, RandomStream& rng) {
  if (buf.occupied()) throw BufferOccupied("buffer at " + buf.node + " already holds a photon");
  if (!rng.next_bernoulli(buf.capture_efficiency)) return false;
  buf.occupancy = photon;
  buf.store_time = t;
  return true;
}

inline double retention_probability(const QuantumBuffer& buf, ps_t t_release) {
  double p = buf.release_efficiency;
  if (buf.coherence_time) {
    const double hold = static_cast<double>(t_release - buf.store_time);
    p *= std::exp(-hold / static_cast<double>(*buf.coherence_time));
  }
  return p;
}

// Empties the buffer either way; returns the photon only if it survived
// retention decay and readout.
inline std::optional<PhotonRecord> release(QuantumBuffer& buf, ps_t t_release, RandomStream& rng) {
  if (!buf.occupied()) throw BufferEmpty("buffer at " + buf.node + " is empty");
  if (t_release < buf.store_time) throw ConfigError("release before store");
  const double p = retention_probability(buf, t_release);
  std::optional<PhotonRecord> out;
  if (rng.next_bernoulli(p)) out = buf.occupancy;
  buf.occupancy.reset();
  return out;
}

struct HopByHopMetrics {
  std::int64_t slots = 0;
  std::uint64_t seed = 0;
  std::int64_t deliveries = 0;
  std::int64_t retention_losses = 0;
  std::int64_t swap_failures = 0;
  std::int64_t total_latency_slots = 0;   // sum over deliveries
  std::vector<std::int64_t> latencies;    // per delivery, in slots

  double mean_delivery_latency_slots() const {
    return deliveries == 0 ? 0.0
                           : static_cast<double>(total_latency_slots) /
                                 static_cast<double>(deliveries);
  }
};

namespace detail {

// Elementary links of the path: one per BSA, ordered by BSA id.
struct ElementaryLink {
  std::string bsa;
  std::string left_emitter;
  std::string right_emitter;
};

inline std::vector<ElementaryLink> elementary_links(const NetworkTopology& topo) {
  std::vector<ElementaryLink> out;
  for (const auto& n : topo.nodes) {
    if (n.kind != NodeKind::BsaSupport) continue;
    ElementaryLink el;
    el.bsa = n.id;
    el.left_emitter = trace_photon_path(topo, n.id, 0).source;
    el.right_emitter = trace_photon_path(topo, n.id, 1).source;
    out.push_back(el);
  }
  std::sort(out.begin(), out.end(),
            [](const ElementaryLink& a, const ElementaryLink& b) { return a.bsa < b.bsa; });
  return out;
}

}  // namespace detail

// Hop-by-hop operation: every elementary link retries pair generation
// independently; flanking memories hold heralded qubits until all links are
// ready, then one deferred swap completes the delivery. Lengths do not enter:
// success is per-slot Bernoulli and classical signalling is folded into the
// slot granularity, which is exactly why permuting fiber lengths cannot
// change the outcome.
inline HopByHopMetrics run_hop_by_hop(const NetworkTopology& topo, const SimulationConfig& config,
                                      const MemoryConfig& memory, std::uint64_t seed) {
  config.check();
  memory.check();
  auto links = detail::elementary_links(topo);
  if (links.empty()) throw ConfigError("hop-by-hop mode needs at least one BSA link");

  // Every inter-link boundary must be a memory so both sides can be held.
  std::map<std::string, int> emitter_uses;
  for (const auto& el : links) {
    ++emitter_uses[el.left_emitter];
    ++emitter_uses[el.right_emitter];
  }
  for (const auto& [id, uses] : emitter_uses) {
    const NodeSpec* n = topo.find_node(id);
    if (uses > 1 && n->kind != NodeKind::Memory)
      throw ConfigError("boundary node " + id + " joins two links but is not a memory");
  }

  const double q = memory.link_success_prob;
  HopByHopMetrics metrics;
  metrics.slots = config.slots;
  metrics.seed = seed;

  std::map<std::string, RandomStream> link_streams;
  std::map<std::string, RandomStream> mem_streams;
  for (const auto& el : links) link_streams.emplace(el.bsa, RandomStream(seed, "hop/" + el.bsa));
  for (const auto& [id, uses] : emitter_uses) {
    const NodeSpec* n = topo.find_node(id);
    if (n->kind == NodeKind::Memory) mem_streams.emplace(id, RandomStream(seed, "mem/" + id));
  }
  RandomStream swap_stream(seed, "hop/deferred-swap");

  std::map<std::string, bool> held;          // per elementary link
  std::map<std::string, std::int64_t> held_since;
  auto reset_epoch = [&] {
    for (const auto& el : links) {
      held[el.bsa] = false;
      held_since[el.bsa] = 0;
    }
  };
  reset_epoch();
  std::int64_t epoch_start = 0;

  for (std::int64_t slot = 0; slot < config.slots; ++slot) {
    if (memory.synchronous_baseline) {
      // Memoryless comparison: all links must fire in the same slot.
      bool all = true;
      for (const auto& el : links) all &= link_streams.at(el.bsa).next_bernoulli(q);
      if (all && swap_stream.next_bernoulli(memory.p_swap_mem)) {
        ++metrics.deliveries;
        const std::int64_t latency = slot - epoch_start + 1;
        metrics.total_latency_slots += latency;
        metrics.latencies.push_back(latency);
        epoch_start = slot + 1;
        if (memory.max_deliveries > 0 && metrics.deliveries >= memory.max_deliveries) break;
      } else if (all) {
        ++metrics.swap_failures;
      }
      continue;
    }

    for (const auto& el : links) {
      if (held[el.bsa]) continue;
      bool success = link_streams.at(el.bsa).next_bernoulli(q);
      if (!success) continue;
      // Both flanking buffers must capture the heralded qubits.
      for (const auto& emitter : {el.left_emitter, el.right_emitter}) {
        const NodeSpec* n = topo.find_node(emitter);
        if (n->kind != NodeKind::Memory) continue;
        success &= mem_streams.at(emitter).next_bernoulli(n->capture_efficiency);
      }
      if (success) {
        held[el.bsa] = true;
        held_since[el.bsa] = slot;
      }
    }

    bool all_held = true;
    for (const auto& el : links) all_held &= held[el.bsa];
    if (!all_held) continue;

    // Deferred swap across the stored qubits.
    bool survived = true;
    for (const auto& el : links) {
      const ps_t hold = (slot - held_since[el.bsa]) * config.rep_period;
      for (const auto& emitter : {el.left_emitter, el.right_emitter}) {
        const NodeSpec* n = topo.find_node(emitter);
        if (n->kind != NodeKind::Memory) continue;
        double p = n->release_efficiency;
        if (n->coherence_time)
          p *= std::exp(-static_cast<double>(hold) / static_cast<double>(*n->coherence_time));
        if (memory.max_hold && hold > *memory.max_hold) p = 0.0;
        if (!mem_streams.at(emitter).next_bernoulli(p)) survived = false;
      }
    }
    if (survived && links.size() > 1) survived = swap_stream.next_bernoulli(memory.p_swap_mem);

    if (survived) {
      ++metrics.deliveries;
      const std::int64_t latency = slot - epoch_start + 1;
      metrics.total_latency_slots += latency;
      metrics.latencies.push_back(latency);
    } else {
      ++metrics.retention_losses;
    }
    reset_epoch();
    epoch_start = slot + 1;
    if (memory.max_deliveries > 0 && metrics.deliveries >= memory.max_deliveries) break;
  }

  return metrics;
}

struct CouplingGraph {
  std::vector<std::string> links;  // elementary link ids = their BSA ids
  std::vector<std::pair<std::string, std::string>> edges;
};

// Cross-link timing dependencies: two elementary links are coupled when their
// simultaneity constraints share an adjustable variable. Hold-until-ready
// memories sever the shared emission epochs, which empties the edge set.
inline CouplingGraph coupling_graph(const NetworkTopology& topo, StrategyKind strategy,
                                    ps_t rep_period, std::optional<MemoryConfig> memory = {}) {
  StrategyCapability caps = capability_of(strategy, topo, rep_period);
  TimingConstraintSystem sys = build_constraints(topo, caps, rep_period, memory);

  CouplingGraph graph;
  std::map<std::string, std::set<std::string>> varset;
  for (const auto& c : sys.constraints) {
    graph.links.push_back(c.bsa);
    auto& vars = varset[c.bsa];
    for (const auto* side : {&c.left, &c.right}) {
      const auto& info = sys.epochs.at(side->source);
      if (info.var && caps.can_adjust(*info.var)) vars.insert(*info.var);
      if (side->odl_var) vars.insert(*side->odl_var);
    }
  }
  std::sort(graph.links.begin(), graph.links.end());
  for (std::size_t i = 0; i < graph.links.size(); ++i) {
    for (std::size_t j = i + 1; j < graph.links.size(); ++j) {
      const auto& a = varset[graph.links[i]];
      const auto& b = varset[graph.links[j]];
      const bool coupled = std::any_of(a.begin(), a.end(),
                                       [&](const std::string& v) { return b.count(v) > 0; });
      if (coupled) graph.edges.emplace_back(graph.links[i], graph.links[j]);
    }
  }
  return graph;
}

}  // namespace psdsim

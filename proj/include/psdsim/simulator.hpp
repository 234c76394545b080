#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "psdsim/config.hpp"
#include "psdsim/constraints.hpp"
#include "psdsim/drift.hpp"
#include "psdsim/errors.hpp"
#include "psdsim/rng.hpp"
#include "psdsim/strategy.hpp"
#include "psdsim/time.hpp"
#include "psdsim/topology.hpp"

namespace psdsim {

// Seeded slot-clocked engine: per repetition period every source may emit a
// Bell pair, photons pick up propagation + drift + ODL delays, each BSA
// evaluates arrival mismatch, and optional feedback controllers trim the ODLs
// from heralded coincidences.

struct PhotonRecord {
  std::string source;
  std::int64_t pair = 0;
  std::int64_t slot = 0;
  ps_t emit_time = 0;
  ps_t arrival_time = 0;
  std::string destination;
  int port = 0;
};

struct BsaOutcome {
  std::string bsa;
  std::int64_t slot = 0;
  ps_t delta = 0;          // left - right arrival
  bool coincidence = false;
  bool swap_success = false;
};

// delta = t_left - t_right; coincidence inside the window; swap success is
// Bernoulli with the Gaussian overlap p0 * exp(-delta^2 / 2 sigma^2).
inline double swap_probability(ps_t delta, double p0, ps_t sigma) {
  const double x = static_cast<double>(delta) / static_cast<double>(sigma);
  return p0 * std::exp(-0.5 * x * x);
}

inline BsaOutcome bsa_measure(ps_t t_left, ps_t t_right, ps_t window, double p0, ps_t sigma,
                              RandomStream& rng) {
  if (window < 0) throw ConfigError("window must be >= 0");
  if (sigma <= 0) throw ConfigError("sigma must be > 0");
  if (p0 < 0 || p0 > 1) throw ConfigError("p0 outside [0,1]");
  BsaOutcome out;
  out.delta = t_left - t_right;
  out.coincidence = std::abs(out.delta) <= window;
  out.swap_success = out.coincidence && rng.next_bernoulli(swap_probability(out.delta, p0, sigma));
  return out;
}

// Mean of the last n coincidence deltas, rounded to integer picoseconds.
inline ps_t estimate_delta(const std::deque<ps_t>& deltas, int n) {
  if (n < 1 || static_cast<int>(deltas.size()) < n)
    throw InsufficientHeralds("need " + std::to_string(n) + " heralds, have " +
                              std::to_string(deltas.size()));
  ps_t sum = 0;
  for (int i = 0; i < n; ++i) sum += deltas[deltas.size() - 1 - static_cast<std::size_t>(i)];
  const double mean = static_cast<double>(sum) / static_cast<double>(n);
  return static_cast<ps_t>(std::llround(mean));
}

inline ps_t estimate_delta(const std::vector<BsaOutcome>& outcomes, int n) {
  std::deque<ps_t> deltas;
  for (const auto& o : outcomes)
    if (o.coincidence) deltas.push_back(o.delta);
  return estimate_delta(deltas, n);
}

struct FeedbackController {
  std::string bsa;
  double gain = 0.5;
  int estimate_window = 20;
  ps_t max_step = ps_per_ns;
};

struct FeedbackResult {
  ps_t odl_left = 0;
  ps_t odl_right = 0;
  bool saturated = false;
  bool changed = false;
};

// Delay the earlier-arriving port by gain * estimate, clamped to max_step and
// to the port's bounds. estimate > 0 means the right photon arrives earlier.
inline FeedbackResult feedback_step(const FeedbackController& ctrl, ps_t estimate,
                                    const OdlPort& left, const OdlPort& right) {
  FeedbackResult r{left.setting, right.setting, false, false};
  if (estimate == 0) return r;
  ps_t correction = static_cast<ps_t>(std::llround(ctrl.gain * std::abs(static_cast<double>(estimate))));
  correction = std::min(correction, ctrl.max_step);
  if (correction == 0) return r;
  if (estimate > 0) {
    const ps_t target = right.setting + correction;
    r.odl_right = std::clamp(target, right.lo, right.hi);
    r.saturated = target != r.odl_right;
    r.changed = r.odl_right != right.setting;
  } else {
    const ps_t target = left.setting + correction;
    r.odl_left = std::clamp(target, left.lo, left.hi);
    r.saturated = target != r.odl_left;
    r.changed = r.odl_left != left.setting;
  }
  return r;
}

// One ideal pair-production slot-rate: all sources fire and every swap succeeds.
inline double end_to_end_rate_analytic(double p_gen, int n_sources,
                                       const std::vector<double>& p_swap_each) {
  if (p_gen < 0 || p_gen > 1) throw ConfigError("p_gen outside [0,1]");
  double rate = 1.0;
  for (int i = 0; i < n_sources; ++i) rate *= p_gen;
  for (double p : p_swap_each) {
    if (p < 0 || p > 1) throw ConfigError("p_swap outside [0,1]");
    rate *= p;
  }
  return rate;
}

struct BsaIntervalRecord {
  std::string bsa;
  std::int64_t slot_start = 0;
  std::int64_t slots = 0;
  std::int64_t paired = 0;        // both photons arrived
  std::int64_t coincidences = 0;  // |delta| <= window
  std::int64_t swaps = 0;
  std::int64_t sum_abs_delta = 0;  // over paired slots
  ps_t max_abs_delta = 0;
  std::int64_t saturation_events = 0;
  ps_t odl_left = 0;
  ps_t odl_right = 0;
};

struct BsaTotals {
  std::int64_t paired = 0;
  std::int64_t coincidences = 0;
  std::int64_t swaps = 0;
  std::int64_t sum_abs_delta = 0;
  ps_t max_abs_delta = 0;
  std::int64_t saturation_events = 0;
  std::int64_t controller_updates = 0;
  std::int64_t paired_post_warmup = 0;
  std::int64_t in_window_post_warmup = 0;
};

struct RunMetrics {
  std::int64_t slots = 0;
  std::uint64_t seed = 0;
  std::int64_t all_fired_slots = 0;
  std::int64_t end_to_end_successes = 0;
  std::map<std::string, BsaTotals> per_bsa;
  std::vector<BsaIntervalRecord> intervals;
  std::vector<BsaOutcome> delta_series;   // coincident outcomes, if recorded
  std::vector<PhotonRecord> photons;      // if recorded
};

namespace detail {

struct SideState {
  std::string source;
  std::vector<const Link*> path;          // quantum links, source -> bsa
  ps_t epoch = 0;                         // emission epoch within the slot grid
  ps_t path_buffer = 0;                   // fixed buffering after emission
  std::string pump_link;                  // drifting control path, pump strategies only
};

struct BsaState {
  std::string id;
  ps_t window = 0;
  SideState side[2];
  std::deque<ps_t> heralds;
  std::int64_t heralds_since_update = 0;
  std::int64_t controller_updates = 0;
};

}  // namespace detail

// Deterministic per (topo, strategy, config, seed). The strategy determines
// how emission epochs are formed (self-timed offset vs pump-driven) exactly
// as in build_constraints, so a solved assignment transported via
// apply_assignment reproduces delta = 0 in the engine.
inline RunMetrics run(const NetworkTopology& topo, StrategyKind strategy,
                      const SimulationConfig& config, std::uint64_t seed,
                      const std::vector<DriftModel>& drift_models = {},
                      std::optional<ConstraintMode> mode_override = {},
                      std::optional<MemoryConfig> memcfg = {}) {
  config.check();
  auto report = validate_topology(topo);
  if (!report.ok()) throw ConfigError("run() needs a valid topology: " + report.violations[0].message);
  if (memcfg && memcfg->mode == MemoryMode::HoldUntilReady)
    throw ConfigError("hold-until-ready memories are simulated by run_hop_by_hop()");
  const ps_t buffer_delay = memcfg ? memcfg->fixed_delay : 0;

  const ps_t period = config.rep_period;
  const bool pump_timing =
      strategy == StrategyKind::PumpPathAdjust || strategy == StrategyKind::Combined12;
  const ConstraintMode mode = mode_override.value_or(
      strategy == StrategyKind::FrequencySyncQuantumAdjust ? ConstraintMode::ModuloPeriod
                                                           : ConstraintMode::Exact);

  RunMetrics metrics;
  metrics.slots = config.slots;
  metrics.seed = seed;

  // Mutable ODL settings, adjusted by controllers during the run.
  std::map<std::string, std::array<OdlPort, 2>> odl_state;
  std::vector<detail::BsaState> bsas;
  for (const auto& n : topo.nodes) {
    if (n.kind != NodeKind::BsaSupport) continue;
    detail::BsaState b;
    b.id = n.id;
    b.window = n.coincidence_window >= 0 ? n.coincidence_window : config.default_window;
    for (int port = 0; port < 2; ++port) {
      PhotonPath path = trace_photon_path(topo, n.id, port);
      detail::SideState side;
      side.source = path.source;
      for (const auto& lid : path.links) side.path.push_back(topo.find_link(lid));
      const NodeSpec* src = topo.find_node(path.source);
      if (pump_timing) {
        const Link* pl = pump_link_of(topo, path.source);
        if (pl) {
          side.epoch = propagation_delay_ps(*pl) + pl->pump_delay;
          side.pump_link = pl->id;
        } else {
          side.epoch = src->emission_offset;
        }
      } else {
        side.epoch = src->emission_offset;
      }
      // A fixed-delay buffer behaves like extra path length, at the emitter
      // itself or at every memory the photon crosses.
      if (src->kind == NodeKind::Memory) side.epoch += buffer_delay;
      side.path_buffer = buffer_delay * static_cast<ps_t>(path.memories_crossed.size());
      b.side[port] = std::move(side);
    }
    odl_state[n.id] = n.odl;
    bsas.push_back(std::move(b));
    metrics.per_bsa[n.id] = {};
  }

  // Every node that emits pairs fires per slot: sources plus emitting memories.
  std::vector<const NodeSpec*> sources;
  for (const auto& n : topo.nodes) {
    if (n.kind == NodeKind::Source) {
      sources.push_back(&n);
      continue;
    }
    if (n.kind != NodeKind::Memory) continue;
    const bool emits = std::any_of(bsas.begin(), bsas.end(), [&](const detail::BsaState& b) {
      return b.side[0].source == n.id || b.side[1].source == n.id;
    });
    if (emits) sources.push_back(&n);
  }

  // Per-purpose random streams so event order never shifts consumption.
  std::map<std::string, RandomStream> gen_streams, swap_streams, drift_streams;
  for (const auto* s : sources) gen_streams.emplace(s->id, RandomStream(seed, "src/" + s->id + "/gen"));
  for (const auto& b : bsas) swap_streams.emplace(b.id, RandomStream(seed, "bsa/" + b.id + "/swap"));

  struct LinkDrift {
    const DriftModel* model;
    RandomWalkState walk;
    ps_t current = 0;
  };
  std::map<std::string, LinkDrift> drift;
  if (config.drift_enabled) {
    for (const auto& l : topo.links) {
      if (!l.drift_ref) continue;
      const DriftModel* model = nullptr;
      for (const auto& m : drift_models)
        if (m.id == *l.drift_ref) model = &m;
      if (!model) throw ConfigError("link " + l.id + " references unknown drift model");
      drift.emplace(l.id, LinkDrift{model, {}, 0});
      drift_streams.emplace(l.id, RandomStream(seed, "link/" + l.id + "/drift"));
    }
  }

  const std::int64_t interval = config.effective_report_interval();
  std::map<std::string, BsaIntervalRecord> current_interval;
  auto open_interval = [&](std::int64_t slot_start) {
    for (const auto& b : bsas) {
      BsaIntervalRecord rec;
      rec.bsa = b.id;
      rec.slot_start = slot_start;
      current_interval[b.id] = rec;
    }
  };
  auto close_interval = [&](std::int64_t slots_covered) {
    for (const auto& b : bsas) {
      auto& rec = current_interval[b.id];
      rec.slots = slots_covered;
      rec.odl_left = odl_state[b.id][0].setting;
      rec.odl_right = odl_state[b.id][1].setting;
      metrics.intervals.push_back(rec);
    }
  };
  open_interval(0);

  std::map<std::string, std::int64_t> source_index;
  for (const auto* s : sources)
    source_index[s->id] = static_cast<std::int64_t>(source_index.size());

  for (std::int64_t slot = 0; slot < config.slots; ++slot) {
    const ps_t t_slot = slot * period;

    for (auto& [lid, d] : drift)
      d.current = drift_value(*d.model, t_slot, drift_streams.at(lid), d.walk);

    std::map<std::string, bool> fired;
    bool all_fired = !sources.empty();
    for (const auto* s : sources) {
      const bool f = gen_streams.at(s->id).next_bernoulli(config.p_gen);
      fired[s->id] = f;
      all_fired &= f;
    }
    if (all_fired) ++metrics.all_fired_slots;

    bool e2e = all_fired && !bsas.empty();
    for (auto& b : bsas) {
      const bool left_present = fired.count(b.side[0].source) ? fired[b.side[0].source] : false;
      const bool right_present = fired.count(b.side[1].source) ? fired[b.side[1].source] : false;
      if (!left_present || !right_present) {
        e2e = false;
        continue;
      }
      ps_t arrival[2];
      for (int port = 0; port < 2; ++port) {
        const auto& side = b.side[port];
        ps_t t = t_slot + side.epoch;
        // Drift on the pump path shifts the emission itself.
        if (!side.pump_link.empty()) {
          auto it = drift.find(side.pump_link);
          if (it != drift.end()) t += it->second.current;
        }
        const ps_t emit = t;
        t += side.path_buffer;
        for (const auto* l : side.path) {
          t += propagation_delay_ps(*l);
          auto it = drift.find(l->id);
          if (it != drift.end()) t += it->second.current;
        }
        t += odl_state[b.id][static_cast<std::size_t>(port)].setting;
        arrival[port] = t;
        if (config.record_photons) {
          PhotonRecord rec;
          rec.source = side.source;
          // Both photons of one emitted pair share (source, slot).
          rec.pair = slot * static_cast<std::int64_t>(source_index.size()) +
                     source_index.at(side.source);
          rec.slot = slot;
          rec.emit_time = emit;
          rec.arrival_time = t;
          rec.destination = b.id;
          rec.port = port;
          metrics.photons.push_back(rec);
        }
      }
      ps_t delta = arrival[0] - arrival[1];
      if (mode == ConstraintMode::ModuloPeriod) delta = wrap_to_period(delta, period);

      BsaOutcome outcome;
      outcome.bsa = b.id;
      outcome.slot = slot;
      outcome.delta = delta;
      outcome.coincidence = std::abs(delta) <= b.window;
      outcome.swap_success =
          outcome.coincidence &&
          swap_streams.at(b.id).next_bernoulli(swap_probability(delta, config.p0, config.sigma));

      auto& totals = metrics.per_bsa[b.id];
      auto& rec = current_interval[b.id];
      ++totals.paired;
      ++rec.paired;
      totals.sum_abs_delta += std::abs(delta);
      rec.sum_abs_delta += std::abs(delta);
      totals.max_abs_delta = std::max(totals.max_abs_delta, std::abs(delta));
      rec.max_abs_delta = std::max(rec.max_abs_delta, std::abs(delta));
      if (totals.controller_updates >= config.warmup_updates || !config.controller) {
        ++totals.paired_post_warmup;
        if (outcome.coincidence) ++totals.in_window_post_warmup;
      }
      if (outcome.coincidence) {
        ++totals.coincidences;
        ++rec.coincidences;
        if (config.record_delta_series) metrics.delta_series.push_back(outcome);
      }
      if (outcome.swap_success) {
        ++totals.swaps;
        ++rec.swaps;
      } else {
        e2e = false;
      }

      if (config.controller && outcome.coincidence) {
        b.heralds.push_back(delta);
        if (static_cast<int>(b.heralds.size()) > config.controller->estimate_window)
          b.heralds.pop_front();
        ++b.heralds_since_update;
        if (b.heralds_since_update >= config.controller->estimate_window) {
          FeedbackController ctrl;
          ctrl.bsa = b.id;
          ctrl.gain = config.controller->gain;
          ctrl.estimate_window = config.controller->estimate_window;
          ctrl.max_step = config.controller->max_step;
          const ps_t estimate = estimate_delta(b.heralds, ctrl.estimate_window);
          auto& odl = odl_state[b.id];
          FeedbackResult fr = feedback_step(ctrl, estimate, odl[0], odl[1]);
          odl[0].setting = fr.odl_left;
          odl[1].setting = fr.odl_right;
          if (fr.saturated) {
            ++totals.saturation_events;
            ++rec.saturation_events;
          }
          ++b.controller_updates;
          ++totals.controller_updates;
          b.heralds_since_update = 0;
          b.heralds.clear();
        }
      }
    }
    if (e2e) ++metrics.end_to_end_successes;

    if ((slot + 1) % interval == 0 || slot + 1 == config.slots) {
      const std::int64_t covered = (slot + 1) % interval == 0 ? interval : (slot + 1) % interval;
      close_interval(covered);
      if (slot + 1 < config.slots) open_interval(slot + 1);
    }
  }

  return metrics;
}

}  // namespace psdsim

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "psdsim/errors.hpp"
#include "psdsim/time.hpp"

namespace psdsim {

struct ControllerConfig {
  double gain = 0.5;
  int estimate_window = 20;   // heralds averaged per update
  ps_t max_step = ps_per_ns;  // correction clamp per update

  bool operator==(const ControllerConfig&) const = default;
};

struct SimulationConfig {
  std::int64_t slots = 1;
  ps_t rep_period = ps_per_us;
  double p_gen = 1.0;
  double p0 = 1.0;
  ps_t sigma = 100;           // HOM overlap width
  ps_t default_window = 100;  // BSAs without an explicit coincidence window
  std::uint64_t seed = 1;
  std::int64_t report_interval = 0;  // 0: pick slots/100
  int warmup_updates = 10;           // controller updates before lock metrics count
  bool drift_enabled = true;
  bool record_delta_series = false;
  bool record_photons = false;
  std::optional<ControllerConfig> controller;

  bool operator==(const SimulationConfig&) const = default;

  void check() const {
    if (slots < 1) throw ConfigError("slots must be >= 1");
    if (rep_period <= 0) throw ConfigError("rep_period must be > 0");
    if (p_gen < 0 || p_gen > 1) throw ConfigError("p_gen outside [0,1]");
    if (p0 < 0 || p0 > 1) throw ConfigError("p0 outside [0,1]");
    if (sigma <= 0) throw ConfigError("sigma must be > 0");
    if (default_window < 0) throw ConfigError("window must be >= 0");
    if (controller) {
      if (controller->gain <= 0 || controller->gain > 1)
        throw ConfigError("controller gain outside (0,1]");
      if (controller->estimate_window < 1) throw ConfigError("estimate_window must be >= 1");
    }
  }

  std::int64_t effective_report_interval() const {
    if (report_interval > 0) return report_interval;
    return slots >= 100 ? slots / 100 : slots;
  }
};

enum class MemoryMode { FixedDelayBuffer, HoldUntilReady };

struct MemoryConfig {
  MemoryMode mode = MemoryMode::HoldUntilReady;
  ps_t fixed_delay = 0;                 // FixedDelayBuffer
  std::optional<ps_t> max_hold;         // HoldUntilReady; nullopt = unbounded
  double link_success_prob = 0.0;       // per-slot per-link success in hop-by-hop mode
  double p_swap_mem = 1.0;              // deferred swap success
  std::int64_t max_deliveries = 0;      // 0: bounded by slots only
  bool synchronous_baseline = false;    // all links must succeed in the same slot

  bool operator==(const MemoryConfig&) const = default;

  void check() const {
    if (fixed_delay < 0) throw ConfigError("memory fixed_delay must be >= 0");
    if (max_hold && *max_hold <= 0) throw ConfigError("memory max_hold must be > 0");
    if (link_success_prob < 0 || link_success_prob > 1)
      throw ConfigError("link_success_prob outside [0,1]");
    if (p_swap_mem < 0 || p_swap_mem > 1) throw ConfigError("p_swap_mem outside [0,1]");
  }
};

}  // namespace psdsim

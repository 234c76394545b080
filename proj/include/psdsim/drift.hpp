#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "psdsim/errors.hpp"
#include "psdsim/rng.hpp"
#include "psdsim/time.hpp"

namespace psdsim {

enum class DriftKind { Static, Linear, Sinusoidal, RandomWalk };

inline std::string to_string(DriftKind k) {
  switch (k) {
    case DriftKind::Static: return "static";
    case DriftKind::Linear: return "linear";
    case DriftKind::Sinusoidal: return "sinusoidal";
    case DriftKind::RandomWalk: return "random_walk";
  }
  return "?";
}

// Additive perturbation of a link's propagation delay over wall time.
struct DriftModel {
  std::string id;
  DriftKind kind = DriftKind::Static;
  ps_t offset = 0;          // Static
  double rate = 0.0;        // Linear, seconds of delay per second (dimensionless)
  ps_t amplitude = 0;       // Sinusoidal
  ps_t period = 0;          // Sinusoidal
  double phase = 0.0;       // Sinusoidal, radians
  ps_t step_std = 0;        // RandomWalk, std-dev of one step
  ps_t step_interval = 0;   // RandomWalk, time between steps

  bool operator==(const DriftModel&) const = default;
};

// Random-walk state for one link. Steps are consumed from the link's own
// stream in order, so the walk is reproducible for monotone query times.
struct RandomWalkState {
  std::int64_t steps_done = 0;
  ps_t value = 0;
};

inline ps_t drift_value(const DriftModel& model, ps_t t, RandomStream& stream,
                        RandomWalkState& walk) {
  switch (model.kind) {
    case DriftKind::Static:
      return model.offset;
    case DriftKind::Linear:
      return static_cast<ps_t>(std::llround(model.rate * static_cast<double>(t)));
    case DriftKind::Sinusoidal: {
      double arg = 2.0 * std::numbers::pi * static_cast<double>(t) /
                       static_cast<double>(model.period) +
                   model.phase;
      return static_cast<ps_t>(std::llround(static_cast<double>(model.amplitude) * std::sin(arg)));
    }
    case DriftKind::RandomWalk: {
      std::int64_t steps = t / model.step_interval;
      if (steps < walk.steps_done)
        throw ConfigError("random-walk drift queried with non-monotone time");
      while (walk.steps_done < steps) {
        walk.value += static_cast<ps_t>(
            std::llround(stream.next_normal() * static_cast<double>(model.step_std)));
        ++walk.steps_done;
      }
      return walk.value;
    }
  }
  return 0;
}

// Convenience for the deterministic kinds.
inline ps_t drift_value(const DriftModel& model, ps_t t) {
  if (model.kind == DriftKind::RandomWalk)
    throw ConfigError("random-walk drift needs a stream and state");
  RandomStream unused;
  RandomWalkState none;
  return drift_value(model, t, unused, none);
}

}  // namespace psdsim
